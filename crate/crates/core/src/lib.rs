//! Suggestion-mining toolkit: text normalization, a small autodiff engine,
//! recurrent sentence classifiers with attention pooling, ensembling, and
//! F1 evaluation.

pub mod classifier;
pub mod data;
pub mod encoder;
pub mod ensemble;
pub mod error;
pub mod metrics;
pub mod predictions;
pub mod preprocess;
pub mod tensor;
pub mod vocab;

pub use error::{Error, Result};
