//! Vocabulary construction and word-vector management.
//!
//! Ids 0 and 1 are reserved for `<pad>` and `<unk>`. The embedding matrix
//! keeps its `<pad>` row at exactly zero forever; training code must zero
//! that row's gradient before each optimizer step (the trainer does).

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

#[derive(Clone, Debug)]
pub struct Vocabulary {
    token_to_id: HashMap<String, usize>,
    id_to_token: Vec<String>,
}

impl Vocabulary {
    /// Build from token lists already produced by preprocessing. Tokens with
    /// frequency ≥ min_count enter, ordered by descending frequency then
    /// lexicographically; reserved ids come first.
    pub fn build(dataset: &Dataset, min_count: usize) -> Result<Vocabulary> {
        if dataset.is_empty() {
            return Err(Error::Config("cannot build vocabulary from an empty dataset".into()));
        }
        let mut freq: HashMap<&str, usize> = HashMap::new();
        for sample in &dataset.samples {
            for tok in &sample.tokens {
                *freq.entry(tok).or_insert(0) += 1;
            }
        }
        if freq.is_empty() {
            return Err(Error::Config(
                "cannot build vocabulary: all samples tokenize to nothing".into(),
            ));
        }
        let mut entries: Vec<(&str, usize)> = freq.into_iter().collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        let mut vocab = Vocabulary::reserved_only();
        for (tok, count) in entries {
            if count >= min_count.max(1) {
                vocab.push(tok.to_string());
            }
        }
        Ok(vocab)
    }

    fn reserved_only() -> Vocabulary {
        let mut v = Vocabulary {
            token_to_id: HashMap::new(),
            id_to_token: Vec::new(),
        };
        v.push(PAD_TOKEN.to_string());
        v.push(UNK_TOKEN.to_string());
        v
    }

    /// Rebuild from an id-ordered token list (checkpoint restore path).
    pub fn from_tokens(tokens: Vec<String>) -> Result<Vocabulary> {
        if tokens.len() < 2 || tokens[PAD_ID] != PAD_TOKEN || tokens[UNK_ID] != UNK_TOKEN {
            return Err(Error::Config(
                "vocabulary list must start with <pad>, <unk>".into(),
            ));
        }
        let mut v = Vocabulary {
            token_to_id: HashMap::new(),
            id_to_token: Vec::new(),
        };
        for tok in tokens {
            if v.token_to_id.contains_key(&tok) {
                return Err(Error::Config(format!("duplicate vocabulary token {tok:?}")));
            }
            v.push(tok);
        }
        Ok(v)
    }

    fn push(&mut self, token: String) {
        let id = self.id_to_token.len();
        self.token_to_id.insert(token.clone(), id);
        self.id_to_token.push(token);
    }

    pub fn id(&self, token: &str) -> usize {
        self.token_to_id.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.token_to_id.contains_key(token)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.id_to_token.get(id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_token.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.id_to_token
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingSource {
    Random,
    PretrainedFile,
}

#[derive(Clone, Debug)]
pub struct EmbeddingMatrix {
    pub vectors: Tensor,
    pub dim: usize,
    pub trainable: bool,
    pub source: EmbeddingSource,
}

impl EmbeddingMatrix {
    /// Random uniform(-0.1, 0.1) rows, trainable; `<pad>` row zeroed.
    pub fn random<R: Rng>(vocab: &Vocabulary, dim: usize, rng: &mut R) -> Result<EmbeddingMatrix> {
        if dim == 0 {
            return Err(Error::Config("embedding dim must be positive".into()));
        }
        let rows = vocab.len();
        let mut data = vec![0.0; rows * dim];
        for (i, v) in data.iter_mut().enumerate() {
            if i / dim == PAD_ID {
                continue;
            }
            *v = rng.gen::<f64>() * 0.2 - 0.1;
        }
        let vectors = Tensor::param(vec![rows, dim], data)?;
        Ok(EmbeddingMatrix {
            vectors,
            dim,
            trainable: true,
            source: EmbeddingSource::Random,
        })
    }

    /// Restore from checkpointed values; trainability per the saved config.
    pub fn from_values(
        vocab: &Vocabulary,
        dim: usize,
        values: Vec<f64>,
        trainable: bool,
        source: EmbeddingSource,
    ) -> Result<EmbeddingMatrix> {
        if values.len() != vocab.len() * dim {
            return Err(Error::Config(format!(
                "embedding payload holds {} values, vocabulary needs {}",
                values.len(),
                vocab.len() * dim
            )));
        }
        let vectors = if trainable {
            Tensor::param(vec![vocab.len(), dim], values)?
        } else {
            Tensor::new(vec![vocab.len(), dim], values)?
        };
        Ok(EmbeddingMatrix {
            vectors,
            dim,
            trainable,
            source,
        })
    }
}

/// Load pretrained vectors from the text format (token then `dim` decimals
/// per line, space-separated, no header). In-vocabulary rows come from the
/// file; vocabulary tokens missing from the file get seeded uniform(-0.1,0.1)
/// rows; `<unk>` becomes the mean of the loaded rows; `<pad>` stays zero.
/// The returned statistic is the fraction of non-reserved vocabulary tokens
/// found in the file. Loaded matrices are frozen (not trainable).
pub fn load_vectors<R: Rng>(
    path: impl AsRef<Path>,
    vocab: &Vocabulary,
    dim: usize,
    rng: &mut R,
) -> Result<(EmbeddingMatrix, f64)> {
    let path = path.as_ref();
    let name = path.display().to_string();
    if dim == 0 {
        return Err(Error::Config("embedding dim must be positive".into()));
    }
    let text = fs::read_to_string(path)?;
    let rows = vocab.len();
    let mut data = vec![0.0; rows * dim];
    let mut found = vec![false; rows];
    let mut mean = vec![0.0; dim];
    let mut loaded = 0usize;
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != dim + 1 {
            return Err(Error::Parse {
                path: name.clone(),
                line: i + 1,
                msg: format!("expected token plus {dim} values, got {} fields", fields.len()),
            });
        }
        let mut values = Vec::with_capacity(dim);
        for f in &fields[1..] {
            let v: f64 = f.parse().map_err(|_| Error::Parse {
                path: name.clone(),
                line: i + 1,
                msg: format!("unparsable number {f:?}"),
            })?;
            values.push(v);
        }
        let token = fields[0];
        if let Some(&id) = vocab_lookup(vocab, token) {
            if id >= 2 && !found[id] {
                data[id * dim..(id + 1) * dim].copy_from_slice(&values);
                found[id] = true;
                for (m, v) in mean.iter_mut().zip(&values) {
                    *m += v;
                }
                loaded += 1;
            }
        }
    }
    if loaded > 0 {
        for m in &mut mean {
            *m /= loaded as f64;
        }
        data[UNK_ID * dim..(UNK_ID + 1) * dim].copy_from_slice(&mean);
    }
    // rows the file did not cover; drawn in id order so the result is
    // deterministic for a given seed
    for id in 2..rows {
        if !found[id] {
            for v in &mut data[id * dim..(id + 1) * dim] {
                *v = rng.gen::<f64>() * 0.2 - 0.1;
            }
        }
    }
    let real_tokens = rows.saturating_sub(2);
    let coverage = if real_tokens == 0 {
        0.0
    } else {
        loaded as f64 / real_tokens as f64
    };
    let vectors = Tensor::new(vec![rows, dim], data)?;
    Ok((
        EmbeddingMatrix {
            vectors,
            dim,
            trainable: false,
            source: EmbeddingSource::PretrainedFile,
        },
        coverage,
    ))
}

fn vocab_lookup<'a>(vocab: &'a Vocabulary, token: &str) -> Option<&'a usize> {
    vocab.token_to_id.get(token)
}

/// Embed a token sequence: one row per token, `<unk>` for OOV. Gradient
/// flows back into the matrix iff it is trainable.
pub fn lookup(tokens: &[String], vocab: &Vocabulary, emb: &EmbeddingMatrix) -> Result<Tensor> {
    let ids: Vec<usize> = tokens.iter().map(|t| vocab.id(t)).collect();
    emb.vectors.gather_rows(&ids)
}

/// Embed an already-indexed id sequence.
pub fn lookup_ids(ids: &[usize], emb: &EmbeddingMatrix) -> Result<Tensor> {
    emb.vectors.gather_rows(ids)
}
