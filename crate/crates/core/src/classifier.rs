//! Sentence classifier: embedding lookup, stacked recurrent encoder, pooled
//! sentence vector, linear decoder, log-softmax. Includes the class-weighted
//! loss, the training loop with per-epoch validation selection, prediction,
//! and the binary checkpoint format.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::encoder::{
    attend, encode, AttentionParams, EncoderConfig, LayerParams, LstmCellParams,
};
use crate::error::{Error, Result};
use crate::metrics::report;
use crate::predictions::{argmax_label, PredictionSet, Prediction, ProbKind};
use crate::preprocess::{Pipeline, PipelineConfig};
use crate::tensor::Tensor;
use crate::vocab::{lookup_ids, EmbeddingMatrix, EmbeddingSource, Vocabulary, PAD_ID};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub encoder: EncoderConfig,
    pub embedding_dim: usize,
    pub dropout_embed: f64,
    pub dropout_attn: f64,
    pub num_classes: usize,
    pub class_weights: [f64; 2],
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        if self.embedding_dim == 0 {
            return Err(Error::Config("embedding_dim must be at least 1".into()));
        }
        if self.num_classes != 2 {
            return Err(Error::Config(format!(
                "this classifier is binary; num_classes {} unsupported",
                self.num_classes
            )));
        }
        for d in [self.dropout_embed, self.dropout_attn] {
            if !(0.0..1.0).contains(&d) {
                return Err(Error::Config(format!("dropout rate {d} outside [0, 1)")));
            }
        }
        if self.class_weights.iter().any(|&w| w <= 0.0 || !w.is_finite()) {
            return Err(Error::Config(format!(
                "class_weights must be positive and finite, got {:?}",
                self.class_weights
            )));
        }
        Ok(())
    }
}

pub struct Model {
    pub cfg: ModelConfig,
    pub vocab: Vocabulary,
    pub emb: EmbeddingMatrix,
    pub layers: Vec<LayerParams>,
    pub attention: Option<AttentionParams>,
    pub w_dec: Tensor,
    pub b_dec: Tensor,
    pub pipeline: Pipeline,
}

impl Model {
    /// Fresh model with randomly initialized parameters. Draw order is fixed
    /// (embedding, layers front to back with forward before backward cells,
    /// attention, decoder) so a seed pins every weight.
    pub fn new<R: Rng>(
        cfg: ModelConfig,
        vocab: Vocabulary,
        emb: EmbeddingMatrix,
        pipeline: Pipeline,
        rng: &mut R,
    ) -> Result<Model> {
        cfg.validate()?;
        if emb.dim != cfg.embedding_dim {
            return Err(Error::Config(format!(
                "embedding matrix dim {} != configured embedding_dim {}",
                emb.dim, cfg.embedding_dim
            )));
        }
        if emb.vectors.shape()[0] != vocab.len() {
            return Err(Error::Config(format!(
                "embedding matrix has {} rows for a vocabulary of {}",
                emb.vectors.shape()[0],
                vocab.len()
            )));
        }
        let h = cfg.encoder.hidden_size;
        let width = cfg.encoder.output_width();
        let mut layers = Vec::with_capacity(cfg.encoder.num_layers);
        for k in 0..cfg.encoder.num_layers {
            let d_in = if k == 0 { cfg.embedding_dim } else { width };
            layers.push(LayerParams::init(d_in, h, cfg.encoder.bidirectional, rng)?);
        }
        let attention = if cfg.encoder.attention {
            Some(AttentionParams::init(width, rng)?)
        } else {
            None
        };
        let bound = 1.0 / (width as f64).sqrt();
        let w_dec = Tensor::rand_uniform(vec![2, width], -bound, bound, rng);
        w_dec.set_tracked(true);
        let b_dec = Tensor::param(vec![2], vec![0.0, 0.0])?;
        Ok(Model {
            cfg,
            vocab,
            emb,
            layers,
            attention,
            w_dec,
            b_dec,
            pipeline,
        })
    }

    /// Every parameter tensor with its checkpoint name, in the fixed
    /// serialization order. Frozen tensors are included.
    pub fn parameters(&self) -> Vec<(String, Tensor)> {
        let mut out = vec![("embedding.vectors".to_string(), self.emb.vectors.clone())];
        for (k, layer) in self.layers.iter().enumerate() {
            out.push((format!("encoder.layer{k}.fwd.w_ih"), layer.fwd.w_ih.clone()));
            out.push((format!("encoder.layer{k}.fwd.w_hh"), layer.fwd.w_hh.clone()));
            out.push((format!("encoder.layer{k}.fwd.b"), layer.fwd.b.clone()));
            if let Some(bwd) = &layer.bwd {
                out.push((format!("encoder.layer{k}.bwd.w_ih"), bwd.w_ih.clone()));
                out.push((format!("encoder.layer{k}.bwd.w_hh"), bwd.w_hh.clone()));
                out.push((format!("encoder.layer{k}.bwd.b"), bwd.b.clone()));
            }
        }
        if let Some(att) = &self.attention {
            out.push(("attention.w_a".to_string(), att.w_a.clone()));
            out.push(("attention.v_a".to_string(), att.v_a.clone()));
        }
        out.push(("decoder.w".to_string(), self.w_dec.clone()));
        out.push(("decoder.b".to_string(), self.b_dec.clone()));
        out
    }

    pub fn trainable_parameters(&self) -> Vec<Tensor> {
        self.parameters()
            .into_iter()
            .map(|(_, t)| t)
            .filter(|t| t.is_tracked())
            .collect()
    }

    /// Tokenize and index a dataset with this model's own pipeline and
    /// vocabulary, returning the per-stage change counts.
    pub fn prepare(&self, data: &mut Dataset) -> Vec<(crate::preprocess::Stage, usize)> {
        let counts = data.tokenize(&self.pipeline);
        data.index(&self.vocab);
        counts
    }

    /// Log-probabilities over the two classes for one token-id sequence.
    pub fn forward<R: Rng>(&self, ids: &[usize], training: bool, rng: &mut R) -> Result<Tensor> {
        if ids.is_empty() {
            return Err(Error::EmptySequence("classifier forward"));
        }
        let seq = lookup_ids(ids, &self.emb)?;
        let seq = seq.dropout(self.cfg.dropout_embed, training, rng)?;
        let states = encode(&seq, &self.cfg.encoder, &self.layers, training, rng)?;
        let sentence = match &self.attention {
            Some(att) => {
                let (pooled, _) = attend(&states, att)?;
                pooled.dropout(self.cfg.dropout_attn, training, rng)?
            }
            None => crate::encoder::pool_last(
                &states,
                self.cfg.encoder.bidirectional,
                self.cfg.encoder.hidden_size,
            )?,
        };
        let logits = self.w_dec.matvec(&sentence)?.add(&self.b_dec)?;
        logits.log_softmax(0)
    }
}

/// Class-weighted negative log-likelihood over a batch:
/// sum_i w[y_i] * (-lp_i[y_i]) / sum_i w[y_i].
pub fn weighted_nll(log_probs: &[Tensor], labels: &[u8], weights: &[f64; 2]) -> Result<Tensor> {
    if log_probs.is_empty() || log_probs.len() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "weighted_nll: {} log-prob rows for {} labels",
            log_probs.len(),
            labels.len()
        )));
    }
    let mut total_w = 0.0;
    let mut terms = Vec::with_capacity(labels.len());
    for (lp, &y) in log_probs.iter().zip(labels) {
        if y > 1 {
            return Err(Error::InvalidArgument(format!(
                "weighted_nll: label {y} outside {{0, 1}}"
            )));
        }
        let w = weights[y as usize];
        total_w += w;
        terms.push(lp.narrow(0, y as usize, 1)?.mul_scalar(-w));
    }
    let refs: Vec<&Tensor> = terms.iter().collect();
    Ok(crate::tensor::concat(&refs, 0)?.sum().mul_scalar(1.0 / total_w))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

pub enum Optimizer {
    Sgd {
        lr: f64,
    },
    Adam {
        lr: f64,
        t: u64,
        m: Vec<Vec<f64>>,
        v: Vec<Vec<f64>>,
    },
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, params: &[Tensor]) -> Optimizer {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd { lr },
            OptimizerKind::Adam => Optimizer::Adam {
                lr,
                t: 0,
                m: params.iter().map(|p| vec![0.0; p.numel()]).collect(),
                v: params.iter().map(|p| vec![0.0; p.numel()]).collect(),
            },
        }
    }

    /// Apply one update using each parameter's accumulated gradient.
    /// Parameters without a gradient are left alone.
    pub fn step(&mut self, params: &[Tensor]) -> Result<()> {
        match self {
            Optimizer::Sgd { lr } => {
                for p in params {
                    let Some(g) = p.grad() else { continue };
                    let mut d = p.to_vec();
                    for (x, gi) in d.iter_mut().zip(&g) {
                        *x -= *lr * gi;
                    }
                    p.set_data(&d)?;
                }
            }
            Optimizer::Adam { lr, t, m, v } => {
                *t += 1;
                let bc1 = 1.0 - ADAM_BETA1.powi(*t as i32);
                let bc2 = 1.0 - ADAM_BETA2.powi(*t as i32);
                for (i, p) in params.iter().enumerate() {
                    let Some(g) = p.grad() else { continue };
                    let mut d = p.to_vec();
                    for (j, gi) in g.iter().enumerate() {
                        m[i][j] = ADAM_BETA1 * m[i][j] + (1.0 - ADAM_BETA1) * gi;
                        v[i][j] = ADAM_BETA2 * v[i][j] + (1.0 - ADAM_BETA2) * gi * gi;
                        let mhat = m[i][j] / bc1;
                        let vhat = v[i][j] / bc2;
                        d[j] -= *lr * mhat / (vhat.sqrt() + ADAM_EPS);
                    }
                    p.set_data(&d)?;
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub optimizer: OptimizerKind,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.learning_rate <= 0.0 || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!(
                "learning_rate {} must be positive and finite",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_micro_f1: f64,
    pub val_macro_f1: f64,
    pub val_binary_f1: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub logs: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_val_binary_f1: f64,
    pub warnings: Vec<String>,
}

/// Train in place: seeded shuffling, one optimizer step per sample, per-epoch
/// validation, and restoration of the best-validation-epoch parameters (later
/// epochs win ties on binary F1). Samples left with no tokens are skipped
/// with a warning. Each sample's step loss is its class-weighted NLL scaled
/// by w[y] over the mean train-set weight, so an epoch's mean step loss
/// equals the batch formula and uniform weight rescaling changes nothing.
pub fn train(
    model: &mut Model,
    train_data: &Dataset,
    val_data: &Dataset,
    tc: &TrainConfig,
) -> Result<TrainOutcome> {
    tc.validate()?;
    let train_labels = train_data.labels()?;
    let val_labels = val_data.labels()?;
    if val_labels.is_empty() {
        return Err(Error::Data("validation set is empty".into()));
    }
    for (labels, name) in [(&train_labels, "train"), (&val_labels, "validation")] {
        if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::Data(format!("{name} label {bad} outside {{0, 1}}")));
        }
    }

    let mut warnings = Vec::new();
    let mut usable: Vec<usize> = Vec::with_capacity(train_data.len());
    for (i, s) in train_data.samples.iter().enumerate() {
        if s.token_ids.is_empty() {
            warnings.push(format!("sample {}: no tokens after preprocessing, skipped", s.id));
        } else {
            usable.push(i);
        }
    }
    if usable.is_empty() {
        return Err(Error::Data("no usable training samples".into()));
    }

    let weights = model.cfg.class_weights;
    let mean_w = usable
        .iter()
        .map(|&i| weights[train_labels[i] as usize])
        .sum::<f64>()
        / usable.len() as f64;

    let trainables = model.trainable_parameters();
    let mut opt = Optimizer::new(tc.optimizer, tc.learning_rate, &trainables);
    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed);

    let mut logs = Vec::with_capacity(tc.epochs);
    let mut best = f64::NEG_INFINITY;
    let mut best_epoch = 0;
    let mut snapshot: Vec<Vec<f64>> = Vec::new();

    for epoch in 1..=tc.epochs {
        let mut order = usable.clone();
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for &i in &order {
            let sample = &train_data.samples[i];
            let y = train_labels[i] as usize;
            let lp = model.forward(&sample.token_ids, true, &mut rng)?;
            let loss = lp
                .narrow(0, y, 1)?
                .mul_scalar(-weights[y] / mean_w);
            let value = loss.item();
            if !value.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite loss at epoch {epoch}, sample {}",
                    sample.id
                )));
            }
            loss.backward()?;
            if model.emb.trainable {
                model.emb.vectors.zero_grad_row(PAD_ID)?;
            }
            opt.step(&trainables)?;
            for p in &trainables {
                p.zero_grad();
            }
            loss_sum += value;
        }
        let train_loss = loss_sum / order.len() as f64;

        let (val_preds, _) = predict(model, val_data)?;
        let pred_labels: Vec<u8> = val_preds.items.iter().map(|p| p.label).collect();
        let rep = report(&pred_labels, &val_labels)?;
        logs.push(EpochLog {
            epoch,
            train_loss,
            val_micro_f1: rep.micro_f1,
            val_macro_f1: rep.macro_f1,
            val_binary_f1: rep.binary_f1,
        });
        if rep.binary_f1 >= best {
            best = rep.binary_f1;
            best_epoch = epoch;
            snapshot = trainables.iter().map(|p| p.to_vec()).collect();
        }
    }

    for (p, saved) in trainables.iter().zip(&snapshot) {
        p.set_data(saved)?;
    }
    Ok(TrainOutcome {
        logs,
        best_epoch,
        best_val_binary_f1: best,
        warnings,
    })
}

/// Deterministic inference over a prepared dataset. Samples with no tokens
/// get the negative class with full confidence, plus a warning.
pub fn predict(model: &Model, data: &Dataset) -> Result<(PredictionSet, Vec<String>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut items = Vec::with_capacity(data.len());
    let mut warnings = Vec::new();
    for s in &data.samples {
        if s.token_ids.is_empty() {
            warnings.push(format!(
                "sample {}: no tokens after preprocessing, defaulting to label 0",
                s.id
            ));
            items.push(Prediction {
                id: s.id.clone(),
                prob: [1.0, 0.0],
                label: 0,
            });
            continue;
        }
        let lp = model.forward(&s.token_ids, false, &mut rng)?;
        let lpv = lp.to_vec();
        let prob = [lpv[0].exp(), lpv[1].exp()];
        items.push(Prediction {
            id: s.id.clone(),
            prob,
            label: argmax_label(&prob),
        });
    }
    Ok((
        PredictionSet {
            items,
            kind: ProbKind::Probability,
        },
        warnings,
    ))
}

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"SGM1";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Element offset (not bytes) into the f32 payload.
    pub offset: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingMeta {
    pub trainable: bool,
    pub source: EmbeddingSource,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format_version: u32,
    pub model: ModelConfig,
    pub vocab: Vec<String>,
    pub pipeline: PipelineConfig,
    pub embedding: EmbeddingMeta,
    pub manifest: Vec<ManifestEntry>,
}

/// The manifest a model with this config and vocabulary size must have.
fn expected_manifest(cfg: &ModelConfig, vocab_len: usize) -> Vec<(String, Vec<usize>)> {
    let h = cfg.encoder.hidden_size;
    let width = cfg.encoder.output_width();
    let mut out = vec![(
        "embedding.vectors".to_string(),
        vec![vocab_len, cfg.embedding_dim],
    )];
    for k in 0..cfg.encoder.num_layers {
        let d_in = if k == 0 { cfg.embedding_dim } else { width };
        let dirs: &[&str] = if cfg.encoder.bidirectional {
            &["fwd", "bwd"]
        } else {
            &["fwd"]
        };
        for dir in dirs {
            out.push((format!("encoder.layer{k}.{dir}.w_ih"), vec![4 * h, d_in]));
            out.push((format!("encoder.layer{k}.{dir}.w_hh"), vec![4 * h, h]));
            out.push((format!("encoder.layer{k}.{dir}.b"), vec![4 * h]));
        }
    }
    if cfg.encoder.attention {
        out.push(("attention.w_a".to_string(), vec![width, width]));
        out.push(("attention.v_a".to_string(), vec![width]));
    }
    out.push(("decoder.w".to_string(), vec![2, width]));
    out.push(("decoder.b".to_string(), vec![2]));
    out
}

/// Write the model to `path`: magic, little-endian header length, JSON
/// header, then all parameters as packed little-endian f32 in manifest
/// order. The header makes the file self-contained: config, vocabulary,
/// pipeline tables, and embedding provenance all ride along.
pub fn save_checkpoint(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    let params = model.parameters();
    let mut manifest = Vec::with_capacity(params.len());
    let mut offset = 0u64;
    for (name, t) in &params {
        manifest.push(ManifestEntry {
            name: name.clone(),
            shape: t.shape().to_vec(),
            offset,
        });
        offset += t.numel() as u64;
    }
    let header = CheckpointHeader {
        format_version: CHECKPOINT_VERSION,
        model: model.cfg.clone(),
        vocab: model.vocab.tokens().to_vec(),
        pipeline: model.pipeline.config().clone(),
        embedding: EmbeddingMeta {
            trainable: model.emb.trainable,
            source: model.emb.source,
        },
        manifest,
    };
    let header_bytes = serde_json::to_vec(&header)?;
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    f.write_all(&CHECKPOINT_MAGIC)?;
    f.write_all(&(header_bytes.len() as u64).to_le_bytes())?;
    f.write_all(&header_bytes)?;
    for (_, t) in &params {
        for &v in t.data().iter() {
            f.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    f.flush()?;
    Ok(())
}

/// Parse a checkpoint file into its header and raw f32 payload, with
/// distinct errors for bad magic, unknown version, short payload, and an
/// inconsistent manifest.
pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(CheckpointHeader, Vec<f32>)> {
    let bytes = fs::read(path)?;
    if bytes.len() < 4 || bytes[0..4] != CHECKPOINT_MAGIC {
        return Err(Error::BadMagic);
    }
    if bytes.len() < 12 {
        return Err(Error::TruncatedPayload {
            expected: 12,
            actual: bytes.len(),
        });
    }
    let header_len = u64::from_le_bytes(bytes[4..12].try_into().expect("8 bytes")) as usize;
    let body_start = 12usize.checked_add(header_len).ok_or(Error::BadMagic)?;
    if bytes.len() < body_start {
        return Err(Error::TruncatedPayload {
            expected: body_start,
            actual: bytes.len(),
        });
    }
    let header: CheckpointHeader = serde_json::from_slice(&bytes[12..body_start])?;
    if header.format_version != CHECKPOINT_VERSION {
        return Err(Error::VersionMismatch {
            found: header.format_version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let payload = &bytes[body_start..];
    if payload.len() % 4 != 0 {
        return Err(Error::TruncatedPayload {
            expected: (payload.len() / 4 + 1) * 4,
            actual: payload.len(),
        });
    }
    let values: Vec<f32> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    let mut running = 0u64;
    for e in &header.manifest {
        if e.offset != running {
            return Err(Error::ManifestError(format!(
                "entry {} claims offset {}, payload cursor is {}",
                e.name, e.offset, running
            )));
        }
        running += e.shape.iter().product::<usize>() as u64;
    }
    if (values.len() as u64) < running {
        return Err(Error::TruncatedPayload {
            expected: running as usize,
            actual: values.len(),
        });
    }
    if (values.len() as u64) > running {
        return Err(Error::ManifestError(format!(
            "payload holds {} values, manifest accounts for {running}",
            values.len()
        )));
    }
    Ok((header, values))
}

impl Model {
    /// Rebuild a model from a checkpoint file alone.
    pub fn from_checkpoint(path: impl AsRef<Path>) -> Result<Model> {
        let (header, values) = load_checkpoint(path)?;
        header.model.validate()?;
        let vocab = Vocabulary::from_tokens(header.vocab)?;
        let pipeline = Pipeline::new(header.pipeline)?;
        let cfg = header.model;

        let expected = expected_manifest(&cfg, vocab.len());
        if header.manifest.len() != expected.len() {
            return Err(Error::ManifestError(format!(
                "manifest has {} entries, model needs {}",
                header.manifest.len(),
                expected.len()
            )));
        }
        for (e, (name, shape)) in header.manifest.iter().zip(&expected) {
            if &e.name != name || &e.shape != shape {
                return Err(Error::ManifestError(format!(
                    "entry {} with shape {:?}, expected {} with shape {:?}",
                    e.name, e.shape, name, shape
                )));
            }
        }

        let mut cursor = 0usize;
        let mut take = |shape: &[usize]| -> Vec<f64> {
            let n: usize = shape.iter().product();
            let slice = &values[cursor..cursor + n];
            cursor += n;
            slice.iter().map(|&v| v as f64).collect()
        };

        let emb_vals = take(&expected[0].1);
        let emb = EmbeddingMatrix::from_values(
            &vocab,
            cfg.embedding_dim,
            emb_vals,
            header.embedding.trainable,
            header.embedding.source,
        )?;

        let h = cfg.encoder.hidden_size;
        let width = cfg.encoder.output_width();
        let mut layers = Vec::with_capacity(cfg.encoder.num_layers);
        for k in 0..cfg.encoder.num_layers {
            let d_in = if k == 0 { cfg.embedding_dim } else { width };
            let mut cell = |d_in: usize| -> Result<LstmCellParams> {
                let w_ih = Tensor::param(vec![4 * h, d_in], take(&[4 * h, d_in]))?;
                let w_hh = Tensor::param(vec![4 * h, h], take(&[4 * h, h]))?;
                let b = Tensor::param(vec![4 * h], take(&[4 * h]))?;
                Ok(LstmCellParams {
                    w_ih,
                    w_hh,
                    b,
                    hidden: h,
                })
            };
            let fwd = cell(d_in)?;
            let bwd = if cfg.encoder.bidirectional {
                Some(cell(d_in)?)
            } else {
                None
            };
            layers.push(LayerParams { fwd, bwd });
        }
        let attention = if cfg.encoder.attention {
            let w_a = Tensor::param(vec![width, width], take(&[width, width]))?;
            let v_a = Tensor::param(vec![width], take(&[width]))?;
            Some(AttentionParams { w_a, v_a })
        } else {
            None
        };
        let w_dec = Tensor::param(vec![2, width], take(&[2, width]))?;
        let b_dec = Tensor::param(vec![2], take(&[2]))?;

        Ok(Model {
            cfg,
            vocab,
            emb,
            layers,
            attention,
            w_dec,
            b_dec,
            pipeline,
        })
    }
}
