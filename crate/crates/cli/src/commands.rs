//! The five commands behind the `sugmine` binary. Each returns `Result` and
//! leaves exit-code handling to `main`; human-facing chatter goes to stderr,
//! summaries and tables to stdout. No command modifies its input files.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use sugmine::classifier::{predict, save_checkpoint, train, Model, TrainConfig};
use sugmine::data::Dataset;
use sugmine::ensemble::{combine_mean, combine_vote_with_stats};
use sugmine::metrics::{error_report, format_report_table};
use sugmine::predictions::PredictionSet;
use sugmine::preprocess::{Pipeline, PipelineConfig, Stage};
use sugmine::vocab::{load_vectors, EmbeddingMatrix, EmbeddingSource, Vocabulary};
use sugmine::{Error, Result};

use crate::config::{Experiment, ExperimentConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Method {
    Mean,
    Vote,
}

fn sha256_hex(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

fn stage_name(stage: Stage) -> &'static str {
    match stage {
        Stage::Clean => "clean",
        Stage::Normalize => "normalize",
        Stage::ExpandPhrase => "expand_phrase",
        Stage::ExpandNegation => "expand_negation",
        Stage::EscapePunct => "escape_punct",
    }
}

/// Pipeline settings for `preprocess`: none → defaults; a JSON file with a
/// `pipeline` key (an experiment config) → that section; otherwise the file
/// must itself be a pipeline config.
fn load_pipeline(config: Option<&Path>) -> Result<Pipeline> {
    let Some(path) = config else {
        return Ok(Pipeline::with_defaults());
    };
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let section = value.get("pipeline").cloned().unwrap_or(value);
    let cfg: PipelineConfig = serde_json::from_value(section)
        .map_err(|e| Error::Config(format!("{}: pipeline section: {e}", path.display())))?;
    Pipeline::new(cfg)
}

pub fn cmd_preprocess(input: &Path, out: &Path, config: Option<&Path>) -> Result<()> {
    let pipeline = load_pipeline(config)?;
    let raw = fs::read_to_string(input)?;
    if raw.trim().is_empty() {
        fs::write(out, "id,sentence,label\n")?;
        eprintln!(
            "warning: {} is empty; wrote header-only output",
            input.display()
        );
        return Ok(());
    }
    let (mut ds, warnings) = Dataset::from_csv(input)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let counts = ds.tokenize(&pipeline);
    if ds.is_empty() {
        eprintln!("warning: {} has no data rows", input.display());
    }
    for s in &mut ds.samples {
        s.text = s.tokens.join(" ");
    }
    ds.to_csv(out)?;
    println!("wrote {} rows to {}", ds.len(), out.display());
    for (stage, n) in counts {
        println!("  {}: changed {} sentences", stage_name(stage), n);
    }
    Ok(())
}

#[derive(Serialize)]
struct InputRecord {
    role: &'static str,
    path: String,
    sha256: String,
}

#[derive(Clone, Serialize)]
struct MemberRecord {
    index: usize,
    seed: u64,
    checkpoint: String,
    log: String,
    best_epoch: usize,
    best_val_binary_f1: f64,
    checkpoint_sha256: String,
}

/// Everything needed to audit or re-run a training run: the full config with
/// defaults filled in, the effective seed, input hashes, and per-member
/// outputs. Deliberately contains no timestamps or absolute paths, so two
/// identical runs produce byte-identical manifests.
#[derive(Serialize)]
struct RunManifest<'a> {
    config: &'a ExperimentConfig,
    config_sha256: String,
    seed: u64,
    inputs: Vec<InputRecord>,
    members: Vec<MemberRecord>,
}

struct MemberSetup<'a> {
    exp: &'a Experiment,
    vocab: &'a Vocabulary,
    train_ds: &'a Dataset,
    val_ds: &'a Dataset,
    base_seed: u64,
    n_members: usize,
    out_dir: &'a Path,
}

fn run_member(s: &MemberSetup, index: usize) -> Result<MemberRecord> {
    let seed = s.base_seed + index as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = s.exp.cfg.model.embedding_dim;
    let emb = match s.exp.cfg.embedding.source {
        EmbeddingSource::Random => {
            let mut e = EmbeddingMatrix::random(s.vocab, dim, &mut rng)?;
            if !s.exp.embedding_trainable() {
                e.trainable = false;
                e.vectors.set_tracked(false);
            }
            e
        }
        EmbeddingSource::PretrainedFile => {
            let path = s.exp.resolve(s.exp.cfg.embedding.path.as_ref().unwrap());
            let (e, coverage) = load_vectors(&path, s.vocab, dim, &mut rng)?;
            eprintln!(
                "member {index}: pretrained vectors cover {:.1}% of the vocabulary",
                coverage * 100.0
            );
            e
        }
    };
    let pipeline = Pipeline::new(s.exp.cfg.pipeline.clone())?;
    let mut model = Model::new(
        s.exp.cfg.model.clone(),
        s.vocab.clone(),
        emb,
        pipeline,
        &mut rng,
    )?;
    let tc = TrainConfig {
        seed,
        ..s.exp.cfg.train
    };
    let outcome = train(&mut model, s.train_ds, s.val_ds, &tc)?;
    for w in &outcome.warnings {
        eprintln!("member {index}: {w}");
    }
    let (ckpt_name, log_name) = if s.n_members == 1 {
        ("model.sgm".to_string(), "train_log.jsonl".to_string())
    } else {
        (format!("member{index}.sgm"), format!("member{index}_log.jsonl"))
    };
    let ckpt_path = s.out_dir.join(&ckpt_name);
    save_checkpoint(&model, &ckpt_path)?;
    let mut log_text = String::new();
    for l in &outcome.logs {
        log_text.push_str(&serde_json::to_string(l)?);
        log_text.push('\n');
    }
    fs::write(s.out_dir.join(&log_name), log_text)?;
    Ok(MemberRecord {
        index,
        seed,
        checkpoint: ckpt_name,
        log: log_name,
        best_epoch: outcome.best_epoch,
        best_val_binary_f1: outcome.best_val_binary_f1,
        checkpoint_sha256: sha256_hex(&ckpt_path)?,
    })
}

pub fn cmd_train(
    config_path: &Path,
    seed_override: Option<u64>,
    out_dir: &Path,
    jobs: usize,
) -> Result<()> {
    let exp = Experiment::load(config_path)?;
    let base_seed = seed_override.unwrap_or(exp.cfg.train.seed);

    let (mut train_ds, warnings) = Dataset::from_csv(exp.train_path())?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let (mut val_ds, warnings) = Dataset::from_csv(exp.val_path())?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }

    let pipeline = Pipeline::new(exp.cfg.pipeline.clone())?;
    train_ds.tokenize(&pipeline);
    val_ds.tokenize(&pipeline);
    let vocab = Vocabulary::build(&train_ds, exp.cfg.vocab_min_count)?;
    train_ds.index(&vocab);
    val_ds.index(&vocab);
    eprintln!(
        "{} train / {} val samples, vocabulary of {}",
        train_ds.len(),
        val_ds.len(),
        vocab.len()
    );

    let mut inputs = vec![
        InputRecord {
            role: "train",
            path: exp.cfg.data.train.display().to_string(),
            sha256: sha256_hex(&exp.train_path())?,
        },
        InputRecord {
            role: "val",
            path: exp.cfg.data.val.display().to_string(),
            sha256: sha256_hex(&exp.val_path())?,
        },
    ];
    if let Some(p) = &exp.cfg.embedding.path {
        inputs.push(InputRecord {
            role: "vectors",
            path: p.display().to_string(),
            sha256: sha256_hex(&exp.resolve(p))?,
        });
    }

    fs::create_dir_all(out_dir)?;

    let n_members = exp.cfg.members;
    let setup = MemberSetup {
        exp: &exp,
        vocab: &vocab,
        train_ds: &train_ds,
        val_ds: &val_ds,
        base_seed,
        n_members,
        out_dir,
    };
    let workers = jobs.max(1).min(n_members);
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Result<MemberRecord>>> = Mutex::new(Vec::new());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= n_members {
                    break;
                }
                let record = run_member(&setup, i);
                results.lock().unwrap().push(record);
            });
        }
    });
    let mut members = results
        .into_inner()
        .unwrap()
        .into_iter()
        .collect::<Result<Vec<MemberRecord>>>()?;
    members.sort_by_key(|m| m.index);

    let manifest = RunManifest {
        config: &exp.cfg,
        config_sha256: sha256_hex(config_path)?,
        seed: base_seed,
        inputs,
        members: members.clone(),
    };
    let mut manifest_json = serde_json::to_string_pretty(&manifest)?;
    manifest_json.push('\n');
    fs::write(out_dir.join("manifest.json"), manifest_json)?;

    for m in &members {
        println!(
            "member {} (seed {}): best epoch {} with val binary F1 {:.4} -> {}",
            m.index,
            m.seed,
            m.best_epoch,
            m.best_val_binary_f1,
            out_dir.join(&m.checkpoint).display()
        );
    }
    println!("manifest: {}", out_dir.join("manifest.json").display());
    Ok(())
}

pub fn cmd_predict(checkpoint: &Path, data: &Path, out: &Path) -> Result<()> {
    let model = Model::from_checkpoint(checkpoint)?;
    let (mut ds, warnings) = Dataset::from_csv(data)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    model.prepare(&mut ds);
    let (preds, warnings) = predict(&model, &ds)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    preds.to_csv(out)?;
    println!("wrote {} predictions to {}", preds.len(), out.display());
    Ok(())
}

pub fn cmd_ensemble(method: Method, member_paths: &[PathBuf], out: &Path) -> Result<()> {
    if member_paths.is_empty() {
        return Err(Error::InvalidArgument(
            "ensemble needs at least one member prediction file".into(),
        ));
    }
    let mut sets = Vec::with_capacity(member_paths.len());
    for p in member_paths {
        let set = PredictionSet::from_csv(p)?;
        let positives = set.items.iter().filter(|x| x.label == 1).count();
        println!(
            "member {}: {} predictions, {} labeled positive",
            p.display(),
            set.len(),
            positives
        );
        sets.push(set);
    }
    let combined = if sets.len() == 1 {
        // combining a single member is the identity under both methods
        sets.into_iter().next().unwrap()
    } else {
        let refs: Vec<&PredictionSet> = sets.iter().collect();
        match method {
            Method::Mean => combine_mean(&refs)?,
            Method::Vote => {
                let (set, stats) = combine_vote_with_stats(&refs)?;
                if stats.tie_breaks > 0 {
                    println!(
                        "{} even splits broken by mean probability",
                        stats.tie_breaks
                    );
                }
                set
            }
        }
    };
    combined.to_csv(out)?;
    println!(
        "wrote {} combined predictions to {}",
        combined.len(),
        out.display()
    );
    Ok(())
}

pub fn cmd_evaluate(pred_path: &Path, gold_path: &Path, out_dir: &Path) -> Result<()> {
    let preds = PredictionSet::from_csv(pred_path)?;
    let (gold, warnings) = Dataset::from_csv(gold_path)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let errors = error_report(&preds, &gold)?;

    fs::create_dir_all(out_dir)?;
    let mut report_json = serde_json::to_string_pretty(&errors.metrics)?;
    report_json.push('\n');
    fs::write(out_dir.join("report.json"), report_json)?;
    let table = format_report_table(&errors.metrics);
    fs::write(out_dir.join("report.txt"), &table)?;
    let mut errors_json = serde_json::to_string_pretty(&errors)?;
    errors_json.push('\n');
    fs::write(out_dir.join("errors.json"), errors_json)?;

    print!("{table}");
    println!(
        "{} false positives, {} false negatives (most confident first in {})",
        errors.false_positives.len(),
        errors.false_negatives.len(),
        out_dir.join("errors.json").display()
    );
    Ok(())
}
