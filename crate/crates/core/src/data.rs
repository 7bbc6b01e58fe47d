//! Labeled sentence corpora and their CSV on-disk format.
//!
//! Files are RFC 4180 CSV with header `id,sentence,label`; the label column
//! may be absent (unlabeled test data) or empty per row. Samples progress
//! through three states in place: raw text from disk, tokens after
//! `tokenize`, and vocabulary ids after `index`.

use std::collections::HashSet;
use std::path::Path;

use crate::error::{Error, Result};
use crate::preprocess::{Pipeline, Stage};
use crate::vocab::Vocabulary;

#[derive(Clone, Debug)]
pub struct Sample {
    pub id: String,
    pub text: String,
    pub label: Option<u8>,
    pub tokens: Vec<String>,
    pub token_ids: Vec<usize>,
}

impl Sample {
    pub fn new(id: impl Into<String>, text: impl Into<String>, label: Option<u8>) -> Sample {
        Sample {
            id: id.into(),
            text: text.into(),
            label,
            tokens: Vec::new(),
            token_ids: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Dataset {
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Read a dataset file. Returns the dataset plus human-readable warnings
    /// (empty sentences are warned about but kept as degenerate samples).
    pub fn from_csv(path: impl AsRef<Path>) -> Result<(Dataset, Vec<String>)> {
        let path = path.as_ref();
        let name = path.display().to_string();
        let mut reader = csv::ReaderBuilder::new()
            .flexible(false)
            .from_path(path)
            .map_err(|e| Error::Data(format!("{name}: {e}")))?;
        let headers = reader
            .headers()
            .map_err(|e| Error::Data(format!("{name}: {e}")))?
            .clone();
        let cols: Vec<&str> = headers.iter().collect();
        let has_label = match cols.as_slice() {
            ["id", "sentence", "label"] => true,
            ["id", "sentence"] => false,
            other => {
                return Err(Error::Data(format!(
                    "{name}: expected header id,sentence[,label], got {other:?}"
                )));
            }
        };
        let mut samples = Vec::new();
        let mut warnings = Vec::new();
        let mut seen: HashSet<String> = HashSet::new();
        for (i, record) in reader.records().enumerate() {
            let row = i + 2; // header is row 1
            let record = record.map_err(|e| Error::Parse {
                path: name.clone(),
                line: row,
                msg: e.to_string(),
            })?;
            let id = record.get(0).unwrap_or("").to_string();
            let sentence = record.get(1).unwrap_or("").to_string();
            if id.is_empty() {
                return Err(Error::Parse {
                    path: name.clone(),
                    line: row,
                    msg: "empty id".to_string(),
                });
            }
            if !seen.insert(id.clone()) {
                return Err(Error::Data(format!(
                    "{name}: duplicate id {id:?} at row {row}"
                )));
            }
            let label = if has_label {
                match record.get(2).unwrap_or("") {
                    "" => None,
                    "0" => Some(0),
                    "1" => Some(1),
                    other => {
                        return Err(Error::Parse {
                            path: name.clone(),
                            line: row,
                            msg: format!("label must be 0, 1, or empty, got {other:?}"),
                        });
                    }
                }
            } else {
                None
            };
            if sentence.trim().is_empty() {
                warnings.push(format!(
                    "{name}: row {row} (id {id}): empty sentence kept as degenerate sample"
                ));
            }
            samples.push(Sample::new(id, sentence, label));
        }
        Ok((Dataset { samples }, warnings))
    }

    pub fn to_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut writer = csv::Writer::from_path(path.as_ref())
            .map_err(|e| Error::Data(format!("{}: {e}", path.as_ref().display())))?;
        writer
            .write_record(["id", "sentence", "label"])
            .map_err(|e| Error::Data(e.to_string()))?;
        for s in &self.samples {
            let label = s.label.map(|l| l.to_string()).unwrap_or_default();
            writer
                .write_record([s.id.as_str(), s.text.as_str(), label.as_str()])
                .map_err(|e| Error::Data(e.to_string()))?;
        }
        writer.flush()?;
        Ok(())
    }

    /// Run the preprocessing pipeline over every sample, filling `tokens`.
    /// Returns, per stage, how many sentences that stage changed.
    pub fn tokenize(&mut self, pipeline: &Pipeline) -> Vec<(Stage, usize)> {
        let mut counts: Vec<(Stage, usize)> = pipeline
            .config()
            .stages
            .iter()
            .map(|&s| (s, 0))
            .collect();
        for sample in &mut self.samples {
            let (normalized, flags) = pipeline.normalize_with_flags(&sample.text);
            for (slot, (_, changed)) in counts.iter_mut().zip(&flags) {
                if *changed {
                    slot.1 += 1;
                }
            }
            sample.tokens = normalized
                .split_whitespace()
                .map(str::to_lowercase)
                .collect();
        }
        counts
    }

    /// Map tokens to vocabulary ids (unknown tokens become `<unk>`).
    pub fn index(&mut self, vocab: &Vocabulary) {
        for sample in &mut self.samples {
            sample.token_ids = sample.tokens.iter().map(|t| vocab.id(t)).collect();
        }
    }

    /// Gold labels for every sample; errors if any sample is unlabeled.
    pub fn labels(&self) -> Result<Vec<u8>> {
        self.samples
            .iter()
            .map(|s| {
                s.label
                    .ok_or_else(|| Error::Data(format!("sample {} has no label", s.id)))
            })
            .collect()
    }

    pub fn ids(&self) -> Vec<String> {
        self.samples.iter().map(|s| s.id.clone()).collect()
    }
}
