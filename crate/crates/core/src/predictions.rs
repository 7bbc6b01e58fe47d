//! Per-sample class probabilities produced by one model (or one ensemble),
//! plus the CSV format they travel in.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How to read the `prob` field: calibrated model probabilities, or vote
/// fractions from a voting ensemble (not calibrated).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbKind {
    Probability,
    VoteFraction,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub id: String,
    pub prob: [f64; 2], // [p_neg, p_pos]
    pub label: u8,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PredictionSet {
    pub items: Vec<Prediction>,
    pub kind: ProbKind,
}

/// Argmax with ties resolved to the negative class.
pub fn argmax_label(prob: &[f64; 2]) -> u8 {
    u8::from(prob[1] > prob[0])
}

/// Require two id sequences to be identical in content and order; the error
/// lists the ids that differ (positional mismatches plus length overhang).
pub fn check_aligned(left: &[&str], right: &[&str]) -> Result<()> {
    if left == right {
        return Ok(());
    }
    let mut offending: Vec<String> = Vec::new();
    let n = left.len().min(right.len());
    for i in 0..n {
        if left[i] != right[i] {
            offending.push(left[i].to_string());
            offending.push(right[i].to_string());
        }
    }
    for extra in &left[n..] {
        offending.push(extra.to_string());
    }
    for extra in &right[n..] {
        offending.push(extra.to_string());
    }
    offending.sort();
    offending.dedup();
    Err(Error::Alignment {
        msg: "sample ids do not align".into(),
        ids: offending,
    })
}

impl PredictionSet {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.items.iter().map(|p| p.label).collect()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.items.iter().map(|p| p.id.as_str()).collect()
    }

    pub fn to_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path.as_ref())
            .map_err(|e| Error::Data(format!("{}: {e}", path.as_ref().display())))?;
        w.write_record(["id", "p_neg", "p_pos", "label"])
            .map_err(|e| Error::Data(e.to_string()))?;
        for p in &self.items {
            w.write_record([
                p.id.as_str(),
                &format!("{:.9}", p.prob[0]),
                &format!("{:.9}", p.prob[1]),
                &p.label.to_string(),
            ])
            .map_err(|e| Error::Data(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn from_csv(path: impl AsRef<Path>) -> Result<PredictionSet> {
        let path = path.as_ref();
        let name = path.display().to_string();
        let mut reader = csv::Reader::from_path(path)
            .map_err(|e| Error::Data(format!("{name}: {e}")))?;
        let headers: Vec<String> = reader
            .headers()
            .map_err(|e| Error::Data(format!("{name}: {e}")))?
            .iter()
            .map(str::to_string)
            .collect();
        if headers != ["id", "p_neg", "p_pos", "label"] {
            return Err(Error::Data(format!(
                "{name}: expected header id,p_neg,p_pos,label, got {headers:?}"
            )));
        }
        let mut items = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let row = i + 2;
            let record = record.map_err(|e| Error::Parse {
                path: name.clone(),
                line: row,
                msg: e.to_string(),
            })?;
            let field = |j: usize| record.get(j).unwrap_or("");
            let parse_prob = |j: usize| -> Result<f64> {
                field(j).parse().map_err(|_| Error::Parse {
                    path: name.clone(),
                    line: row,
                    msg: format!("unparsable probability {:?}", field(j)),
                })
            };
            let prob = [parse_prob(1)?, parse_prob(2)?];
            let label: u8 = field(3).parse().map_err(|_| Error::Parse {
                path: name.clone(),
                line: row,
                msg: format!("unparsable label {:?}", field(3)),
            })?;
            if label > 1 {
                return Err(Error::Parse {
                    path: name.clone(),
                    line: row,
                    msg: format!("label must be 0 or 1, got {label}"),
                });
            }
            items.push(Prediction {
                id: field(0).to_string(),
                prob,
                label,
            });
        }
        Ok(PredictionSet {
            items,
            kind: ProbKind::Probability,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_breaks_ties_negative() {
        assert_eq!(argmax_label(&[0.5, 0.5]), 0);
        assert_eq!(argmax_label(&[0.4, 0.6]), 1);
        assert_eq!(argmax_label(&[0.6, 0.4]), 0);
    }

    #[test]
    fn csv_round_trip_preserves_values() {
        let set = PredictionSet {
            items: vec![
                Prediction {
                    id: "a".into(),
                    prob: [0.25, 0.75],
                    label: 1,
                },
                Prediction {
                    id: "b".into(),
                    prob: [0.999999999, 0.000000001],
                    label: 0,
                },
            ],
            kind: ProbKind::Probability,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        set.to_csv(&path).unwrap();
        let back = PredictionSet::from_csv(&path).unwrap();
        assert_eq!(back.len(), 2);
        for (orig, read) in set.items.iter().zip(&back.items) {
            assert_eq!(orig.id, read.id);
            assert_eq!(orig.label, read.label);
            assert!((orig.prob[0] - read.prob[0]).abs() < 1e-9);
            assert!((orig.prob[1] - read.prob[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn csv_rejects_wrong_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "id,p0,p1,label\na,0.5,0.5,0\n").unwrap();
        assert!(PredictionSet::from_csv(&path).is_err());
    }

    #[test]
    fn csv_rejects_bad_label() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "id,p_neg,p_pos,label\na,0.5,0.5,3\n").unwrap();
        let err = PredictionSet::from_csv(&path).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}
