//! Confusion-matrix construction and the three F1 variants used for
//! evaluation, plus a mistake-listing error report.
//!
//! Conventions: label 1 ("suggestion") is the positive class; any 0/0
//! precision, recall, or F1 denominator yields 0; micro F1 over a single-label
//! binary task equals accuracy; macro F1 is the unweighted mean of the two
//! per-class F1 scores.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::predictions::PredictionSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fp: u64, fn_: u64, tn: u64) -> ConfusionMatrix {
        ConfusionMatrix { tp, fp, fn_, tn }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

pub fn confusion(pred: &[u8], gold: &[u8]) -> Result<ConfusionMatrix> {
    if pred.len() != gold.len() {
        return Err(Error::Data(format!(
            "prediction/gold length mismatch: {} vs {}",
            pred.len(),
            gold.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::Data("cannot score an empty label list".into()));
    }
    let mut cm = ConfusionMatrix::new(0, 0, 0, 0);
    for (i, (&p, &g)) in pred.iter().zip(gold).enumerate() {
        match (p, g) {
            (1, 1) => cm.tp += 1,
            (1, 0) => cm.fp += 1,
            (0, 1) => cm.fn_ += 1,
            (0, 0) => cm.tn += 1,
            _ => {
                return Err(Error::Data(format!(
                    "labels must be 0 or 1; index {i} has pred={p}, gold={g}"
                )));
            }
        }
    }
    Ok(cm)
}

fn safe_div(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

fn f1_from(p: f64, r: f64) -> f64 {
    safe_div(2.0 * p * r, p + r)
}

/// Precision, recall, F1 for the positive class.
pub fn positive_prf(cm: &ConfusionMatrix) -> (f64, f64, f64) {
    let p = safe_div(cm.tp as f64, (cm.tp + cm.fp) as f64);
    let r = safe_div(cm.tp as f64, (cm.tp + cm.fn_) as f64);
    (p, r, f1_from(p, r))
}

/// Precision, recall, F1 for the negative class (tp/tn and fp/fn swap roles).
pub fn negative_prf(cm: &ConfusionMatrix) -> (f64, f64, f64) {
    let p = safe_div(cm.tn as f64, (cm.tn + cm.fn_) as f64);
    let r = safe_div(cm.tn as f64, (cm.tn + cm.fp) as f64);
    (p, r, f1_from(p, r))
}

/// F1 over the positive class only, the task's headline measure.
pub fn binary_f1(cm: &ConfusionMatrix) -> f64 {
    positive_prf(cm).2
}

/// Micro-averaged F1 over both classes; for single-label binary
/// classification this reduces to accuracy.
pub fn micro_f1(cm: &ConfusionMatrix) -> f64 {
    safe_div((cm.tp + cm.tn) as f64, cm.total() as f64)
}

/// Unweighted mean of the per-class F1 scores.
pub fn macro_f1(cm: &ConfusionMatrix) -> f64 {
    (positive_prf(cm).2 + negative_prf(cm).2) / 2.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub binary_f1: f64,
    pub pos_precision: f64,
    pub pos_recall: f64,
    pub pos_f1: f64,
    pub neg_precision: f64,
    pub neg_recall: f64,
    pub neg_f1: f64,
    pub confusion: ConfusionMatrix,
}

pub fn report_from_cm(cm: ConfusionMatrix) -> MetricReport {
    let (pp, pr, pf) = positive_prf(&cm);
    let (np, nr, nf) = negative_prf(&cm);
    MetricReport {
        micro_f1: micro_f1(&cm),
        macro_f1: macro_f1(&cm),
        binary_f1: binary_f1(&cm),
        pos_precision: pp,
        pos_recall: pr,
        pos_f1: pf,
        neg_precision: np,
        neg_recall: nr,
        neg_f1: nf,
        confusion: cm,
    }
}

pub fn report(pred: &[u8], gold: &[u8]) -> Result<MetricReport> {
    Ok(report_from_cm(confusion(pred, gold)?))
}

/// One misclassified sample: id, raw text, and the confidence the model put
/// on its (wrong) predicted class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mistake {
    pub id: String,
    pub text: String,
    pub confidence: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub metrics: MetricReport,
    pub false_positives: Vec<Mistake>,
    pub false_negatives: Vec<Mistake>,
}

/// Score predictions against a labeled dataset and list the mistakes, most
/// confident first. Prediction and dataset ids must align exactly.
pub fn error_report(preds: &PredictionSet, dataset: &Dataset) -> Result<ErrorReport> {
    let pred_ids = preds.ids();
    let gold_ids: Vec<&str> = dataset.samples.iter().map(|s| s.id.as_str()).collect();
    crate::predictions::check_aligned(&pred_ids, &gold_ids)?;
    let gold = dataset.labels()?;
    let pred_labels = preds.labels();
    let metrics = report(&pred_labels, &gold)?;
    let mut false_positives = Vec::new();
    let mut false_negatives = Vec::new();
    for ((p, &g), sample) in preds.items.iter().zip(&gold).zip(&dataset.samples) {
        if p.label == 1 && g == 0 {
            false_positives.push(Mistake {
                id: p.id.clone(),
                text: sample.text.clone(),
                confidence: p.prob[1],
            });
        } else if p.label == 0 && g == 1 {
            false_negatives.push(Mistake {
                id: p.id.clone(),
                text: sample.text.clone(),
                confidence: p.prob[0],
            });
        }
    }
    let by_confidence = |a: &Mistake, b: &Mistake| {
        b.confidence
            .partial_cmp(&a.confidence)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.id.cmp(&b.id))
    };
    false_positives.sort_by(by_confidence);
    false_negatives.sort_by(by_confidence);
    Ok(ErrorReport {
        metrics,
        false_positives,
        false_negatives,
    })
}

/// Render a report as an aligned plain-text table.
pub fn format_report_table(r: &MetricReport) -> String {
    let cm = &r.confusion;
    let mut out = String::new();
    out.push_str(&format!(
        "confusion   tp={} fp={} fn={} tn={} (n={})\n",
        cm.tp,
        cm.fp,
        cm.fn_,
        cm.tn,
        cm.total()
    ));
    out.push_str(&format!(
        "{:<10} {:>10} {:>10} {:>10}\n",
        "class", "precision", "recall", "f1"
    ));
    out.push_str(&format!(
        "{:<10} {:>10.4} {:>10.4} {:>10.4}\n",
        "positive", r.pos_precision, r.pos_recall, r.pos_f1
    ));
    out.push_str(&format!(
        "{:<10} {:>10.4} {:>10.4} {:>10.4}\n",
        "negative", r.neg_precision, r.neg_recall, r.neg_f1
    ));
    out.push_str(&format!(
        "micro F1 {:.4}   macro F1 {:.4}   binary F1 {:.4}\n",
        r.micro_f1, r.macro_f1, r.binary_f1
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Sample;
    use crate::predictions::{argmax_label, Prediction, ProbKind};

    #[test]
    fn confusion_perfect_and_total_miss() {
        let cm = confusion(&[1, 0, 1], &[1, 0, 1]).unwrap();
        assert_eq!((cm.tp, cm.fp, cm.fn_, cm.tn), (2, 0, 0, 1));
        let cm = confusion(&[1, 1], &[0, 0]).unwrap();
        assert_eq!((cm.tp, cm.fp, cm.fn_, cm.tn), (0, 2, 0, 0));
    }

    #[test]
    fn confusion_matches_brute_force_recount() {
        // fixed pseudo-random labels, recounted four ways independently
        let mut pred = Vec::new();
        let mut gold = Vec::new();
        let mut state: u64 = 0x9e3779b97f4a7c15;
        for _ in 0..100 {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            pred.push(((state >> 17) & 1) as u8);
            gold.push(((state >> 43) & 1) as u8);
        }
        let cm = confusion(&pred, &gold).unwrap();
        let count = |p: u8, g: u8| {
            pred.iter()
                .zip(&gold)
                .filter(|(&a, &b)| a == p && b == g)
                .count() as u64
        };
        assert_eq!(cm.tp, count(1, 1));
        assert_eq!(cm.fp, count(1, 0));
        assert_eq!(cm.fn_, count(0, 1));
        assert_eq!(cm.tn, count(0, 0));
        assert_eq!(cm.total(), 100);
    }

    #[test]
    fn confusion_rejects_bad_input() {
        assert!(confusion(&[1], &[1, 0]).is_err());
        assert!(confusion(&[], &[]).is_err());
        assert!(confusion(&[2], &[0]).is_err());
    }

    // Five reference confusion rows with their expected metric trios,
    // hand-verified against the published result tables they came from.
    const REFERENCE_ROWS: [(u64, u64, u64, u64, f64, f64, f64); 5] = [
        (76, 60, 11, 686, 0.9147, 0.8162, 0.6816),
        (75, 62, 12, 684, 0.9116, 0.8091, 0.6696),
        (77, 69, 10, 677, 0.9051, 0.8029, 0.6609),
        (199, 34, 149, 442, 0.7779, 0.7567, 0.6850),
        (208, 69, 140, 407, 0.7463, 0.7306, 0.6656),
    ];

    #[test]
    fn reference_confusions_reproduce_all_fifteen_metrics() {
        for (tp, fp, fn_, tn, micro, macro_, binary) in REFERENCE_ROWS {
            let cm = ConfusionMatrix::new(tp, fp, fn_, tn);
            assert!(
                (micro_f1(&cm) - micro).abs() <= 0.0005,
                "micro for {cm:?}: {} vs {micro}",
                micro_f1(&cm)
            );
            assert!(
                (macro_f1(&cm) - macro_).abs() <= 0.0005,
                "macro for {cm:?}: {} vs {macro_}",
                macro_f1(&cm)
            );
            assert!(
                (binary_f1(&cm) - binary).abs() <= 0.0005,
                "binary for {cm:?}: {} vs {binary}",
                binary_f1(&cm)
            );
        }
    }

    #[test]
    fn zero_denominators_yield_zero() {
        let cm = ConfusionMatrix::new(0, 0, 5, 5);
        assert_eq!(binary_f1(&cm), 0.0);
        let cm = ConfusionMatrix::new(0, 0, 0, 10);
        assert_eq!(binary_f1(&cm), 0.0);
        assert_eq!(micro_f1(&cm), 1.0);
    }

    #[test]
    fn micro_equals_accuracy_identity() {
        for (tp, fp, fn_, tn) in [(3, 1, 2, 4), (0, 0, 0, 1), (7, 0, 0, 0), (5, 5, 5, 5)] {
            let cm = ConfusionMatrix::new(tp, fp, fn_, tn);
            let acc = (tp + tn) as f64 / cm.total() as f64;
            assert_eq!(micro_f1(&cm), acc);
        }
    }

    #[test]
    fn symmetric_cm_macro_equals_binary() {
        let cm = ConfusionMatrix::new(40, 10, 10, 40);
        assert!((macro_f1(&cm) - binary_f1(&cm)).abs() < 1e-12);
    }

    #[test]
    fn metrics_invariant_under_count_scaling() {
        let base = ConfusionMatrix::new(76, 60, 11, 686);
        for k in [2u64, 3, 10] {
            let scaled = ConfusionMatrix::new(base.tp * k, base.fp * k, base.fn_ * k, base.tn * k);
            assert!((micro_f1(&base) - micro_f1(&scaled)).abs() < 1e-12);
            assert!((macro_f1(&base) - macro_f1(&scaled)).abs() < 1e-12);
            assert!((binary_f1(&base) - binary_f1(&scaled)).abs() < 1e-12);
        }
    }

    #[test]
    fn perfect_report_has_all_ones_and_no_mistakes() {
        let dataset = Dataset {
            samples: vec![
                Sample::new("a", "first", Some(1)),
                Sample::new("b", "second", Some(0)),
            ],
        };
        let preds = PredictionSet {
            items: vec![
                Prediction {
                    id: "a".into(),
                    prob: [0.1, 0.9],
                    label: 1,
                },
                Prediction {
                    id: "b".into(),
                    prob: [0.8, 0.2],
                    label: 0,
                },
            ],
            kind: ProbKind::Probability,
        };
        let report = error_report(&preds, &dataset).unwrap();
        assert_eq!(report.metrics.micro_f1, 1.0);
        assert_eq!(report.metrics.binary_f1, 1.0);
        assert!(report.false_positives.is_empty());
        assert!(report.false_negatives.is_empty());
    }

    #[test]
    fn mistakes_sorted_most_confident_first() {
        let dataset = Dataset {
            samples: vec![
                Sample::new("a", "mild fp", Some(0)),
                Sample::new("b", "strong fp", Some(0)),
                Sample::new("c", "missed", Some(1)),
            ],
        };
        let preds = PredictionSet {
            items: vec![
                Prediction {
                    id: "a".into(),
                    prob: [0.4, 0.6],
                    label: 1,
                },
                Prediction {
                    id: "b".into(),
                    prob: [0.1, 0.9],
                    label: 1,
                },
                Prediction {
                    id: "c".into(),
                    prob: [0.7, 0.3],
                    label: 0,
                },
            ],
            kind: ProbKind::Probability,
        };
        let report = error_report(&preds, &dataset).unwrap();
        let fp_ids: Vec<&str> = report.false_positives.iter().map(|m| m.id.as_str()).collect();
        assert_eq!(fp_ids, vec!["b", "a"]);
        assert_eq!(report.false_positives.len() as u64, report.metrics.confusion.fp);
        assert_eq!(report.false_negatives.len() as u64, report.metrics.confusion.fn_);
    }

    #[test]
    fn misaligned_ids_error_lists_them() {
        let dataset = Dataset {
            samples: vec![Sample::new("x", "t", Some(0))],
        };
        let preds = PredictionSet {
            items: vec![Prediction {
                id: "y".into(),
                prob: [1.0, 0.0],
                label: 0,
            }],
            kind: ProbKind::Probability,
        };
        match error_report(&preds, &dataset).unwrap_err() {
            Error::Alignment { ids, .. } => assert!(ids.contains(&"y".to_string())),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn path_independence_of_report() {
        let pred = [1u8, 0, 1, 1, 0];
        let gold = [1u8, 1, 1, 0, 0];
        let via_cm = report_from_cm(confusion(&pred, &gold).unwrap());
        let direct = report(&pred, &gold).unwrap();
        assert_eq!(via_cm, direct);
        // consistency with argmax convention used to produce labels
        assert_eq!(argmax_label(&[0.3, 0.7]), 1);
    }
}
