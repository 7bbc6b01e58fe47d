//! Combine several models' predictions by probability averaging or by
//! majority vote.
//!
//! All members must cover the same sample ids in the same order. Vote
//! outputs carry vote fractions in the prob slots (flagged via
//! `ProbKind::VoteFraction`); with an odd member count the vote tie-break
//! path is unreachable, which `combine_vote_with_stats` makes checkable.

use crate::error::Result;
use crate::metrics::{self, MetricReport};
use crate::predictions::{argmax_label, check_aligned, Prediction, PredictionSet, ProbKind};

/// Mean of one probability slot across members, summed in sorted order so
/// the result is bit-identical however the members are permuted.
fn ordered_mean(members: &[&PredictionSet], item: usize, class: usize) -> f64 {
    let mut vals: Vec<f64> = members.iter().map(|m| m.items[item].prob[class]).collect();
    vals.sort_by(f64::total_cmp);
    vals.iter().sum::<f64>() / vals.len() as f64
}

fn check_members(members: &[&PredictionSet]) -> Result<()> {
    if members.is_empty() {
        return Err(crate::error::Error::InvalidArgument(
            "ensemble needs at least one member".into(),
        ));
    }
    let first = members[0].ids();
    for m in &members[1..] {
        check_aligned(&first, &m.ids())?;
    }
    Ok(())
}

/// Per sample, the arithmetic mean of member probabilities; label by argmax
/// with ties to the negative class.
pub fn combine_mean(members: &[&PredictionSet]) -> Result<PredictionSet> {
    check_members(members)?;
    let items = members[0]
        .items
        .iter()
        .enumerate()
        .map(|(i, first)| {
            let prob = [ordered_mean(members, i, 0), ordered_mean(members, i, 1)];
            Prediction {
                id: first.id.clone(),
                prob,
                label: argmax_label(&prob),
            }
        })
        .collect();
    Ok(PredictionSet {
        items,
        kind: ProbKind::Probability,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct VoteStats {
    /// Samples where the vote split evenly and the mean-probability
    /// fallback decided the label.
    pub tie_breaks: usize,
}

/// Majority vote over member labels. An even split falls back to the
/// mean-probability argmax (then to the negative class on an exact tie).
/// Output probs are per-class vote fractions.
pub fn combine_vote(members: &[&PredictionSet]) -> Result<PredictionSet> {
    combine_vote_with_stats(members).map(|(set, _)| set)
}

pub fn combine_vote_with_stats(
    members: &[&PredictionSet],
) -> Result<(PredictionSet, VoteStats)> {
    check_members(members)?;
    let n = members.len() as f64;
    let mut stats = VoteStats::default();
    let items = members[0]
        .items
        .iter()
        .enumerate()
        .map(|(i, first)| {
            let pos_votes = members.iter().filter(|m| m.items[i].label == 1).count();
            let neg_votes = members.len() - pos_votes;
            let label = match pos_votes.cmp(&neg_votes) {
                std::cmp::Ordering::Greater => 1,
                std::cmp::Ordering::Less => 0,
                std::cmp::Ordering::Equal => {
                    stats.tie_breaks += 1;
                    let mean = [ordered_mean(members, i, 0), ordered_mean(members, i, 1)];
                    argmax_label(&mean)
                }
            };
            Prediction {
                id: first.id.clone(),
                prob: [neg_votes as f64 / n, pos_votes as f64 / n],
                label,
            }
        })
        .collect();
    Ok((
        PredictionSet {
            items,
            kind: ProbKind::VoteFraction,
        },
        stats,
    ))
}

/// One metrics row per member plus one for each combining method, the
/// shape of a per-model ensemble results table.
pub fn ensemble_report(
    members: &[&PredictionSet],
    gold: &[u8],
) -> Result<Vec<(String, MetricReport)>> {
    check_members(members)?;
    let mut rows = Vec::with_capacity(members.len() + 2);
    for (i, m) in members.iter().enumerate() {
        rows.push((format!("model {}", i + 1), metrics::report(&m.labels(), gold)?));
    }
    let mean = combine_mean(members)?;
    rows.push(("mean".to_string(), metrics::report(&mean.labels(), gold)?));
    let vote = combine_vote(members)?;
    rows.push(("voting".to_string(), metrics::report(&vote.labels(), gold)?));
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    fn member(ids: &[&str], p_pos: &[f64]) -> PredictionSet {
        let items = ids
            .iter()
            .zip(p_pos)
            .map(|(id, &p)| Prediction {
                id: id.to_string(),
                prob: [1.0 - p, p],
                label: argmax_label(&[1.0 - p, p]),
            })
            .collect();
        PredictionSet {
            items,
            kind: ProbKind::Probability,
        }
    }

    #[test]
    fn single_member_mean_is_identity() {
        let m = member(&["a", "b"], &[0.9, 0.2]);
        let out = combine_mean(&[&m]).unwrap();
        assert_eq!(out.items, m.items);
    }

    #[test]
    fn identical_members_are_idempotent() {
        let m = member(&["a", "b"], &[0.7, 0.3]);
        let out = combine_mean(&[&m, &m, &m]).unwrap();
        assert_eq!(out.labels(), m.labels());
        for (x, y) in out.items.iter().zip(&m.items) {
            assert!((x.prob[0] - y.prob[0]).abs() < 1e-12);
            assert!((x.prob[1] - y.prob[1]).abs() < 1e-12);
        }
        let out = combine_vote(&[&m, &m, &m]).unwrap();
        assert_eq!(out.labels(), m.labels());
    }

    #[test]
    fn mean_hand_computed() {
        let a = member(&["x"], &[0.4]);
        let b = member(&["x"], &[0.8]);
        let c = member(&["x"], &[0.7]);
        let out = combine_mean(&[&a, &b, &c]).unwrap();
        assert!((out.items[0].prob[1] - 0.6333333333).abs() < 1e-9);
        assert_eq!(out.items[0].label, 1);
        assert!((out.items[0].prob[0] + out.items[0].prob[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn vote_majority_and_unanimity() {
        let a = member(&["x"], &[0.9]);
        let b = member(&["x"], &[0.6]);
        let c = member(&["x"], &[0.1]);
        let out = combine_vote(&[&a, &b, &c]).unwrap();
        assert_eq!(out.items[0].label, 1);
        assert!((out.items[0].prob[1] - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(out.kind, ProbKind::VoteFraction);
        let out = combine_vote(&[&a, &a, &a, &a, &a]).unwrap();
        assert_eq!(out.items[0].label, 1);
    }

    #[test]
    fn even_tie_falls_back_to_mean() {
        let a = member(&["x"], &[0.9]); // votes 1
        let b = member(&["x"], &[0.2]); // votes 0, mean p_pos = 0.55
        let (out, stats) = combine_vote_with_stats(&[&a, &b]).unwrap();
        assert_eq!(out.items[0].label, 1);
        assert_eq!(stats.tie_breaks, 1);
    }

    #[test]
    fn exact_mean_tie_goes_negative() {
        let a = member(&["x"], &[0.8]);
        let b = member(&["x"], &[0.2]);
        let (out, stats) = combine_vote_with_stats(&[&a, &b]).unwrap();
        assert_eq!(out.items[0].label, 0);
        assert_eq!(stats.tie_breaks, 1);
    }

    #[test]
    fn odd_member_count_never_ties() {
        let a = member(&["x", "y"], &[0.9, 0.1]);
        let b = member(&["x", "y"], &[0.2, 0.8]);
        let c = member(&["x", "y"], &[0.6, 0.4]);
        let (_, stats) = combine_vote_with_stats(&[&a, &b, &c]).unwrap();
        assert_eq!(stats.tie_breaks, 0);
    }

    #[test]
    fn misaligned_members_error_with_ids() {
        let a = member(&["x", "y"], &[0.9, 0.1]);
        let b = member(&["x", "z"], &[0.9, 0.1]);
        match combine_mean(&[&a, &b]).unwrap_err() {
            Error::Alignment { ids, .. } => {
                assert!(ids.contains(&"y".to_string()) && ids.contains(&"z".to_string()));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn permutation_invariance() {
        let a = member(&["x", "y", "z"], &[0.9, 0.1, 0.5]);
        let b = member(&["x", "y", "z"], &[0.3, 0.6, 0.7]);
        let c = member(&["x", "y", "z"], &[0.5, 0.5, 0.2]);
        let orders: [[&PredictionSet; 3]; 3] = [[&a, &b, &c], [&c, &a, &b], [&b, &c, &a]];
        let base_mean = combine_mean(&orders[0]).unwrap();
        let base_vote = combine_vote(&orders[0]).unwrap();
        for order in &orders[1..] {
            let mean = combine_mean(order).unwrap();
            for (x, y) in base_mean.items.iter().zip(&mean.items) {
                assert_eq!(x.label, y.label);
                assert!((x.prob[1] - y.prob[1]).abs() < 1e-12);
            }
            assert_eq!(combine_vote(order).unwrap().labels(), base_vote.labels());
        }
    }

    #[test]
    fn report_has_member_rows_plus_two() {
        let a = member(&["x", "y"], &[0.9, 0.1]);
        let b = member(&["x", "y"], &[0.8, 0.2]);
        let c = member(&["x", "y"], &[0.7, 0.9]);
        let gold = [1u8, 0];
        let rows = ensemble_report(&[&a, &b, &c], &gold).unwrap();
        assert_eq!(rows.len(), 5);
        assert_eq!(rows[3].0, "mean");
        assert_eq!(rows[4].0, "voting");
        // member rows agree with scoring each member directly
        let direct = metrics::report(&a.labels(), &gold).unwrap();
        assert_eq!(rows[0].1, direct);
    }

    #[test]
    fn constructed_fixture_mean_beats_every_member() {
        // gold: three positives then three negatives; each member gets four
        // of six right (binary F1 = 2/3) but their errors cancel in the mean
        let gold = [1u8, 1, 1, 0, 0, 0];
        let a = member(&["1", "2", "3", "4", "5", "6"], &[0.9, 0.6, 0.4, 0.1, 0.1, 0.6]);
        let b = member(&["1", "2", "3", "4", "5", "6"], &[0.6, 0.4, 0.9, 0.6, 0.1, 0.1]);
        let c = member(&["1", "2", "3", "4", "5", "6"], &[0.4, 0.9, 0.6, 0.1, 0.6, 0.1]);
        let members = [&a, &b, &c];
        let mean_f1 = {
            let combined = combine_mean(&members).unwrap();
            metrics::report(&combined.labels(), &gold).unwrap().binary_f1
        };
        for m in members {
            let f1 = metrics::report(&m.labels(), &gold).unwrap().binary_f1;
            assert!(mean_f1 > f1, "mean {mean_f1} vs member {f1}");
        }
        assert_eq!(mean_f1, 1.0);
    }
}
