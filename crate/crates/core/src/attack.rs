//! Loss-threshold membership inference.
//!
//! A unit is predicted to be a training member iff its loss under the
//! attacked model is at or below τ, the mean training loss of the
//! non-private sentence-level reference model. The attack always scores
//! sentence-level units, whatever granularity the attacked model was
//! trained at.

use std::collections::HashSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::ParallelUnit;
use crate::rng::{seeded, STREAM_CORPUS};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Membership {
    Member,
    NonMember,
}

/// (unit, membership label, scalar loss) triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub unit_id: String,
    pub membership: Membership,
    pub loss: f64,
}

/// The attack threshold and where it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub tau: f64,
    /// Which model/run produced this τ; frozen into reports so cross-model
    /// comparisons cannot silently use different thresholds.
    pub provenance: String,
}

/// Confusion matrix and advantage of one attack run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiaReport {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
    pub tpr: f64,
    pub fpr: f64,
    /// TPR − FPR; negative values are meaningful (an inverted attack).
    pub advantage: f64,
    pub tau: f64,
    pub tau_provenance: String,
    /// Unit ids of true positives, sorted; input to the PII stage.
    pub true_positive_ids: Vec<String>,
}

/// τ = mean per-unit loss of the reference model over its training set.
pub fn compute_tau<F>(
    score: F,
    train_units: &[ParallelUnit],
    provenance: impl Into<String>,
) -> Result<Threshold>
where
    F: Fn(&ParallelUnit) -> Result<f64>,
{
    if train_units.is_empty() {
        return Err(Error::Empty("training set for tau".into()));
    }
    let mut total = 0.0;
    for unit in train_units {
        total += score(unit)?;
    }
    Ok(Threshold {
        tau: total / train_units.len() as f64,
        provenance: provenance.into(),
    })
}

/// Uniform sample of exactly `n_nonmembers` training units without
/// replacement; deterministic under the seed.
pub fn balanced_members(
    train_units: &[ParallelUnit],
    n_nonmembers: usize,
    seed: u64,
) -> Result<Vec<ParallelUnit>> {
    if train_units.len() < n_nonmembers {
        return Err(Error::InvalidInput(format!(
            "cannot sample {n_nonmembers} members from {} training units",
            train_units.len()
        )));
    }
    let mut rng = seeded(seed, STREAM_CORPUS);
    let mut indices: Vec<usize> = (0..train_units.len()).collect();
    for i in 0..n_nonmembers {
        let j = rng.random_range(i..indices.len());
        indices.swap(i, j);
    }
    indices.truncate(n_nonmembers);
    Ok(indices.into_iter().map(|i| train_units[i].clone()).collect())
}

/// Classify each record as member iff loss ≤ τ (inclusive boundary) and
/// assemble the report.
pub fn classify(records: &[LossRecord], threshold: &Threshold) -> Result<MiaReport> {
    if records.is_empty() {
        return Err(Error::Empty("loss records".into()));
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0u64, 0u64, 0u64, 0u64);
    let mut true_positive_ids = Vec::new();
    for r in records {
        let predicted_member = r.loss <= threshold.tau;
        match (r.membership, predicted_member) {
            (Membership::Member, true) => {
                tp += 1;
                true_positive_ids.push(r.unit_id.clone());
            }
            (Membership::Member, false) => fn_ += 1,
            (Membership::NonMember, true) => fp += 1,
            (Membership::NonMember, false) => tn += 1,
        }
    }
    true_positive_ids.sort();
    let tpr = if tp + fn_ > 0 {
        tp as f64 / (tp + fn_) as f64
    } else {
        0.0
    };
    let fpr = if fp + tn > 0 {
        fp as f64 / (fp + tn) as f64
    } else {
        0.0
    };
    Ok(MiaReport {
        tp,
        fp,
        tn,
        fn_,
        tpr,
        fpr,
        advantage: tpr - fpr,
        tau: threshold.tau,
        tau_provenance: threshold.provenance.clone(),
        true_positive_ids,
    })
}

/// Score members and non-members under one model and classify. The sets
/// must be balanced and disjoint by unit id.
pub fn attack_model<F>(
    score: F,
    members: &[ParallelUnit],
    nonmembers: &[ParallelUnit],
    threshold: &Threshold,
) -> Result<MiaReport>
where
    F: Fn(&ParallelUnit) -> Result<f64>,
{
    if members.len() != nonmembers.len() {
        return Err(Error::Imbalance {
            members: members.len(),
            nonmembers: nonmembers.len(),
        });
    }
    let member_ids: HashSet<&str> = members.iter().map(|u| u.unit_id.as_str()).collect();
    for unit in nonmembers {
        if member_ids.contains(unit.unit_id.as_str()) {
            return Err(Error::InvalidInput(format!(
                "unit {} appears in both member and non-member sets",
                unit.unit_id
            )));
        }
    }
    let mut records = Vec::with_capacity(members.len() + nonmembers.len());
    for (units, membership) in [(members, Membership::Member), (nonmembers, Membership::NonMember)]
    {
        for unit in units {
            records.push(LossRecord {
                unit_id: unit.unit_id.clone(),
                membership,
                loss: score(unit)?,
            });
        }
    }
    classify(&records, threshold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Granularity;

    fn unit(id: &str) -> ParallelUnit {
        ParallelUnit {
            unit_id: id.to_string(),
            granularity: Granularity::Sentence,
            dialogue_id: format!("d-{id}"),
            src: format!("src {id}"),
            tgt: format!("tgt {id}"),
        }
    }

    fn units(n: usize, prefix: &str) -> Vec<ParallelUnit> {
        (0..n).map(|i| unit(&format!("{prefix}{i}"))).collect()
    }

    fn tau(v: f64) -> Threshold {
        Threshold {
            tau: v,
            provenance: "test".into(),
        }
    }

    #[test]
    fn tau_is_mean_of_losses() {
        let us = units(2, "u");
        let losses = [0.2, 0.4];
        let t = compute_tau(
            |u| Ok(losses[u.unit_id.strip_prefix('u').unwrap().parse::<usize>().unwrap()]),
            &us,
            "ref",
        )
        .unwrap();
        assert!((t.tau - 0.3).abs() < 1e-15);
        assert_eq!(t.provenance, "ref");

        let single = compute_tau(|_| Ok(0.77), &us[..1], "ref").unwrap();
        assert_eq!(single.tau, 0.77);
        assert!(compute_tau(|_| Ok(0.0), &[], "ref").is_err());
    }

    #[test]
    fn balanced_sample_is_exact_and_deterministic() {
        let train = units(13_380, "t");
        let sample = balanced_members(&train, 2_488 + 2_109, 4).unwrap();
        assert_eq!(sample.len(), 4_597);
        let ids: HashSet<&str> = sample.iter().map(|u| u.unit_id.as_str()).collect();
        assert_eq!(ids.len(), 4_597, "sample contains duplicates");
        let again = balanced_members(&train, 4_597, 4).unwrap();
        assert_eq!(sample, again);
        let other = balanced_members(&train, 4_597, 5).unwrap();
        assert_ne!(sample, other);
    }

    #[test]
    fn balanced_sample_full_train_set() {
        let train = units(10, "t");
        let sample = balanced_members(&train, 10, 1).unwrap();
        let mut ids: Vec<&str> = sample.iter().map(|u| u.unit_id.as_str()).collect();
        ids.sort();
        let mut expected: Vec<String> = (0..10).map(|i| format!("t{i}")).collect();
        expected.sort();
        assert_eq!(ids, expected.iter().map(String::as_str).collect::<Vec<_>>());
        assert!(balanced_members(&train, 11, 1).is_err());
    }

    #[test]
    fn classify_counts_and_boundary() {
        let records = vec![
            LossRecord {
                unit_id: "a".into(),
                membership: Membership::Member,
                loss: 0.5,
            },
            LossRecord {
                unit_id: "b".into(),
                membership: Membership::Member,
                loss: 1.0, // exactly tau: member by the inclusive boundary
            },
            LossRecord {
                unit_id: "c".into(),
                membership: Membership::Member,
                loss: 1.5,
            },
            LossRecord {
                unit_id: "d".into(),
                membership: Membership::NonMember,
                loss: 0.9,
            },
            LossRecord {
                unit_id: "e".into(),
                membership: Membership::NonMember,
                loss: 1.1,
            },
        ];
        let report = classify(&records, &tau(1.0)).unwrap();
        assert_eq!((report.tp, report.fn_, report.fp, report.tn), (2, 1, 1, 1));
        assert_eq!(report.true_positive_ids, vec!["a", "b"]);
        assert!((report.tpr - 2.0 / 3.0).abs() < 1e-15);
        assert!((report.fpr - 0.5).abs() < 1e-15);
        assert!((report.advantage - (2.0 / 3.0 - 0.5)).abs() < 1e-15);
    }

    #[test]
    fn classify_is_order_invariant() {
        let mut records: Vec<LossRecord> = (0..20)
            .map(|i| LossRecord {
                unit_id: format!("u{i}"),
                membership: if i % 3 == 0 {
                    Membership::Member
                } else {
                    Membership::NonMember
                },
                loss: (i as f64) * 0.1,
            })
            .collect();
        let a = classify(&records, &tau(0.95)).unwrap();
        records.reverse();
        let b = classify(&records, &tau(0.95)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn advantage_arithmetic() {
        // tpr 0.8, fpr 0.3 → advantage 0.5
        let mut records = Vec::new();
        for i in 0..10 {
            records.push(LossRecord {
                unit_id: format!("m{i}"),
                membership: Membership::Member,
                loss: if i < 8 { 0.1 } else { 2.0 },
            });
            records.push(LossRecord {
                unit_id: format!("n{i}"),
                membership: Membership::NonMember,
                loss: if i < 3 { 0.1 } else { 2.0 },
            });
        }
        let report = classify(&records, &tau(1.0)).unwrap();
        assert!((report.advantage - 0.5).abs() < 1e-15);
    }

    #[test]
    fn constant_model_has_zero_advantage() {
        let members = units(5, "m");
        let nonmembers = units(5, "n");
        let report = attack_model(|_| Ok(0.3), &members, &nonmembers, &tau(0.5)).unwrap();
        assert_eq!(report.advantage, 0.0);
        assert_eq!(report.tpr, report.fpr);
    }

    #[test]
    fn perfect_separation_has_advantage_one() {
        let members = units(5, "m");
        let nonmembers = units(5, "n");
        let report = attack_model(
            |u| Ok(if u.unit_id.starts_with('m') { 0.1 } else { 2.0 }),
            &members,
            &nonmembers,
            &tau(0.5),
        )
        .unwrap();
        assert_eq!(report.advantage, 1.0);
    }

    #[test]
    fn negative_advantage_is_reported() {
        let members = units(4, "m");
        let nonmembers = units(4, "n");
        // inverted model: members score high, non-members low
        let report = attack_model(
            |u| Ok(if u.unit_id.starts_with('m') { 2.0 } else { 0.1 }),
            &members,
            &nonmembers,
            &tau(0.5),
        )
        .unwrap();
        assert_eq!(report.advantage, -1.0);
        assert!(report.advantage >= -1.0 && report.advantage <= 1.0);
    }

    #[test]
    fn imbalance_and_overlap_rejected() {
        let members = units(3, "m");
        let nonmembers = units(2, "n");
        assert!(matches!(
            attack_model(|_| Ok(0.0), &members, &nonmembers, &tau(0.5)),
            Err(Error::Imbalance { .. })
        ));
        let overlap = units(3, "m");
        assert!(attack_model(|_| Ok(0.0), &members, &overlap, &tau(0.5)).is_err());
    }
}
