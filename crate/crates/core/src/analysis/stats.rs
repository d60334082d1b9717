//! Effect size and ROC analysis for step-level information gain.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::AnalysisError;

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let ss = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
    (mean, ss / (n - 1.0))
}

/// Standardised mean difference (mean_a - mean_b) / pooled sd, with the
/// pooled variance weighting each sample variance by n - 1.
pub fn cohens_d(sample_a: &[f64], sample_b: &[f64]) -> Result<f64, AnalysisError> {
    if sample_a.len() < 2 || sample_b.len() < 2 {
        return Err(AnalysisError::TooFewSamples {
            a: sample_a.len(),
            b: sample_b.len(),
        });
    }
    if sample_a.iter().chain(sample_b).any(|x| !x.is_finite()) {
        return Err(AnalysisError::NonFinite);
    }
    let (ma, va) = mean_var(sample_a);
    let (mb, vb) = mean_var(sample_b);
    let (na, nb) = (sample_a.len() as f64, sample_b.len() as f64);
    let pooled = ((na - 1.0) * va + (nb - 1.0) * vb) / (na + nb - 2.0);
    if pooled <= 0.0 {
        return Err(AnalysisError::DegenerateSamples);
    }
    Ok((ma - mb) / pooled.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    /// Scores at or above the threshold are predicted positive. The first
    /// point uses +inf.
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocResult {
    /// Ordered by decreasing threshold, from (0, 0) to (1, 1).
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

fn check_scores(pos: &[f64], neg: &[f64]) -> Result<(), AnalysisError> {
    if pos.is_empty() || neg.is_empty() {
        return Err(AnalysisError::EmptyClass);
    }
    if pos.iter().chain(neg).any(|x| x.is_nan()) {
        return Err(AnalysisError::NonFinite);
    }
    Ok(())
}

/// Twice the Mann-Whitney U statistic: two points per (pos > neg) pair and
/// one per tie. Computed by binary search over the sorted negatives.
fn doubled_u(pos: &[f64], sorted_neg: &[f64]) -> u128 {
    pos.iter()
        .map(|&p| {
            let below = sorted_neg.partition_point(|&n| n < p);
            let not_above = sorted_neg.partition_point(|&n| n <= p);
            (2 * below + (not_above - below)) as u128
        })
        .sum()
}

/// ROC curve and AUC. The AUC is the Mann-Whitney probability that a
/// positive outscores a negative, with ties worth one half.
pub fn roc_auc(pos_scores: &[f64], neg_scores: &[f64]) -> Result<RocResult, AnalysisError> {
    check_scores(pos_scores, neg_scores)?;
    let mut neg = neg_scores.to_vec();
    neg.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let (np, nn) = (pos_scores.len(), neg_scores.len());
    let auc = doubled_u(pos_scores, &neg) as f64 / (2 * np * nn) as f64;

    let mut labelled: Vec<(f64, bool)> = pos_scores
        .iter()
        .map(|&s| (s, true))
        .chain(neg_scores.iter().map(|&s| (s, false)))
        .collect();
    labelled.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal));

    let mut points = Vec::with_capacity(labelled.len() + 1);
    points.push(RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    });
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < labelled.len() {
        let threshold = labelled[i].0;
        while i < labelled.len() && labelled[i].0 == threshold {
            if labelled[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            threshold,
            fpr: fp as f64 / nn as f64,
            tpr: tp as f64 / np as f64,
        });
    }
    Ok(RocResult { points, auc })
}

/// Trapezoidal area under a ROC curve.
pub fn curve_area(points: &[RocPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // brute force over every (pos, neg) pair
    fn pair_auc(pos: &[f64], neg: &[f64]) -> f64 {
        let mut twice = 0u64;
        for &p in pos {
            for &n in neg {
                twice += match p.partial_cmp(&n).unwrap() {
                    Ordering::Greater => 2,
                    Ordering::Equal => 1,
                    Ordering::Less => 0,
                };
            }
        }
        twice as f64 / (2 * pos.len() * neg.len()) as f64
    }

    #[test]
    fn cohens_d_cases() {
        let a = [1.0, 2.0, 3.0];
        let b = [2.0, 3.0, 4.0];
        assert!((cohens_d(&a, &b).unwrap() + 1.0).abs() < 1e-12);
        assert!((cohens_d(&b, &a).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(cohens_d(&a, &a).unwrap(), 0.0);
        assert_eq!(cohens_d(&[2.0, 2.0], &[2.0, 2.0]), Err(AnalysisError::DegenerateSamples));
        assert!(matches!(cohens_d(&[1.0], &b), Err(AnalysisError::TooFewSamples { .. })));
    }

    #[test]
    fn roc_cases() {
        assert_eq!(roc_auc(&[0.9, 0.8], &[0.1, 0.2]).unwrap().auc, 1.0);
        assert_eq!(roc_auc(&[0.3, 0.5, 0.5], &[0.5, 0.3, 0.5]).unwrap().auc, 0.5);
        let r = roc_auc(&[0.8, 0.3], &[0.5, 0.2]).unwrap();
        assert_eq!(r.auc, 0.75);
        assert_eq!(r.points.first().map(|p| (p.fpr, p.tpr)), Some((0.0, 0.0)));
        assert_eq!(r.points.last().map(|p| (p.fpr, p.tpr)), Some((1.0, 1.0)));
        assert_eq!(roc_auc(&[], &[1.0]), Err(AnalysisError::EmptyClass));
        assert_eq!(roc_auc(&[f64::NAN], &[1.0]), Err(AnalysisError::NonFinite));
    }

    proptest! {
        #[test]
        fn auc_matches_pairs_and_curve(
            pos in proptest::collection::vec(0i32..20, 1..30),
            neg in proptest::collection::vec(0i32..20, 1..30),
        ) {
            // small integer scores force plenty of ties
            let pos: Vec<f64> = pos.into_iter().map(f64::from).collect();
            let neg: Vec<f64> = neg.into_iter().map(f64::from).collect();
            let r = roc_auc(&pos, &neg).unwrap();
            prop_assert_eq!(r.auc, pair_auc(&pos, &neg));
            prop_assert!((curve_area(&r.points) - r.auc).abs() < 1e-12);
            for w in r.points.windows(2) {
                prop_assert!(w[1].fpr >= w[0].fpr && w[1].tpr >= w[0].tpr);
                prop_assert!(w[1].threshold < w[0].threshold);
            }
            let flipped = roc_auc(&neg, &pos).unwrap().auc;
            prop_assert!((r.auc + flipped - 1.0).abs() < 1e-12);
        }

        #[test]
        fn cohens_d_symmetries(
            a in proptest::collection::vec(-10.0f64..10.0, 2..20),
            b in proptest::collection::vec(-10.0f64..10.0, 2..20),
            shift in -100.0f64..100.0,
            scale in 0.1f64..10.0,
        ) {
            if let Ok(d) = cohens_d(&a, &b) {
                prop_assert!((cohens_d(&b, &a).unwrap() + d).abs() < 1e-9);
                let sa: Vec<f64> = a.iter().map(|x| x + shift).collect();
                let sb: Vec<f64> = b.iter().map(|x| x + shift).collect();
                prop_assert!((cohens_d(&sa, &sb).unwrap() - d).abs() < 1e-7);
                let ka: Vec<f64> = a.iter().map(|x| x * scale).collect();
                let kb: Vec<f64> = b.iter().map(|x| x * scale).collect();
                prop_assert!((cohens_d(&ka, &kb).unwrap().abs() - d.abs()).abs() < 1e-9);
            }
        }
    }
}
