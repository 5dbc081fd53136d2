//! Supervised learners: CART trees, a hinge-loss SGD classifier, Gaussian
//! naive Bayes and a kernel SVM, plus the shared impurity and accuracy
//! measures.

pub mod gnb;
pub mod sgd;
pub mod svm;
pub mod tree;

pub use gnb::{gnb_fit, gnb_predict, GnbModel, DEFAULT_VAR_SMOOTHING};
pub use sgd::{sgdc_fit, sgdc_predict, SgdcModel, SgdcParams};
pub use svm::{kernel_eval, svm_fit, svm_predict, Kernel, SvmModel, SvmParams};
pub use tree::{tree_fit, tree_predict, Criterion, TreeModel};

use crate::dataset::NUM_CLASSES;
use crate::error::{Error, Result};

pub type ClassCounts = [u32; NUM_CLASSES];

fn total(counts: &[u32]) -> Result<f64> {
    let total: u64 = counts.iter().map(|&c| u64::from(c)).sum();
    if total == 0 {
        return Err(Error::Degenerate("class counts sum to zero".into()));
    }
    Ok(total as f64)
}

/// `1 − Σ pᵢ²`.
pub fn gini_impurity(counts: &[u32]) -> Result<f64> {
    let n = total(counts)?;
    let sq: f64 = counts.iter().map(|&c| (f64::from(c) / n).powi(2)).sum();
    Ok((1.0 - sq).max(0.0))
}

/// `−Σ pᵢ log₂ pᵢ`, with `0·log 0 = 0`.
pub fn entropy(counts: &[u32]) -> Result<f64> {
    let n = total(counts)?;
    let h: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = f64::from(c) / n;
            -p * p.log2()
        })
        .sum();
    Ok(h.max(0.0))
}

pub fn accuracy(pred: &[u8], truth: &[u8]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::shape(
            "accuracy",
            (pred.len(), 1),
            (truth.len(), 1),
        ));
    }
    if pred.is_empty() {
        return Err(Error::Degenerate("accuracy of zero predictions".into()));
    }
    let hits = pred.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / pred.len() as f64)
}

/// Index of the largest score; the lowest index wins ties.
pub(crate) fn argmax_lowest<T: PartialOrd + Copy>(scores: &[T]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn check_labels(labels: &[u8]) -> Result<()> {
    match labels.iter().find(|&&l| l as usize >= NUM_CLASSES) {
        Some(l) => Err(Error::Data(format!("label {l} is outside 0..=9"))),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gini_examples() {
        assert_eq!(gini_impurity(&[4, 0]).unwrap(), 0.0);
        assert_eq!(gini_impurity(&[2, 2]).unwrap(), 0.5);
        assert_eq!(gini_impurity(&[3, 1]).unwrap(), 0.375);
        assert!(gini_impurity(&[0, 0]).is_err());
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy(&[5, 0]).unwrap(), 0.0);
        assert_eq!(entropy(&[3, 3]).unwrap(), 1.0);
        assert_eq!(entropy(&[1, 1, 1, 1]).unwrap(), 2.0);
        assert!(entropy(&[]).is_err());
    }

    #[test]
    fn impurities_are_symmetric_and_peak_at_uniform() {
        // every 3-class count vector with total in 1..=6
        for total in 1u32..=6 {
            let mut best_gini = (0.0, vec![]);
            let mut best_entropy = (0.0, vec![]);
            for a in 0..=total {
                for b in 0..=(total - a) {
                    let c = total - a - b;
                    let counts = [a, b, c];
                    let g = gini_impurity(&counts).unwrap();
                    let h = entropy(&counts).unwrap();
                    for perm in [[b, a, c], [c, b, a], [a, c, b], [b, c, a], [c, a, b]] {
                        assert!((gini_impurity(&perm).unwrap() - g).abs() < 1e-15);
                        assert!((entropy(&perm).unwrap() - h).abs() < 1e-15);
                    }
                    if g > best_gini.0 + 1e-15 {
                        best_gini = (g, counts.to_vec());
                    }
                    if h > best_entropy.0 + 1e-15 {
                        best_entropy = (h, counts.to_vec());
                    }
                }
            }
            // the maximizer is as balanced as the total allows
            for (_, counts) in [best_gini, best_entropy] {
                if total > 0 && !counts.is_empty() {
                    let max = *counts.iter().max().unwrap();
                    let min = *counts.iter().min().unwrap();
                    assert!(max - min <= 1, "total {total}: {counts:?}");
                }
            }
        }
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[1, 2, 3], &[1, 2, 3]).unwrap(), 1.0);
        assert_eq!(accuracy(&[1, 2, 3], &[4, 5, 6]).unwrap(), 0.0);
        assert!((accuracy(&[1, 2, 3], &[1, 2, 0]).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(accuracy(&[], &[]).is_err());
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax_lowest(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax_lowest(&[0.0; 10]), 0);
    }
}
