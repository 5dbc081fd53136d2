//! Gaussian naive Bayes.

use super::{argmax_lowest, check_labels};
use crate::dataset::NUM_CLASSES;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub const DEFAULT_VAR_SMOOTHING: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct GnbModel {
    /// Sums to 1; absent classes get 0 and are never predicted.
    pub class_priors: Vec<f64>,
    /// 10×d per-class feature means.
    pub means: Matrix,
    /// 10×d per-class feature variances, floored at `var_floor`.
    pub variances: Matrix,
    pub var_floor: f64,
}

pub fn gnb_fit(x: &Matrix, y: &[u8], var_smoothing: f64) -> Result<GnbModel> {
    let (n, d) = x.shape();
    if n == 0 {
        return Err(Error::Degenerate("cannot fit on zero samples".into()));
    }
    if n != y.len() {
        return Err(Error::shape("gnb_fit", x.shape(), (y.len(), 1)));
    }
    if !(var_smoothing >= 0.0) {
        return Err(Error::Parameter(format!(
            "var_smoothing must be non-negative, got {var_smoothing}"
        )));
    }
    check_labels(y)?;

    let mut counts = [0usize; NUM_CLASSES];
    let mut means = Matrix::zeros(NUM_CLASSES, d);
    for (row, &c) in x.row_iter().zip(y) {
        counts[c as usize] += 1;
        for (m, &v) in means.row_mut(c as usize).iter_mut().zip(row) {
            *m += v;
        }
    }
    for (c, &k) in counts.iter().enumerate() {
        if k > 0 {
            means.row_mut(c).iter_mut().for_each(|m| *m /= k as f64);
        }
    }
    let mut variances = Matrix::zeros(NUM_CLASSES, d);
    for (row, &c) in x.row_iter().zip(y) {
        let mu = means.row(c as usize).to_vec();
        for ((s, &v), m) in variances.row_mut(c as usize).iter_mut().zip(row).zip(mu) {
            let dv = v - m;
            *s += dv * dv;
        }
    }

    let max_var = x.column_variances().into_iter().fold(0.0f64, f64::max);
    let mut var_floor = var_smoothing * max_var;
    if !(var_floor > 0.0) {
        // all-constant features: any positive floor gives the same argmax
        var_floor = var_smoothing.max(f64::MIN_POSITIVE);
    }
    for (c, &k) in counts.iter().enumerate() {
        let denom = k.max(1) as f64;
        for s in variances.row_mut(c) {
            *s = (*s / denom).max(var_floor);
        }
    }
    let class_priors = counts.iter().map(|&k| k as f64 / n as f64).collect();
    Ok(GnbModel {
        class_priors,
        means,
        variances,
        var_floor,
    })
}

/// Joint log-likelihood `ln P(c) + Σ ln N(x_j | μ_cj, σ²_cj)` for each class.
pub fn gnb_log_posteriors(model: &GnbModel, x: &[f64]) -> [f64; NUM_CLASSES] {
    let mut out = [f64::NEG_INFINITY; NUM_CLASSES];
    for (c, o) in out.iter_mut().enumerate() {
        let prior = model.class_priors[c];
        if prior <= 0.0 {
            continue;
        }
        let mut ll = 0.0;
        for ((&v, &m), &s) in x
            .iter()
            .zip(model.means.row(c))
            .zip(model.variances.row(c))
        {
            let dv = v - m;
            ll += (2.0 * std::f64::consts::PI * s).ln() + dv * dv / s;
        }
        *o = prior.ln() - 0.5 * ll;
    }
    out
}

pub fn gnb_predict(model: &GnbModel, x: &Matrix) -> Result<Vec<u8>> {
    if x.cols() != model.means.cols() {
        return Err(Error::shape("gnb_predict", x.shape(), model.means.shape()));
    }
    Ok(x
        .row_iter()
        .map(|row| argmax_lowest(&gnb_log_posteriors(model, row)) as u8)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_gaussians() -> (Matrix, Vec<u8>) {
        // class 0 centred at −1, class 1 at +1, equal spread and size
        let x = Matrix::new(6, 1, vec![-1.5, -1.0, -0.5, 0.5, 1.0, 1.5]).unwrap();
        (x, vec![0, 0, 0, 1, 1, 1])
    }

    #[test]
    fn symmetric_classes_split_at_zero() {
        let (x, y) = two_gaussians();
        let model = gnb_fit(&x, &y, DEFAULT_VAR_SMOOTHING).unwrap();
        // brute-force posterior comparison on a grid
        let grid: Vec<f64> = (-200..=200).map(|i| i as f64 * 0.01).collect();
        let preds = gnb_predict(&model, &Matrix::new(grid.len(), 1, grid.clone()).unwrap()).unwrap();
        for (&g, &p) in grid.iter().zip(&preds) {
            let post0 = (-(g + 1.0f64).powi(2)).exp();
            let post1 = (-(g - 1.0f64).powi(2)).exp();
            if g < -1e-9 {
                assert!(post0 > post1);
                assert_eq!(p, 0, "x = {g}");
            } else if g > 1e-9 {
                assert_eq!(p, 1, "x = {g}");
            } else {
                // exact tie resolves to the lower class
                assert_eq!(p, 0);
            }
        }
    }

    #[test]
    fn single_class_is_constant() {
        let x = Matrix::new(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let model = gnb_fit(&x, &[6, 6, 6], DEFAULT_VAR_SMOOTHING).unwrap();
        let q = Matrix::new(2, 2, vec![-50.0, 0.0, 100.0, 7.0]).unwrap();
        assert_eq!(gnb_predict(&model, &q).unwrap(), vec![6, 6]);
        assert!((model.class_priors.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn query_at_a_tight_class_mean() {
        let x = Matrix::new(6, 1, vec![0.0, 0.0, 5.0, 5.0, 10.0, 10.0]).unwrap();
        let model = gnb_fit(&x, &[0, 0, 1, 1, 2, 2], DEFAULT_VAR_SMOOTHING).unwrap();
        let q = Matrix::new(3, 1, vec![10.0, 5.0, 0.0]).unwrap();
        assert_eq!(gnb_predict(&model, &q).unwrap(), vec![2, 1, 0]);
        assert!(model.variances.as_slice().iter().all(|&v| v > 0.0));
    }

    #[test]
    fn prior_rescaling_does_not_change_predictions() {
        let x = Matrix::new(8, 2, vec![0.0, 1.0, 0.5, 1.5, 2.0, 0.0, 2.5, 0.2, 1.0, 3.0, 1.2, 2.8, 0.1, 0.9, 2.2, 0.1])
            .unwrap();
        let y = [0, 0, 1, 1, 2, 2, 0, 1];
        let model = gnb_fit(&x, &y, DEFAULT_VAR_SMOOTHING).unwrap();
        let base = gnb_predict(&model, &x).unwrap();
        for scale in [1e-3, 0.5, 7.0, 1e6] {
            let mut scaled = model.clone();
            scaled.class_priors.iter_mut().for_each(|p| *p *= scale);
            assert_eq!(gnb_predict(&scaled, &x).unwrap(), base);
        }
    }

    #[test]
    fn zero_variance_features_are_floored() {
        let x = Matrix::new(4, 2, vec![0.0, 1.0, 0.0, 2.0, 0.0, 3.0, 0.0, 4.0]).unwrap();
        let model = gnb_fit(&x, &[0, 0, 1, 1], DEFAULT_VAR_SMOOTHING).unwrap();
        assert_eq!(model.var_floor, DEFAULT_VAR_SMOOTHING * 1.25);
        assert_eq!(model.variances.get(0, 0), model.var_floor);
        let preds = gnb_predict(&model, &x).unwrap();
        assert_eq!(preds, vec![0, 0, 1, 1]);
    }
}
