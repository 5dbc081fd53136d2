//! One-vs-rest linear classifier trained by per-sample hinge-loss SGD.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{argmax_lowest, check_labels};
use crate::dataset::NUM_CLASSES;
use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdcParams {
    pub epochs: usize,
    /// Initial step η₀; step t uses η₀ / (1 + η₀·reg·t).
    pub learning_rate: f64,
    /// L2 strength.
    pub reg: f64,
    pub seed: u64,
}

impl Default for SgdcParams {
    fn default() -> Self {
        SgdcParams {
            epochs: 5,
            learning_rate: 0.1,
            reg: 1e-4,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgdcModel {
    /// One hyperplane per class, 10×d.
    pub weights: Matrix,
    pub biases: Vec<f64>,
    pub params: SgdcParams,
}

impl SgdcModel {
    pub fn decision(&self, x: &[f64]) -> [f64; NUM_CLASSES] {
        let mut s = [0.0; NUM_CLASSES];
        for (c, v) in s.iter_mut().enumerate() {
            *v = dot(self.weights.row(c), x) + self.biases[c];
        }
        s
    }
}

/// Applies one hinge + L2 subgradient step to a binary hyperplane.
/// `target` is ±1.
#[inline]
pub(crate) fn hinge_step(w: &mut [f64], b: &mut f64, x: &[f64], target: f64, eta: f64, reg: f64) {
    let margin = target * (dot(w, x) + *b);
    let decay = 1.0 - eta * reg;
    if margin < 1.0 {
        let step = eta * target;
        for (wi, &xi) in w.iter_mut().zip(x) {
            *wi = decay * *wi + step * xi;
        }
        *b += step;
    } else if reg != 0.0 {
        for wi in w.iter_mut() {
            *wi *= decay;
        }
    }
}

pub fn sgdc_fit(x: &Matrix, y: &[u8], params: SgdcParams) -> Result<SgdcModel> {
    // zero is allowed: it is the "no update" baseline
    if !(params.learning_rate >= 0.0) || !params.learning_rate.is_finite() {
        return Err(Error::Parameter(format!(
            "learning rate must be non-negative, got {}",
            params.learning_rate
        )));
    }
    if !(params.reg >= 0.0) {
        return Err(Error::Parameter(format!(
            "regularization must be non-negative, got {}",
            params.reg
        )));
    }
    if x.rows() == 0 {
        return Err(Error::Degenerate("cannot fit on zero samples".into()));
    }
    if x.rows() != y.len() {
        return Err(Error::shape("sgdc_fit", x.shape(), (y.len(), 1)));
    }
    check_labels(y)?;

    let d = x.cols();
    let mut weights = Matrix::zeros(NUM_CLASSES, d);
    let mut biases = vec![0.0; NUM_CLASSES];
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut order: Vec<usize> = (0..x.rows()).collect();
    let eta0 = params.learning_rate;
    let mut t = 0u64;
    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let eta = eta0 / (1.0 + eta0 * params.reg * t as f64);
            let xi = x.row(i);
            for (c, b) in biases.iter_mut().enumerate() {
                let target = if y[i] as usize == c { 1.0 } else { -1.0 };
                hinge_step(weights.row_mut(c), b, xi, target, eta, params.reg);
            }
            t += 1;
        }
    }
    Ok(SgdcModel {
        weights,
        biases,
        params,
    })
}

pub fn sgdc_predict(model: &SgdcModel, x: &Matrix) -> Result<Vec<u8>> {
    if x.cols() != model.weights.cols() {
        return Err(Error::shape("sgdc_predict", x.shape(), model.weights.shape()));
    }
    Ok(x
        .row_iter()
        .map(|row| argmax_lowest(&model.decision(row)) as u8)
        .collect())
}
