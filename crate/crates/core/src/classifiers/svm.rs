//! Kernel support vector machine.
//!
//! Each class pair gets a binary C-SVM solved by SMO on the dual. The
//! working pair is chosen by the maximal-violation rule for the first index
//! and the second-order gain rule for the second, and the solver stops once
//! the largest KKT violation `m(α) − M(α)` drops below `tol`. Multi-class
//! prediction is one-vs-one majority voting.

use std::collections::HashMap;
use std::fmt;
use std::rc::Rc;
use std::time::{Duration, Instant};

use super::{argmax_lowest, check_labels};
use crate::dataset::NUM_CLASSES;
use crate::error::{Error, Result};
use crate::linalg::{dot, squared_distance, Matrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    Linear,
    /// `(1 + x·xi)^degree`
    Polynomial { degree: u32 },
    /// `exp(−γ‖x − xi‖²)`
    Rbf { gamma: f64 },
}

impl Kernel {
    fn validate(&self) -> Result<()> {
        match *self {
            Kernel::Polynomial { degree } if degree < 1 => Err(Error::Parameter(
                "polynomial degree must be at least 1".into(),
            )),
            Kernel::Rbf { gamma } if !(gamma > 0.0) || !gamma.is_finite() => Err(
                Error::Parameter(format!("rbf gamma must be positive, got {gamma}")),
            ),
            _ => Ok(()),
        }
    }

    #[inline]
    fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Kernel::Linear => dot(a, b),
            Kernel::Polynomial { degree } => (1.0 + dot(a, b)).powi(degree as i32),
            Kernel::Rbf { gamma } => (-gamma * squared_distance(a, b)).exp(),
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kernel::Linear => write!(f, "linear"),
            Kernel::Polynomial { degree } => write!(f, "polynomial(degree={degree})"),
            Kernel::Rbf { gamma } => write!(f, "rbf(gamma={gamma:.6e})"),
        }
    }
}

pub fn kernel_eval(kernel: Kernel, x: &[f64], xi: &[f64]) -> Result<f64> {
    if x.len() != xi.len() {
        return Err(Error::shape("kernel_eval", (1, x.len()), (1, xi.len())));
    }
    kernel.validate()?;
    Ok(kernel.eval(x, xi))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmParams {
    pub kernel: Kernel,
    /// Box constraint.
    pub c: f64,
    /// KKT tolerance on the maximal violation.
    pub tol: f64,
    /// Iteration cap per binary problem, in multiples of its sample count.
    pub max_passes: usize,
    /// Memory for cached kernel rows per binary problem.
    pub cache_bytes: usize,
    /// Wall-clock limit for the whole multi-class fit.
    pub time_budget: Option<Duration>,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            kernel: Kernel::Rbf { gamma: 0.1 },
            c: 5.0,
            tol: 1e-3,
            max_passes: 100,
            cache_bytes: 512 << 20,
            time_budget: None,
        }
    }
}

/// One binary machine between `positive` (y = +1) and `negative` (y = −1).
#[derive(Debug, Clone, PartialEq)]
pub struct PairModel {
    pub positive: u8,
    pub negative: u8,
    /// Rows of `SvmModel::support_vectors` used by this machine.
    pub sv_index: Vec<u32>,
    /// `αᵢ·yᵢ` aligned with `sv_index`.
    pub dual_coef: Vec<f64>,
    pub bias: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl PairModel {
    pub fn decision(&self, kernel_row: &[f64]) -> f64 {
        let mut f = self.bias;
        for (&i, &a) in self.sv_index.iter().zip(&self.dual_coef) {
            f += a * kernel_row[i as usize];
        }
        f
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub kernel: Kernel,
    pub c: f64,
    /// Training samples that are a support vector of at least one pair.
    pub support_vectors: Matrix,
    pub pairs: Vec<PairModel>,
    /// Set when only one class was present.
    pub constant_class: Option<u8>,
    pub converged: bool,
    pub warnings: Vec<String>,
}

impl SvmModel {
    pub fn n_features(&self) -> usize {
        self.support_vectors.cols()
    }

    fn kernel_row(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.support_vectors.row_iter().map(|sv| self.kernel.eval(sv, x)));
    }

    /// Per-pair decision values for one sample.
    pub fn decision_values(&self, x: &[f64]) -> Vec<f64> {
        let mut row = Vec::new();
        self.kernel_row(x, &mut row);
        self.pairs.iter().map(|p| p.decision(&row)).collect()
    }

    fn vote(&self, decisions: impl Iterator<Item = f64>) -> u8 {
        if let Some(c) = self.constant_class {
            return c;
        }
        let mut votes = [0u32; NUM_CLASSES];
        for (p, f) in self.pairs.iter().zip(decisions) {
            let winner = if f >= 0.0 { p.positive } else { p.negative };
            votes[winner as usize] += 1;
        }
        argmax_lowest(&votes) as u8
    }
}

/// LRU cache of kernel rows `K(i, ·)` over one binary problem.
struct KernelRows<'a> {
    x: &'a Matrix,
    kernel: Kernel,
    rows: Vec<Option<Rc<[f64]>>>,
    last_used: Vec<u64>,
    resident: Vec<usize>,
    capacity: usize,
    clock: u64,
}

impl<'a> KernelRows<'a> {
    fn new(x: &'a Matrix, kernel: Kernel, cache_bytes: usize) -> Self {
        let n = x.rows();
        let capacity = (cache_bytes / (8 * n.max(1))).clamp(2, n.max(2));
        KernelRows {
            x,
            kernel,
            rows: vec![None; n],
            last_used: vec![0; n],
            resident: Vec::with_capacity(capacity),
            capacity,
            clock: 0,
        }
    }

    fn get(&mut self, i: usize) -> Rc<[f64]> {
        self.clock += 1;
        self.last_used[i] = self.clock;
        if let Some(r) = &self.rows[i] {
            return Rc::clone(r);
        }
        if self.resident.len() >= self.capacity {
            let (slot, _) = self
                .resident
                .iter()
                .enumerate()
                .min_by_key(|(_, &r)| self.last_used[r])
                .expect("cache holds at least two rows");
            let victim = self.resident.swap_remove(slot);
            self.rows[victim] = None;
        }
        let xi = self.x.row(i);
        let row: Rc<[f64]> = self
            .x
            .row_iter()
            .map(|xt| self.kernel.eval(xi, xt))
            .collect();
        self.rows[i] = Some(Rc::clone(&row));
        self.resident.push(i);
        row
    }
}

const TAU: f64 = 1e-12;

struct BinarySolution {
    alpha: Vec<f64>,
    bias: f64,
    converged: bool,
    iterations: usize,
}

fn solve_binary(
    x: &Matrix,
    y: &[f64],
    params: &SvmParams,
    deadline: Option<Instant>,
) -> Result<BinarySolution> {
    let n = x.rows();
    let c = params.c;
    let mut cache = KernelRows::new(x, params.kernel, params.cache_bytes);
    let diag: Vec<f64> = x.row_iter().map(|r| params.kernel.eval(r, r)).collect();
    let mut alpha = vec![0.0; n];
    // gradient of ½αᵀQα − eᵀα
    let mut grad = vec![-1.0; n];
    let max_iter = params.max_passes.saturating_mul(n).max(1000);
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iter {
        if iterations % 256 == 0 {
            if let Some(d) = deadline {
                if Instant::now() >= d {
                    return Err(Error::Timeout {
                        budget_secs: params.time_budget.map_or(0.0, |b| b.as_secs_f64()),
                    });
                }
            }
        }

        // first index: maximal −y·G over the "up" set
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = usize::MAX;
        for t in 0..n {
            let up = if y[t] > 0.0 { alpha[t] < c } else { alpha[t] > 0.0 };
            if up {
                let v = -y[t] * grad[t];
                if v >= gmax {
                    gmax = v;
                    i_sel = t;
                }
            }
        }
        if i_sel == usize::MAX {
            converged = true;
            break;
        }
        let qi = cache.get(i_sel);

        // second index: best second-order gain over the "low" set
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = usize::MAX;
        let mut best_obj = f64::INFINITY;
        for t in 0..n {
            let low = if y[t] > 0.0 { alpha[t] > 0.0 } else { alpha[t] < c };
            if !low {
                continue;
            }
            let v = y[t] * grad[t];
            if v >= gmax2 {
                gmax2 = v;
            }
            let grad_diff = gmax + v;
            if grad_diff > 0.0 {
                let quad = (diag[i_sel] + diag[t] - 2.0 * qi[t]).max(TAU);
                let obj = -(grad_diff * grad_diff) / quad;
                if obj <= best_obj {
                    best_obj = obj;
                    j_sel = t;
                }
            }
        }
        if gmax + gmax2 < params.tol || j_sel == usize::MAX {
            converged = true;
            break;
        }
        let (i, j) = (i_sel, j_sel);
        let qj = cache.get(j);
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let kij = qi[j];
        let quad = (diag[i] + diag[j] - 2.0 * kij).max(TAU);
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let di = (alpha[i] - old_i) * y[i];
        let dj = (alpha[j] - old_j) * y[j];
        for t in 0..n {
            grad[t] += y[t] * (qi[t] * di + qj[t] * dj);
        }
    }

    // bias from free vectors, or the midpoint of the feasible interval
    let mut upper = f64::INFINITY;
    let mut lower = f64::NEG_INFINITY;
    let mut free_sum = 0.0;
    let mut free = 0usize;
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                upper = upper.min(yg);
            } else {
                lower = lower.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                upper = upper.min(yg);
            } else {
                lower = lower.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    let rho = if free > 0 {
        free_sum / free as f64
    } else {
        0.5 * (upper + lower)
    };
    Ok(BinarySolution {
        alpha,
        bias: -rho,
        converged,
        iterations,
    })
}

/// Trains one-vs-one binary machines for every pair of classes present in
/// `y` and pools their support vectors.
pub fn svm_fit(x: &Matrix, y: &[u8], params: &SvmParams) -> Result<SvmModel> {
    if !(params.c > 0.0) {
        return Err(Error::Parameter(format!("C must be positive, got {}", params.c)));
    }
    if !(params.tol > 0.0) {
        return Err(Error::Parameter(format!("tol must be positive, got {}", params.tol)));
    }
    params.kernel.validate()?;
    if x.rows() != y.len() {
        return Err(Error::shape("svm_fit", x.shape(), (y.len(), 1)));
    }
    if x.rows() < 2 {
        return Err(Error::Degenerate("SVM needs at least 2 samples".into()));
    }
    check_labels(y)?;
    let deadline = params.time_budget.map(|b| Instant::now() + b);

    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); NUM_CLASSES];
    for (i, &l) in y.iter().enumerate() {
        by_class[l as usize].push(i);
    }
    let present: Vec<usize> = (0..NUM_CLASSES).filter(|&c| !by_class[c].is_empty()).collect();
    if present.len() == 1 {
        return Ok(SvmModel {
            kernel: params.kernel,
            c: params.c,
            support_vectors: Matrix::zeros(0, x.cols()),
            pairs: Vec::new(),
            constant_class: Some(present[0] as u8),
            converged: true,
            warnings: Vec::new(),
        });
    }

    let mut pool: HashMap<usize, u32> = HashMap::new();
    let mut pool_rows: Vec<usize> = Vec::new();
    let mut pairs = Vec::new();
    let mut warnings = Vec::new();
    for (ai, &a) in present.iter().enumerate() {
        for &b in &present[ai + 1..] {
            let idx: Vec<usize> = by_class[a].iter().chain(&by_class[b]).copied().collect();
            let sub = x.select_rows(&idx);
            let targets: Vec<f64> = idx
                .iter()
                .map(|&i| if y[i] as usize == a { 1.0 } else { -1.0 })
                .collect();
            let sol = solve_binary(&sub, &targets, params, deadline)?;
            if !sol.converged {
                warnings.push(format!(
                    "pair ({a}, {b}): SMO stopped after {} iterations without reaching tol {}",
                    sol.iterations, params.tol
                ));
            }
            let mut sv_index = Vec::new();
            let mut dual_coef = Vec::new();
            for (local, &al) in sol.alpha.iter().enumerate() {
                if al > 0.0 {
                    let global = idx[local];
                    let slot = *pool.entry(global).or_insert_with(|| {
                        pool_rows.push(global);
                        (pool_rows.len() - 1) as u32
                    });
                    sv_index.push(slot);
                    dual_coef.push(al * targets[local]);
                }
            }
            pairs.push(PairModel {
                positive: a as u8,
                negative: b as u8,
                sv_index,
                dual_coef,
                bias: sol.bias,
                converged: sol.converged,
                iterations: sol.iterations,
            });
        }
    }
    Ok(SvmModel {
        kernel: params.kernel,
        c: params.c,
        support_vectors: x.select_rows(&pool_rows),
        converged: pairs.iter().all(|p| p.converged),
        pairs,
        constant_class: None,
        warnings,
    })
}

pub fn svm_predict(model: &SvmModel, x: &Matrix) -> Result<Vec<u8>> {
    if model.constant_class.is_none() && x.cols() != model.n_features() {
        return Err(Error::shape(
            "svm_predict",
            x.shape(),
            model.support_vectors.shape(),
        ));
    }
    let mut row = Vec::with_capacity(model.support_vectors.rows());
    Ok(x
        .row_iter()
        .map(|xr| {
            model.kernel_row(xr, &mut row);
            model.vote(model.pairs.iter().map(|p| p.decision(&row)))
        })
        .collect())
}

/// Linear-kernel machines collapsed to explicit `(w, b)` per pair.
pub fn linear_weights(model: &SvmModel) -> Option<Vec<(Vec<f64>, f64)>> {
    if model.kernel != Kernel::Linear {
        return None;
    }
    let d = model.n_features();
    Some(
        model
            .pairs
            .iter()
            .map(|p| {
                let mut w = vec![0.0; d];
                for (&i, &a) in p.sv_index.iter().zip(&p.dual_coef) {
                    for (wk, &v) in w.iter_mut().zip(model.support_vectors.row(i as usize)) {
                        *wk += a * v;
                    }
                }
                (w, p.bias)
            })
            .collect(),
    )
}

/// Predicts through collapsed linear weights; same votes as [`svm_predict`].
pub fn linear_predict(model: &SvmModel, x: &Matrix) -> Option<Vec<u8>> {
    let weights = linear_weights(model)?;
    Some(
        x.row_iter()
            .map(|xr| model.vote(weights.iter().map(|(w, b)| dot(w, xr) + b)))
            .collect(),
    )
}
