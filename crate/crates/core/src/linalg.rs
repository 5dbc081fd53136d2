//! Dense row-major matrices and the handful of kernels the rest of the crate
//! needs: products, covariance and a cyclic Jacobi eigensolver for symmetric
//! matrices.

use crate::error::{Error, Result};

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Data(format!(
                "matrix {rows}x{cols} needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_diag(values: &[f64]) -> Self {
        let n = values.len();
        let mut m = Matrix::zeros(n, n);
        for (i, &v) in values.iter().enumerate() {
            m.data[i * n + i] = v;
        }
        m
    }

    /// Builds a matrix from equally sized rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::Data(format!(
                    "ragged rows: expected {cols} columns, found {}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        // chunks_exact(0) panics, so route empty-width matrices through a range
        (0..self.rows).map(move |r| self.row(r))
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// New matrix made of the selected rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn column_means(&self) -> Vec<f64> {
        let mut means = vec![0.0; self.cols];
        for row in self.row_iter() {
            for (m, &v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        let n = self.rows.max(1) as f64;
        means.iter_mut().for_each(|m| *m /= n);
        means
    }

    /// Population variance of every column.
    pub fn column_variances(&self) -> Vec<f64> {
        let means = self.column_means();
        let mut vars = vec![0.0; self.cols];
        for row in self.row_iter() {
            for ((acc, &v), &m) in vars.iter_mut().zip(row).zip(&means) {
                let d = v - m;
                *acc += d * d;
            }
        }
        let n = self.rows.max(1) as f64;
        vars.iter_mut().for_each(|v| *v /= n);
        vars
    }

    /// Subtracts `offset` from every row.
    pub fn sub_row_vector(&self, offset: &[f64]) -> Result<Matrix> {
        if offset.len() != self.cols {
            return Err(Error::shape(
                "sub_row_vector",
                self.shape(),
                (1, offset.len()),
            ));
        }
        let mut out = self.clone();
        for r in 0..out.rows {
            for (v, &o) in out.row_mut(r).iter_mut().zip(offset) {
                *v -= o;
            }
        }
        Ok(out)
    }
}

/// Dot product with four independent accumulators; the summation order is
/// fixed so results do not depend on the caller.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        let d0 = x[0] - y[0];
        let d1 = x[1] - y[1];
        let d2 = x[2] - y[2];
        let d3 = x[3] - y[3];
        acc[0] += d0 * d0;
        acc[1] += d1 * d1;
        acc[2] += d2 * d2;
        acc[3] += d3 * d3;
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        let d = x - y;
        tail += d * d;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn transpose(a: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(a.cols, a.rows);
    for r in 0..a.rows {
        for (c, &v) in a.row(r).iter().enumerate() {
            out.data[c * a.rows + r] = v;
        }
    }
    out
}

/// `A · B` with i-k-j loop order.
pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols != b.rows {
        return Err(Error::shape("matmul", a.shape(), b.shape()));
    }
    let mut out = Matrix::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        let out_row = &mut out.data[i * b.cols..(i + 1) * b.cols];
        for (k, &aik) in a.row(i).iter().enumerate() {
            if aik != 0.0 {
                axpy(aik, b.row(k), out_row);
            }
        }
    }
    Ok(out)
}

/// `A · Bᵀ` without materializing the transpose.
pub fn matmul_transb(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols != b.cols {
        return Err(Error::shape("matmul_transb", a.shape(), b.shape()));
    }
    let mut out = Matrix::zeros(a.rows, b.rows);
    for i in 0..a.rows {
        let ar = a.row(i);
        let out_row = &mut out.data[i * b.rows..(i + 1) * b.rows];
        for (j, o) in out_row.iter_mut().enumerate() {
            *o = dot(ar, b.row(j));
        }
    }
    Ok(out)
}

/// `Aᵀ · B` without materializing the transpose.
pub fn matmul_transa(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.rows != b.rows {
        return Err(Error::shape("matmul_transa", a.shape(), b.shape()));
    }
    let mut out = Matrix::zeros(a.cols, b.cols);
    for r in 0..a.rows {
        let br = b.row(r);
        for (i, &ari) in a.row(r).iter().enumerate() {
            if ari != 0.0 {
                axpy(ari, br, &mut out.data[i * b.cols..(i + 1) * b.cols]);
            }
        }
    }
    Ok(out)
}

/// Sample covariance `XᵀX / (n−1)` of already mean-centered rows.
///
/// Rows are processed in fixed-size blocks so the d×d accumulator is swept
/// once per block rather than once per sample.
pub fn covariance(x: &Matrix) -> Result<Matrix> {
    let (n, d) = x.shape();
    if n < 2 {
        return Err(Error::Degenerate(format!(
            "covariance needs at least 2 rows, got {n}"
        )));
    }
    const BLOCK: usize = 64;
    let mut acc = vec![0.0f64; d * d];
    let mut block_t = vec![0.0f64; d * BLOCK];
    let mut start = 0;
    while start < n {
        let len = BLOCK.min(n - start);
        // block_t[i * len + b] = x[start + b][i]
        for b in 0..len {
            for (i, &v) in x.row(start + b).iter().enumerate() {
                block_t[i * len + b] = v;
            }
        }
        for i in 0..d {
            let ci = &block_t[i * len..(i + 1) * len];
            if ci.iter().all(|&v| v == 0.0) {
                continue;
            }
            for j in i..d {
                acc[i * d + j] += dot(ci, &block_t[j * len..(j + 1) * len]);
            }
        }
        start += len;
    }
    let denom = (n - 1) as f64;
    for i in 0..d {
        for j in i..d {
            let v = acc[i * d + j] / denom;
            acc[i * d + j] = v;
            acc[j * d + i] = v;
        }
    }
    Matrix::new(d, d, acc)
}

/// Eigen-decomposition of a symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EigResult {
    /// Eigenvalues, non-increasing.
    pub values: Vec<f64>,
    /// Column `j` is the unit eigenvector for `values[j]`.
    pub vectors: Matrix,
}

pub const JACOBI_MAX_SWEEPS: usize = 100;
/// Convergence threshold on the off-diagonal Frobenius norm, relative to ‖A‖_F.
pub const JACOBI_OFF_DIAGONAL_TOL: f64 = 1e-10;

fn off_diagonal_norm(a: &[f64], n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let v = a[i * n + j];
            s += v * v;
        }
    }
    (2.0 * s).sqrt()
}

/// Cyclic Jacobi eigensolver.
///
/// Eigenvalues come back sorted descending (stable, so equal values keep
/// their diagonal order) and every eigenvector is flipped so that its
/// largest-magnitude entry is positive.
pub fn symmetric_eig(a: &Matrix) -> Result<EigResult> {
    let (n, m) = a.shape();
    if n != m {
        return Err(Error::shape("symmetric_eig", a.shape(), a.shape()));
    }
    if n == 0 {
        return Err(Error::Degenerate("empty matrix".into()));
    }
    if !a.is_finite() {
        return Err(Error::Contract("matrix has non-finite entries".into()));
    }
    let scale = a.data.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let sym_tol = 1e-10 * scale.max(1.0);
    for i in 0..n {
        for j in (i + 1)..n {
            let diff = (a.get(i, j) - a.get(j, i)).abs();
            if diff > sym_tol {
                return Err(Error::Contract(format!(
                    "matrix is not symmetric: |a[{i},{j}] - a[{j},{i}]| = {diff:e}"
                )));
            }
        }
    }

    let mut w = a.data.clone();
    // rows of `vt` are the eigenvectors (Vᵀ), so rotations touch contiguous rows
    let mut vt = Matrix::identity(n).data;
    let threshold = JACOBI_OFF_DIAGONAL_TOL * a.frobenius_norm();
    let mut row_p = vec![0.0; n];
    let mut row_q = vec![0.0; n];

    let mut converged = off_diagonal_norm(&w, n) <= threshold;
    let mut sweeps = 0;
    while !converged && sweeps < JACOBI_MAX_SWEEPS {
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = w[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = w[p * n + p];
                let aqq = w[q * n + q];
                // negligible relative to both diagonal entries: drop it
                if sweeps > 4
                    && app.abs() + 100.0 * apq.abs() == app.abs()
                    && aqq.abs() + 100.0 * apq.abs() == aqq.abs()
                {
                    w[p * n + q] = 0.0;
                    w[q * n + p] = 0.0;
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.is_infinite() {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                row_p.copy_from_slice(&w[p * n..(p + 1) * n]);
                row_q.copy_from_slice(&w[q * n..(q + 1) * n]);
                for k in 0..n {
                    let (xp, xq) = (row_p[k], row_q[k]);
                    row_p[k] = c * xp - s * xq;
                    row_q[k] = s * xp + c * xq;
                }
                row_p[p] = app - t * apq;
                row_q[q] = aqq + t * apq;
                row_p[q] = 0.0;
                row_q[p] = 0.0;
                w[p * n..(p + 1) * n].copy_from_slice(&row_p);
                w[q * n..(q + 1) * n].copy_from_slice(&row_q);
                for k in 0..n {
                    w[k * n + p] = row_p[k];
                    w[k * n + q] = row_q[k];
                }

                let (vp, vq) = split_two_rows(&mut vt, n, p, q);
                for (xp, xq) in vp.iter_mut().zip(vq.iter_mut()) {
                    let (a0, b0) = (*xp, *xq);
                    *xp = c * a0 - s * b0;
                    *xq = s * a0 + c * b0;
                }
            }
        }
        converged = off_diagonal_norm(&w, n) <= threshold;
    }
    if !converged {
        return Err(Error::NoConvergence {
            sweeps,
            residual: off_diagonal_norm(&w, n),
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    // stable: equal eigenvalues keep their original index order
    order.sort_by(|&i, &j| w[j * n + j].total_cmp(&w[i * n + i]));
    let values: Vec<f64> = order.iter().map(|&i| w[i * n + i]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        let v = &vt[src * n..(src + 1) * n];
        let mut pivot = 0;
        for (k, x) in v.iter().enumerate() {
            if x.abs() > v[pivot].abs() {
                pivot = k;
            }
        }
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for (k, &x) in v.iter().enumerate() {
            vectors.data[k * n + col] = sign * x;
        }
    }
    Ok(EigResult { values, vectors })
}

fn split_two_rows(data: &mut [f64], n: usize, p: usize, q: usize) -> (&mut [f64], &mut [f64]) {
    debug_assert!(p < q);
    let (head, tail) = data.split_at_mut(q * n);
    (&mut head[p * n..(p + 1) * n], &mut tail[..n])
}
