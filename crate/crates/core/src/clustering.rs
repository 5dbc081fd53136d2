//! k-means with k-means++ seeding, and normalized mutual information.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{squared_distance, Matrix};

pub const DEFAULT_MAX_ITER: usize = 300;
pub const DEFAULT_TOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct KmeansModel {
    pub centroids: Matrix,
    /// Sum of squared distances from each training row to its centroid.
    pub inertia: f64,
    pub iterations_run: usize,
    pub converged: bool,
    /// Inertia of each assignment step, first to last.
    pub inertia_history: Vec<f64>,
    /// Cluster of each training row under the final centroids.
    pub labels: Vec<usize>,
}

fn nearest(centroids: &Matrix, row: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centre) in centroids.row_iter().enumerate() {
        let d = squared_distance(row, centre);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn assign(centroids: &Matrix, x: &Matrix, labels: &mut [usize], dists: &mut [f64]) -> f64 {
    let mut inertia = 0.0;
    for (i, row) in x.row_iter().enumerate() {
        let (c, d) = nearest(centroids, row);
        labels[i] = c;
        dists[i] = d;
        inertia += d;
    }
    inertia
}

/// k-means++: first centre uniform, each later one drawn with probability
/// proportional to its squared distance from the nearest chosen centre.
fn plus_plus(x: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let n = x.rows();
    let mut centroids = Matrix::zeros(k, x.cols());
    let first = rng.gen_range(0..n);
    centroids.row_mut(0).copy_from_slice(x.row(first));
    let mut d2: Vec<f64> = x.row_iter().map(|r| squared_distance(r, x.row(first))).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if acc > target && d > 0.0 {
                    chosen = Some(i);
                    break;
                }
            }
            // rounding can leave the target just past the final sum
            chosen.unwrap_or_else(|| d2.iter().rposition(|&d| d > 0.0).unwrap())
        } else {
            rng.gen_range(0..n)
        };
        centroids.row_mut(c).copy_from_slice(x.row(pick));
        for (i, row) in x.row_iter().enumerate() {
            let d = squared_distance(row, x.row(pick));
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }
    centroids
}

pub fn kmeans_fit(x: &Matrix, k: usize, seed: u64, max_iter: usize, tol: f64) -> Result<KmeansModel> {
    let (n, d) = x.shape();
    if k == 0 || k > n {
        return Err(Error::Parameter(format!(
            "k must be in 1..={n}, got {k}"
        )));
    }
    if !(tol >= 0.0) {
        return Err(Error::Parameter(format!("tol must be non-negative, got {tol}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus(x, k, &mut rng);
    let mut labels = vec![0usize; n];
    let mut dists = vec![0.0; n];
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    history.push(assign(&centroids, x, &mut labels, &mut dists));

    while iterations < max_iter {
        iterations += 1;
        let mut sums = Matrix::zeros(k, d);
        let mut counts = vec![0usize; k];
        for (row, &c) in x.row_iter().zip(&labels) {
            counts[c] += 1;
            for (s, &v) in sums.row_mut(c).iter_mut().zip(row) {
                *s += v;
            }
        }
        let mut taken = vec![false; n];
        for c in 0..k {
            if counts[c] > 0 {
                let inv = 1.0 / counts[c] as f64;
                sums.row_mut(c).iter_mut().for_each(|s| *s *= inv);
            } else {
                // empty: move to the point worst served by its centroid
                let far = (0..n)
                    .filter(|&i| !taken[i])
                    .fold(None, |best: Option<usize>, i| match best {
                        Some(b) if dists[b] >= dists[i] => Some(b),
                        _ => Some(i),
                    })
                    .expect("k ≤ n leaves a free point");
                taken[far] = true;
                dists[far] = 0.0;
                sums.row_mut(c).copy_from_slice(x.row(far));
            }
        }
        let shift: f64 = sums
            .row_iter()
            .zip(centroids.row_iter())
            .map(|(a, b)| squared_distance(a, b))
            .sum();
        centroids = sums;
        history.push(assign(&centroids, x, &mut labels, &mut dists));
        if shift < tol {
            converged = true;
            break;
        }
    }
    Ok(KmeansModel {
        centroids,
        inertia: *history.last().unwrap(),
        iterations_run: iterations,
        converged,
        inertia_history: history,
        labels,
    })
}

pub fn kmeans_assign(model: &KmeansModel, x: &Matrix) -> Result<Vec<usize>> {
    if x.cols() != model.centroids.cols() {
        return Err(Error::shape("kmeans_assign", x.shape(), model.centroids.shape()));
    }
    Ok(x.row_iter().map(|r| nearest(&model.centroids, r).0).collect())
}

fn entropy_of(counts: impl Iterator<Item = usize>, n: f64) -> f64 {
    let mut terms: Vec<f64> = counts
        .map(|c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .collect();
    terms.sort_by(f64::total_cmp);
    terms.iter().sum()
}

/// Mutual information divided by the arithmetic mean of the two entropies
/// (natural log). Partitions with zero entropy on both sides score 1, and
/// on exactly one side score 0.
pub fn nmi<A: Ord + Copy, B: Ord + Copy>(a: &[A], b: &[B]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Length {
            expected: a.len(),
            actual: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::Degenerate("nmi of empty labelings".into()));
    }
    let n = a.len() as f64;
    let mut ca = BTreeMap::new();
    let mut cb = BTreeMap::new();
    let mut joint = BTreeMap::new();
    for (&u, &v) in a.iter().zip(b) {
        *ca.entry(u).or_insert(0usize) += 1;
        *cb.entry(v).or_insert(0usize) += 1;
        *joint.entry((u, v)).or_insert(0usize) += 1;
    }
    let ha = entropy_of(ca.values().copied(), n);
    let hb = entropy_of(cb.values().copied(), n);
    if ca.len() == 1 && cb.len() == 1 {
        return Ok(1.0);
    }
    if ca.len() == 1 || cb.len() == 1 {
        return Ok(0.0);
    }
    if joint.len() == ca.len() && joint.len() == cb.len() {
        // one-to-one labelings: exactly 1 rather than a rounded ratio
        return Ok(1.0);
    }
    // sorted terms make the sum independent of label names and argument order
    let mut terms: Vec<f64> = joint
        .iter()
        .map(|(&(u, v), &nij)| {
            let nij = nij as f64;
            let outer = ca[&u] as f64 * cb[&v] as f64;
            nij / n * (n * nij / outer).ln()
        })
        .collect();
    terms.sort_by(f64::total_cmp);
    let mi: f64 = terms.iter().sum();
    Ok((mi / (0.5 * (ha + hb))).clamp(0.0, 1.0))
}
