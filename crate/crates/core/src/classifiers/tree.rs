//! CART decision trees with Gini or entropy splitting.
//!
//! Every feature column is sorted once up front. Each node owns the same
//! contiguous segment in every per-feature sorted index array, so the exact
//! threshold scan is linear in the node size and a split is a stable
//! partition of each segment.

use std::fmt;
use std::str::FromStr;

use super::{argmax_lowest, check_labels, ClassCounts};
use crate::dataset::NUM_CLASSES;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    Gini,
    Entropy,
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criterion::Gini => "gini",
            Criterion::Entropy => "entropy",
        })
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gini" => Ok(Criterion::Gini),
            "entropy" => Ok(Criterion::Entropy),
            other => Err(Error::Parameter(format!("unknown split criterion '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    /// `None` for leaves.
    pub split: Option<Split>,
    /// Training class counts that reached this node.
    pub distribution: ClassCounts,
    pub depth: usize,
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        self.split.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeModel {
    /// `nodes[0]` is the root; children always have larger indices.
    pub nodes: Vec<Node>,
    pub criterion: Criterion,
    pub max_depth: Option<usize>,
    pub n_features: usize,
}

impl TreeModel {
    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    fn leaf_for(&self, x: &[f64]) -> &Node {
        let mut node = &self.nodes[0];
        while let Some(s) = node.split {
            node = if x[s.feature] <= s.threshold {
                &self.nodes[s.left]
            } else {
                &self.nodes[s.right]
            };
        }
        node
    }
}

/// Impurity bookkeeping that can be updated one sample at a time while a
/// threshold sweeps through a sorted segment. Larger `score` is better.
trait SplitScore {
    fn move_left(&mut self, class: usize);
    /// Negated weighted child impurity, up to a positive per-node constant.
    fn score(&self) -> f64;
}

struct GiniScore {
    left: ClassCounts,
    right: ClassCounts,
    n_left: u64,
    n_right: u64,
    // Σ counts² on each side, kept exact in integers
    sq_left: u64,
    sq_right: u64,
}

impl GiniScore {
    fn new(parent: &ClassCounts, n: usize) -> Self {
        GiniScore {
            left: [0; NUM_CLASSES],
            right: *parent,
            n_left: 0,
            n_right: n as u64,
            sq_left: 0,
            sq_right: parent.iter().map(|&c| u64::from(c) * u64::from(c)).sum(),
        }
    }
}

impl SplitScore for GiniScore {
    #[inline]
    fn move_left(&mut self, class: usize) {
        let l = u64::from(self.left[class]);
        let r = u64::from(self.right[class]);
        self.sq_left += 2 * l + 1;
        self.sq_right -= 2 * r - 1;
        self.left[class] += 1;
        self.right[class] -= 1;
        self.n_left += 1;
        self.n_right -= 1;
    }

    #[inline]
    fn score(&self) -> f64 {
        // n·(weighted gini) = n − Σ L²/n_L − Σ R²/n_R
        self.sq_left as f64 / self.n_left as f64 + self.sq_right as f64 / self.n_right as f64
    }
}

struct EntropyScore<'a> {
    xlogx: &'a [f64],
    left: ClassCounts,
    right: ClassCounts,
    n_left: usize,
    n_right: usize,
    // Σ c·ln c on each side
    sum_left: f64,
    sum_right: f64,
}

impl<'a> EntropyScore<'a> {
    fn with_table(xlogx: &'a [f64], parent: &ClassCounts, n: usize) -> Self {
        EntropyScore {
            xlogx,
            left: [0; NUM_CLASSES],
            right: *parent,
            n_left: 0,
            n_right: n,
            sum_left: 0.0,
            sum_right: parent.iter().map(|&c| xlogx[c as usize]).sum(),
        }
    }
}

impl SplitScore for EntropyScore<'_> {
    #[inline]
    fn move_left(&mut self, class: usize) {
        let l = self.left[class] as usize;
        let r = self.right[class] as usize;
        self.sum_left += self.xlogx[l + 1] - self.xlogx[l];
        self.sum_right += self.xlogx[r - 1] - self.xlogx[r];
        self.left[class] += 1;
        self.right[class] -= 1;
        self.n_left += 1;
        self.n_right -= 1;
    }

    #[inline]
    fn score(&self) -> f64 {
        // n·ln2·(weighted entropy) = n_L ln n_L − Σ L ln L + n_R ln n_R − Σ R ln R
        -(self.xlogx[self.n_left] - self.sum_left + self.xlogx[self.n_right] - self.sum_right)
    }
}

struct Builder<'a> {
    columns: Vec<f64>,
    sorted: Vec<u32>,
    labels: &'a [u8],
    n: usize,
    d: usize,
    criterion: Criterion,
    max_depth: Option<usize>,
    xlogx: Vec<f64>,
    goes_left: Vec<bool>,
    scratch: Vec<u32>,
    nodes: Vec<Node>,
}

#[derive(Clone, Copy)]
struct Candidate {
    feature: usize,
    position: usize,
    threshold: f64,
    score: f64,
}

impl<'a> Builder<'a> {
    fn new(x: &Matrix, labels: &'a [u8], criterion: Criterion, max_depth: Option<usize>) -> Self {
        let (n, d) = x.shape();
        let mut columns = vec![0.0; n * d];
        for (i, row) in x.row_iter().enumerate() {
            for (f, &v) in row.iter().enumerate() {
                columns[f * n + i] = v;
            }
        }
        let mut sorted = Vec::with_capacity(n * d);
        for f in 0..d {
            let col = &columns[f * n..(f + 1) * n];
            let mut idx: Vec<u32> = (0..n as u32).collect();
            idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]));
            sorted.extend_from_slice(&idx);
        }
        let xlogx = match criterion {
            Criterion::Entropy => (0..=n)
                .map(|k| if k == 0 { 0.0 } else { k as f64 * (k as f64).ln() })
                .collect(),
            Criterion::Gini => Vec::new(),
        };
        Builder {
            columns,
            sorted,
            labels,
            n,
            d,
            criterion,
            max_depth,
            xlogx,
            goes_left: vec![false; n],
            scratch: Vec::with_capacity(n),
            nodes: Vec::new(),
        }
    }

    fn counts(&self, start: usize, end: usize) -> ClassCounts {
        let mut c = [0u32; NUM_CLASSES];
        for &i in &self.sorted[start..end] {
            c[self.labels[i as usize] as usize] += 1;
        }
        c
    }

    fn best_split(&self, start: usize, end: usize, parent: &ClassCounts) -> Option<Candidate> {
        match self.criterion {
            Criterion::Gini => self.scan(start, end, || GiniScore::new(parent, end - start)),
            Criterion::Entropy => self.scan(start, end, || {
                EntropyScore::with_table(&self.xlogx, parent, end - start)
            }),
        }
    }

    fn scan<S: SplitScore>(
        &self,
        start: usize,
        end: usize,
        init: impl Fn() -> S,
    ) -> Option<Candidate> {
        let mut best: Option<Candidate> = None;
        for f in 0..self.d {
            let col = &self.columns[f * self.n..(f + 1) * self.n];
            let seg = &self.sorted[f * self.n + start..f * self.n + end];
            let first = col[seg[0] as usize];
            let last = col[seg[seg.len() - 1] as usize];
            if first == last {
                continue;
            }
            let mut state = init();
            for pos in 0..seg.len() - 1 {
                let s = seg[pos] as usize;
                state.move_left(self.labels[s] as usize);
                let v = col[s];
                let next = col[seg[pos + 1] as usize];
                if v < next {
                    let score = state.score();
                    // strict: ties keep the lowest feature, then the lowest threshold
                    if best.is_none_or(|b| score > b.score) {
                        let mid = 0.5 * (v + next);
                        let threshold = if mid < next { mid } else { v };
                        best = Some(Candidate {
                            feature: f,
                            position: pos + 1,
                            threshold,
                            score,
                        });
                    }
                }
            }
        }
        best
    }

    fn partition(&mut self, start: usize, end: usize, split: &Candidate) {
        let n = self.n;
        let col = &self.columns[split.feature * n..(split.feature + 1) * n];
        for &i in &self.sorted[split.feature * n + start..split.feature * n + end] {
            self.goes_left[i as usize] = col[i as usize] <= split.threshold;
        }
        for f in 0..self.d {
            let seg = &mut self.sorted[f * n + start..f * n + end];
            self.scratch.clear();
            let mut w = 0;
            for r in 0..seg.len() {
                let i = seg[r];
                if self.goes_left[i as usize] {
                    seg[w] = i;
                    w += 1;
                } else {
                    self.scratch.push(i);
                }
            }
            debug_assert_eq!(w, split.position);
            seg[w..].copy_from_slice(&self.scratch);
        }
    }

    fn build(mut self) -> Vec<Node> {
        // (node index, segment start, segment end)
        let mut stack = vec![(0usize, 0usize, self.n)];
        self.nodes.push(Node {
            split: None,
            distribution: self.counts(0, self.n),
            depth: 0,
        });
        while let Some((id, start, end)) = stack.pop() {
            let distribution = self.nodes[id].distribution;
            let depth = self.nodes[id].depth;
            let pure = distribution.iter().filter(|&&c| c > 0).count() <= 1;
            let depth_hit = self.max_depth.is_some_and(|m| depth >= m);
            if pure || depth_hit || end - start < 2 {
                continue;
            }
            let Some(split) = self.best_split(start, end, &distribution) else {
                continue;
            };
            self.partition(start, end, &split);
            let mid = start + split.position;
            let left = self.nodes.len();
            let right = left + 1;
            let left_counts = self.counts(start, mid);
            let right_counts = self.counts(mid, end);
            self.nodes.push(Node {
                split: None,
                distribution: left_counts,
                depth: depth + 1,
            });
            self.nodes.push(Node {
                split: None,
                distribution: right_counts,
                depth: depth + 1,
            });
            self.nodes[id].split = Some(Split {
                feature: split.feature,
                threshold: split.threshold,
                left,
                right,
            });
            stack.push((right, mid, end));
            stack.push((left, start, mid));
        }
        self.nodes
    }
}

/// Greedy top-down CART induction.
///
/// A node becomes a leaf when it is pure, when `max_depth` is reached, or
/// when every feature is constant on it. Otherwise it takes the split with
/// the largest impurity decrease, even a zero one, so XOR-like patterns can
/// still be resolved one level further down.
pub fn tree_fit(
    x: &Matrix,
    y: &[u8],
    criterion: Criterion,
    max_depth: Option<usize>,
) -> Result<TreeModel> {
    if x.rows() == 0 {
        return Err(Error::Degenerate("cannot fit a tree on zero samples".into()));
    }
    if x.rows() != y.len() {
        return Err(Error::shape("tree_fit", x.shape(), (y.len(), 1)));
    }
    if x.rows() > u32::MAX as usize {
        return Err(Error::Parameter("too many samples".into()));
    }
    check_labels(y)?;
    let nodes = Builder::new(x, y, criterion, max_depth).build();
    Ok(TreeModel {
        nodes,
        criterion,
        max_depth,
        n_features: x.cols(),
    })
}

pub fn tree_predict(model: &TreeModel, x: &Matrix) -> Result<Vec<u8>> {
    if x.cols() != model.n_features {
        return Err(Error::shape(
            "tree_predict",
            x.shape(),
            (x.rows(), model.n_features),
        ));
    }
    Ok(x
        .row_iter()
        .map(|row| argmax_lowest(&model.leaf_for(row).distribution) as u8)
        .collect())
}

#[cfg(test)]
fn impurity(criterion: Criterion, counts: &[u32]) -> f64 {
    match criterion {
        Criterion::Gini => super::gini_impurity(counts).unwrap(),
        Criterion::Entropy => super::entropy(counts).unwrap(),
    }
}
