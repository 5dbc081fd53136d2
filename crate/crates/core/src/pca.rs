//! Principal component analysis through the covariance eigendecomposition.
//!
//! Rows are samples and columns are features. Fitting subtracts the
//! per-feature mean, forms the `n−1` sample covariance, and keeps the top-k
//! eigenvectors as the rows of `components`.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};

pub const DEFAULT_COMPONENTS: usize = 25;
const MAGIC: &[u8; 4] = b"PCA1";

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    /// Per-feature training mean.
    pub mean: Vec<f64>,
    /// k×d, rows orthonormal.
    pub components: Matrix,
    /// Variance captured by each component, non-increasing.
    pub eigenvalues: Vec<f64>,
}

impl PcaModel {
    pub fn n_components(&self) -> usize {
        self.components.rows()
    }

    pub fn n_features(&self) -> usize {
        self.mean.len()
    }

    /// Flat little-endian dump: `PCA1`, d, k as u64, then mean, eigenvalues
    /// and components as f64.
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.n_features() as u64).to_le_bytes())?;
        w.write_all(&(self.n_components() as u64).to_le_bytes())?;
        for v in self
            .mean
            .iter()
            .chain(&self.eigenvalues)
            .chain(self.components.as_slice())
        {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 20 || &bytes[..4] != MAGIC {
            return Err(Error::Format("not a PCA1 model file".into()));
        }
        let d = u64::from_le_bytes(bytes[4..12].try_into().unwrap()) as usize;
        let k = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
        let expected = 20 + 8 * (d + k + k * d);
        if bytes.len() != expected {
            return Err(Error::Length {
                expected,
                actual: bytes.len(),
            });
        }
        let mut values = bytes[20..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let mean: Vec<f64> = values.by_ref().take(d).collect();
        let eigenvalues: Vec<f64> = values.by_ref().take(k).collect();
        let components = Matrix::new(k, d, values.collect())?;
        if k == 0 || k > d {
            return Err(Error::Format(format!("invalid component count {k} for {d} features")));
        }
        Ok(PcaModel {
            mean,
            components,
            eigenvalues,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        PcaModel::from_bytes(&bytes)
    }
}

pub fn pca_fit(x: &Matrix, k: usize) -> Result<PcaModel> {
    let (n, d) = x.shape();
    if k == 0 || k > d {
        return Err(Error::Parameter(format!(
            "component count {k} must lie in 1..={d}"
        )));
    }
    if n < 2 {
        return Err(Error::Degenerate(format!(
            "PCA needs at least 2 samples, got {n}"
        )));
    }
    let mean = x.column_means();
    let centered = x.sub_row_vector(&mean)?;
    let cov = linalg::covariance(&centered)?;
    drop(centered);
    let eig = linalg::symmetric_eig(&cov)?;

    let mut components = Matrix::zeros(k, d);
    for c in 0..k {
        for f in 0..d {
            components.set(c, f, eig.vectors.get(f, c));
        }
    }
    Ok(PcaModel {
        mean,
        components,
        eigenvalues: eig.values[..k].to_vec(),
    })
}

/// `(X − mean) · componentsᵀ`.
pub fn pca_transform(model: &PcaModel, x: &Matrix) -> Result<Matrix> {
    if x.cols() != model.n_features() {
        return Err(Error::shape(
            "pca_transform",
            x.shape(),
            model.components.shape(),
        ));
    }
    let centered = x.sub_row_vector(&model.mean)?;
    linalg::matmul_transb(&centered, &model.components)
}

/// `Z · components + mean`.
pub fn pca_inverse_transform(model: &PcaModel, z: &Matrix) -> Result<Matrix> {
    if z.cols() != model.n_components() {
        return Err(Error::shape(
            "pca_inverse_transform",
            z.shape(),
            model.components.shape(),
        ));
    }
    let mut out = linalg::matmul(z, &model.components)?;
    for r in 0..out.rows() {
        for (v, &m) in out.row_mut(r).iter_mut().zip(&model.mean) {
            *v += m;
        }
    }
    Ok(out)
}

pub fn explained_variance_ratio(model: &PcaModel, total_variance: f64) -> Result<Vec<f64>> {
    if total_variance.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::Degenerate(format!(
            "total variance must be positive, got {total_variance}"
        )));
    }
    Ok(model
        .eigenvalues
        .iter()
        .map(|&v| (v / total_variance).clamp(0.0, 1.0))
        .collect())
}

/// Sum of the `n−1` sample variances of every column, i.e. the trace of the
/// covariance matrix.
pub fn total_variance(x: &Matrix) -> Result<f64> {
    let n = x.rows();
    if n < 2 {
        return Err(Error::Degenerate(format!(
            "variance needs at least 2 samples, got {n}"
        )));
    }
    let scale = n as f64 / (n - 1) as f64;
    Ok(x.column_variances().iter().sum::<f64>() * scale)
}
