//! Python bindings for `ddr_core`.
//!
//! Matrices cross the boundary as lists of rows (any sequence of sequences
//! of floats, so NumPy arrays work too) and labels as lists of ints.

use std::path::PathBuf;

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyTimeoutError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

use ddr_core::autoencoder::{self, AeModel, TrainParams};
use ddr_core::classifiers::{self, Criterion, GnbModel, Kernel, SgdcModel, SgdcParams, SvmModel, SvmParams, TreeModel};
use ddr_core::clustering::{self, KmeansModel};
use ddr_core::dataset;
use ddr_core::linalg;
use ddr_core::pca::{self, PcaModel};
use ddr_core::{Error, Matrix};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        Error::Timeout { .. } => PyTimeoutError::new_err(e.to_string()),
        Error::NoConvergence { .. } | Error::Divergence { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

type Rows = Vec<Vec<f64>>;

pub fn rows_to_matrix(rows: &[Vec<f64>]) -> PyResult<Matrix> {
    let cols = rows.first().map_or(0, Vec::len);
    if let Some(i) = rows.iter().position(|r| r.len() != cols) {
        return Err(PyValueError::new_err(format!(
            "row {i} has {} values, expected {cols}",
            rows[i].len()
        )));
    }
    let data = rows.iter().flatten().copied().collect();
    Matrix::new(rows.len(), cols, data).map_err(to_py)
}

pub fn matrix_to_rows(m: &Matrix) -> Rows {
    m.row_iter().map(<[f64]>::to_vec).collect()
}

fn labels(y: &[i64]) -> PyResult<Vec<u8>> {
    y.iter()
        .map(|&v| {
            u8::try_from(v)
                .ok()
                .filter(|&c| (c as usize) < dataset::NUM_CLASSES)
                .ok_or_else(|| PyValueError::new_err(format!("label {v} is outside 0..=9")))
        })
        .collect()
}

fn widen(y: Vec<u8>) -> Vec<u32> {
    y.into_iter().map(u32::from).collect()
}

fn not_fitted(name: &str) -> PyErr {
    PyRuntimeError::new_err(format!("{name} is not fitted; call fit() first"))
}

/// Principal component analysis fitted with a Jacobi eigensolver.
#[pyclass(name = "Pca", module = "ddr", frozen)]
pub struct PyPca {
    inner: PcaModel,
}

#[pymethods]
impl PyPca {
    #[staticmethod]
    #[pyo3(signature = (x, n_components = pca::DEFAULT_COMPONENTS))]
    fn fit(py: Python<'_>, x: Rows, n_components: usize) -> PyResult<Self> {
        let m = rows_to_matrix(&x)?;
        let inner = py.detach(|| pca::pca_fit(&m, n_components)).map_err(to_py)?;
        Ok(PyPca { inner })
    }

    fn transform(&self, x: Rows) -> PyResult<Rows> {
        let z = pca::pca_transform(&self.inner, &rows_to_matrix(&x)?).map_err(to_py)?;
        Ok(matrix_to_rows(&z))
    }

    fn inverse_transform(&self, z: Rows) -> PyResult<Rows> {
        let x = pca::pca_inverse_transform(&self.inner, &rows_to_matrix(&z)?).map_err(to_py)?;
        Ok(matrix_to_rows(&x))
    }

    #[getter]
    fn n_components(&self) -> usize {
        self.inner.n_components()
    }

    #[getter]
    fn mean(&self) -> Vec<f64> {
        self.inner.mean.clone()
    }

    #[getter]
    fn components(&self) -> Rows {
        matrix_to_rows(&self.inner.components)
    }

    #[getter]
    fn eigenvalues(&self) -> Vec<f64> {
        self.inner.eigenvalues.clone()
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &self.inner.to_bytes())
    }

    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        Ok(PyPca {
            inner: PcaModel::from_bytes(data).map_err(to_py)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(to_py)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyPca {
            inner: PcaModel::load(&path).map_err(to_py)?,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "Pca(n_features={}, n_components={})",
            self.inner.n_features(),
            self.inner.n_components()
        )
    }
}

/// CART decision tree.
#[pyclass(name = "DecisionTree", module = "ddr")]
pub struct PyDecisionTree {
    criterion: Criterion,
    max_depth: Option<usize>,
    model: Option<TreeModel>,
}

#[pymethods]
impl PyDecisionTree {
    #[new]
    #[pyo3(signature = (criterion = "gini", max_depth = None))]
    fn new(criterion: &str, max_depth: Option<usize>) -> PyResult<Self> {
        Ok(PyDecisionTree {
            criterion: criterion.parse().map_err(to_py)?,
            max_depth,
            model: None,
        })
    }

    fn fit(&mut self, py: Python<'_>, x: Rows, y: Vec<i64>) -> PyResult<()> {
        let (m, y) = (rows_to_matrix(&x)?, labels(&y)?);
        let (criterion, depth) = (self.criterion, self.max_depth);
        self.model = Some(py.detach(|| classifiers::tree_fit(&m, &y, criterion, depth)).map_err(to_py)?);
        Ok(())
    }

    fn predict(&self, x: Rows) -> PyResult<Vec<u32>> {
        let model = self.model.as_ref().ok_or_else(|| not_fitted("DecisionTree"))?;
        classifiers::tree_predict(model, &rows_to_matrix(&x)?).map(widen).map_err(to_py)
    }

    #[getter]
    fn depth(&self) -> PyResult<usize> {
        Ok(self.model.as_ref().ok_or_else(|| not_fitted("DecisionTree"))?.depth())
    }

    #[getter]
    fn n_leaves(&self) -> PyResult<usize> {
        Ok(self.model.as_ref().ok_or_else(|| not_fitted("DecisionTree"))?.n_leaves())
    }
}

/// One-vs-rest linear classifier trained by hinge-loss SGD.
#[pyclass(name = "SgdClassifier", module = "ddr")]
pub struct PySgdClassifier {
    params: SgdcParams,
    model: Option<SgdcModel>,
}

#[pymethods]
impl PySgdClassifier {
    #[new]
    #[pyo3(signature = (epochs = 5, learning_rate = 0.1, reg = 1e-4, seed = 42))]
    fn new(epochs: usize, learning_rate: f64, reg: f64, seed: u64) -> Self {
        PySgdClassifier {
            params: SgdcParams {
                epochs,
                learning_rate,
                reg,
                seed,
            },
            model: None,
        }
    }

    fn fit(&mut self, py: Python<'_>, x: Rows, y: Vec<i64>) -> PyResult<()> {
        let (m, y) = (rows_to_matrix(&x)?, labels(&y)?);
        let params = self.params;
        self.model = Some(py.detach(|| classifiers::sgdc_fit(&m, &y, params)).map_err(to_py)?);
        Ok(())
    }

    fn predict(&self, x: Rows) -> PyResult<Vec<u32>> {
        let model = self.model.as_ref().ok_or_else(|| not_fitted("SgdClassifier"))?;
        classifiers::sgdc_predict(model, &rows_to_matrix(&x)?).map(widen).map_err(to_py)
    }

    #[getter]
    fn weights(&self) -> PyResult<Rows> {
        Ok(matrix_to_rows(&self.model.as_ref().ok_or_else(|| not_fitted("SgdClassifier"))?.weights))
    }

    #[getter]
    fn biases(&self) -> PyResult<Vec<f64>> {
        Ok(self.model.as_ref().ok_or_else(|| not_fitted("SgdClassifier"))?.biases.clone())
    }
}

/// Gaussian naive Bayes.
#[pyclass(name = "GaussianNB", module = "ddr")]
pub struct PyGaussianNb {
    var_smoothing: f64,
    model: Option<GnbModel>,
}

#[pymethods]
impl PyGaussianNb {
    #[new]
    #[pyo3(signature = (var_smoothing = classifiers::DEFAULT_VAR_SMOOTHING))]
    fn new(var_smoothing: f64) -> Self {
        PyGaussianNb {
            var_smoothing,
            model: None,
        }
    }

    fn fit(&mut self, x: Rows, y: Vec<i64>) -> PyResult<()> {
        let (m, y) = (rows_to_matrix(&x)?, labels(&y)?);
        self.model = Some(classifiers::gnb_fit(&m, &y, self.var_smoothing).map_err(to_py)?);
        Ok(())
    }

    fn predict(&self, x: Rows) -> PyResult<Vec<u32>> {
        let model = self.model.as_ref().ok_or_else(|| not_fitted("GaussianNB"))?;
        classifiers::gnb_predict(model, &rows_to_matrix(&x)?).map(widen).map_err(to_py)
    }

    #[getter]
    fn class_priors(&self) -> PyResult<Vec<f64>> {
        Ok(self.model.as_ref().ok_or_else(|| not_fitted("GaussianNB"))?.class_priors.clone())
    }
}

/// Kernel SVM, one-vs-one, trained by SMO.
#[pyclass(name = "Svm", module = "ddr")]
pub struct PySvm {
    params: SvmParams,
    model: Option<SvmModel>,
}

#[pymethods]
impl PySvm {
    /// `gamma=None` uses 1 / (d · Var(X)) of the training data.
    #[new]
    #[pyo3(signature = (kernel = "rbf", gamma = None, degree = 3, c = 5.0, tol = 1e-3, time_budget = None))]
    fn new(kernel: &str, gamma: Option<f64>, degree: u32, c: f64, tol: f64, time_budget: Option<f64>) -> PyResult<Self> {
        let kernel = match kernel {
            "linear" => Kernel::Linear,
            "poly" | "polynomial" => Kernel::Polynomial { degree },
            // a NaN gamma marks "derive from the data at fit time"
            "rbf" => Kernel::Rbf {
                gamma: gamma.unwrap_or(f64::NAN),
            },
            other => return Err(PyValueError::new_err(format!("unknown kernel '{other}'"))),
        };
        let time_budget = time_budget
            .map(|s| {
                std::time::Duration::try_from_secs_f64(s)
                    .map_err(|_| PyValueError::new_err(format!("invalid time budget {s}")))
            })
            .transpose()?;
        Ok(PySvm {
            params: SvmParams {
                kernel,
                c,
                tol,
                time_budget,
                ..SvmParams::default()
            },
            model: None,
        })
    }

    fn fit(&mut self, py: Python<'_>, x: Rows, y: Vec<i64>) -> PyResult<()> {
        let (m, y) = (rows_to_matrix(&x)?, labels(&y)?);
        let mut params = self.params;
        if let Kernel::Rbf { gamma } = &mut params.kernel {
            if gamma.is_nan() {
                let v = m.as_slice();
                let n = v.len().max(1) as f64;
                let mean = v.iter().sum::<f64>() / n;
                let var = v.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
                *gamma = if var > 0.0 { 1.0 / (m.cols() as f64 * var) } else { 1.0 };
            }
        }
        self.model = Some(py.detach(|| classifiers::svm_fit(&m, &y, &params)).map_err(to_py)?);
        Ok(())
    }

    fn predict(&self, py: Python<'_>, x: Rows) -> PyResult<Vec<u32>> {
        let model = self.model.as_ref().ok_or_else(|| not_fitted("Svm"))?;
        let m = rows_to_matrix(&x)?;
        py.detach(|| classifiers::svm_predict(model, &m)).map(widen).map_err(to_py)
    }

    #[getter]
    fn n_support(&self) -> PyResult<usize> {
        Ok(self.model.as_ref().ok_or_else(|| not_fitted("Svm"))?.support_vectors.rows())
    }

    #[getter]
    fn converged(&self) -> PyResult<bool> {
        Ok(self.model.as_ref().ok_or_else(|| not_fitted("Svm"))?.converged)
    }
}

/// k-means with k-means++ seeding.
#[pyclass(name = "KMeans", module = "ddr")]
pub struct PyKMeans {
    k: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
    model: Option<KmeansModel>,
}

impl PyKMeans {
    fn fitted(&self) -> PyResult<&KmeansModel> {
        self.model.as_ref().ok_or_else(|| not_fitted("KMeans"))
    }
}

#[pymethods]
impl PyKMeans {
    #[new]
    #[pyo3(signature = (k = 10, seed = 42, max_iter = clustering::DEFAULT_MAX_ITER, tol = clustering::DEFAULT_TOL))]
    fn new(k: usize, seed: u64, max_iter: usize, tol: f64) -> Self {
        PyKMeans {
            k,
            seed,
            max_iter,
            tol,
            model: None,
        }
    }

    fn fit(&mut self, py: Python<'_>, x: Rows) -> PyResult<()> {
        let m = rows_to_matrix(&x)?;
        let (k, seed, iters, tol) = (self.k, self.seed, self.max_iter, self.tol);
        self.model = Some(py.detach(|| clustering::kmeans_fit(&m, k, seed, iters, tol)).map_err(to_py)?);
        Ok(())
    }

    fn predict(&self, x: Rows) -> PyResult<Vec<usize>> {
        clustering::kmeans_assign(self.fitted()?, &rows_to_matrix(&x)?).map_err(to_py)
    }

    #[getter]
    fn labels(&self) -> PyResult<Vec<usize>> {
        Ok(self.fitted()?.labels.clone())
    }

    #[getter]
    fn centroids(&self) -> PyResult<Rows> {
        Ok(matrix_to_rows(&self.fitted()?.centroids))
    }

    #[getter]
    fn inertia(&self) -> PyResult<f64> {
        Ok(self.fitted()?.inertia)
    }

    #[getter]
    fn inertia_history(&self) -> PyResult<Vec<f64>> {
        Ok(self.fitted()?.inertia_history.clone())
    }

    #[getter]
    fn n_iter(&self) -> PyResult<usize> {
        Ok(self.fitted()?.iterations_run)
    }

    #[getter]
    fn converged(&self) -> PyResult<bool> {
        Ok(self.fitted()?.converged)
    }
}

/// Fully connected autoencoder (ReLU hidden layers, sigmoid output).
#[pyclass(name = "Autoencoder", module = "ddr")]
pub struct PyAutoencoder {
    inner: AeModel,
}

#[pymethods]
impl PyAutoencoder {
    #[new]
    #[pyo3(signature = (layer_sizes = autoencoder::DEFAULT_LAYERS.to_vec(), seed = 42))]
    fn new(layer_sizes: Vec<usize>, seed: u64) -> PyResult<Self> {
        Ok(PyAutoencoder {
            inner: autoencoder::ae_init(&layer_sizes, seed).map_err(to_py)?,
        })
    }

    /// Returns the mean loss of each epoch.
    #[pyo3(signature = (x, epochs = 20, batch_size = 256, learning_rate = 1e-3, seed = 42))]
    fn train(
        &mut self,
        py: Python<'_>,
        x: Rows,
        epochs: usize,
        batch_size: usize,
        learning_rate: f64,
        seed: u64,
    ) -> PyResult<Vec<f64>> {
        let m = rows_to_matrix(&x)?;
        let params = TrainParams {
            epochs,
            batch_size,
            learning_rate,
            seed,
            ..TrainParams::default()
        };
        let model = &mut self.inner;
        let report = py.detach(|| autoencoder::ae_train(model, &m, &params)).map_err(to_py)?;
        Ok(report.epoch_losses)
    }

    fn encode(&self, x: Rows) -> PyResult<Rows> {
        Ok(matrix_to_rows(&autoencoder::encode(&self.inner, &rows_to_matrix(&x)?).map_err(to_py)?))
    }

    fn decode(&self, z: Rows) -> PyResult<Rows> {
        Ok(matrix_to_rows(&autoencoder::decode(&self.inner, &rows_to_matrix(&z)?).map_err(to_py)?))
    }

    /// Activations of every layer for one sample, input first.
    fn forward(&self, x: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        autoencoder::ae_forward(&self.inner, &x).map_err(to_py)
    }

    #[getter]
    fn layer_sizes(&self) -> Vec<usize> {
        self.inner.layer_sizes.clone()
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &self.inner.to_bytes())
    }

    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        Ok(PyAutoencoder {
            inner: AeModel::from_bytes(data).map_err(to_py)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(to_py)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyAutoencoder {
            inner: AeModel::load(&path).map_err(to_py)?,
        })
    }
}

/// Normalized mutual information (arithmetic mean of entropies).
#[pyfunction]
fn nmi(a: Vec<i64>, b: Vec<i64>) -> PyResult<f64> {
    clustering::nmi(&a, &b).map_err(to_py)
}

#[pyfunction]
fn accuracy(pred: Vec<i64>, truth: Vec<i64>) -> PyResult<f64> {
    classifiers::accuracy(&labels(&pred)?, &labels(&truth)?).map_err(to_py)
}

#[pyfunction]
fn gini_impurity(counts: Vec<u32>) -> PyResult<f64> {
    classifiers::gini_impurity(&counts).map_err(to_py)
}

#[pyfunction]
fn entropy(counts: Vec<u32>) -> PyResult<f64> {
    classifiers::entropy(&counts).map_err(to_py)
}

/// Eigenvalues (descending) and eigenvectors (as columns) of a symmetric matrix.
#[pyfunction]
fn symmetric_eig(a: Rows) -> PyResult<(Vec<f64>, Rows)> {
    let r = linalg::symmetric_eig(&rows_to_matrix(&a)?).map_err(to_py)?;
    Ok((r.values, matrix_to_rows(&r.vectors)))
}

/// Images of an IDX file scaled to [0, 1].
#[pyfunction]
fn read_idx_images(path: PathBuf) -> PyResult<Rows> {
    let raw = dataset::load_idx_images(&path).map_err(to_py)?;
    Ok(matrix_to_rows(&dataset::normalize(&raw)))
}

#[pyfunction]
fn read_idx_labels(path: PathBuf) -> PyResult<Vec<u32>> {
    dataset::load_idx_labels(&path).map(widen).map_err(to_py)
}

#[pymodule]
pub fn ddr(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPca>()?;
    m.add_class::<PyDecisionTree>()?;
    m.add_class::<PySgdClassifier>()?;
    m.add_class::<PyGaussianNb>()?;
    m.add_class::<PySvm>()?;
    m.add_class::<PyKMeans>()?;
    m.add_class::<PyAutoencoder>()?;
    m.add_function(wrap_pyfunction!(nmi, m)?)?;
    m.add_function(wrap_pyfunction!(accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(gini_impurity, m)?)?;
    m.add_function(wrap_pyfunction!(entropy, m)?)?;
    m.add_function(wrap_pyfunction!(symmetric_eig, m)?)?;
    m.add_function(wrap_pyfunction!(read_idx_images, m)?)?;
    m.add_function(wrap_pyfunction!(read_idx_labels, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
