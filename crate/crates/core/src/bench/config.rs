//! Run configuration: defaults, a flat `key = value` file format, and
//! overrides from the command line.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use crate::autoencoder::TrainParams;
use crate::classifiers::SgdcParams;
use crate::clustering::{DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::dataset::{DatasetName, DATA_DIR_ENV};
use crate::error::{Error, Result};
use crate::pca::DEFAULT_COMPONENTS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Algorithm {
    Gnb,
    Kmeans,
    Sgdc,
    Svm,
    TreeEntropy,
    TreeGini,
}

impl Algorithm {
    pub const SUPERVISED: [Algorithm; 5] = [
        Algorithm::Gnb,
        Algorithm::Sgdc,
        Algorithm::Svm,
        Algorithm::TreeEntropy,
        Algorithm::TreeGini,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Gnb => "gnb",
            Algorithm::Kmeans => "kmeans",
            Algorithm::Sgdc => "sgdc",
            Algorithm::Svm => "svm",
            Algorithm::TreeEntropy => "tree_entropy",
            Algorithm::TreeGini => "tree_gini",
        }
    }

    pub fn is_supervised(self) -> bool {
        self != Algorithm::Kmeans
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "gnb" => Algorithm::Gnb,
            "kmeans" => Algorithm::Kmeans,
            "sgdc" => Algorithm::Sgdc,
            "svm" => Algorithm::Svm,
            "tree_entropy" => Algorithm::TreeEntropy,
            "tree_gini" => Algorithm::TreeGini,
            other => {
                return Err(Error::Parameter(format!(
                    "unknown algorithm '{other}' (expected gnb, kmeans, sgdc, svm, tree_entropy or tree_gini)"
                )))
            }
        })
    }
}

/// Feature representation handed to a learner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Variant {
    Raw,
    Pca,
    Ae,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Raw => "raw",
            Variant::Pca => "pca",
            Variant::Ae => "ae",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(Variant::Raw),
            "pca" => Ok(Variant::Pca),
            "ae" => Ok(Variant::Ae),
            other => Err(Error::Parameter(format!(
                "unknown variant '{other}' (expected raw, pca or ae)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Markdown,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Markdown => "md",
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Markdown => "markdown",
        })
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "markdown" | "md" => Ok(Format::Markdown),
            other => Err(Error::Parameter(format!(
                "unknown format '{other}' (expected csv or markdown)"
            ))),
        }
    }
}

/// RBF width: a fixed value, or `1 / (d · Var(X))` of the training features.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gamma {
    Scale,
    Value(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Linear,
    Polynomial,
    Rbf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmSettings {
    pub kernel: KernelKind,
    pub gamma: Gamma,
    pub degree: u32,
    pub c: f64,
    pub tol: f64,
    pub cache_mb: usize,
    pub time_budget: Duration,
    /// Fit on a seeded subsample of this many training rows.
    pub train_rows: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AeSettings {
    /// Palindromic sizes whose ends match the image size.
    pub layers: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Reuse this dump if it exists, otherwise train and write it.
    pub model: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KmeansSettings {
    pub k: usize,
    pub max_iter: usize,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub dataset: DatasetName,
    /// `None` means each algorithm's default pair (raw + pca for
    /// classifiers, raw + ae for k-means).
    pub variants: Option<Vec<Variant>>,
    pub algorithms: Option<Vec<Algorithm>>,
    pub pca_components: usize,
    pub seed: u64,
    pub data_dir: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub jobs: usize,
    pub svm: SvmSettings,
    pub sgdc: SgdcParams,
    pub tree_max_depth: Option<usize>,
    pub gnb_var_smoothing: f64,
    pub ae: AeSettings,
    pub kmeans: KmeansSettings,
}

impl Default for BenchConfig {
    fn default() -> Self {
        let ae = TrainParams::default();
        BenchConfig {
            dataset: DatasetName::Mnist,
            variants: None,
            algorithms: None,
            pca_components: DEFAULT_COMPONENTS,
            seed: 42,
            data_dir: None,
            out: None,
            format: Format::Csv,
            jobs: 1,
            svm: SvmSettings {
                kernel: KernelKind::Rbf,
                gamma: Gamma::Scale,
                degree: 3,
                c: 5.0,
                tol: 1e-3,
                cache_mb: 512,
                time_budget: Duration::from_secs(30 * 60),
                train_rows: None,
            },
            sgdc: SgdcParams::default(),
            tree_max_depth: None,
            gnb_var_smoothing: crate::classifiers::DEFAULT_VAR_SMOOTHING,
            ae: AeSettings {
                layers: crate::autoencoder::DEFAULT_LAYERS.to_vec(),
                epochs: ae.epochs,
                batch_size: ae.batch_size,
                learning_rate: ae.learning_rate,
                model: None,
            },
            kmeans: KmeansSettings {
                k: 10,
                max_iter: DEFAULT_MAX_ITER,
                tol: DEFAULT_TOL,
            },
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Parameter(format!("invalid value '{value}' for {key}")))
}

fn parse_list<T: FromStr<Err = Error>>(value: &str) -> Result<Vec<T>> {
    let items: Vec<T> = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse)
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(Error::Parameter("empty list".into()));
    }
    Ok(items)
}

/// Seconds, optionally suffixed with `s`, `m` or `h`.
pub fn parse_duration(value: &str) -> Result<Duration> {
    let v = value.trim();
    let (num, scale) = match v.chars().last() {
        Some('s') => (&v[..v.len() - 1], 1.0),
        Some('m') => (&v[..v.len() - 1], 60.0),
        Some('h') => (&v[..v.len() - 1], 3600.0),
        _ => (v, 1.0),
    };
    let secs: f64 = parse("duration", num.trim())?;
    if !(secs >= 0.0) || !secs.is_finite() {
        return Err(Error::Parameter(format!("invalid duration '{value}'")));
    }
    Ok(Duration::from_secs_f64(secs * scale))
}

fn optional<T: FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    match value {
        "" | "none" => Ok(None),
        v => parse(key, v).map(Some),
    }
}

impl BenchConfig {
    /// Sets one key; the keys are the ones accepted in config files.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "dataset" => self.dataset = value.parse()?,
            "variant" | "variants" => self.variants = Some(parse_list(value)?),
            "algorithm" | "algorithms" => self.algorithms = Some(parse_list(value)?),
            "components" | "pca.components" => self.pca_components = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "data_dir" => self.data_dir = Some(PathBuf::from(value)),
            "out" => self.out = Some(PathBuf::from(value)),
            "format" => self.format = value.parse()?,
            "jobs" => self.jobs = parse(key, value)?,
            "svm_time_budget" | "svm.time_budget" => self.svm.time_budget = parse_duration(value)?,
            "svm.kernel" => {
                self.svm.kernel = match value {
                    "linear" => KernelKind::Linear,
                    "poly" | "polynomial" => KernelKind::Polynomial,
                    "rbf" => KernelKind::Rbf,
                    _ => return Err(Error::Parameter(format!("unknown kernel '{value}'"))),
                }
            }
            "svm.gamma" => {
                self.svm.gamma = if value == "scale" {
                    Gamma::Scale
                } else {
                    Gamma::Value(parse(key, value)?)
                }
            }
            "svm.degree" => self.svm.degree = parse(key, value)?,
            "svm.c" => self.svm.c = parse(key, value)?,
            "svm.tol" => self.svm.tol = parse(key, value)?,
            "svm.cache_mb" => self.svm.cache_mb = parse(key, value)?,
            "svm.train_rows" => self.svm.train_rows = optional(key, value)?,
            "sgdc.epochs" => self.sgdc.epochs = parse(key, value)?,
            "sgdc.learning_rate" => self.sgdc.learning_rate = parse(key, value)?,
            "sgdc.reg" => self.sgdc.reg = parse(key, value)?,
            "tree.max_depth" => self.tree_max_depth = optional(key, value)?,
            "gnb.var_smoothing" => self.gnb_var_smoothing = parse(key, value)?,
            "ae.layers" => {
                self.ae.layers = value
                    .split(',')
                    .map(|v| parse(key, v.trim()))
                    .collect::<Result<_>>()?
            }
            "ae.epochs" => self.ae.epochs = parse(key, value)?,
            "ae.batch_size" => self.ae.batch_size = parse(key, value)?,
            "ae.learning_rate" => self.ae.learning_rate = parse(key, value)?,
            "ae.model" => self.ae.model = (!value.is_empty()).then(|| PathBuf::from(value)),
            "kmeans.k" => self.kmeans.k = parse(key, value)?,
            "kmeans.max_iter" => self.kmeans.max_iter = parse(key, value)?,
            "kmeans.tol" => self.kmeans.tol = parse(key, value)?,
            other => return Err(Error::Parameter(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines. Blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Parameter(format!("line {}: expected key = value, got '{line}'", no + 1))
            })?;
            self.set(key.trim(), value)
                .map_err(|e| Error::Parameter(format!("line {}: {e}", no + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_text(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.pca_components == 0 {
            return Err(Error::Parameter("components must be at least 1".into()));
        }
        if self.jobs == 0 {
            return Err(Error::Parameter("jobs must be at least 1".into()));
        }
        if self.kmeans.k == 0 {
            return Err(Error::Parameter("kmeans.k must be at least 1".into()));
        }
        if self.ae.epochs == 0 || self.ae.batch_size == 0 {
            return Err(Error::Parameter("ae.epochs and ae.batch_size must be at least 1".into()));
        }
        if self.svm.train_rows == Some(0) {
            return Err(Error::Parameter("svm.train_rows must be at least 1".into()));
        }
        if let Some(a) = &self.algorithms {
            if a.is_empty() {
                return Err(Error::Parameter("no algorithm selected".into()));
            }
        }
        Ok(())
    }

    /// `data_dir`, else `$DDR_DATA_DIR`, else `./data`.
    pub fn resolved_data_dir(&self) -> PathBuf {
        self.data_dir
            .clone()
            .or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("data"))
    }

    /// Every setting that can change a metric, one `key=value` per line.
    pub fn canonical(&self) -> String {
        let list = |v: Option<Vec<String>>| v.map_or("default".to_string(), |v| v.join(","));
        let lines = [
            format!("dataset={}", self.dataset),
            format!(
                "variants={}",
                list(self.variants.as_ref().map(|v| v.iter().map(|x| x.to_string()).collect()))
            ),
            format!(
                "algorithms={}",
                list(self.algorithms.as_ref().map(|v| v.iter().map(|x| x.to_string()).collect()))
            ),
            format!("components={}", self.pca_components),
            format!("seed={}", self.seed),
            format!("svm.kernel={:?}", self.svm.kernel),
            format!("svm.gamma={:?}", self.svm.gamma),
            format!("svm.degree={}", self.svm.degree),
            format!("svm.c={}", self.svm.c),
            format!("svm.tol={}", self.svm.tol),
            format!("svm.time_budget={}", self.svm.time_budget.as_secs_f64()),
            format!("svm.train_rows={:?}", self.svm.train_rows),
            format!("sgdc.epochs={}", self.sgdc.epochs),
            format!("sgdc.learning_rate={}", self.sgdc.learning_rate),
            format!("sgdc.reg={}", self.sgdc.reg),
            format!("tree.max_depth={:?}", self.tree_max_depth),
            format!("gnb.var_smoothing={}", self.gnb_var_smoothing),
            format!("ae.layers={:?}", self.ae.layers),
            format!("ae.epochs={}", self.ae.epochs),
            format!("ae.batch_size={}", self.ae.batch_size),
            format!("ae.learning_rate={}", self.ae.learning_rate),
            format!("kmeans.k={}", self.kmeans.k),
            format!("kmeans.max_iter={}", self.kmeans.max_iter),
            format!("kmeans.tol={}", self.kmeans.tol),
        ];
        lines.join("\n")
    }

    pub fn hash(&self) -> u64 {
        fnv1a(self.canonical().as_bytes())
    }
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Seed for one named run, so adding a run leaves the others' seeds alone.
pub fn sub_seed(seed: u64, parts: &[&str]) -> u64 {
    let mut z = seed ^ fnv1a(parts.join("/").as_bytes());
    // splitmix64 finalizer
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
