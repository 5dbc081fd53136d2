//! Runs the learners on raw, PCA-reduced and autoencoder-encoded features
//! and collects one record per (algorithm, variant).

mod config;
mod report;

use std::borrow::Cow;
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use config::{
    parse_duration, sub_seed, AeSettings, Algorithm, BenchConfig, Format, Gamma, KernelKind,
    KmeansSettings, SvmSettings, Variant,
};
pub use report::{emit_table, render_table, write_table, TableMeta};

use crate::autoencoder::{self, AeModel, TrainParams};
use crate::classifiers::{self, Criterion, Kernel, SvmParams};
use crate::clustering;
use crate::dataset::{Dataset, DatasetName};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::pca;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricName {
    Accuracy,
    Nmi,
}

impl MetricName {
    pub fn as_str(self) -> &'static str {
        match self {
            MetricName::Accuracy => "accuracy",
            MetricName::Nmi => "nmi",
        }
    }
}

impl fmt::Display for MetricName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    /// The SVM fit ran past its time budget and has no metric.
    Timeout,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub algorithm: Algorithm,
    pub dataset: DatasetName,
    pub variant: Variant,
    pub metric_name: MetricName,
    /// `None` when the run timed out.
    pub metric_value: Option<f64>,
    pub status: Status,
    pub fit_seconds: f64,
    pub predict_seconds: f64,
    /// PCA fit + transform, or autoencoder encoding, of both splits.
    pub preprocess_seconds: f64,
    /// Autoencoder training, kept out of `preprocess_seconds`.
    pub ae_train_seconds: Option<f64>,
    pub n_features: usize,
    pub train_rows: usize,
    pub seed: u64,
    /// Unix seconds at the end of the run.
    pub timestamp: u64,
}

struct Features<'a> {
    variant: Variant,
    train: Cow<'a, Matrix>,
    test: Cow<'a, Matrix>,
    preprocess_seconds: f64,
    ae_train_seconds: Option<f64>,
}

fn ae_train_params(cfg: &BenchConfig) -> TrainParams {
    TrainParams {
        epochs: cfg.ae.epochs,
        batch_size: cfg.ae.batch_size,
        learning_rate: cfg.ae.learning_rate,
        seed: sub_seed(cfg.seed, &[cfg.dataset.as_str(), "ae"]),
        ..TrainParams::default()
    }
}

/// Trains the configured autoencoder on the training images of `ds`.
pub fn train_autoencoder(cfg: &BenchConfig, ds: &Dataset) -> Result<(AeModel, autoencoder::TrainReport)> {
    let params = ae_train_params(cfg);
    let mut model = autoencoder::ae_init(&cfg.ae.layers, params.seed)?;
    let report = autoencoder::ae_train(&mut model, &ds.train_images, &params)?;
    Ok((model, report))
}

fn prepare<'a>(cfg: &BenchConfig, ds: &'a Dataset, variant: Variant) -> Result<Features<'a>> {
    match variant {
        Variant::Raw => Ok(Features {
            variant,
            train: Cow::Borrowed(&ds.train_images),
            test: Cow::Borrowed(&ds.test_images),
            preprocess_seconds: 0.0,
            ae_train_seconds: None,
        }),
        Variant::Pca => {
            let start = Instant::now();
            let model = pca::pca_fit(&ds.train_images, cfg.pca_components)?;
            let train = pca::pca_transform(&model, &ds.train_images)?;
            let test = pca::pca_transform(&model, &ds.test_images)?;
            Ok(Features {
                variant,
                train: Cow::Owned(train),
                test: Cow::Owned(test),
                preprocess_seconds: start.elapsed().as_secs_f64(),
                ae_train_seconds: None,
            })
        }
        Variant::Ae => {
            let (model, trained) = match &cfg.ae.model {
                Some(path) if path.exists() => {
                    log(format_args!("loading autoencoder from {}", path.display()));
                    (AeModel::load(path)?, None)
                }
                path => {
                    log(format_args!("training autoencoder on {}", ds.name));
                    let start = Instant::now();
                    let (model, report) = train_autoencoder(cfg, ds)?;
                    let secs = start.elapsed().as_secs_f64();
                    log(format_args!(
                        "autoencoder: {} epochs in {secs:.1}s, loss {:.5} -> {:.5}",
                        report.epochs, report.epoch_losses[0], report.final_loss
                    ));
                    if let Some(p) = path {
                        model.save(p)?;
                    }
                    (model, Some(secs))
                }
            };
            let start = Instant::now();
            let train = autoencoder::encode(&model, &ds.train_images)?;
            let test = autoencoder::encode(&model, &ds.test_images)?;
            Ok(Features {
                variant,
                train: Cow::Owned(train),
                test: Cow::Owned(test),
                preprocess_seconds: start.elapsed().as_secs_f64(),
                ae_train_seconds: trained,
            })
        }
    }
}

fn log(args: fmt::Arguments<'_>) {
    eprintln!("[ddr] {args}");
}

/// Population variance of all entries.
fn overall_variance(x: &Matrix) -> f64 {
    let v = x.as_slice();
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n
}

fn svm_params(cfg: &BenchConfig, x: &Matrix) -> SvmParams {
    let s = &cfg.svm;
    let gamma = match s.gamma {
        Gamma::Value(g) => g,
        Gamma::Scale => {
            let v = overall_variance(x);
            if v > 0.0 {
                1.0 / (x.cols() as f64 * v)
            } else {
                1.0
            }
        }
    };
    let kernel = match s.kernel {
        KernelKind::Linear => Kernel::Linear,
        KernelKind::Polynomial => Kernel::Polynomial { degree: s.degree },
        KernelKind::Rbf => Kernel::Rbf { gamma },
    };
    SvmParams {
        kernel,
        c: s.c,
        tol: s.tol,
        cache_bytes: s.cache_mb << 20,
        time_budget: Some(s.time_budget),
        ..SvmParams::default()
    }
}

fn run_one(cfg: &BenchConfig, ds: &Dataset, f: &Features<'_>, algorithm: Algorithm) -> Result<BenchRecord> {
    let seed = sub_seed(cfg.seed, &[ds.name.as_str(), algorithm.as_str(), f.variant.as_str()]);
    let (train, test) = (f.train.as_ref(), f.test.as_ref());
    let mut record = BenchRecord {
        algorithm,
        dataset: ds.name,
        variant: f.variant,
        metric_name: if algorithm.is_supervised() {
            MetricName::Accuracy
        } else {
            MetricName::Nmi
        },
        metric_value: None,
        status: Status::Ok,
        fit_seconds: 0.0,
        predict_seconds: 0.0,
        preprocess_seconds: f.preprocess_seconds,
        ae_train_seconds: f.ae_train_seconds,
        n_features: train.cols(),
        train_rows: train.rows(),
        seed,
        timestamp: 0,
    };

    macro_rules! timed {
        ($slot:expr, $e:expr) => {{
            let start = Instant::now();
            let out = $e;
            $slot = start.elapsed().as_secs_f64();
            out
        }};
    }

    let y = &ds.train_labels;
    let predictions = match algorithm {
        Algorithm::Gnb => {
            let m = timed!(record.fit_seconds, classifiers::gnb_fit(train, y, cfg.gnb_var_smoothing))?;
            timed!(record.predict_seconds, classifiers::gnb_predict(&m, test))?
        }
        Algorithm::Sgdc => {
            let params = classifiers::SgdcParams { seed, ..cfg.sgdc };
            let m = timed!(record.fit_seconds, classifiers::sgdc_fit(train, y, params))?;
            timed!(record.predict_seconds, classifiers::sgdc_predict(&m, test))?
        }
        Algorithm::TreeGini | Algorithm::TreeEntropy => {
            let criterion = if algorithm == Algorithm::TreeGini {
                Criterion::Gini
            } else {
                Criterion::Entropy
            };
            let m = timed!(
                record.fit_seconds,
                classifiers::tree_fit(train, y, criterion, cfg.tree_max_depth)
            )?;
            timed!(record.predict_seconds, classifiers::tree_predict(&m, test))?
        }
        Algorithm::Svm => {
            let (xs, ys) = match cfg.svm.train_rows {
                Some(rows) if rows < train.rows() => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let mut idx = sample(&mut rng, train.rows(), rows).into_vec();
                    idx.sort_unstable();
                    let ys: Vec<u8> = idx.iter().map(|&i| y[i]).collect();
                    (Cow::Owned(train.select_rows(&idx)), Cow::Owned(ys))
                }
                _ => (Cow::Borrowed(train), Cow::Borrowed(y.as_slice())),
            };
            record.train_rows = xs.rows();
            let params = svm_params(cfg, &xs);
            let start = Instant::now();
            let fitted = classifiers::svm_fit(&xs, &ys, &params);
            record.fit_seconds = start.elapsed().as_secs_f64();
            match fitted {
                Ok(m) => {
                    for w in &m.warnings {
                        log(format_args!("svm {}: {w}", f.variant));
                    }
                    timed!(record.predict_seconds, classifiers::svm_predict(&m, test))?
                }
                Err(Error::Timeout { .. }) => {
                    record.status = Status::Timeout;
                    record.timestamp = now();
                    return Ok(record);
                }
                Err(e) => return Err(e),
            }
        }
        Algorithm::Kmeans => {
            let k = &cfg.kmeans;
            let m = timed!(
                record.fit_seconds,
                clustering::kmeans_fit(train, k.k, seed, k.max_iter, k.tol)
            )?;
            if !m.converged {
                log(format_args!("kmeans {}: stopped at max_iter {}", f.variant, k.max_iter));
            }
            // the timed phase assigns the held-out split; the score is the
            // fitted clustering of the training split
            let _ = timed!(record.predict_seconds, clustering::kmeans_assign(&m, test))?;
            record.metric_value = Some(clustering::nmi(&m.labels, y)?);
            record.timestamp = now();
            return Ok(record);
        }
    };
    record.metric_value = Some(classifiers::accuracy(&predictions, &ds.test_labels)?);
    record.timestamp = now();
    Ok(record)
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

fn default_variants(algorithm: Algorithm) -> [Variant; 2] {
    if algorithm.is_supervised() {
        [Variant::Raw, Variant::Pca]
    } else {
        [Variant::Raw, Variant::Ae]
    }
}

/// The (algorithm, variant) pairs a config asks for, restricted to
/// `allowed` algorithms, sorted.
pub fn plan(cfg: &BenchConfig, allowed: &[Algorithm]) -> Result<Vec<(Algorithm, Variant)>> {
    let algorithms: Vec<Algorithm> = match &cfg.algorithms {
        Some(list) => list.iter().copied().filter(|a| allowed.contains(a)).collect(),
        None => allowed.to_vec(),
    };
    if algorithms.is_empty() {
        return Err(Error::Parameter("no algorithm selected for this benchmark".into()));
    }
    let mut tasks: Vec<(Algorithm, Variant)> = algorithms
        .iter()
        .flat_map(|&a| {
            let variants = match &cfg.variants {
                Some(v) => v.clone(),
                None => default_variants(a).to_vec(),
            };
            variants.into_iter().map(move |v| (a, v))
        })
        .collect();
    tasks.sort();
    tasks.dedup();
    Ok(tasks)
}

/// Loads the configured dataset and runs `tasks`, up to `cfg.jobs` at a time.
pub fn run_tasks(cfg: &BenchConfig, tasks: &[(Algorithm, Variant)]) -> Result<Vec<BenchRecord>> {
    cfg.validate()?;
    let ds = Dataset::load(&cfg.resolved_data_dir(), cfg.dataset)?;
    run_tasks_on(cfg, &ds, tasks)
}

/// As [`run_tasks`], on an already loaded dataset.
pub fn run_tasks_on(cfg: &BenchConfig, ds: &Dataset, tasks: &[(Algorithm, Variant)]) -> Result<Vec<BenchRecord>> {
    cfg.validate()?;
    let mut variants: Vec<Variant> = tasks.iter().map(|t| t.1).collect();
    variants.sort();
    variants.dedup();
    let mut features = Vec::new();
    for v in variants {
        features.push(prepare(cfg, ds, v)?);
    }
    let feature_of = |v: Variant| features.iter().find(|f| f.variant == v).unwrap();

    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Result<BenchRecord>>> = Mutex::new(Vec::new());
    let worker = || loop {
        let i = next.fetch_add(1, Ordering::SeqCst);
        let Some(&(algorithm, variant)) = tasks.get(i) else {
            break;
        };
        let out = run_one(cfg, ds, feature_of(variant), algorithm);
        match &out {
            Ok(r) => log(format_args!(
                "{} {} {}: {} {} (fit {:.2}s, predict {:.2}s)",
                r.dataset,
                r.algorithm,
                r.variant,
                r.metric_name,
                r.metric_value.map_or("timeout".to_string(), |v| format!("{v:.4}")),
                r.fit_seconds,
                r.predict_seconds
            )),
            Err(e) => log(format_args!("{} {algorithm} {variant}: {e}", ds.name)),
        }
        results.lock().unwrap().push(out);
    };
    let jobs = cfg.jobs.min(tasks.len()).max(1);
    if jobs == 1 {
        worker();
    } else {
        std::thread::scope(|s| {
            for _ in 0..jobs {
                s.spawn(worker);
            }
        });
    }
    let mut records = results
        .into_inner()
        .unwrap()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    records.sort_by_key(|r| (r.algorithm, r.variant));
    Ok(records)
}

pub fn run_supervised(cfg: &BenchConfig) -> Result<Vec<BenchRecord>> {
    run_tasks(cfg, &plan(cfg, &Algorithm::SUPERVISED)?)
}

pub fn run_unsupervised(cfg: &BenchConfig) -> Result<Vec<BenchRecord>> {
    run_tasks(cfg, &plan(cfg, &[Algorithm::Kmeans])?)
}

/// Every algorithm, sharing one load of the dataset and one set of features.
pub fn run_all(cfg: &BenchConfig) -> Result<Vec<BenchRecord>> {
    let mut all = Algorithm::SUPERVISED.to_vec();
    all.push(Algorithm::Kmeans);
    run_tasks(cfg, &plan(cfg, &all)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_dataset() -> Dataset {
        // two blobs of 6-pixel "images", 40 train and 20 test rows
        let make = |n: usize, offset: usize| {
            let mut data = Vec::new();
            let mut labels = Vec::new();
            for i in 0..n {
                let class = (i % 2) as u8;
                let jitter = ((i + offset) * 37 % 11) as f64 / 40.0;
                for p in 0..6 {
                    let base = if (p < 3) == (class == 0) { 0.8 } else { 0.1 };
                    data.push((base + jitter * if p % 2 == 0 { 1.0 } else { -0.5 }).clamp(0.0, 1.0));
                }
                labels.push(class);
            }
            (Matrix::new(n, 6, data).unwrap(), labels)
        };
        let (tr, trl) = make(40, 0);
        let (te, tel) = make(20, 5);
        Dataset::new(DatasetName::Mnist, tr, trl, te, tel).unwrap()
    }

    fn tiny_config() -> BenchConfig {
        let mut cfg = BenchConfig::default();
        cfg.pca_components = 2;
        cfg.kmeans.k = 2;
        cfg.ae.epochs = 3;
        cfg.ae.batch_size = 8;
        cfg.ae.layers = vec![6, 4, 2, 4, 6];
        cfg
    }

    #[test]
    fn default_plan_pairs() {
        let cfg = BenchConfig::default();
        let mut all = Algorithm::SUPERVISED.to_vec();
        all.push(Algorithm::Kmeans);
        let tasks = plan(&cfg, &all).unwrap();
        assert_eq!(tasks.len(), 12);
        assert!(tasks.contains(&(Algorithm::Kmeans, Variant::Ae)));
        assert!(!tasks.contains(&(Algorithm::Gnb, Variant::Ae)));
        let mut only = cfg.clone();
        only.algorithms = Some(vec![Algorithm::Kmeans]);
        assert!(plan(&only, &Algorithm::SUPERVISED).is_err());
    }

    #[test]
    fn every_task_yields_a_sane_record() {
        let cfg = tiny_config();
        let ds = tiny_dataset();
        let mut all = Algorithm::SUPERVISED.to_vec();
        all.push(Algorithm::Kmeans);
        let tasks = plan(&cfg, &all).unwrap();
        let records = run_tasks_on(&cfg, &ds, &tasks).unwrap();
        assert_eq!(records.len(), tasks.len());
        for r in &records {
            let m = r.metric_value.unwrap();
            assert!((0.0..=1.0).contains(&m), "{r:?}");
            assert!(r.fit_seconds >= 0.0 && r.predict_seconds >= 0.0 && r.preprocess_seconds >= 0.0);
            if r.variant == Variant::Pca {
                assert_eq!(r.n_features, 2);
            }
        }
        let keys: Vec<_> = records.iter().map(|r| (r.algorithm, r.variant)).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert!(records.iter().any(|r| r.ae_train_seconds.is_some()));
    }

    #[test]
    fn parallel_runs_match_sequential_metrics() {
        let ds = tiny_dataset();
        let mut cfg = tiny_config();
        cfg.variants = Some(vec![Variant::Raw, Variant::Pca]);
        let tasks = plan(&cfg, &Algorithm::SUPERVISED).unwrap();
        let seq = run_tasks_on(&cfg, &ds, &tasks).unwrap();
        cfg.jobs = 3;
        let par = run_tasks_on(&cfg, &ds, &tasks).unwrap();
        let metrics = |r: &[BenchRecord]| r.iter().map(|x| (x.algorithm, x.variant, x.metric_value)).collect::<Vec<_>>();
        assert_eq!(metrics(&seq), metrics(&par));
    }

    #[test]
    fn svm_over_budget_becomes_a_timeout_record() {
        let ds = tiny_dataset();
        let mut cfg = tiny_config();
        cfg.algorithms = Some(vec![Algorithm::Svm]);
        cfg.variants = Some(vec![Variant::Raw]);
        cfg.svm.time_budget = std::time::Duration::ZERO;
        let records = run_tasks_on(&cfg, &ds, &plan(&cfg, &Algorithm::SUPERVISED).unwrap()).unwrap();
        assert_eq!(records[0].status, Status::Timeout);
        assert_eq!(records[0].metric_value, None);
    }

    #[test]
    fn svm_subsample_is_seeded() {
        let ds = tiny_dataset();
        let mut cfg = tiny_config();
        cfg.algorithms = Some(vec![Algorithm::Svm]);
        cfg.variants = Some(vec![Variant::Raw]);
        cfg.svm.train_rows = Some(10);
        let tasks = plan(&cfg, &Algorithm::SUPERVISED).unwrap();
        let a = run_tasks_on(&cfg, &ds, &tasks).unwrap();
        let b = run_tasks_on(&cfg, &ds, &tasks).unwrap();
        assert_eq!(a[0].train_rows, 10);
        assert_eq!(a[0].metric_value, b[0].metric_value);
    }
}
