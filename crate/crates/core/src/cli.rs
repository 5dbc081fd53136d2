//! The `ddr` command line.
//!
//! Exit codes: 0 on success, 1 when a run fails, 2 for usage or
//! configuration errors.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::bench::{self, BenchConfig, BenchRecord, Gamma, KernelKind, TableMeta};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::pca;

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "ddr", version, about = "Dimension-reduction benchmarks on MNIST-style data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run learners on raw and reduced features and tabulate the results
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Autoencoder tools
    #[command(subcommand)]
    Ae(AeCommand),
    /// PCA tools
    #[command(subcommand)]
    Pca(PcaCommand),
}

#[derive(Subcommand, Debug)]
enum BenchCommand {
    /// The five classifiers (default variants: raw, pca)
    Supervised(BenchArgs),
    /// k-means scored by NMI (default variants: raw, ae)
    Unsupervised(BenchArgs),
    /// Both of the above in one table
    All(BenchArgs),
}

#[derive(Subcommand, Debug)]
enum AeCommand {
    /// Train the autoencoder on a training split and write an AEM1 dump
    Train(AeTrainArgs),
}

#[derive(Subcommand, Debug)]
enum PcaCommand {
    /// Fit PCA on a training split and write a PCA1 model
    Fit(PcaFitArgs),
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// Flat key=value config file; flags override it
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// mnist or fashion_mnist
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Directory holding <dataset>/ IDX files (default: $DDR_DATA_DIR, then ./data)
    #[arg(long, value_name = "DIR")]
    data_dir: Option<PathBuf>,
    /// Output file
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Any config key, repeatable
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// raw, pca, ae (comma separated or repeated)
    #[arg(long, value_delimiter = ',')]
    variant: Vec<String>,
    /// Subset of gnb, kmeans, sgdc, svm, tree_entropy, tree_gini
    #[arg(long, value_delimiter = ',')]
    algorithms: Vec<String>,
    /// PCA components
    #[arg(long)]
    components: Option<String>,
    /// csv or markdown
    #[arg(long)]
    format: Option<String>,
    /// SVM fit budget: seconds, or with an s/m/h suffix
    #[arg(long, value_name = "DURATION")]
    svm_time_budget: Option<String>,
    /// Runs executed concurrently
    #[arg(long)]
    jobs: Option<String>,
}

#[derive(Args, Debug)]
struct AeTrainArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    epochs: Option<String>,
}

#[derive(Args, Debug)]
struct PcaFitArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    components: Option<String>,
}

fn configure(common: &CommonArgs, flags: &[(&str, Option<String>)]) -> Result<BenchConfig> {
    let mut cfg = BenchConfig::default();
    if let Some(path) = &common.config {
        cfg.apply_file(path)?;
    }
    let mut settings: Vec<(&str, String)> = vec![];
    if let Some(v) = &common.dataset {
        settings.push(("dataset", v.clone()));
    }
    if let Some(v) = &common.seed {
        settings.push(("seed", v.clone()));
    }
    for (key, value) in flags {
        if let Some(v) = value {
            settings.push((key, v.clone()));
        }
    }
    for (key, value) in settings {
        cfg.set(key, &value)?;
    }
    for kv in &common.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Parameter(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        cfg.set(k.trim(), v)?;
    }
    if let Some(d) = &common.data_dir {
        cfg.data_dir = Some(d.clone());
    }
    if let Some(o) = &common.out {
        cfg.out = Some(o.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn joined(v: &[String]) -> Option<String> {
    (!v.is_empty()).then(|| v.join(","))
}

fn svm_description(cfg: &BenchConfig) -> String {
    let s = &cfg.svm;
    let kernel = match (s.kernel, s.gamma) {
        (KernelKind::Linear, _) => "linear".to_string(),
        (KernelKind::Polynomial, _) => format!("polynomial (1 + x.y)^{}", s.degree),
        (KernelKind::Rbf, Gamma::Scale) => "rbf, gamma = 1/(d * Var(X_train))".to_string(),
        (KernelKind::Rbf, Gamma::Value(g)) => format!("rbf, gamma = {g}"),
    };
    let rows = s
        .train_rows
        .map_or(String::new(), |r| format!(", trained on {r} sampled rows"));
    format!(
        "{kernel}, C = {}, tol = {}, one-vs-one, budget {}s{rows}",
        s.c,
        s.tol,
        s.time_budget.as_secs_f64()
    )
}

fn table_meta(cfg: &BenchConfig, title: &str) -> TableMeta {
    let entries = vec![
        ("dataset", cfg.dataset.to_string()),
        ("seed", cfg.seed.to_string()),
        ("config_hash", format!("{:016x}", cfg.hash())),
        ("pca_components", cfg.pca_components.to_string()),
        ("svm", svm_description(cfg)),
        (
            "kmeans",
            format!(
                "k = {}, k-means++ seeding, max_iter = {}, tol = {} on squared centroid shift; scored on the clustered training split",
                cfg.kmeans.k, cfg.kmeans.max_iter, cfg.kmeans.tol
            ),
        ),
        ("nmi", "mutual information / arithmetic mean of the two entropies, natural log".into()),
        (
            "autoencoder",
            format!(
                "{:?}, ReLU hidden, sigmoid output, Adam lr {}, batch {}, {} epochs",
                cfg.ae.layers, cfg.ae.learning_rate, cfg.ae.batch_size, cfg.ae.epochs
            ),
        ),
        (
            "timing",
            "monotonic wall clock in seconds; fit, predict and preprocess timed separately; ae_train_s is excluded from all of them".into(),
        ),
        ("timeout", "SVM fit exceeded its time budget; no metric".into()),
    ];
    TableMeta {
        title: title.to_string(),
        entries: entries.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
    }
}

fn default_out(cfg: &BenchConfig, stem: &str, ext: &str) -> PathBuf {
    cfg.out
        .clone()
        .unwrap_or_else(|| Path::new("out").join(format!("{stem}_{}.{ext}", cfg.dataset)))
}

fn run_bench(which: &BenchCommand) -> std::result::Result<(), (i32, Error)> {
    let (args, kind) = match which {
        BenchCommand::Supervised(a) => (a, "supervised"),
        BenchCommand::Unsupervised(a) => (a, "unsupervised"),
        BenchCommand::All(a) => (a, "all"),
    };
    let cfg = configure(
        &args.common,
        &[
            ("variant", joined(&args.variant)),
            ("algorithms", joined(&args.algorithms)),
            ("components", args.components.clone()),
            ("format", args.format.clone()),
            ("svm_time_budget", args.svm_time_budget.clone()),
            ("jobs", args.jobs.clone()),
        ],
    )
    .map_err(|e| (EXIT_USAGE, e))?;
    let records: Vec<BenchRecord> = match which {
        BenchCommand::Supervised(_) => bench::run_supervised(&cfg),
        BenchCommand::Unsupervised(_) => bench::run_unsupervised(&cfg),
        BenchCommand::All(_) => bench::run_all(&cfg),
    }
    .map_err(|e| match e {
        Error::Parameter(_) => (EXIT_USAGE, e),
        e => (EXIT_RUN, e),
    })?;
    let title = format!("ddr bench {kind}");
    let path = default_out(&cfg, &format!("bench_{kind}"), cfg.format.extension());
    let text = bench::emit_table(&records, cfg.format, &table_meta(&cfg, &title), &path)
        .map_err(|e| (EXIT_RUN, e))?;
    print!("{text}");
    eprintln!("[ddr] wrote {}", path.display());
    Ok(())
}

fn run_ae_train(args: &AeTrainArgs) -> std::result::Result<(), (i32, Error)> {
    let cfg = configure(&args.common, &[("ae.epochs", args.epochs.clone())]).map_err(|e| (EXIT_USAGE, e))?;
    let run = || -> Result<PathBuf> {
        let ds = Dataset::load(&cfg.resolved_data_dir(), cfg.dataset)?;
        let (model, report) = bench::train_autoencoder(&cfg, &ds)?;
        for (i, loss) in report.epoch_losses.iter().enumerate() {
            println!("epoch {:>3}  loss {loss:.6}", i + 1);
        }
        let path = default_out(&cfg, "ae", "aem");
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        model.save(&path)?;
        Ok(path)
    };
    let path = run().map_err(|e| (EXIT_RUN, e))?;
    eprintln!("[ddr] wrote {}", path.display());
    Ok(())
}

fn run_pca_fit(args: &PcaFitArgs) -> std::result::Result<(), (i32, Error)> {
    let cfg = configure(&args.common, &[("components", args.components.clone())]).map_err(|e| (EXIT_USAGE, e))?;
    let run = || -> Result<PathBuf> {
        let ds = Dataset::load(&cfg.resolved_data_dir(), cfg.dataset)?;
        let model = pca::pca_fit(&ds.train_images, cfg.pca_components)?;
        let total = pca::total_variance(&ds.train_images)?;
        let ratios = pca::explained_variance_ratio(&model, total)?;
        let mut cumulative = 0.0;
        for (i, (ev, r)) in model.eigenvalues.iter().zip(&ratios).enumerate() {
            cumulative += r;
            println!("component {:>3}  eigenvalue {ev:.6}  ratio {r:.6}  cumulative {cumulative:.6}", i + 1);
        }
        let path = default_out(&cfg, &format!("pca{}", cfg.pca_components), "pca");
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        model.save(&path)?;
        Ok(path)
    };
    let path = run().map_err(|e| (EXIT_RUN, e))?;
    eprintln!("[ddr] wrote {}", path.display());
    Ok(())
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let outcome = match &cli.command {
        Command::Bench(b) => run_bench(b),
        Command::Ae(AeCommand::Train(a)) => run_ae_train(a),
        Command::Pca(PcaCommand::Fit(a)) => run_pca_fit(a),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err((code, e)) => {
            eprintln!("error: {e}");
            code
        }
    }
}
