//! Acceptance suite: every check prints one PASS/FAIL line and the process
//! exits non-zero if any failed.
//!
//! The benchmark checks run the `ddr` binary on the full MNIST and
//! Fashion-MNIST data found in `$DDR_DATA_DIR` or `<workspace>/data`
//! (see `scripts/fetch_data.py`). `ACCEPTANCE_SVM_BUDGET` sets the SVM time
//! budget passed to those runs (default 120s; raw-pixel SVM is expected to
//! time out under it). Tables are kept under the cargo target tmp dir.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ddr_core::autoencoder::{ae_init, AeModel};
use ddr_core::classifiers::{svm_fit, Kernel, SvmParams};
use ddr_core::clustering::{kmeans_fit, nmi};
use ddr_core::linalg::{symmetric_eig, Matrix};
use ddr_core::pca::{pca_fit, pca_inverse_transform, pca_transform};

type Check = Result<String, String>;

struct Report {
    failed: usize,
    total: usize,
}

impl Report {
    fn record(&mut self, name: &str, outcome: Check) {
        self.total += 1;
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                self.failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag}  {name:<28} {detail}");
    }
}

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn in_range(v: f64, lo: f64, hi: f64) -> bool {
    (lo..=hi).contains(&v)
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.gen_range(-scale..scale)).collect();
    Matrix::new(rows, cols, data).unwrap()
}

fn pca_invariants() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut worst = [0.0f64; 3];
    for _ in 0..100 {
        let d = rng.gen_range(2..=10);
        let n = rng.gen_range(d + 2..=40);
        let mut x = random_matrix(&mut rng, n, d, 1.0);
        for c in 0..d {
            let (s, o) = (rng.gen_range(0.1..10.0), rng.gen_range(-50.0..50.0));
            for r in 0..n {
                x.set(r, c, x.get(r, c) * s + o);
            }
        }
        let k = rng.gen_range(1..=d);
        let m = pca_fit(&x, k).map_err(|e| e.to_string())?;
        for i in 0..k {
            for j in 0..k {
                let dot: f64 = m.components.row(i).iter().zip(m.components.row(j)).map(|(a, b)| a * b).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                worst[0] = worst[0].max((dot - want).abs());
            }
        }
        let mean = Matrix::new(1, d, m.mean.clone()).unwrap();
        let z = pca_transform(&m, &mean).map_err(|e| e.to_string())?;
        worst[1] = worst[1].max(z.as_slice().iter().fold(0.0, |a, v| a.max(v.abs())));

        let full = pca_fit(&x, d).map_err(|e| e.to_string())?;
        let back = pca_inverse_transform(&full, &pca_transform(&full, &x).unwrap()).unwrap();
        for (a, b) in back.as_slice().iter().zip(x.as_slice()) {
            worst[2] = worst[2].max((a - b).abs() / b.abs().max(1.0));
        }
    }
    ensure(
        worst.iter().all(|&w| w <= 1e-8),
        format!(
            "100 trials: orthonormality {:.1e}, mean projection {:.1e}, round trip {:.1e} (tol 1e-8)",
            worst[0], worst[1], worst[2]
        ),
    )
}

/// Roots of the characteristic polynomial of a symmetric 2×2 or 3×3 matrix,
/// descending.
fn characteristic_roots(a: &Matrix) -> Vec<f64> {
    let g = |i, j| a.get(i, j);
    if a.rows() == 2 {
        let (tr, det) = (g(0, 0) + g(1, 1), g(0, 0) * g(1, 1) - g(0, 1) * g(1, 0));
        let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
        return vec![tr / 2.0 + disc, tr / 2.0 - disc];
    }
    // λ³ − c2 λ² + c1 λ − c0
    let c2 = g(0, 0) + g(1, 1) + g(2, 2);
    let c1 = g(0, 0) * g(1, 1) + g(0, 0) * g(2, 2) + g(1, 1) * g(2, 2)
        - g(0, 1) * g(1, 0)
        - g(0, 2) * g(2, 0)
        - g(1, 2) * g(2, 1);
    let c0 = g(0, 0) * (g(1, 1) * g(2, 2) - g(1, 2) * g(2, 1))
        - g(0, 1) * (g(1, 0) * g(2, 2) - g(1, 2) * g(2, 0))
        + g(0, 2) * (g(1, 0) * g(2, 1) - g(1, 1) * g(2, 0));
    // depressed cubic t³ + pt + q with λ = t + c2/3; three real roots
    let shift = c2 / 3.0;
    let p = c1 - c2 * c2 / 3.0;
    let q = -2.0 * c2.powi(3) / 27.0 + c2 * c1 / 3.0 - c0;
    let mut roots = if p.abs() < 1e-300 {
        vec![shift - q.cbrt(); 3]
    } else {
        let m = 2.0 * (-p / 3.0).max(0.0).sqrt();
        let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        (0..3)
            .map(|k| shift + m * (theta - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos())
            .collect()
    };
    let poly = |l: f64| ((l - c2) * l + c1) * l - c0;
    let dpoly = |l: f64| (3.0 * l - 2.0 * c2) * l + c1;
    for r in roots.iter_mut() {
        for _ in 0..3 {
            let d = dpoly(*r);
            if d.abs() > 1e-12 {
                *r -= poly(*r) / d;
            }
        }
    }
    roots.sort_by(|a, b| b.total_cmp(a));
    roots
}

fn eigensolver_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut worst_value = 0.0f64;
    let mut worst_residual = 0.0f64;
    for trial in 0..1000 {
        let n = 2 + trial % 2;
        let mut a = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = rng.gen_range(-5.0..5.0);
                a.set(i, j, v);
                a.set(j, i, v);
            }
        }
        let eig = symmetric_eig(&a).map_err(|e| e.to_string())?;
        for (got, want) in eig.values.iter().zip(characteristic_roots(&a)) {
            worst_value = worst_value.max((got - want).abs());
        }
        for (j, &l) in eig.values.iter().enumerate() {
            for i in 0..n {
                let av: f64 = (0..n).map(|c| a.get(i, c) * eig.vectors.get(c, j)).sum();
                worst_residual = worst_residual.max((av - l * eig.vectors.get(i, j)).abs());
            }
        }
    }
    ensure(
        worst_value <= 1e-8 && worst_residual <= 1e-8,
        format!("1000 trials (2x2, 3x3): eigenvalue error {worst_value:.1e}, |Av - lv| {worst_residual:.1e} (tol 1e-8)"),
    )
}

fn gradient_check() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let h = 1e-5;
    let mut worst = 0.0f64;
    let mut models = 0;
    let mut seed = 0u64;
    while models < 10 {
        seed += 1;
        let mut model = ae_init(&[3, 2, 3], seed).unwrap();
        for b in model.biases.iter_mut().flatten() {
            *b = rng.gen_range(-0.5..0.5);
        }
        let x = Matrix::new(2, 3, (0..6).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap();
        // finite differences are meaningless across a ReLU kink
        let near_kink = (0..2).any(|r| {
            model.weights[0]
                .row_iter()
                .zip(&model.biases[0])
                .any(|(w, b)| (w.iter().zip(x.row(r)).map(|(a, v)| a * v).sum::<f64>() + b).abs() < 1e-3)
        });
        if near_kink {
            continue;
        }
        models += 1;
        let (_, grads) = model.loss_and_gradients(&x).map_err(|e| e.to_string())?;
        let loss = |m: &AeModel| m.loss_and_gradients(&x).unwrap().0;
        for l in 0..model.n_layers() {
            for i in 0..model.weights[l].as_slice().len() {
                let mut m = model.clone();
                m.weights[l].as_mut_slice()[i] += h;
                let up = loss(&m);
                m.weights[l].as_mut_slice()[i] -= 2.0 * h;
                let numeric = (up - loss(&m)) / (2.0 * h);
                worst = worst.max(relative_error(grads.weights[l].as_slice()[i], numeric));
            }
            for i in 0..model.biases[l].len() {
                let mut m = model.clone();
                m.biases[l][i] += h;
                let up = loss(&m);
                m.biases[l][i] -= 2.0 * h;
                let numeric = (up - loss(&m)) / (2.0 * h);
                worst = worst.max(relative_error(grads.biases[l][i], numeric));
            }
        }
    }
    ensure(
        worst <= 1e-4,
        format!("10 random [3,2,3] models, 2 samples, step 1e-5: max relative error {worst:.1e} (tol 1e-4)"),
    )
}

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale == 0.0 {
        0.0
    } else {
        (analytic - numeric).abs() / scale.max(1e-8)
    }
}

fn best_two_partition(x: &Matrix) -> f64 {
    let n = x.rows();
    let mut best = f64::INFINITY;
    for mask in 1u32..(1 << n) - 1 {
        let mut cost = 0.0;
        for side in [true, false] {
            let members: Vec<usize> = (0..n).filter(|&i| (mask >> i & 1 == 1) == side).collect();
            for c in 0..x.cols() {
                let mean = members.iter().map(|&i| x.get(i, c)).sum::<f64>() / members.len() as f64;
                cost += members.iter().map(|&i| (x.get(i, c) - mean).powi(2)).sum::<f64>();
            }
        }
        best = best.min(cost);
    }
    best
}

fn kmeans_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let n = rng.gen_range(3..=8);
        let x = random_matrix(&mut rng, n, 2, 10.0);
        let oracle = best_two_partition(&x);
        let mut best = f64::INFINITY;
        for seed in 0..20 {
            best = best.min(kmeans_fit(&x, 2, seed, 300, 1e-4).map_err(|e| e.to_string())?.inertia);
        }
        worst = worst.max((best - oracle).abs());
    }
    ensure(
        worst <= 1e-9,
        format!("50 instances, n <= 8, k = 2: best-of-20 inertia vs exhaustive 2-partitions, max gap {worst:.1e} (tol 1e-9)"),
    )
}

fn nmi_properties() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..200 {
        let n = rng.gen_range(1..60);
        let ka = rng.gen_range(1..6u32);
        let kb = rng.gen_range(1..6u32);
        let a: Vec<u32> = (0..n).map(|_| rng.gen_range(0..ka)).collect();
        let b: Vec<u32> = (0..n).map(|_| rng.gen_range(0..kb)).collect();
        let ab = nmi(&a, &b).unwrap();
        if ab != nmi(&b, &a).unwrap() {
            return Err(format!("asymmetric on {a:?} / {b:?}"));
        }
        let mut perm: Vec<u32> = (0..ka).map(|v| v + 100).collect();
        perm.shuffle(&mut rng);
        let relabeled: Vec<u32> = a.iter().map(|&v| perm[v as usize]).collect();
        if nmi(&relabeled, &b).unwrap() != ab {
            return Err(format!("relabeling {a:?} changed nmi"));
        }
        if nmi(&a, &a).unwrap() != 1.0 || nmi(&relabeled, &a).unwrap() != 1.0 {
            return Err(format!("identical partitions of {a:?} did not score 1.0"));
        }
    }
    let independent = nmi(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap();
    let swapped = nmi(&[0, 0, 1, 1], &[1, 1, 0, 0]).unwrap();
    ensure(
        independent == 0.0 && swapped == 1.0,
        format!("200 random labelings exact; [0,0,1,1] vs [0,1,0,1] = {independent}, vs [1,1,0,0] = {swapped}"),
    )
}

fn blobs(rng: &mut ChaCha8Rng, n: usize, separation: f64, spread: f64) -> (Matrix, Vec<u8>) {
    let angle = rng.gen_range(0.0..std::f64::consts::TAU);
    let (dx, dy) = (angle.cos() * separation / 2.0, angle.sin() * separation / 2.0);
    let mut data = Vec::with_capacity(2 * n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let label = (i % 2) as u8;
        let s = if label == 0 { 1.0 } else { -1.0 };
        data.push(s * dx + rng.gen_range(-spread..spread));
        data.push(s * dy + rng.gen_range(-spread..spread));
        y.push(label);
    }
    (Matrix::new(n, 2, data).unwrap(), y)
}

/// Largest KKT violation of every training point for a fitted two-class
/// model, given `tol`: zero when all conditions hold.
fn kkt_violation(x: &Matrix, y: &[u8], kernel: Kernel, c: f64) -> Result<(f64, usize), String> {
    let params = SvmParams {
        kernel,
        c,
        ..SvmParams::default()
    };
    let model = svm_fit(x, y, &params).map_err(|e| e.to_string())?;
    let pair = &model.pairs[0];
    let mut alpha: HashMap<usize, f64> = HashMap::new();
    for (&sv, &coef) in pair.sv_index.iter().zip(&pair.dual_coef) {
        alpha.insert(sv as usize, coef.abs());
    }
    let mut worst = 0.0f64;
    for i in 0..x.rows() {
        let yi = if y[i] == pair.positive { 1.0 } else { -1.0 };
        let f = model.decision_values(x.row(i))[0];
        let margin = yi * f;
        let sv = (0..model.support_vectors.rows()).find(|&s| model.support_vectors.row(s) == x.row(i));
        let a = sv.and_then(|s| alpha.get(&s).copied()).unwrap_or(0.0);
        let violation = if a <= 0.0 {
            (1.0 - params.tol) - margin
        } else if a >= c * (1.0 - 1e-12) {
            margin - (1.0 + params.tol)
        } else {
            (margin - 1.0).abs() - params.tol
        };
        worst = worst.max(violation);
    }
    Ok((worst, pair.sv_index.len()))
}

fn smo_kkt() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut lines = Vec::new();
    let mut worst = 0.0f64;
    for problem in 0..10 {
        let separable = problem < 5;
        let n = rng.gen_range(30..80);
        let (x, y) = if separable {
            blobs(&mut rng, n, 6.0, 1.0)
        } else {
            blobs(&mut rng, n, 1.0, 1.5)
        };
        let kernel = if problem % 2 == 0 {
            Kernel::Linear
        } else {
            Kernel::Rbf { gamma: 0.5 }
        };
        let c = [0.5, 1.0, 5.0][problem % 3];
        let (v, svs) = kkt_violation(&x, &y, kernel, c)?;
        worst = worst.max(v);
        lines.push(format!("{svs}"));
    }
    ensure(
        worst <= 0.0,
        format!(
            "5 separable + 5 overlapping 2-D problems, worst excess over tol {:.1e}, support vectors [{}]",
            worst.max(0.0),
            lines.join(" ")
        ),
    )
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn read(path: &Path) -> Result<Table, String> {
        let mut r = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_path(path)
            .map_err(|e| format!("{}: {e}", path.display()))?;
        let header = r.headers().map_err(|e| e.to_string())?.iter().map(String::from).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|x| x.iter().map(String::from).collect()))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        Ok(Table { header, rows })
    }

    fn cell(&self, algorithm: &str, column: &str) -> Result<&str, String> {
        let c = self
            .header
            .iter()
            .position(|h| h == column)
            .ok_or_else(|| format!("no column {column}"))?;
        let row = self
            .rows
            .iter()
            .find(|r| r[0] == algorithm)
            .ok_or_else(|| format!("no row {algorithm}"))?;
        Ok(&row[c])
    }

    fn num(&self, algorithm: &str, column: &str) -> Result<f64, String> {
        let v = self.cell(algorithm, column)?;
        v.parse().map_err(|_| format!("{algorithm}.{column} = '{v}'"))
    }

    fn metric_columns(&self) -> Vec<Vec<String>> {
        let cols: Vec<usize> = self
            .header
            .iter()
            .enumerate()
            .filter(|(_, h)| matches!(h.as_str(), "algorithm" | "metric" | "before" | "after_pca" | "after_ae"))
            .map(|(i, _)| i)
            .collect();
        self.rows
            .iter()
            .map(|r| cols.iter().map(|&c| r[c].clone()).collect())
            .collect()
    }
}

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn data_dir() -> PathBuf {
    std::env::var_os("DDR_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| workspace_root().join("data"))
}

fn bench_all(dataset: &str, out: &Path, budget: &str) -> Result<Table, String> {
    let started = Instant::now();
    eprintln!("[acceptance] ddr bench all --dataset {dataset} -> {}", out.display());
    let output = Command::new(env!("CARGO_BIN_EXE_ddr"))
        .args(["bench", "all", "--dataset", dataset, "--seed", "42", "--format", "csv"])
        .arg("--svm-time-budget")
        .arg(budget)
        .arg("--data-dir")
        .arg(data_dir())
        .arg("--out")
        .arg(out)
        .output()
        .map_err(|e| format!("could not run ddr: {e}"))?;
    if !output.status.success() {
        let stderr = String::from_utf8_lossy(&output.stderr);
        let last = stderr.lines().last().unwrap_or("");
        return Err(format!("ddr exited with {}: {last}", output.status));
    }
    eprintln!("[acceptance] {dataset} finished in {:.0}s", started.elapsed().as_secs_f64());
    Table::read(out)
}

fn runtime(t: &Table, algorithm: &str, variant: &str) -> Result<f64, String> {
    Ok(t.num(algorithm, &format!("{variant}_fit_s"))? + t.num(algorithm, &format!("{variant}_predict_s"))?)
}

fn gnb_flip(t: &Table, lo: f64, hi: f64, gap: f64, raw_band: Option<(f64, f64)>, timed: bool) -> Check {
    let (raw, pca) = (t.num("gnb", "before")?, t.num("gnb", "after_pca")?);
    let mut ok = in_range(pca, lo, hi) && pca - raw >= gap;
    let mut detail = format!("raw {raw:.4}, pca {pca:.4} in [{lo}, {hi}], gap {:+.4} >= +{gap}", pca - raw);
    if let Some((a, b)) = raw_band {
        ok &= in_range(raw, a, b);
        detail.push_str(&format!(", raw in [{a}, {b}]"));
    }
    if timed {
        let secs = runtime(t, "gnb", "before")? + runtime(t, "gnb", "after_pca")? + t.num("gnb", "after_pca_preprocess_s")?;
        ok &= secs < 60.0;
        detail.push_str(&format!(", runtime {secs:.1}s < 60s"));
    }
    ensure(ok, detail)
}

fn svm_pca(t: &Table) -> Check {
    let acc = t.num("svm", "after_pca")?;
    let secs = runtime(t, "svm", "after_pca")? + t.num("svm", "after_pca_preprocess_s")?;
    ensure(
        in_range(acc, 0.95, 0.985) && secs <= 1800.0,
        format!("rbf on 25 components, full training split: {acc:.4} in [0.95, 0.985], runtime {secs:.1}s <= 1800s"),
    )
}

fn sgdc_parity(t: &Table) -> Check {
    let (raw, pca) = (t.num("sgdc", "before")?, t.num("sgdc", "after_pca")?);
    ensure(
        in_range(raw, 0.82, 0.92) && in_range(pca, 0.82, 0.92) && (raw - pca).abs() <= 0.05,
        format!("raw {raw:.4}, pca {pca:.4}, both in [0.82, 0.92], |diff| {:.4} <= 0.05", (raw - pca).abs()),
    )
}

fn trees(t: &Table) -> Check {
    let mut ok = true;
    let mut parts = Vec::new();
    for alg in ["tree_gini", "tree_entropy"] {
        let (raw, pca) = (t.num(alg, "before")?, t.num(alg, "after_pca")?);
        let drop = raw - pca;
        ok &= in_range(raw, 0.83, 0.90) && in_range(pca, 0.78, 0.88) && in_range(drop, 0.01, 0.08);
        parts.push(format!("{alg} {raw:.4} -> {pca:.4} (drop {drop:.4})"));
    }
    ensure(
        ok,
        format!("{}; raw in [0.83, 0.90], pca in [0.78, 0.88], drop in [0.01, 0.08]", parts.join(", ")),
    )
}

fn kmeans_gain(t: &Table, raw_band: (f64, f64), ae_band: (f64, f64), gain: f64, ae_minutes: Option<f64>) -> Check {
    let (raw, ae) = (t.num("kmeans", "before")?, t.num("kmeans", "after_ae")?);
    let mut ok = in_range(raw, raw_band.0, raw_band.1) && in_range(ae, ae_band.0, ae_band.1) && ae - raw >= gain;
    let mut detail = format!(
        "raw {raw:.4} in [{}, {}], latent {ae:.4} in [{}, {}], gain {:+.4} >= +{gain}",
        raw_band.0, raw_band.1, ae_band.0, ae_band.1, ae - raw
    );
    if let Some(limit) = ae_minutes {
        let train = t.num("kmeans", "ae_train_s")?;
        ok &= train <= limit * 60.0;
        detail.push_str(&format!(", ae training {train:.0}s <= {:.0}s", limit * 60.0));
    }
    ensure(ok, detail)
}

fn time_orderings(t: &Table) -> Check {
    let mut ok = true;
    let mut parts = Vec::new();
    for alg in ["tree_gini", "tree_entropy", "sgdc", "gnb"] {
        let ratio = t.num(alg, "after_pca_fit_s")? / t.num(alg, "before_fit_s")?;
        ok &= ratio <= 0.6;
        parts.push(format!("{alg} {ratio:.3}"));
    }
    let km = t.num("kmeans", "after_ae_fit_s")? / t.num("kmeans", "before_fit_s")?;
    ok &= km <= 0.2;
    ensure(
        ok,
        format!("fit pca/raw: {} (<= 0.6); kmeans latent/raw {km:.3} (<= 0.2)", parts.join(", ")),
    )
}

fn main() {
    let mut report = Report { failed: 0, total: 0 };
    report.record("pca-invariants", pca_invariants());
    report.record("eigensolver-oracle", eigensolver_oracle());
    report.record("ae-gradient-check", gradient_check());
    report.record("kmeans-exhaustive-oracle", kmeans_oracle());
    report.record("nmi-properties", nmi_properties());
    report.record("smo-kkt", smo_kkt());

    let budget = std::env::var("ACCEPTANCE_SVM_BUDGET").unwrap_or_else(|_| "120s".into());
    let out = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    let data = data_dir();
    let missing = ["mnist", "fashion_mnist"]
        .iter()
        .find(|d| !data.join(d).join("train-images-idx3-ubyte").exists());
    let runs = match missing {
        Some(d) => Err(format!("{}/{d} not found; run scripts/fetch_data.py", data.display())),
        None => Ok(()),
    };
    let mnist = runs.clone().and_then(|_| bench_all("mnist", &out.join("mnist_1.csv"), &budget));
    let mnist_again = runs.clone().and_then(|_| bench_all("mnist", &out.join("mnist_2.csv"), &budget));
    let fashion = runs.and_then(|_| bench_all("fashion_mnist", &out.join("fashion_mnist.csv"), &budget));

    let with = |t: &Result<Table, String>, f: &dyn Fn(&Table) -> Check| match t {
        Ok(t) => f(t),
        Err(e) => Err(e.clone()),
    };
    report.record("gnb-flip-mnist", with(&mnist, &|t| gnb_flip(t, 0.80, 0.90, 0.20, Some((0.50, 0.65)), true)));
    report.record("gnb-flip-fashion", with(&fashion, &|t| gnb_flip(t, 0.68, 0.80, 0.10, None, false)));
    report.record("svm-pca-mnist", with(&mnist, &svm_pca));
    report.record("sgdc-parity-mnist", with(&mnist, &sgdc_parity));
    report.record("trees-mnist", with(&mnist, &trees));
    report.record(
        "kmeans-nmi-mnist",
        with(&mnist, &|t| kmeans_gain(t, (0.45, 0.55), (0.65, 0.82), 0.15, Some(15.0))),
    );
    report.record(
        "kmeans-nmi-fashion",
        with(&fashion, &|t| kmeans_gain(t, (0.48, 0.56), (0.54, 0.66), 0.02, None)),
    );
    report.record("time-orderings-mnist", with(&mnist, &time_orderings));
    let determinism = match (&mnist, &mnist_again) {
        (Ok(a), Ok(b)) => {
            let (ma, mb) = (a.metric_columns(), b.metric_columns());
            ensure(
                ma == mb && !ma.is_empty(),
                format!("two mnist runs, seed 42: {} rows of metric columns identical: {}", ma.len(), ma == mb),
            )
        }
        (Err(e), _) | (_, Err(e)) => Err(e.clone()),
    };
    report.record("determinism", determinism);

    println!(
        "acceptance: {} passed, {} failed of {}",
        report.total - report.failed,
        report.failed,
        report.total
    );
    if report.failed > 0 {
        std::process::exit(1);
    }
}
