//! Before/after tables in CSV or markdown.
//!
//! Each algorithm gets one row. Raw features fill the `before` columns and
//! every reduced variant fills its own `after_*` group. A metadata block
//! leads the file (`#` lines in CSV, a bullet list in markdown).

use std::path::Path;

use super::{Algorithm, BenchRecord, Format, MetricName, Status, Variant};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TableMeta {
    pub title: String,
    pub entries: Vec<(String, String)>,
}

fn group(v: Variant) -> &'static str {
    match v {
        Variant::Raw => "before",
        Variant::Pca => "after_pca",
        Variant::Ae => "after_ae",
    }
}

fn group_title(v: Variant) -> &'static str {
    match v {
        Variant::Raw => "Before",
        Variant::Pca => "After PCA",
        Variant::Ae => "After encoder",
    }
}

fn metric_cell(r: &BenchRecord) -> String {
    match (r.status, r.metric_value) {
        (Status::Timeout, _) | (_, None) => "timeout".into(),
        (Status::Ok, Some(v)) => format!("{v:.4}"),
    }
}

fn secs(v: f64) -> String {
    format!("{v:.3}")
}

struct Pivot<'a> {
    variants: Vec<Variant>,
    rows: Vec<(Algorithm, MetricName, Vec<Option<&'a BenchRecord>>)>,
    has_ae: bool,
}

fn pivot<'a>(records: &[&'a BenchRecord]) -> Pivot<'a> {
    let mut variants: Vec<Variant> = records.iter().map(|r| r.variant).collect();
    variants.sort();
    variants.dedup();
    let mut algorithms: Vec<(Algorithm, MetricName)> = records
        .iter()
        .map(|r| (r.algorithm, r.metric_name))
        .collect();
    algorithms.sort_by_key(|a| a.0);
    algorithms.dedup();
    let rows = algorithms
        .into_iter()
        .map(|(a, m)| {
            let cells = variants
                .iter()
                .map(|&v| records.iter().copied().find(|r| r.algorithm == a && r.variant == v))
                .collect();
            (a, m, cells)
        })
        .collect();
    Pivot {
        has_ae: variants.contains(&Variant::Ae),
        variants,
        rows,
    }
}

fn ae_train_cell(cells: &[Option<&BenchRecord>]) -> String {
    cells
        .iter()
        .flatten()
        .find_map(|r| r.ae_train_seconds)
        .map_or(String::new(), secs)
}

fn csv_table(records: &[BenchRecord], meta: &TableMeta) -> Result<String> {
    let mut out = String::new();
    out.push_str(&format!("# {}\n", meta.title));
    for (k, v) in &meta.entries {
        out.push_str(&format!("# {k}: {v}\n"));
    }
    let refs: Vec<&BenchRecord> = records.iter().collect();
    let p = pivot(&refs);
    let mut header = vec!["algorithm".to_string(), "dataset".into(), "metric".into()];
    for &v in &p.variants {
        let g = group(v);
        header.push(g.to_string());
        for suffix in ["fit_s", "predict_s", "preprocess_s"] {
            header.push(format!("{g}_{suffix}"));
        }
    }
    if p.has_ae {
        header.push("ae_train_s".into());
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Format(format!("csv: {e}"));
    w.write_record(&header).map_err(csv_err)?;
    let dataset = records[0].dataset.as_str();
    for (a, m, cells) in &p.rows {
        let mut row = vec![a.to_string(), dataset.to_string(), m.to_string()];
        for cell in cells {
            match cell {
                Some(r) => {
                    row.push(metric_cell(r));
                    row.push(secs(r.fit_seconds));
                    row.push(secs(r.predict_seconds));
                    row.push(secs(r.preprocess_seconds));
                }
                None => row.extend(std::iter::repeat_n(String::new(), 4)),
            }
        }
        if p.has_ae {
            row.push(ae_train_cell(cells));
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(format!("csv: {e}")))?;
    out.push_str(&String::from_utf8(bytes).expect("csv output is UTF-8"));
    Ok(out)
}

fn markdown_table(records: &[BenchRecord], meta: &TableMeta) -> String {
    let mut out = format!("# {}\n\n", meta.title);
    for (k, v) in &meta.entries {
        out.push_str(&format!("- {k}: {v}\n"));
    }
    // accuracy and NMI never share a table
    for metric in [MetricName::Accuracy, MetricName::Nmi] {
        let subset: Vec<&BenchRecord> = records.iter().filter(|r| r.metric_name == metric).collect();
        if subset.is_empty() {
            continue;
        }
        let kind = if metric == MetricName::Accuracy {
            "Supervised"
        } else {
            "Unsupervised"
        };
        out.push_str(&format!("\n## {kind} learning, {}\n\n", records[0].dataset));
        let p = pivot(&subset);
        let mut header = vec!["Algorithm".to_string()];
        for &v in &p.variants {
            let t = group_title(v);
            header.push(format!("{t} {metric}"));
            header.push(format!("{t} fit (s)"));
            header.push(format!("{t} predict (s)"));
            header.push(format!("{t} preprocess (s)"));
        }
        if p.has_ae {
            header.push("AE training (s)".into());
        }
        out.push_str(&format!("| {} |\n", header.join(" | ")));
        out.push_str(&format!("|{}\n", "---|".repeat(header.len())));
        for (a, _, cells) in &p.rows {
            let mut row = vec![a.to_string()];
            for cell in cells {
                match cell {
                    Some(r) => {
                        row.push(metric_cell(r));
                        row.push(secs(r.fit_seconds));
                        row.push(secs(r.predict_seconds));
                        row.push(secs(r.preprocess_seconds));
                    }
                    None => row.extend(std::iter::repeat_n(String::new(), 4)),
                }
            }
            if p.has_ae {
                row.push(ae_train_cell(cells));
            }
            out.push_str(&format!("| {} |\n", row.join(" | ")));
        }
    }
    out
}

pub fn render_table(records: &[BenchRecord], format: Format, meta: &TableMeta) -> Result<String> {
    if records.is_empty() {
        return Err(Error::Degenerate("no records to tabulate".into()));
    }
    match format {
        Format::Csv => csv_table(records, meta),
        Format::Markdown => Ok(markdown_table(records, meta)),
    }
}

/// Writes `text` to `path`, creating parent directories.
pub fn write_table(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn emit_table(records: &[BenchRecord], format: Format, meta: &TableMeta, path: &Path) -> Result<String> {
    let text = render_table(records, format, meta)?;
    write_table(path, &text)?;
    Ok(text)
}
