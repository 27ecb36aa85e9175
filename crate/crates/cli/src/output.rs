//! Atomic file output and flat plot-data tables.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use pcskew::sim::SimSummary;

use crate::document::{ResultDocument, TestEstimate};
use crate::error::CliError;

/// Writes `contents` to a temporary file beside `path`, then renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let fail = |e: &dyn std::fmt::Display| CliError::input(format!("cannot write {}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| fail(&e))?;
    tmp.write_all(contents.as_bytes()).map_err(|e| fail(&e))?;
    tmp.as_file().sync_all().map_err(|e| fail(&e))?;
    tmp.persist(path).map_err(|e| fail(&e.error))?;
    Ok(())
}

fn fmt_value(v: f64) -> String {
    if v != 0.0 && v.abs() < 1e-4 {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

/// `k` followed by one p-value column per test.
pub fn pvalue_table(estimates: &[TestEstimate]) -> String {
    let mut out = String::from("k");
    for e in estimates {
        write!(out, "\tp_{}", e.test).unwrap();
    }
    out.push('\n');
    let rows = estimates.iter().map(|e| e.p_values.len()).max().unwrap_or(0);
    for k in 0..rows {
        write!(out, "{k}").unwrap();
        for e in estimates {
            match e.p_values.get(k) {
                Some(&p) => write!(out, "\t{}", fmt_value(p)).unwrap(),
                None => out.push_str("\tNA"),
            }
        }
        out.push('\n');
    }
    out
}

pub fn scree_table(doc: &ResultDocument) -> String {
    let mut out = String::from("index\teigenvalue\tcumulative_percent\n");
    for p in &doc.scree {
        writeln!(out, "{}\t{}\t{}", p.index, fmt_value(p.eigenvalue), fmt_value(p.cumulative_percent)).unwrap();
    }
    out
}

/// `alpha` followed by one `m_hat` column per test.
pub fn sweep_table(doc: &ResultDocument) -> String {
    let mut out = String::from("alpha");
    for s in &doc.alpha_sweep {
        write!(out, "\tm_hat_{}", s.test).unwrap();
    }
    out.push('\n');
    let rows = doc.alpha_sweep.first().map_or(0, |s| s.points.len());
    for i in 0..rows {
        write!(out, "{}", doc.alpha_sweep[0].points[i].alpha).unwrap();
        for s in &doc.alpha_sweep {
            write!(out, "\t{}", s.points[i].m_hat).unwrap();
        }
        out.push('\n');
    }
    out
}

/// `m_hat` followed by one replicate-count column per estimator.
pub fn histogram_table(summary: &SimSummary) -> String {
    let mut out = String::from("m_hat");
    for method in summary.methods.keys() {
        write!(out, "\t{method}").unwrap();
    }
    out.push('\n');
    let rows = summary.methods.values().map(|m| m.histogram.len()).max().unwrap_or(0);
    for k in 0..rows {
        write!(out, "{k}").unwrap();
        for m in summary.methods.values() {
            write!(out, "\t{}", m.histogram.get(k).copied().unwrap_or(0)).unwrap();
        }
        out.push('\n');
    }
    out
}

/// Writes every plot-data table that applies to `doc` into `dir`; returns the paths.
pub fn write_plot_data(dir: &Path, doc: &ResultDocument) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::input(format!("cannot create {}: {e}", dir.display())))?;
    let mut tables = Vec::new();
    if !doc.estimates.is_empty() {
        tables.push(("pvalues.tsv", pvalue_table(&doc.estimates)));
    }
    if !doc.scree.is_empty() {
        tables.push(("scree.tsv", scree_table(doc)));
    }
    if !doc.alpha_sweep.is_empty() {
        tables.push(("alpha_sweep.tsv", sweep_table(doc)));
    }
    if let Some(summary) = &doc.simulation {
        tables.push(("histogram.tsv", histogram_table(summary)));
    }
    let mut written = Vec::new();
    for (name, contents) in tables {
        let path = dir.join(name);
        write_atomic(&path, &contents)?;
        written.push(path);
    }
    Ok(written)
}
