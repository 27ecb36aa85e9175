//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every export returns a JSON string so the page needs no generated types.

use pcskew::estimator::{self, ResidualAnalysis, TestKind};
use pcskew::matrix::DataMatrix;
use pcskew::sim::{self, Case, Method, SimSpec};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn fail(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

fn case_spec(case: &str, d: usize, n: usize, m: usize, seed: u64) -> Result<SimSpec, String> {
    let case: Case = case.parse().map_err(|e: sim::SimError| e.to_string())?;
    let mut spec = SimSpec::case(case, d, n, m);
    spec.seed = seed;
    Ok(spec)
}

/// p-values, estimates and scree of an analysed matrix.
fn analysis_json(x: &DataMatrix, alpha: f64) -> Result<Value, String> {
    let analysis = ResidualAnalysis::from_data(x, None, false, false).map_err(|e| e.to_string())?;
    let mut tests = serde_json::Map::new();
    for kind in TestKind::ALL {
        if x.n() < kind.min_observations() {
            continue;
        }
        let p = analysis.pvalues(kind).map_err(|e| e.to_string())?;
        let e = estimator::estimate_m(&p, alpha).map_err(|e| e.to_string())?;
        tests.insert(
            kind.as_str().to_string(),
            json!({ "p_values": p.p, "m_hat": e.m_hat, "saturated": e.saturated }),
        );
    }
    let eigenvalues = analysis.sample_eigenvalues();
    let scree: Vec<f64> = eigenvalues.iter().take(analysis.residuals.max_k() + 1).copied().collect();
    Ok(json!({ "n": x.n(), "d": x.d(), "alpha": alpha, "tests": tests, "scree": scree }))
}

/// Draws one data set from a preset and returns its p-value curves.
#[wasm_bindgen]
pub fn simulate_pvalues(case: &str, d: usize, n: usize, m: usize, seed: u64, alpha: f64) -> Result<String, JsError> {
    let spec = case_spec(case, d, n, m, seed).map_err(fail)?;
    let model = spec.validate().map_err(fail)?;
    let x = sim::synth_data(&model, &sim::sample_scores(&spec, 0)).map_err(fail)?;
    let mut out = analysis_json(&x, alpha).map_err(fail)?;
    out["true_m"] = json!(m);
    Ok(out.to_string())
}

/// Parses a pasted matrix (one observation per line, comma or whitespace
/// separated) and estimates its number of components.
#[wasm_bindgen]
pub fn estimate_text(text: &str, alpha: f64, center: bool) -> Result<String, JsError> {
    let mut values = Vec::new();
    let mut d = 0;
    let mut n = 0;
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row: Vec<f64> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<f64>().map_err(|_| fail(format!("line {}: cannot parse `{t}`", line_no + 1))))
            .collect::<Result<_, _>>()?;
        if n == 0 {
            d = row.len();
        } else if row.len() != d {
            return Err(fail(format!("line {}: expected {d} values, found {}", line_no + 1, row.len())));
        }
        values.extend(row);
        n += 1;
    }
    let x = DataMatrix::from_rows(n, d, values).map_err(fail)?;
    let x = if center { pcskew::matrix::center_columns(&x) } else { x };
    Ok(analysis_json(&x, alpha).map_err(fail)?.to_string())
}

/// Monte-Carlo histogram of `m̂` for the two skewness tests.
#[wasm_bindgen]
pub fn simulate_histogram(case: &str, d: usize, n: usize, m: usize, reps: usize, seed: u64) -> Result<String, JsError> {
    let mut spec = case_spec(case, d, n, m, seed).map_err(fail)?;
    spec.replicates = reps;
    spec.estimators = vec![Method::Triples, Method::Dagostino];
    let summary = sim::run_replicates(&spec).map_err(fail)?;
    let methods: serde_json::Map<String, Value> = summary
        .methods
        .iter()
        .map(|(method, s)| {
            (
                method.to_string(),
                json!({ "histogram": s.histogram, "mean": s.mean, "stderr": s.stderr, "failures": s.failures }),
            )
        })
        .collect();
    Ok(json!({ "true_m": m, "replicates": reps, "methods": methods }).to_string())
}
