//! The structured result document written by every analysis command.

use pcskew::estimator::{Estimate, TestKind};
use pcskew::sim::{SimSpec, SimSummary};
use serde::{Deserialize, Serialize};

use crate::input::{Delimiter, Fingerprint, Orientation};

/// Bumped on any change to the document layout.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandName {
    Estimate,
    AlphaSweep,
    Simulate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub schema_version: u32,
    /// Producing tool and version, e.g. `pcskew 0.1.0`.
    pub tool: String,
    pub command: CommandName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<Fingerprint>,
    pub config: RunConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub estimates: Vec<TestEstimate>,
    /// `b₁` of residual column `k`, `None` where the column is constant.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub residual_skewness: Vec<Option<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scree: Vec<ScreePoint>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub alpha_sweep: Vec<SweepSeries>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimSummary>,
    pub warnings: Vec<String>,
    pub timing: Timing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RunConfig {
    Analysis(AnalysisConfig),
    Simulation(SimSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub alpha: f64,
    pub tests: Vec<TestKind>,
    /// Number of hypotheses `M` actually used.
    pub max_k: usize,
    /// `M` as requested; `None` means the default was used.
    pub max_k_requested: Option<usize>,
    pub center: bool,
    pub standardize: bool,
    pub orientation: Option<Orientation>,
    pub delimiter: Delimiter,
    pub header: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphas: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestEstimate {
    pub test: TestKind,
    pub alpha: f64,
    pub m_hat: usize,
    /// No p-value exceeded alpha; `m_hat` is then `M`.
    pub saturated: bool,
    /// `p_k` for `k = 0..=M`.
    pub p_values: Vec<f64>,
    /// Standardized statistic per `k`; empty when the p-values were imported.
    pub statistics: Vec<f64>,
    pub degenerate: Vec<bool>,
}

impl TestEstimate {
    pub fn from_estimate(e: &Estimate) -> Self {
        Self {
            test: e.pvalues.kind,
            alpha: e.alpha,
            m_hat: e.m_hat,
            saturated: e.saturated,
            p_values: e.pvalues.p.clone(),
            statistics: e.pvalues.statistic.clone(),
            degenerate: e.pvalues.degenerate.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreePoint {
    /// 1-based component index.
    pub index: usize,
    /// Sample component variance `μ_i / n`.
    pub eigenvalue: f64,
    pub cumulative_percent: f64,
}

/// Scree points from descending Gram eigenvalues.
pub fn scree(gram_eigenvalues: &[f64], n: usize) -> Vec<ScreePoint> {
    let total: f64 = gram_eigenvalues.iter().sum();
    let mut acc = 0.0;
    gram_eigenvalues
        .iter()
        .enumerate()
        .map(|(i, &mu)| {
            acc += mu;
            ScreePoint {
                index: i + 1,
                eigenvalue: mu / n as f64,
                cumulative_percent: if total > 0.0 { 100.0 * acc / total } else { 0.0 },
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSeries {
    pub test: TestKind,
    pub points: Vec<SweepPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub alpha: f64,
    pub m_hat: usize,
    pub saturated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub total_seconds: f64,
    /// p-values were taken from an earlier document instead of recomputed.
    pub reused_pvalues: bool,
}

impl ResultDocument {
    pub fn new(command: CommandName, config: RunConfig) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            tool: format!("pcskew {}", env!("CARGO_PKG_VERSION")),
            command,
            input: None,
            config,
            estimates: Vec::new(),
            residual_skewness: Vec::new(),
            scree: Vec::new(),
            alpha_sweep: Vec::new(),
            simulation: None,
            warnings: Vec::new(),
            timing: Timing {
                total_seconds: 0.0,
                reused_pvalues: false,
            },
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("document serializes");
        s.push('\n');
        s
    }
}
