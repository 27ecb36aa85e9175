//! Synthetic data under the spiked eigenvalue model and Monte-Carlo replicates.
//!
//! Population eigenvalues are `λ_i = σ_i² d` with `σ_i² = s²{1 + g(m - i)}`
//! for the `m` spikes and `λ_i = τ_β i^{-β}` for the tail, normalized so the
//! tail averages one. Data are generated in the population eigenbasis,
//! `X_ji = sqrt(λ_i) z_ij`: every statistic used downstream depends on the
//! data only through inner products, which a rotation leaves unchanged.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{StandardNormal, StudentT};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{self, BaselineError};
use crate::estimator::{self, EstimateError, ResidualAnalysis, TestKind};
use crate::matrix::{self, DataMatrix, MatrixError, ResidualLengths};
use crate::skew;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("spike eigenvalue λ_m = {spike} does not exceed the first tail eigenvalue {tail}")]
    SpikeBelowNoise { spike: f64, tail: f64 },
    #[error("invalid simulation parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

pub type Result<T> = std::result::Result<T, SimError>;

/// Population eigenvalues of the spiked model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenModel {
    pub lambdas: Vec<f64>,
    pub m: usize,
    pub s: f64,
    pub g: f64,
    pub beta: f64,
    pub tau_beta: f64,
}

impl EigenModel {
    pub fn d(&self) -> usize {
        self.lambdas.len()
    }

    /// `σ_i² = λ_i / d` for the spikes.
    pub fn spike_sigma2(&self) -> Vec<f64> {
        let d = self.d() as f64;
        self.lambdas[..self.m].iter().map(|l| l / d).collect()
    }

    /// Finite-`d` noise level `τ² = d⁻¹ Σ_{i>m} λ_i`.
    pub fn tau2(&self) -> f64 {
        self.lambdas[self.m..].iter().sum::<f64>() / self.d() as f64
    }

    /// `d⁻¹ Σ_{i>m} λ_i²`, the off-diagonal variance `υ_O²` at finite `d`.
    pub fn upsilon_o2(&self) -> f64 {
        self.lambdas[self.m..].iter().map(|l| l * l).sum::<f64>() / self.d() as f64
    }
}

pub fn eigen_model(d: usize, m: usize, s: f64, g: f64, beta: f64) -> Result<EigenModel> {
    if d <= m {
        return Err(SimError::InvalidParameter(format!("need d > m, got d = {d}, m = {m}")));
    }
    if !(s > 0.0) {
        return Err(SimError::InvalidParameter(format!("signal strength s must be positive, got {s}")));
    }
    if m >= 2 && !(g > 0.0) {
        return Err(SimError::InvalidParameter(format!("gap g must be positive when m >= 2, got {g}")));
    }
    if !(0.0..0.5).contains(&beta) {
        return Err(SimError::InvalidParameter(format!("beta must lie in [0, 0.5), got {beta}")));
    }
    let df = d as f64;
    let tail_sum: f64 = ((m + 1)..=d).map(|i| (i as f64).powf(-beta)).sum();
    let tau_beta = (d - m) as f64 / tail_sum;
    let mut lambdas = Vec::with_capacity(d);
    for i in 1..=m {
        lambdas.push(s * s * (1.0 + g * (m - i) as f64) * df);
    }
    for i in (m + 1)..=d {
        lambdas.push(tau_beta * (i as f64).powf(-beta));
    }
    if m >= 1 && lambdas[m - 1] <= lambdas[m] {
        return Err(SimError::SpikeBelowNoise {
            spike: lambdas[m - 1],
            tail: lambdas[m],
        });
    }
    Ok(EigenModel {
        lambdas,
        m,
        s,
        g,
        beta,
        tau_beta,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreDistribution {
    StandardNormal,
    /// Student t with 3 degrees of freedom scaled to unit variance.
    StudentT3,
}

impl ScoreDistribution {
    /// `var(z²)` where it is finite.
    pub fn var_of_square(self) -> Option<f64> {
        match self {
            ScoreDistribution::StandardNormal => Some(2.0),
            ScoreDistribution::StudentT3 => None,
        }
    }
}

impl FromStr for ScoreDistribution {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "normal" | "gaussian" | "standard_normal" => Ok(ScoreDistribution::StandardNormal),
            "t3" | "student_t3" | "t" => Ok(ScoreDistribution::StudentT3),
            _ => Err(SimError::InvalidParameter(format!("unknown score distribution `{s}`"))),
        }
    }
}

impl fmt::Display for ScoreDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScoreDistribution::StandardNormal => "normal",
            ScoreDistribution::StudentT3 => "t3",
        })
    }
}

/// Standardized scores, stored observation-major: entry `(j, i)` is `z_ij`,
/// component `i` of observation `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScorePanel {
    pub z: Array2<f64>,
    pub distribution: ScoreDistribution,
    pub seed: u64,
    pub stream: u64,
}

/// Stream tag for score panels.
pub const STREAM_SCORES: u64 = 1;
/// Stream tag for random rotations.
pub const STREAM_ROTATION: u64 = 2;

/// ChaCha8 keyed by `seed`, on stream `(replicate << 8) | tag`.
///
/// Each replicate and purpose gets its own counter-based stream, so results
/// do not depend on execution order or thread count.
pub fn replicate_rng(seed: u64, replicate: u64, tag: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((replicate << 8) | (tag & 0xff));
    rng
}

pub fn sample_panel(
    n: usize,
    d: usize,
    distribution: ScoreDistribution,
    seed: u64,
    replicate: u64,
) -> ScorePanel {
    let mut rng = replicate_rng(seed, replicate, STREAM_SCORES);
    let z = match distribution {
        ScoreDistribution::StandardNormal => {
            Array2::from_shape_simple_fn((n, d), || rng.sample::<f64, _>(StandardNormal))
        }
        ScoreDistribution::StudentT3 => {
            let t3 = StudentT::new(3.0).expect("valid degrees of freedom");
            let scale = 1.0 / 3.0_f64.sqrt();
            Array2::from_shape_simple_fn((n, d), || rng.sample(t3) * scale)
        }
    };
    ScorePanel {
        z,
        distribution,
        seed,
        stream: (replicate << 8) | STREAM_SCORES,
    }
}

pub fn sample_scores(spec: &SimSpec, replicate: usize) -> ScorePanel {
    sample_panel(spec.n, spec.d, spec.distribution, spec.seed, replicate as u64)
}

/// `X_j = Σ_i sqrt(λ_i) z_ij e_i`.
pub fn synth_data(model: &EigenModel, z: &ScorePanel) -> Result<DataMatrix> {
    if z.z.ncols() != model.d() {
        return Err(SimError::InvalidParameter(format!(
            "score panel has {} components, model has d = {}",
            z.z.ncols(),
            model.d()
        )));
    }
    let roots = Array1::from_iter(model.lambdas.iter().map(|l| l.sqrt()));
    let x = &z.z * &roots;
    Ok(DataMatrix::new(x)?)
}

/// Haar-distributed `d x d` orthogonal matrix: Gram-Schmidt on a Gaussian
/// matrix, which implicitly gives `R` a positive diagonal.
pub fn random_orthogonal(d: usize, seed: u64, replicate: u64) -> Array2<f64> {
    let mut rng = replicate_rng(seed, replicate, STREAM_ROTATION);
    let mut q = Array2::from_shape_simple_fn((d, d), || rng.sample::<f64, _>(StandardNormal));
    // Modified Gram-Schmidt on columns, applied twice for orthogonality to roundoff.
    for j in 0..d {
        for _ in 0..2 {
            for k in 0..j {
                let proj: f64 = (0..d).map(|i| q[[i, k]] * q[[i, j]]).sum();
                for i in 0..d {
                    q[[i, j]] -= proj * q[[i, k]];
                }
            }
            let norm: f64 = (0..d).map(|i| q[[i, j]] * q[[i, j]]).sum::<f64>().sqrt();
            for i in 0..d {
                q[[i, j]] /= norm;
            }
        }
    }
    q
}

/// Like [`synth_data`] but with population eigenvectors drawn uniformly from
/// the orthogonal group. Limited to `d < 200`; it exists to check that the
/// standard-basis shortcut changes nothing.
pub fn synth_data_rotated(model: &EigenModel, z: &ScorePanel, seed: u64, replicate: u64) -> Result<DataMatrix> {
    let d = model.d();
    if d >= 200 {
        return Err(SimError::InvalidParameter(format!(
            "rotated mode is limited to d < 200, got {d}"
        )));
    }
    let x = synth_data(model, z)?;
    let u = random_orthogonal(d, seed, replicate);
    Ok(DataMatrix::new(x.values().dot(&u.t()))?)
}

/// True residual lengths `R̃_j(k) = d⁻¹ Σ_{i>k} λ_i z_ij²`, `k = 0..M`.
pub fn true_residuals(model: &EigenModel, z: &ScorePanel, max_k: usize) -> Result<ResidualLengths> {
    let d = model.d();
    if max_k >= d {
        return Err(SimError::InvalidParameter(format!("max k {max_k} must be below d = {d}")));
    }
    let n = z.z.nrows();
    let df = d as f64;
    let mut table = Array2::zeros((n, max_k + 1));
    for j in 0..n {
        let row = z.z.row(j);
        let w2: Vec<f64> = model.lambdas.iter().zip(row.iter()).map(|(l, v)| l * v * v).collect();
        // Sum the tail from the smallest terms up, then peel off leading terms.
        let tail: f64 = w2[max_k..].iter().rev().sum();
        let mut acc = tail;
        table[[j, max_k]] = acc / df;
        for k in (0..max_k).rev() {
            acc += w2[k];
            table[[j, k]] = acc / df;
        }
    }
    Ok(ResidualLengths::from_table(table, d))
}

/// `a_j(k) = R_j(k) - R̃_j(k)`.
pub fn residual_gap(sample: &ResidualLengths, truth: &ResidualLengths) -> Array2<f64> {
    let k = sample.max_k().min(truth.max_k()) + 1;
    let a = sample.table().slice(ndarray::s![.., ..k]);
    let b = truth.table().slice(ndarray::s![.., ..k]);
    &a - &b
}

/// Estimators available to [`run_replicates`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Triples,
    Dagostino,
    BaiNg,
    KritchmanNadler,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Triples, Method::Dagostino, Method::BaiNg, Method::KritchmanNadler];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Triples => "triples",
            Method::Dagostino => "dagostino",
            Method::BaiNg => "bai_ng",
            Method::KritchmanNadler => "kritchman_nadler",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "triples" | "r" => Ok(Method::Triples),
            "dagostino" | "d" => Ok(Method::Dagostino),
            "bai_ng" | "bai-ng" | "baing" | "bn" => Ok(Method::BaiNg),
            "kritchman_nadler" | "kritchman-nadler" | "kn" => Ok(Method::KritchmanNadler),
            _ => Err(SimError::InvalidParameter(format!("unknown estimator `{s}`"))),
        }
    }
}

/// The four simulation presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Case {
    I,
    II,
    III,
    IV,
}

impl Case {
    /// `(s, g, β, distribution)`.
    pub fn parameters(self) -> (f64, f64, f64, ScoreDistribution) {
        use ScoreDistribution::*;
        match self {
            Case::I => (0.2, 1.0, 0.0, StandardNormal),
            Case::II => (0.2, 1.0, 0.3, StandardNormal),
            Case::III => (0.2, 1.0, 0.3, StudentT3),
            Case::IV => (0.1, 0.5, 0.3, StudentT3),
        }
    }
}

impl FromStr for Case {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "I" | "1" => Ok(Case::I),
            "II" | "2" => Ok(Case::II),
            "III" | "3" => Ok(Case::III),
            "IV" | "4" => Ok(Case::IV),
            _ => Err(SimError::InvalidParameter(format!("unknown case `{s}`"))),
        }
    }
}

/// One simulation scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub d: usize,
    pub n: usize,
    pub m: usize,
    pub s: f64,
    pub g: f64,
    pub beta: f64,
    pub distribution: ScoreDistribution,
    pub seed: u64,
    pub replicates: usize,
    pub alpha: f64,
    /// Significance level inside the Kritchman–Nadler baseline.
    pub kn_alpha: f64,
    pub estimators: Vec<Method>,
    /// Number of hypotheses; `None` selects `min(n - 2, 30)`.
    pub max_k: Option<usize>,
}

impl SimSpec {
    pub fn case(case: Case, d: usize, n: usize, m: usize) -> Self {
        let (s, g, beta, distribution) = case.parameters();
        Self {
            d,
            n,
            m,
            s,
            g,
            beta,
            distribution,
            seed: 1,
            replicates: 100,
            alpha: estimator::DEFAULT_ALPHA,
            kn_alpha: 0.05,
            estimators: Method::ALL.to_vec(),
            max_k: None,
        }
    }

    pub fn effective_max_k(&self) -> usize {
        self.max_k.unwrap_or_else(|| estimator::default_max_k(self.n))
    }

    pub fn validate(&self) -> Result<EigenModel> {
        if self.replicates == 0 {
            return Err(SimError::InvalidParameter("replicates must be at least 1".into()));
        }
        if self.m >= self.n {
            return Err(SimError::InvalidParameter(format!("need m < n, got m = {}, n = {}", self.m, self.n)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(SimError::InvalidParameter(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.estimators.is_empty() {
            return Err(SimError::InvalidParameter("no estimators selected".into()));
        }
        let max_k = self.effective_max_k();
        if max_k >= self.n {
            return Err(SimError::InvalidParameter(format!("max k {max_k} must be below n = {}", self.n)));
        }
        for &method in &self.estimators {
            let needed = match method {
                Method::Triples => skew::TRIPLES_MIN_N,
                Method::Dagostino => skew::DAGOSTINO_MIN_N,
                Method::BaiNg => 2,
                Method::KritchmanNadler => 10,
            };
            if self.n < needed {
                return Err(SimError::InvalidParameter(format!("{method} needs n >= {needed}, got {}", self.n)));
            }
        }
        if self.estimators.contains(&Method::KritchmanNadler) {
            if self.d <= self.n {
                return Err(SimError::InvalidParameter("kritchman_nadler needs d > n".into()));
            }
            baselines::tw1_quantile(self.kn_alpha)
                .map_err(|e| SimError::InvalidParameter(e.to_string()))?;
        }
        eigen_model(self.d, self.m, self.s, self.g, self.beta)
    }
}

/// Result of one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub index: usize,
    /// ChaCha stream of the score panel.
    pub stream: u64,
    pub m_hat: BTreeMap<Method, usize>,
    pub errors: BTreeMap<Method, String>,
    /// `b₁` of residual column `m`.
    pub skew_at_m: Option<f64>,
    /// `b₁` of residual column `m - 1` (absent when `m = 0`).
    pub skew_below_m: Option<f64>,
    /// `b₁` of every residual column `0..=M`.
    pub residual_skewness: Vec<Option<f64>>,
    /// p-values of the skewness tests that ran.
    pub pvalues: BTreeMap<Method, Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    /// `None` when every replicate failed for this method.
    pub mean: Option<f64>,
    pub stderr: Option<f64>,
    /// `histogram[k]` replicates estimated `m̂ = k`.
    pub histogram: Vec<usize>,
    pub successes: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub spec: SimSpec,
    pub model_tau_beta: f64,
    pub methods: BTreeMap<Method, MethodSummary>,
    pub replicates: Vec<ReplicateRecord>,
}

impl SimSummary {
    pub fn method(&self, method: Method) -> Option<&MethodSummary> {
        self.methods.get(&method)
    }
}

fn skewness_opt(r: &ResidualLengths, k: usize) -> Option<f64> {
    if k > r.max_k() {
        return None;
    }
    skew::sample_skewness(&r.column(k)).ok()
}

pub fn run_replicate(spec: &SimSpec, model: &EigenModel, index: usize) -> ReplicateRecord {
    let panel = sample_scores(spec, index);
    let mut record = ReplicateRecord {
        index,
        stream: panel.stream,
        m_hat: BTreeMap::new(),
        errors: BTreeMap::new(),
        skew_at_m: None,
        skew_below_m: None,
        residual_skewness: Vec::new(),
        pvalues: BTreeMap::new(),
    };
    let max_k = spec.effective_max_k();
    let analysis = synth_data(model, &panel)
        .map_err(|e| e.to_string())
        .and_then(|x| ResidualAnalysis::from_data(&x, Some(max_k), false, false).map_err(|e| e.to_string()));
    let analysis = match analysis {
        Ok(a) => a,
        Err(e) => {
            for &method in &spec.estimators {
                record.errors.insert(method, e.clone());
            }
            return record;
        }
    };
    let r = &analysis.residuals;
    record.skew_at_m = skewness_opt(r, spec.m);
    record.skew_below_m = spec.m.checked_sub(1).and_then(|k| skewness_opt(r, k));
    record.residual_skewness = (0..=r.max_k()).map(|k| skewness_opt(r, k)).collect();

    for &method in &spec.estimators {
        let outcome: std::result::Result<usize, String> = match method {
            Method::Triples | Method::Dagostino => {
                let kind = if method == Method::Triples {
                    TestKind::Triples
                } else {
                    TestKind::DAgostino
                };
                analysis
                    .pvalues(kind)
                    .and_then(|p| {
                        let e = estimator::estimate_m(&p, spec.alpha)?;
                        record.pvalues.insert(method, p.p);
                        Ok(e.m_hat)
                    })
                    .map_err(|e: EstimateError| e.to_string())
            }
            Method::BaiNg => baselines::bai_ng(r, max_k)
                .map(|b| b.m_hat)
                .map_err(|e: BaselineError| e.to_string()),
            Method::KritchmanNadler => baselines::kritchman_nadler(
                &analysis.sample_eigenvalues(),
                spec.n,
                spec.d,
                spec.kn_alpha,
                max_k,
            )
            .map(|b| b.m_hat)
            .map_err(|e| e.to_string()),
        };
        match outcome {
            Ok(m) => {
                record.m_hat.insert(method, m);
            }
            Err(e) => {
                record.errors.insert(method, e);
            }
        }
    }
    record
}

/// Runs every replicate of `spec` and summarizes each estimator.
///
/// Replicate failures are counted per method and never abort the batch.
pub fn run_replicates(spec: &SimSpec) -> Result<SimSummary> {
    let model = spec.validate()?;
    let indices: Vec<usize> = (0..spec.replicates).collect();
    #[cfg(feature = "parallel")]
    let records: Vec<ReplicateRecord> = {
        use rayon::prelude::*;
        indices.par_iter().map(|&i| run_replicate(spec, &model, i)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let records: Vec<ReplicateRecord> = indices.iter().map(|&i| run_replicate(spec, &model, i)).collect();

    let max_k = spec.effective_max_k();
    let mut methods = BTreeMap::new();
    for &method in &spec.estimators {
        let values: Vec<usize> = records.iter().filter_map(|r| r.m_hat.get(&method).copied()).collect();
        let mut histogram = vec![0; max_k + 1];
        for &v in &values {
            histogram[v.min(max_k)] += 1;
        }
        let (mean, stderr) = match mean_stderr(&values) {
            Some((m, s)) => (Some(m), Some(s)),
            None => (None, None),
        };
        methods.insert(
            method,
            MethodSummary {
                mean,
                stderr,
                histogram,
                successes: values.len(),
                failures: records.len() - values.len(),
            },
        );
    }
    Ok(SimSummary {
        spec: spec.clone(),
        model_tau_beta: model.tau_beta,
        methods,
        replicates: records,
    })
}

/// Mean and standard error (sample sd over `sqrt(count)`); `None` when empty.
pub fn mean_stderr(values: &[usize]) -> Option<(f64, f64)> {
    let count = values.len();
    if count == 0 {
        return None;
    }
    let c = count as f64;
    let mean = values.iter().map(|&v| v as f64).sum::<f64>() / c;
    if count == 1 {
        return Some((mean, 0.0));
    }
    let var = values.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / (c - 1.0);
    Some((mean, (var / c).sqrt()))
}

/// Distance of the scaled Gram matrix from its large-`d` limit `W₁ᵀW₁ + τ²I`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramLimitReport {
    pub tau2: f64,
    pub upsilon_d2: f64,
    pub upsilon_o2: f64,
    /// `max_{j≠k} |s_jk - Σ_i σ_i² z_ij z_ik|`.
    pub max_offdiag_dev: f64,
    /// `max_j |s_jj - Σ_i σ_i² z_ij² - τ²|`.
    pub max_diag_dev: f64,
    /// `sqrt(d) (s_jj - Σ_i σ_i² z_ij² - τ²) / υ_D` per observation.
    pub studentized_diagonals: Vec<f64>,
    /// `sqrt(d) (s_jk - Σ_i σ_i² z_ij z_ik) / υ_O` for `j < k`.
    pub studentized_offdiagonals: Vec<f64>,
}

pub fn gram_limit_check(model: &EigenModel, z: &ScorePanel) -> Result<GramLimitReport> {
    let x = synth_data(model, z)?;
    let n = x.n();
    if model.m >= n {
        return Err(SimError::InvalidParameter(format!("need m < n, got m = {}, n = {n}", model.m)));
    }
    let d = model.d() as f64;
    let s_d = matrix::gram(&x).scaled();
    let sigma2 = model.spike_sigma2();
    let tau2 = model.tau2();
    let upsilon_o2 = model.upsilon_o2();
    let var_z2 = match z.distribution.var_of_square() {
        Some(v) => v,
        None => {
            let tail = z.z.slice(ndarray::s![.., model.m..]);
            let count = tail.len() as f64;
            let mean = tail.iter().map(|v| v * v).sum::<f64>() / count;
            tail.iter().map(|v| (v * v - mean).powi(2)).sum::<f64>() / count
        }
    };
    let upsilon_d2 = upsilon_o2 * var_z2;
    let limit = |j: usize, k: usize| -> f64 {
        let mut v: f64 = (0..model.m).map(|i| sigma2[i] * z.z[[j, i]] * z.z[[k, i]]).sum();
        if j == k {
            v += tau2;
        }
        v
    };
    let mut max_offdiag_dev = 0.0_f64;
    let mut max_diag_dev = 0.0_f64;
    let mut studentized_diagonals = Vec::with_capacity(n);
    let mut studentized_offdiagonals = Vec::with_capacity(n * (n - 1) / 2);
    for j in 0..n {
        let dev = s_d[[j, j]] - limit(j, j);
        max_diag_dev = max_diag_dev.max(dev.abs());
        studentized_diagonals.push(d.sqrt() * dev / upsilon_d2.sqrt());
        for k in (j + 1)..n {
            let dev = s_d[[j, k]] - limit(j, k);
            max_offdiag_dev = max_offdiag_dev.max(dev.abs());
            studentized_offdiagonals.push(d.sqrt() * dev / upsilon_o2.sqrt());
        }
    }
    Ok(GramLimitReport {
        tau2,
        upsilon_d2,
        upsilon_o2,
        max_offdiag_dev,
        max_diag_dev,
        studentized_diagonals,
        studentized_offdiagonals,
    })
}

/// Agreement of the first `m` sample scores with the rotated and scaled true
/// scores `W₁ᵀ R S`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRotationReport {
    /// `max |Ŵ₁ᵀ - W₁ᵀ R S|` after per-column sign alignment.
    pub max_residual: f64,
    /// `ρ_k = {1 + τ²/λ_k(W₁W₁ᵀ)}^{1/2}`.
    pub rho: Vec<f64>,
    /// `ρ_k v_kk(W₁W₁ᵀ)`, the common factor of `ŵ_kj / w_kj`.
    pub ratio_factor: Vec<f64>,
    /// Mean of `ŵ_kj / w_kj` over observations, per spike (sign-aligned).
    pub ratio_mean: Vec<f64>,
    /// Standard deviation of `ŵ_kj / w_kj` over observations, per spike.
    pub ratio_sd: Vec<f64>,
    /// `d⁻¹ Σ_j ŵ_kj²` for the noise components `k = m+1, ..., n-1`.
    pub noise_second_moments: Vec<f64>,
    pub tau2: f64,
}

pub fn score_rotation_check(model: &EigenModel, z: &ScorePanel) -> Result<ScoreRotationReport> {
    let m = model.m;
    if m == 0 {
        return Err(SimError::InvalidParameter("score rotation check needs m >= 1".into()));
    }
    let x = synth_data(model, z)?;
    let n = x.n();
    if m >= n {
        return Err(SimError::InvalidParameter(format!("need m < n, got m = {m}, n = {n}")));
    }
    let d = model.d() as f64;
    let eig = matrix::gram(&x).eigen()?;
    let scores = matrix::pc_scores(&eig, n - 1)?;
    let w_hat = scores.scores().slice(ndarray::s![.., ..m]).mapv(|v| v / d.sqrt());

    let sigma = model.spike_sigma2().iter().map(|s| s.sqrt()).collect::<Vec<_>>();
    // W₁ᵀ: n x m, entry (j, i) = σ_i z_ij.
    let w1t = Array2::from_shape_fn((n, m), |(j, i)| sigma[i] * z.z[[j, i]]);
    let ww = w1t.t().dot(&w1t);
    let inner = matrix::sym_eigen(&ww)?;
    let tau2 = model.tau2();
    let rho: Vec<f64> = inner.eigenvalues.iter().map(|l| (1.0 + tau2 / l).sqrt()).collect();
    let mut predicted = w1t.dot(&inner.eigenvectors);
    for (k, r) in rho.iter().enumerate() {
        predicted.column_mut(k).mapv_inplace(|v| v * r);
    }

    let mut max_residual = 0.0_f64;
    let mut ratio_factor = Vec::with_capacity(m);
    let mut ratio_mean = Vec::with_capacity(m);
    let mut ratio_sd = Vec::with_capacity(m);
    for k in 0..m {
        let dot: f64 = (0..n).map(|j| w_hat[[j, k]] * predicted[[j, k]]).sum();
        let sign = if dot < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            max_residual = max_residual.max((sign * w_hat[[j, k]] - predicted[[j, k]]).abs());
        }
        let vkk = inner.eigenvectors[[k, k]];
        ratio_factor.push(rho[k] * vkk);
        // Sample score over true score, both on the sqrt(d) scale; the sign
        // is aligned with v_kk so the common factor is comparable.
        let ratios: Vec<f64> = (0..n)
            .map(|j| sign * w_hat[[j, k]] / w1t[[j, k]])
            .collect();
        let mean = ratios.iter().sum::<f64>() / n as f64;
        let sd = (ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
        ratio_mean.push(mean);
        ratio_sd.push(sd);
    }
    let noise_second_moments = (m..n - 1)
        .map(|k| scores.scores().column(k).iter().map(|v| v * v).sum::<f64>() / d)
        .collect();
    Ok(ScoreRotationReport {
        max_residual,
        rho,
        ratio_factor,
        ratio_mean,
        ratio_sd,
        noise_second_moments,
        tau2,
    })
}
