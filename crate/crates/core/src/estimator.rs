//! Sequential estimation of the number of components.
//!
//! For `k = 0, 1, ..., M` the residual lengths `R_1(k), ..., R_n(k)` are
//! tested for right skew. Right skew means components with diverging
//! variance remain in the residual; once they are all removed the residual
//! lengths turn symmetric or left-skewed and the p-value jumps toward one.
//! The estimate is the first `k` whose p-value exceeds `α`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::{self, DataMatrix, MatrixError, ResidualLengths};
use crate::skew::{self, SkewError};

/// Significance level used when none is given.
pub const DEFAULT_ALPHA: f64 = 0.1;
/// Upper bound of the default number of hypotheses.
pub const DEFAULT_MAX_K_CAP: usize = 30;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimateError {
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error("skewness test failed at k = {k}: {source}")]
    Skew { k: usize, source: SkewError },
    #[error("alpha must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),
    #[error("max k = {max_k} is too large for n = {n} (limit {limit}{})", if *.centered { ", centered data" } else { "" })]
    InvalidMaxK {
        max_k: usize,
        n: usize,
        limit: usize,
        centered: bool,
    },
    #[error("{kind} test needs at least {needed} observations, got {given}")]
    TooFewObservations {
        kind: TestKind,
        given: usize,
        needed: usize,
    },
    #[error("unknown test kind `{0}` (expected triples or dagostino)")]
    UnknownTestKind(String),
}

pub type Result<T> = std::result::Result<T, EstimateError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestKind {
    Triples,
    #[serde(rename = "dagostino")]
    DAgostino,
}

impl TestKind {
    pub const ALL: [TestKind; 2] = [TestKind::Triples, TestKind::DAgostino];

    pub fn min_observations(self) -> usize {
        match self {
            TestKind::Triples => skew::TRIPLES_MIN_N,
            TestKind::DAgostino => skew::DAGOSTINO_MIN_N,
        }
    }

    pub fn run(self, y: &[f64]) -> std::result::Result<skew::TestResult, SkewError> {
        match self {
            TestKind::Triples => skew::triples_test_right(y),
            TestKind::DAgostino => skew::dagostino_test_right(y),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TestKind::Triples => "triples",
            TestKind::DAgostino => "dagostino",
        }
    }
}

impl fmt::Display for TestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TestKind {
    type Err = EstimateError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "triples" | "r" => Ok(TestKind::Triples),
            "dagostino" | "d'agostino" | "d" => Ok(TestKind::DAgostino),
            _ => Err(EstimateError::UnknownTestKind(s.to_string())),
        }
    }
}

/// p-values `p_0, ..., p_M` from one test kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PValueSequence {
    pub kind: TestKind,
    pub p: Vec<f64>,
    /// Standardized test statistic per `k`; empty when built from bare p-values.
    pub statistic: Vec<f64>,
    /// `true` where the test was degenerate and `p_k` was set to 0.5.
    pub degenerate: Vec<bool>,
    /// Sample skewness `b₁` of column `k`; `None` for constant columns.
    pub skewness: Vec<Option<f64>>,
}

impl PValueSequence {
    /// A sequence from bare p-values, without per-`k` diagnostics.
    pub fn from_values(kind: TestKind, p: Vec<f64>) -> Self {
        let len = p.len();
        Self {
            kind,
            statistic: Vec::new(),
            p,
            degenerate: vec![false; len],
            skewness: vec![None; len],
        }
    }

    pub fn max_k(&self) -> usize {
        self.p.len().saturating_sub(1)
    }
}

/// Applies the right-skew test to every column of the residual table.
///
/// Degenerate columns (zero variance, degenerate U-statistic variance) get
/// `p_k = 0.5` and a flag instead of aborting the scan.
pub fn pvalue_sequence(r: &ResidualLengths, kind: TestKind) -> Result<PValueSequence> {
    let n = r.n();
    let needed = kind.min_observations();
    if n < needed {
        return Err(EstimateError::TooFewObservations {
            kind,
            given: n,
            needed,
        });
    }
    let per_k = |k: usize| -> Result<(f64, f64, bool, Option<f64>)> {
        let y = r.column(k);
        let b1 = skew::sample_skewness(&y).ok();
        match kind.run(&y) {
            Ok(t) => Ok((t.p_right, t.statistic, false, b1)),
            Err(SkewError::DegenerateVariance(_)) | Err(SkewError::ZeroVariance) => {
                log::warn!("{kind} test degenerate at k = {k}; using p = 0.5");
                Ok((0.5, 0.0, true, b1))
            }
            Err(source) => Err(EstimateError::Skew { k, source }),
        }
    };
    let ks: Vec<usize> = (0..=r.max_k()).collect();
    #[cfg(feature = "parallel")]
    let results: Vec<_> = {
        use rayon::prelude::*;
        ks.par_iter().map(|&k| per_k(k)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<_> = ks.iter().map(|&k| per_k(k)).collect();

    let mut seq = PValueSequence {
        kind,
        p: Vec::with_capacity(ks.len()),
        statistic: Vec::with_capacity(ks.len()),
        degenerate: Vec::with_capacity(ks.len()),
        skewness: Vec::with_capacity(ks.len()),
    };
    for res in results {
        let (p, stat, degenerate, b1) = res?;
        seq.p.push(p);
        seq.statistic.push(stat);
        seq.degenerate.push(degenerate);
        seq.skewness.push(b1);
    }
    Ok(seq)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub m_hat: usize,
    pub alpha: f64,
    pub pvalues: PValueSequence,
    pub per_k_skewness: Vec<Option<f64>>,
    /// No `p_k` exceeded `α` up to `M`; `m_hat` is then `M`.
    pub saturated: bool,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(EstimateError::InvalidAlpha(alpha))
    }
}

/// `m̂ = min { k : p_k > α }`, or `M` flagged as saturated.
pub fn estimate_m(p: &PValueSequence, alpha: f64) -> Result<Estimate> {
    check_alpha(alpha)?;
    let first = p.p.iter().position(|&v| v > alpha);
    Ok(Estimate {
        m_hat: first.unwrap_or(p.max_k()),
        alpha,
        pvalues: p.clone(),
        per_k_skewness: p.skewness.clone(),
        saturated: first.is_none(),
    })
}

/// One estimate per `α`, reusing the same p-values.
pub fn alpha_sweep(p: &PValueSequence, alphas: &[f64]) -> Result<Vec<Estimate>> {
    alphas.iter().map(|&a| estimate_m(p, a)).collect()
}

/// Default number of hypotheses, `min(n - 2, 30)`.
pub fn default_max_k(n: usize) -> usize {
    n.saturating_sub(2).min(DEFAULT_MAX_K_CAP)
}

/// Largest admissible `M`: `n - 2` for centered data, `n - 1` otherwise.
pub fn max_k_limit(n: usize, centered: bool) -> usize {
    if centered {
        n.saturating_sub(2)
    } else {
        n.saturating_sub(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateConfig {
    pub alpha: f64,
    pub test: TestKind,
    /// `None` selects [`default_max_k`].
    pub max_k: Option<usize>,
    pub center: bool,
    pub standardize: bool,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            test: TestKind::DAgostino,
            max_k: None,
            center: false,
            standardize: false,
        }
    }
}

/// Gram eigenvalues and residual lengths of one data matrix, shared by all
/// tests and baselines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualAnalysis {
    pub n: usize,
    pub d: usize,
    pub centered: bool,
    /// Descending eigenvalues `μ_i` of `X Xᵀ`; `μ_i / n` are the sample PC variances.
    pub gram_eigenvalues: Vec<f64>,
    pub residuals: ResidualLengths,
    /// Constant columns left unscaled by standardization.
    pub constant_columns: usize,
}

impl ResidualAnalysis {
    pub fn from_data(
        x: &DataMatrix,
        max_k: Option<usize>,
        center: bool,
        standardize: bool,
    ) -> Result<Self> {
        let n = x.n();
        let centered = center || x.is_centered();
        let limit = max_k_limit(n, centered);
        let max_k = max_k.unwrap_or_else(|| default_max_k(n).min(limit));
        if max_k > limit || n < 2 {
            return Err(EstimateError::InvalidMaxK {
                max_k,
                n,
                limit,
                centered,
            });
        }
        let mut owned;
        let mut data = x;
        if center {
            owned = matrix::center_columns(data);
            data = &owned;
        }
        let mut constant_columns = 0;
        if standardize {
            let (s, skipped) = matrix::standardize_columns(data);
            owned = s;
            data = &owned;
            constant_columns = skipped;
        }
        let g = matrix::gram(data);
        let eig = g.eigen()?;
        let w = matrix::pc_scores(&eig, max_k)?;
        let residuals = matrix::residual_lengths(&g, &w, max_k)?;
        Ok(Self {
            n,
            d: x.d(),
            centered,
            gram_eigenvalues: eig.eigenvalues.to_vec(),
            residuals,
            constant_columns,
        })
    }

    /// Sample PC variances `λ̂_i = μ_i / n`.
    pub fn sample_eigenvalues(&self) -> Vec<f64> {
        let n = self.n as f64;
        self.gram_eigenvalues.iter().map(|m| m / n).collect()
    }

    pub fn pvalues(&self, kind: TestKind) -> Result<PValueSequence> {
        pvalue_sequence(&self.residuals, kind)
    }
}

/// End-to-end result: the estimate plus scree data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataEstimate {
    pub estimate: Estimate,
    pub gram_eigenvalues: Vec<f64>,
}

/// Residual lengths, p-values and `m̂(α)` for a data matrix.
pub fn estimate_from_data(x: &DataMatrix, config: &EstimateConfig) -> Result<DataEstimate> {
    check_alpha(config.alpha)?;
    let analysis = ResidualAnalysis::from_data(x, config.max_k, config.center, config.standardize)?;
    let p = analysis.pvalues(config.test)?;
    Ok(DataEstimate {
        estimate: estimate_m(&p, config.alpha)?,
        gram_eigenvalues: analysis.gram_eigenvalues,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn seq(p: &[f64]) -> PValueSequence {
        PValueSequence::from_values(TestKind::DAgostino, p.to_vec())
    }

    #[test]
    fn first_p_above_alpha() {
        let e = estimate_m(&seq(&[0.001, 0.02, 0.8, 0.9]), 0.1).unwrap();
        assert_eq!(e.m_hat, 2);
        assert!(!e.saturated);
    }

    #[test]
    fn global_null_accepted() {
        let e = estimate_m(&seq(&[0.5, 0.01, 0.9]), 0.1).unwrap();
        assert_eq!(e.m_hat, 0);
    }

    #[test]
    fn equality_is_not_acceptance() {
        let e = estimate_m(&seq(&[0.1, 0.2]), 0.1).unwrap();
        assert_eq!(e.m_hat, 1);
    }

    #[test]
    fn saturation_is_reported() {
        let e = estimate_m(&seq(&[0.01, 0.02, 0.03]), 0.1).unwrap();
        assert_eq!(e.m_hat, 2);
        assert!(e.saturated);
    }

    #[test]
    fn alpha_out_of_range() {
        for a in [0.0, 1.0, -0.1, f64::NAN] {
            assert!(matches!(estimate_m(&seq(&[0.5]), a), Err(EstimateError::InvalidAlpha(_))));
        }
    }

    #[test]
    fn sharp_transition_is_alpha_stable() {
        let p = seq(&[1e-9, 1e-6, 1e-4, 0.01, 0.97, 0.99, 0.995]);
        let alphas: Vec<f64> = (5..=90).map(|i| i as f64 / 100.0).collect();
        for e in alpha_sweep(&p, &alphas).unwrap() {
            assert_eq!(e.m_hat, 4, "alpha {}", e.alpha);
        }
    }

    #[test]
    fn all_small_saturates_for_every_alpha() {
        let p = seq(&[1e-5, 1e-4, 1e-3]);
        for e in alpha_sweep(&p, &[0.01, 0.1, 0.5]).unwrap() {
            assert!(e.saturated);
        }
    }

    #[test]
    fn test_kind_parsing() {
        assert_eq!("Triples".parse::<TestKind>().unwrap(), TestKind::Triples);
        assert_eq!("dagostino".parse::<TestKind>().unwrap(), TestKind::DAgostino);
        assert!("kurtosis".parse::<TestKind>().is_err());
    }

    #[test]
    fn default_max_k_values() {
        assert_eq!(default_max_k(10), 8);
        assert_eq!(default_max_k(100), 30);
    }

    #[test]
    fn max_k_limit_respects_centering() {
        let x = DataMatrix::new(Array2::from_shape_fn((12, 40), |(i, j)| ((i * 7 + j * 13) % 11) as f64)).unwrap();
        let err = ResidualAnalysis::from_data(&x, Some(11), true, false).unwrap_err();
        assert!(matches!(err, EstimateError::InvalidMaxK { limit: 10, .. }));
    }

    #[test]
    fn repeated_row_surfaces_rank_deficiency() {
        let row: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        let data: Vec<f64> = (0..20).flat_map(|_| row.clone()).collect();
        let x = DataMatrix::from_rows(20, 50, data).unwrap();
        let err = estimate_from_data(&x, &EstimateConfig::default()).unwrap_err();
        assert!(matches!(err, EstimateError::Matrix(MatrixError::RankDeficient { .. })));
    }

    #[test]
    fn too_few_observations_for_triples() {
        let r = ResidualLengths::from_table(Array2::from_shape_fn((9, 2), |(i, k)| (i + k) as f64), 5);
        assert!(matches!(
            pvalue_sequence(&r, TestKind::Triples),
            Err(EstimateError::TooFewObservations { needed: 10, .. })
        ));
        assert!(pvalue_sequence(&r, TestKind::DAgostino).is_ok());
    }

    #[test]
    fn degenerate_column_gives_half() {
        let mut table = Array2::from_shape_fn((12, 2), |(i, _)| (i as f64).powi(2));
        table.column_mut(1).fill(0.0);
        let r = ResidualLengths::from_table(table, 3);
        for kind in TestKind::ALL {
            let p = pvalue_sequence(&r, kind).unwrap();
            assert!(p.p[0] < 0.5);
            assert_eq!(p.p[1], 0.5);
            assert_eq!(p.degenerate, vec![false, true]);
            assert_eq!(p.skewness[1], None);
        }
    }
}
