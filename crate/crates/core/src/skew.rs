//! One-sided skewness tests against right-skewed alternatives.
//!
//! Two tests turn a sample into a p-value: the Randles triples test, a
//! U-statistic over all observation triples, and D'Agostino's normalizing
//! transformation of the sample skewness coefficient `b₁`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Smallest sample for the triples test.
pub const TRIPLES_MIN_N: usize = 10;
/// Below this the normal approximation for the triples test is rough.
pub const TRIPLES_ASYMPTOTIC_N: usize = 21;
/// Largest sample for which the `O(n³)` enumeration is attempted.
pub const TRIPLES_MAX_N: usize = 2000;
/// Smallest sample for the D'Agostino transformation.
pub const DAGOSTINO_MIN_N: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SkewError {
    #[error("need at least {needed} observations, got {given}")]
    TooFewObservations { given: usize, needed: usize },
    #[error("triples test enumerates all triples and is limited to {limit} observations, got {given}")]
    TooManyObservations { given: usize, limit: usize },
    #[error("sample contains a non-finite value at position {0}")]
    NonFinite(usize),
    #[error("sample variance is zero")]
    ZeroVariance,
    #[error("triples U-statistic has degenerate variance estimate {0:e}")]
    DegenerateVariance(f64),
}

pub type Result<T> = std::result::Result<T, SkewError>;

/// A standardized statistic and its one-sided right-tail p-value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_right: f64,
    pub n: usize,
}

impl TestResult {
    fn from_statistic(statistic: f64, n: usize) -> Self {
        Self {
            statistic,
            p_right: std_normal_sf(statistic),
            n,
        }
    }
}

/// Standard normal distribution function.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// `1 - Φ(x)` without cancellation in the upper tail.
pub fn std_normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

fn check_finite(y: &[f64]) -> Result<()> {
    match y.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(SkewError::NonFinite(i)),
        None => Ok(()),
    }
}

#[inline]
fn sign(v: f64) -> i64 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

/// The unscaled triples kernel `f*`, an integer in `{-3, -1, 0, 1, 3}`.
#[inline]
pub fn triples_kernel(yi: f64, yj: f64, yk: f64) -> i64 {
    sign(yi + yj - 2.0 * yk) + sign(yi + yk - 2.0 * yj) + sign(yj + yk - 2.0 * yi)
}

fn choose2(n: usize) -> u64 {
    let n = n as u64;
    n * n.saturating_sub(1) / 2
}

fn choose3(n: usize) -> u64 {
    let n = n as u64;
    if n < 3 {
        0
    } else {
        n * (n - 1) * (n - 2) / 6
    }
}

/// Integer sums collected in one pass over all triples.
struct TripleSums {
    total: i64,
    squares: i64,
    by_index: Vec<i64>,
    by_pair: Vec<i64>,
}

fn triple_sums(y: &[f64], with_components: bool) -> TripleSums {
    let n = y.len();
    let mut sums = TripleSums {
        total: 0,
        squares: 0,
        by_index: if with_components { vec![0; n] } else { Vec::new() },
        by_pair: if with_components { vec![0; n * n] } else { Vec::new() },
    };
    for i in 0..n {
        for j in (i + 1)..n {
            let mut pair_ij = 0;
            for k in (j + 1)..n {
                let f = triples_kernel(y[i], y[j], y[k]);
                if f == 0 {
                    continue;
                }
                sums.total += f;
                sums.squares += f * f;
                if with_components {
                    sums.by_index[i] += f;
                    sums.by_index[j] += f;
                    sums.by_index[k] += f;
                    pair_ij += f;
                    sums.by_pair[i * n + k] += f;
                    sums.by_pair[j * n + k] += f;
                }
            }
            if with_components {
                sums.by_pair[i * n + j] += pair_ij;
            }
        }
    }
    sums
}

/// Triples U-statistic: the mean of `f*/3` over all `C(n, 3)` triples, in `[-1, 1]`.
///
/// Positive values indicate right skew.
pub fn triples_u(y: &[f64]) -> Result<f64> {
    let n = y.len();
    if n < 3 {
        return Err(SkewError::TooFewObservations { given: n, needed: 3 });
    }
    if n > TRIPLES_MAX_N {
        return Err(SkewError::TooManyObservations {
            given: n,
            limit: TRIPLES_MAX_N,
        });
    }
    check_finite(y)?;
    let sums = triple_sums(y, false);
    Ok(sums.total as f64 / (3 * choose3(n)) as f64)
}

/// One-sided triples test for symmetry against right-skewed alternatives.
///
/// The statistic is `U / sqrt(Var(U))` with the finite-sample U-statistic
/// variance
/// `C(n,3)⁻¹ [3 C(n-3,2) ζ₁ + 3 (n-3) ζ₂ + ζ₃]`, where the `ζ_c` are plug-in
/// variances of the conditional kernel means over one, two and three fixed
/// observations.
pub fn triples_test_right(y: &[f64]) -> Result<TestResult> {
    let n = y.len();
    if n < TRIPLES_MIN_N {
        return Err(SkewError::TooFewObservations {
            given: n,
            needed: TRIPLES_MIN_N,
        });
    }
    if n > TRIPLES_MAX_N {
        return Err(SkewError::TooManyObservations {
            given: n,
            limit: TRIPLES_MAX_N,
        });
    }
    check_finite(y)?;
    if n < TRIPLES_ASYMPTOTIC_N {
        log::warn!("triples test with n = {n}: normal approximation is rough below {TRIPLES_ASYMPTOTIC_N}");
    }

    let sums = triple_sums(y, true);
    let c3 = choose3(n) as f64;
    let u = sums.total as f64 / (3.0 * c3);
    let u2 = u * u;

    // g1(i): mean of f*/3 over the C(n-1, 2) triples containing i.
    let g1_den = 3.0 * choose2(n - 1) as f64;
    let zeta1 = sums
        .by_index
        .iter()
        .map(|&s| {
            let g = s as f64 / g1_den;
            g * g
        })
        .sum::<f64>()
        / n as f64
        - u2;

    // g2(i, j): mean of f*/3 over the n - 2 triples containing both.
    let g2_den = 3.0 * (n - 2) as f64;
    let mut g2_sq = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let g = sums.by_pair[i * n + j] as f64 / g2_den;
            g2_sq += g * g;
        }
    }
    let zeta2 = g2_sq / choose2(n) as f64 - u2;
    let zeta3 = sums.squares as f64 / (9.0 * c3) - u2;

    let variance = (3.0 * choose2(n - 3) as f64 * zeta1 + 3.0 * (n - 3) as f64 * zeta2 + zeta3) / c3;
    if !(variance > 0.0) {
        return Err(SkewError::DegenerateVariance(variance));
    }
    Ok(TestResult::from_statistic(u / variance.sqrt(), n))
}

/// Sample skewness `b₁ = m₃ / m₂^{3/2}` with central moments over `n`.
pub fn sample_skewness(y: &[f64]) -> Result<f64> {
    let n = y.len();
    if n < 3 {
        return Err(SkewError::TooFewObservations { given: n, needed: 3 });
    }
    check_finite(y)?;
    let nf = n as f64;
    let mean = y.iter().sum::<f64>() / nf;
    let (m2, m3) = y.iter().fold((0.0, 0.0), |(s2, s3), &v| {
        let e = v - mean;
        (s2 + e * e, s3 + e * e * e)
    });
    let m2 = m2 / nf;
    let m3 = m3 / nf;
    let scale = y.iter().fold(0.0_f64, |a, v| a.max((v - mean).abs()));
    // Constant samples leave only rounding noise in the deviations.
    if m2 <= 1e-300 || scale <= 1e-13 * mean.abs() {
        return Err(SkewError::ZeroVariance);
    }
    Ok(m3 / m2.powf(1.5))
}

/// Standard-normal approximation `Z` of `b₁` under normality.
pub fn dagostino_z(b1: f64, n: usize) -> f64 {
    let n = n as f64;
    let y = b1 * ((n + 1.0) * (n + 3.0) / (6.0 * (n - 2.0))).sqrt();
    let beta2 = 3.0 * (n * n + 27.0 * n - 70.0) * (n + 1.0) * (n + 3.0)
        / ((n - 2.0) * (n + 5.0) * (n + 7.0) * (n + 9.0));
    let w2 = -1.0 + (2.0 * (beta2 - 1.0)).sqrt();
    let delta = 1.0 / w2.sqrt().ln().sqrt();
    let lambda = (2.0 / (w2 - 1.0)).sqrt();
    // ln(x + sqrt(x² + 1)) written as asinh so that Z is exactly odd in b₁.
    delta * (y / lambda).asinh()
}

/// One-sided D'Agostino skewness test against right-skewed alternatives.
pub fn dagostino_test_right(y: &[f64]) -> Result<TestResult> {
    let n = y.len();
    if n < DAGOSTINO_MIN_N {
        return Err(SkewError::TooFewObservations {
            given: n,
            needed: DAGOSTINO_MIN_N,
        });
    }
    let b1 = sample_skewness(y)?;
    Ok(TestResult::from_statistic(dagostino_z(b1, n), n))
}
