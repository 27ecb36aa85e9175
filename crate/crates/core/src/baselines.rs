//! Comparison estimators: the Bai–Ng information criterion and the
//! Kritchman–Nadler sequential Tracy–Widom threshold test.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::ResidualLengths;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BaselineError {
    #[error("mean residual length V({k}) = {value:e} is not positive")]
    DegenerateResiduals { k: usize, value: f64 },
    #[error("alpha = {0} is outside the Tracy-Widom table range [0.005, 0.995]")]
    OutOfRange(f64),
    #[error("max k = {max_k} exceeds the available {available}")]
    InvalidMaxK { max_k: usize, available: usize },
    #[error("Kritchman-Nadler needs n >= 10 and d > n, got n = {n}, d = {d}")]
    Dimensions { n: usize, d: usize },
}

pub type Result<T> = std::result::Result<T, BaselineError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMethod {
    /// Standard `IC_p2` of Bai and Ng.
    BaiNg,
    /// Sequential largest-eigenvalue test against Tracy–Widom thresholds.
    KritchmanNadler,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineResult {
    pub method: BaselineMethod,
    pub m_hat: usize,
    /// Information criterion per `k` (Bai–Ng) or rejection threshold per `k` (Kritchman–Nadler).
    pub criterion_trace: Vec<f64>,
}

/// Bai–Ng `IC_p2`:
/// `IC(k) = ln V(k) + k (n + d)/(n d) ln(n d / (n + d))` with
/// `V(k) = n⁻¹ Σ_j R_j(k)`, minimized over `0 ≤ k ≤ M` (ties to the smallest `k`).
pub fn bai_ng(r: &ResidualLengths, max_k: usize) -> Result<BaselineResult> {
    if max_k > r.max_k() {
        return Err(BaselineError::InvalidMaxK {
            max_k,
            available: r.max_k(),
        });
    }
    let n = r.n() as f64;
    let d = r.d() as f64;
    let penalty = (n + d) / (n * d) * (n * d / (n + d)).ln();
    let means = r.column_means();
    let mut trace = Vec::with_capacity(max_k + 1);
    for (k, &v) in means.iter().take(max_k + 1).enumerate() {
        if !(v > 0.0) {
            return Err(BaselineError::DegenerateResiduals { k, value: v });
        }
        trace.push(v.ln() + k as f64 * penalty);
    }
    let mut best = 0;
    for (k, &ic) in trace.iter().enumerate() {
        if ic < trace[best] {
            best = k;
        }
    }
    Ok(BaselineResult {
        method: BaselineMethod::BaiNg,
        m_hat: best,
        criterion_trace: trace,
    })
}

/// Upper-tail quantiles `(α, s)` with `P(TW₁ > s) = α`, from the Fredholm
/// determinant `F₁(s) = det(I - K)` on `L²(s, ∞)`, `K(x, y) = Ai((x + y)/2) / 2`,
/// discretized by 120-point Gauss–Legendre quadrature. Agrees with the
/// classical printed percentiles (e.g. 0.9793 at α = 0.05, 2.0234 at α = 0.01)
/// to all printed digits.
const TW1_UPPER_QUANTILES: [(f64, f64); 101] = [
    (0.005, 2.422327),
    (0.010, 2.023449),
    (0.020, 1.597756),
    (0.030, 1.333213),
    (0.040, 1.137061),
    (0.050, 0.979316),
    (0.060, 0.846329),
    (0.070, 0.730692),
    (0.080, 0.627919),
    (0.090, 0.535077),
    (0.100, 0.450143),
    (0.110, 0.371658),
    (0.120, 0.298533),
    (0.130, 0.229935),
    (0.140, 0.165211),
    (0.150, 0.103838),
    (0.160, 0.045393),
    (0.170, -0.010475),
    (0.180, -0.064057),
    (0.190, -0.115600),
    (0.200, -0.165313),
    (0.210, -0.213378),
    (0.220, -0.259949),
    (0.230, -0.305165),
    (0.240, -0.349144),
    (0.250, -0.391994),
    (0.260, -0.433809),
    (0.270, -0.474673),
    (0.280, -0.514663),
    (0.290, -0.553847),
    (0.300, -0.592287),
    (0.310, -0.630041),
    (0.320, -0.667160),
    (0.330, -0.703692),
    (0.340, -0.739682),
    (0.350, -0.775169),
    (0.360, -0.810193),
    (0.370, -0.844789),
    (0.380, -0.878990),
    (0.390, -0.912827),
    (0.400, -0.946330),
    (0.410, -0.979527),
    (0.420, -1.012444),
    (0.430, -1.045107),
    (0.440, -1.077540),
    (0.450, -1.109767),
    (0.460, -1.141810),
    (0.470, -1.173691),
    (0.480, -1.205432),
    (0.490, -1.237053),
    (0.500, -1.268575),
    (0.510, -1.300018),
    (0.520, -1.331402),
    (0.530, -1.362747),
    (0.540, -1.394073),
    (0.550, -1.425400),
    (0.560, -1.456748),
    (0.570, -1.488138),
    (0.580, -1.519590),
    (0.590, -1.551125),
    (0.600, -1.582765),
    (0.610, -1.614532),
    (0.620, -1.646450),
    (0.630, -1.678542),
    (0.640, -1.710835),
    (0.650, -1.743354),
    (0.660, -1.776127),
    (0.670, -1.809183),
    (0.680, -1.842555),
    (0.690, -1.876275),
    (0.700, -1.910380),
    (0.710, -1.944907),
    (0.720, -1.979900),
    (0.730, -2.015404),
    (0.740, -2.051468),
    (0.750, -2.088148),
    (0.760, -2.125504),
    (0.770, -2.163604),
    (0.780, -2.202522),
    (0.790, -2.242343),
    (0.800, -2.283163),
    (0.810, -2.325091),
    (0.820, -2.368251),
    (0.830, -2.412789),
    (0.840, -2.458872),
    (0.850, -2.506702),
    (0.860, -2.556513),
    (0.870, -2.608595),
    (0.880, -2.663296),
    (0.890, -2.721056),
    (0.900, -2.782428),
    (0.910, -2.848132),
    (0.920, -2.919126),
    (0.930, -2.996735),
    (0.940, -3.082857),
    (0.950, -3.180380),
    (0.960, -3.294021),
    (0.970, -3.432377),
    (0.980, -3.614057),
    (0.990, -3.895433),
    (0.995, -4.147877),
];

/// Fritsch–Carlson slopes for a monotone piecewise-cubic Hermite interpolant.
fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
    let mut m = vec![0.0; n];
    for i in 1..n - 1 {
        if delta[i - 1] * delta[i] > 0.0 {
            let w1 = 2.0 * h[i] + h[i - 1];
            let w2 = h[i] + 2.0 * h[i - 1];
            m[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
        }
    }
    let end = |h0: f64, h1: f64, d0: f64, d1: f64| {
        let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if s * d0 <= 0.0 {
            0.0
        } else if d0 * d1 <= 0.0 && s.abs() > 3.0 * d0.abs() {
            3.0 * d0
        } else {
            s
        }
    };
    m[0] = end(h[0], h[1], delta[0], delta[1]);
    m[n - 1] = end(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    m
}

/// `s(α)`, the `1 - α` quantile of the Tracy–Widom law of order 1.
pub fn tw1_quantile(alpha: f64) -> Result<f64> {
    let first = TW1_UPPER_QUANTILES[0].0;
    let last = TW1_UPPER_QUANTILES[TW1_UPPER_QUANTILES.len() - 1].0;
    if !(alpha >= first && alpha <= last) {
        return Err(BaselineError::OutOfRange(alpha));
    }
    let x: Vec<f64> = TW1_UPPER_QUANTILES.iter().map(|p| p.0).collect();
    let y: Vec<f64> = TW1_UPPER_QUANTILES.iter().map(|p| p.1).collect();
    let i = match x.iter().position(|&a| a >= alpha) {
        Some(0) => return Ok(y[0]),
        Some(i) => i - 1,
        None => return Ok(y[y.len() - 1]),
    };
    if x[i + 1] == alpha {
        return Ok(y[i + 1]);
    }
    let m = pchip_slopes(&x, &y);
    let h = x[i + 1] - x[i];
    let t = (alpha - x[i]) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    Ok((2.0 * t3 - 3.0 * t2 + 1.0) * y[i]
        + (t3 - 2.0 * t2 + t) * h * m[i]
        + (-2.0 * t3 + 3.0 * t2) * y[i + 1]
        + (t3 - t2) * h * m[i + 1])
}

/// Johnstone's centering `(√(n-½) + √(p-½))² / n` for the largest eigenvalue
/// of an `n`-sample, `p`-variable white Wishart covariance.
pub fn tw_center(n: usize, p: usize) -> f64 {
    let a = (n as f64 - 0.5).sqrt() + (p as f64 - 0.5).sqrt();
    a * a / n as f64
}

/// Johnstone's matching scale for [`tw_center`].
pub fn tw_scale(n: usize, p: usize) -> f64 {
    let sn = (n as f64 - 0.5).sqrt();
    let sp = (p as f64 - 0.5).sqrt();
    (sn + sp) / n as f64 * (1.0 / sn + 1.0 / sp).cbrt()
}

/// Noise variance under "rank = k" from the `d` sample covariance eigenvalues
/// (the leading `n` given, the rest zero).
///
/// The plain trailing mean is biased low because each removed eigenvalue
/// carries about `σ²(d - k)/n` of noise. The estimate therefore solves
/// `σ² = (d - k)⁻¹ [Σ_{j>k} λ̂_j + Σ_{j≤k} (λ̂_j - ρ_j)]` jointly with
/// `ρ_j² - ρ_j (λ̂_j + σ² - σ²(d - k)/n) + λ̂_j σ² = 0`, by fixed-point
/// iteration from the trailing mean.
pub fn kn_noise_variance(sample_eigenvalues: &[f64], n: usize, d: usize, k: usize) -> f64 {
    let p = (d - k) as f64;
    let c = p / n as f64;
    let nonzero = &sample_eigenvalues[..sample_eigenvalues.len().min(n)];
    let tail: f64 = nonzero.iter().skip(k).sum();
    let mut sigma2 = tail / p;
    for _ in 0..KN_NOISE_ITERATIONS {
        let absorbed: f64 = nonzero[..k]
            .iter()
            .map(|&l| {
                let b = l + sigma2 - sigma2 * c;
                let disc = b * b - 4.0 * l * sigma2;
                let rho = if disc >= 0.0 { 0.5 * (b + disc.sqrt()) } else { 0.5 * b };
                l - rho
            })
            .sum();
        let next = (tail + absorbed) / p;
        let done = (next - sigma2).abs() <= 1e-12 * sigma2.abs();
        sigma2 = next;
        if done {
            break;
        }
    }
    sigma2
}

const KN_NOISE_ITERATIONS: usize = 200;

/// Kritchman–Nadler estimate from sample PC variances `λ̂_i = μ_i / n`.
///
/// For `k = 0, 1, ..., M` the hypothesis "rank = k" is rejected when
/// `λ̂_{k+1} > σ̂²(k) (μ_{n,d-k} + s(α) ξ_{n,d-k})` with `σ̂²(k)` from
/// [`kn_noise_variance`]. `m̂` is the first non-rejected `k`.
pub fn kritchman_nadler(
    sample_eigenvalues: &[f64],
    n: usize,
    d: usize,
    alpha: f64,
    max_k: usize,
) -> Result<BaselineResult> {
    if n < 10 || d <= n {
        return Err(BaselineError::Dimensions { n, d });
    }
    let available = sample_eigenvalues.len().min(n).saturating_sub(1);
    if max_k > available {
        return Err(BaselineError::InvalidMaxK { max_k, available });
    }
    let s = tw1_quantile(alpha)?;
    let mut thresholds = Vec::with_capacity(max_k + 1);
    let mut m_hat = None;
    for k in 0..=max_k {
        let p = d - k;
        let sigma2 = kn_noise_variance(sample_eigenvalues, n, d, k);
        let threshold = sigma2 * (tw_center(n, p) + s * tw_scale(n, p));
        thresholds.push(threshold);
        if m_hat.is_none() && sample_eigenvalues[k] <= threshold {
            m_hat = Some(k);
        }
    }
    Ok(BaselineResult {
        method: BaselineMethod::KritchmanNadler,
        m_hat: m_hat.unwrap_or(max_k),
        criterion_trace: thresholds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn table_is_monotone() {
        for w in TW1_UPPER_QUANTILES.windows(2) {
            assert!(w[1].0 > w[0].0);
            assert!(w[1].1 < w[0].1);
        }
    }

    #[test]
    fn published_percentiles() {
        assert!((tw1_quantile(0.05).unwrap() - 0.98).abs() < 0.005);
        assert!((tw1_quantile(0.01).unwrap() - 2.02).abs() < 0.005);
        // Classical TW1 percentile table (F1 = 0.10, 0.30, 0.50, 0.70, 0.90).
        for (alpha, s) in [(0.9, -2.7824), (0.7, -1.9104), (0.5, -1.2686), (0.3, -0.5923), (0.1, 0.4501)] {
            assert!((tw1_quantile(alpha).unwrap() - s).abs() < 5e-5, "alpha {alpha}");
        }
    }

    #[test]
    fn interpolation_is_monotone_between_nodes() {
        let mut prev = f64::INFINITY;
        for i in 0..=990 {
            let a = 0.005 + i as f64 * 0.001;
            let q = tw1_quantile(a).unwrap();
            assert!(q < prev, "alpha {a}");
            prev = q;
        }
    }

    #[test]
    fn quantile_out_of_range() {
        assert_eq!(tw1_quantile(0.001), Err(BaselineError::OutOfRange(0.001)));
        assert!(tw1_quantile(0.999).is_err());
        assert!(tw1_quantile(f64::NAN).is_err());
    }

    #[test]
    fn bai_ng_flat_residuals_choose_zero() {
        let r = ResidualLengths::from_table(Array2::from_elem((20, 6), 1.5), 500);
        let res = bai_ng(&r, 5).unwrap();
        assert_eq!(res.m_hat, 0);
        assert!(res.criterion_trace.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn bai_ng_zero_residuals() {
        let mut t = Array2::from_elem((20, 3), 1.0);
        t.column_mut(2).fill(0.0);
        let r = ResidualLengths::from_table(t, 100);
        assert_eq!(bai_ng(&r, 2), Err(BaselineError::DegenerateResiduals { k: 2, value: 0.0 }));
    }

    #[test]
    fn kn_equal_eigenvalues() {
        let lam = vec![3.0; 40];
        let res = kritchman_nadler(&lam, 40, 400, 0.05, 10).unwrap();
        assert_eq!(res.m_hat, 0);
        assert_eq!(res.criterion_trace.len(), 11);
    }

    #[test]
    fn kn_detects_a_large_spike() {
        let mut lam = vec![10.0; 50];
        lam[0] = 500.0;
        lam[1] = 300.0;
        let res = kritchman_nadler(&lam, 50, 1000, 0.05, 10).unwrap();
        assert_eq!(res.m_hat, 2);
    }

    #[test]
    fn kn_noise_without_signal_is_trailing_mean() {
        let lam = [4.0, 3.0, 2.0, 1.0];
        assert!((kn_noise_variance(&lam, 4, 40, 0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn kn_noise_corrects_for_absorbed_noise() {
        // One spike of population variance ρ on white noise σ² = 1 has sample
        // eigenvalue ≈ ρ + ρc/(ρ - 1), c = (d - 1)/n.
        let (n, d) = (100, 2000);
        let c = (d - 1) as f64 / n as f64;
        let rho = 250.0;
        let spike = rho + rho * c / (rho - 1.0);
        // Remaining mass chosen so that σ² = 1 is the exact fixed point.
        let rest = (d - 1) as f64 - (spike - rho);
        let mut lam = vec![rest / (n - 1) as f64; n];
        lam[0] = spike;
        let naive = rest / (d - 1) as f64;
        let est = kn_noise_variance(&lam, n, d, 1);
        assert!(naive < 0.99, "{naive}");
        assert!((est - 1.0).abs() < 1e-9, "{est}");
    }

    #[test]
    fn kn_rejects_bad_dimensions() {
        assert!(matches!(
            kritchman_nadler(&[1.0; 20], 20, 10, 0.05, 3),
            Err(BaselineError::Dimensions { .. })
        ));
    }
}
