//! Estimating the number of principal components of high-dimension,
//! low-sample-size data.
//!
//! Residual lengths left after removing the first `k` sample principal
//! components are right-skewed while components with diverging variance
//! remain, and symmetric or left-skewed once they are gone. Testing the
//! skewness for `k = 0, 1, ...` and stopping at the first non-rejection gives
//! the estimate `m̂`.
//!
//! ```
//! use pcskew::estimator::{estimate_from_data, EstimateConfig};
//! use pcskew::sim::{eigen_model, sample_panel, synth_data, ScoreDistribution};
//!
//! let model = eigen_model(2000, 2, 0.3, 1.0, 0.0).unwrap();
//! let z = sample_panel(60, 2000, ScoreDistribution::StandardNormal, 7, 0);
//! let x = synth_data(&model, &z).unwrap();
//! let result = estimate_from_data(&x, &EstimateConfig::default()).unwrap();
//! assert!(result.estimate.m_hat <= 30);
//! ```

pub mod baselines;
pub mod estimator;
pub mod matrix;
pub mod sim;
pub mod skew;

pub use estimator::{estimate_from_data, Estimate, EstimateConfig, PValueSequence, TestKind};
pub use matrix::{DataMatrix, ResidualLengths};
