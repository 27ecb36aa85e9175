//! Dense linear algebra for the `d >> n` regime.
//!
//! Everything here is computed from the `n x n` Gram matrix `X Xᵀ`; the
//! `d x d` covariance is never formed. Sample PC scores come from the Gram
//! eigenvectors via SVD duality and residual lengths come from the scores,
//! so the whole pipeline costs `O(n²d + n³)`.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Maximum number of cyclic Jacobi sweeps before giving up.
pub const MAX_JACOBI_SWEEPS: usize = 100;

/// Off-diagonal Frobenius norm target, relative to `‖A‖_F`.
pub const JACOBI_TOLERANCE: f64 = 1e-12;

/// Eigenvalues down to `-NEG_EIGEN_TOL * trace / n` are treated as roundoff.
pub const NEG_EIGEN_TOL: f64 = 1e-8;

/// Residual lengths down to this (times `max(1, R_j(0))`) are roundoff.
pub const NEG_RESIDUAL_TOL: f64 = 1e-10;

/// Smallest retained Gram eigenvalue, relative to the largest.
pub const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatrixError {
    #[error("data matrix must have at least one row and one column, got {n}x{d}")]
    EmptyMatrix { n: usize, d: usize },
    #[error("data matrix contains a non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric: |a[{i},{j}] - a[{j},{i}]| = {diff:e}")]
    NotSymmetric { i: usize, j: usize, diff: f64 },
    #[error("Jacobi eigensolver did not converge in {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    NonConvergence { sweeps: usize, off_norm: f64 },
    #[error("Gram eigenvalue {index} is {value:e}, below the roundoff floor {floor:e}")]
    NegativeEigenvalue { index: usize, value: f64, floor: f64 },
    #[error("requested {requested} components but eigenvalue {requested} is {value:e} (largest {largest:e}); data rank is too small")]
    RankDeficient {
        requested: usize,
        value: f64,
        largest: f64,
    },
    #[error("number of components {m} must be smaller than the number of observations {n}")]
    TooManyComponents { m: usize, n: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

pub type Result<T> = std::result::Result<T, MatrixError>;

/// `n` observations (rows) by `d` variables (columns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataMatrix {
    values: Array2<f64>,
    centered: bool,
}

impl DataMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        let (n, d) = values.dim();
        if n == 0 || d == 0 {
            return Err(MatrixError::EmptyMatrix { n, d });
        }
        if let Some(((row, col), _)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(MatrixError::NonFinite { row, col });
        }
        Ok(Self {
            values,
            centered: false,
        })
    }

    /// Builds a matrix from row-major data.
    pub fn from_rows(n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        let values = Array2::from_shape_vec((n, d), data)
            .map_err(|e| MatrixError::DimensionMismatch(e.to_string()))?;
        Self::new(values)
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn d(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    pub fn row(&self, j: usize) -> ArrayView1<'_, f64> {
        self.values.row(j)
    }

    /// Multiplies every entry by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            values: &self.values * factor,
            centered: self.centered,
        }
    }

    pub fn transposed(&self) -> Self {
        Self {
            values: self.values.t().to_owned(),
            centered: false,
        }
    }
}

/// Subtracts each column's mean.
pub fn center_columns(x: &DataMatrix) -> DataMatrix {
    let mut values = x.values.clone();
    let n = values.nrows() as f64;
    for mut col in values.columns_mut() {
        let mean = col.sum() / n;
        col.mapv_inplace(|v| v - mean);
    }
    DataMatrix {
        values,
        centered: true,
    }
}

/// Divides each column by its sample standard deviation (denominator `n - 1`).
///
/// Constant columns are left as they are. Returns the matrix and the number
/// of constant columns skipped.
pub fn standardize_columns(x: &DataMatrix) -> (DataMatrix, usize) {
    let mut values = x.values.clone();
    let n = values.nrows();
    let mut skipped = 0;
    if n < 2 {
        return (x.clone(), values.ncols());
    }
    for mut col in values.columns_mut() {
        let mean = col.sum() / n as f64;
        let ss: f64 = col.iter().map(|v| (v - mean) * (v - mean)).sum();
        let sd = (ss / (n - 1) as f64).sqrt();
        if sd > 0.0 && sd.is_finite() {
            col.mapv_inplace(|v| v / sd);
        } else {
            skipped += 1;
        }
    }
    (
        DataMatrix {
            values,
            centered: x.centered,
        },
        skipped,
    )
}

/// The `n x n` Gram matrix `X Xᵀ`. `S_D = G / d` is its scaled form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramMatrix {
    entries: Array2<f64>,
    d: usize,
}

impl GramMatrix {
    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    /// Ambient dimension of the data the matrix was built from.
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn trace(&self) -> f64 {
        self.entries.diag().sum()
    }

    /// `G / d`.
    pub fn scaled(&self) -> Array2<f64> {
        &self.entries / self.d as f64
    }

    /// Eigendecomposition with roundoff-level negative eigenvalues clamped to 0.
    pub fn eigen(&self) -> Result<EigenSystem> {
        let mut eig = sym_eigen(&self.entries)?;
        let n = self.n();
        let floor = -NEG_EIGEN_TOL * self.trace().abs() / n as f64;
        for (index, v) in eig.eigenvalues.iter_mut().enumerate() {
            if *v < 0.0 {
                if *v >= floor {
                    *v = 0.0;
                } else {
                    return Err(MatrixError::NegativeEigenvalue {
                        index,
                        value: *v,
                        floor,
                    });
                }
            }
        }
        Ok(eig)
    }
}

pub fn gram(x: &DataMatrix) -> GramMatrix {
    let v = &x.values;
    let mut g = v.dot(&v.t());
    let n = g.nrows();
    for j in 0..n {
        for k in (j + 1)..n {
            g[[k, j]] = g[[j, k]];
        }
    }
    GramMatrix {
        entries: g,
        d: x.d(),
    }
}

/// Eigenvalues sorted descending, eigenvectors as matching columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenSystem {
    pub eigenvalues: Array1<f64>,
    pub eigenvectors: Array2<f64>,
}

impl EigenSystem {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Eigenpairs are returned sorted by descending eigenvalue (stable with
/// respect to the original diagonal position) and each eigenvector is
/// flipped so that its largest-magnitude entry is positive.
pub fn sym_eigen(a: &Array2<f64>) -> Result<EigenSystem> {
    let (rows, cols) = a.dim();
    if rows != cols {
        return Err(MatrixError::NotSquare { rows, cols });
    }
    let n = rows;
    let frob = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    for i in 0..n {
        for j in (i + 1)..n {
            let diff = (a[[i, j]] - a[[j, i]]).abs();
            if diff > 1e-10 * frob.max(f64::MIN_POSITIVE) {
                return Err(MatrixError::NotSymmetric { i, j, diff });
            }
        }
    }

    // Row-major working copies; symmetrize from the upper triangle.
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            m[i * n + j] = a[[i, j]];
            m[j * n + i] = a[[i, j]];
        }
    }
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let target = JACOBI_TOLERANCE * frob;
    let off_norm = |m: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                s += m[i * n + j] * m[i * n + j];
            }
        }
        (2.0 * s).sqrt()
    };

    let mut sweeps = 0;
    let mut off = off_norm(&m);
    while off > target {
        if sweeps == MAX_JACOBI_SWEEPS {
            return Err(MatrixError::NonConvergence {
                sweeps,
                off_norm: off,
            });
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.is_finite() {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                } else {
                    0.0
                };
                if t == 0.0 {
                    // |a_pq| is negligible next to the diagonal gap.
                    m[p * n + q] = 0.0;
                    m[q * n + p] = 0.0;
                    continue;
                }
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                m[p * n + p] = app - t * apq;
                m[q * n + q] = aqq + t * apq;
                m[p * n + q] = 0.0;
                m[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
        sweeps += 1;
        off = off_norm(&m);
    }

    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort keeps ties in original index order.
    order.sort_by(|&i, &j| m[j * n + j].total_cmp(&m[i * n + i]));

    let mut eigenvalues = Array1::zeros(n);
    let mut eigenvectors = Array2::zeros((n, n));
    for (col, &src) in order.iter().enumerate() {
        eigenvalues[col] = m[src * n + src];
        let mut pivot = 0;
        for k in 0..n {
            if v[k * n + src].abs() > v[pivot * n + src].abs() {
                pivot = k;
            }
        }
        let sign = if v[pivot * n + src] < 0.0 { -1.0 } else { 1.0 };
        for k in 0..n {
            eigenvectors[[k, col]] = sign * v[k * n + src];
        }
    }
    Ok(EigenSystem {
        eigenvalues,
        eigenvectors,
    })
}

/// Sample PC scores `ŵ_ij = û_iᵀ X_j`, stored as an `n x M` matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    scores: Array2<f64>,
}

impl ScoreMatrix {
    pub fn scores(&self) -> &Array2<f64> {
        &self.scores
    }

    pub fn components(&self) -> usize {
        self.scores.ncols()
    }
}

/// Scores of the first `m` components via the Gram route,
/// `ŵ_ij = sqrt(μ_i) · a_ji` with `a_i` the i-th Gram eigenvector.
pub fn pc_scores(eig: &EigenSystem, m: usize) -> Result<ScoreMatrix> {
    let n = eig.n();
    if m >= n {
        return Err(MatrixError::TooManyComponents { m, n });
    }
    if m > 0 {
        let largest = eig.eigenvalues[0];
        let value = eig.eigenvalues[m - 1];
        if !(value > RANK_TOL * largest) {
            return Err(MatrixError::RankDeficient {
                requested: m,
                value,
                largest,
            });
        }
    }
    let mut scores = Array2::zeros((n, m));
    for i in 0..m {
        let root = eig.eigenvalues[i].sqrt();
        for j in 0..n {
            scores[[j, i]] = root * eig.eigenvectors[[j, i]];
        }
    }
    Ok(ScoreMatrix { scores })
}

/// `R_j(k)`: squared length of observation `j` after removing its projection
/// onto the first `k` sample PC directions, divided by `d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualLengths {
    table: Array2<f64>,
    d: usize,
}

impl ResidualLengths {
    /// Wraps a precomputed `n x (M + 1)` table.
    pub fn from_table(table: Array2<f64>, d: usize) -> Self {
        Self { table, d }
    }

    pub fn table(&self) -> &Array2<f64> {
        &self.table
    }

    pub fn n(&self) -> usize {
        self.table.nrows()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Largest `k` in the table.
    pub fn max_k(&self) -> usize {
        self.table.ncols() - 1
    }

    /// `R_1(k), ..., R_n(k)`.
    pub fn column(&self, k: usize) -> Vec<f64> {
        self.table.column(k).to_vec()
    }

    /// `n⁻¹ Σ_j R_j(k)` for every `k`.
    pub fn column_means(&self) -> Vec<f64> {
        self.table
            .mean_axis(Axis(0))
            .map(|m| m.to_vec())
            .unwrap_or_default()
    }
}

pub fn residual_lengths(g: &GramMatrix, w: &ScoreMatrix, max_k: usize) -> Result<ResidualLengths> {
    let n = g.n();
    if max_k >= n {
        return Err(MatrixError::TooManyComponents { m: max_k, n });
    }
    if w.scores.nrows() != n || w.components() < max_k {
        return Err(MatrixError::DimensionMismatch(format!(
            "scores are {}x{}, need {}x{}",
            w.scores.nrows(),
            w.components(),
            n,
            max_k
        )));
    }
    let d = g.d() as f64;
    let mut table = Array2::zeros((n, max_k + 1));
    for j in 0..n {
        let mut acc = g.entries[[j, j]];
        let tol = NEG_RESIDUAL_TOL * (acc / d).max(1.0);
        table[[j, 0]] = acc / d;
        for k in 1..=max_k {
            let s = w.scores[[j, k - 1]];
            acc -= s * s;
            let mut r = acc / d;
            if r < 0.0 {
                if r >= -tol {
                    log::debug!("clamping residual R_{j}({k}) = {r:e} to 0");
                    r = 0.0;
                } else {
                    return Err(MatrixError::RankDeficient {
                        requested: k,
                        value: r,
                        largest: table[[j, 0]],
                    });
                }
            }
            table[[j, k]] = r;
        }
    }
    Ok(ResidualLengths {
        table,
        d: g.d(),
    })
}
