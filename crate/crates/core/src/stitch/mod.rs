//! Calibrated Gaussian variational family and the stitched mixture sampler.
//!
//! For each level `alpha` on a fixed grid, a positive vector `xi(alpha)`
//! rescales the observed information along its eigen-axes so that the
//! ellipsoid `{(psi - psi_hat)' J(xi) (psi - psi_hat) <= F_d^{-1}(1 - alpha)}`
//! matches the IM's alpha-cut. The sampler draws a level uniformly and then
//! a uniform point on the boundary of that level's ellipsoid.

mod calibrate;
mod sampler;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::models::{rows_to_matrix, WorkingScale};

pub use calibrate::{
    build_calibration_table, calibrate_xi, BoundaryAggregate, CalibrationConfig,
    CrossLevelSmoothing, LevelCalibration,
};
pub use sampler::{rao_blackwell_expectation, Draw, SquareRoot, StitchSampler, WeightedSampleSet};

/// `J(xi) = E diag(1/xi) Lambda diag(1/xi) E'` and its symmetric inverse
/// root `S = E diag(xi / sqrt(lambda)) E'`, so that `S S' = J(xi)^{-1}`.
pub fn spectral_scale(
    e: &DMatrix<f64>,
    lambda: &[f64],
    xi: &[f64],
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let d = lambda.len();
    if e.nrows() != d || e.ncols() != d || xi.len() != d {
        return Err(invalid("spectral_scale: dimension mismatch"));
    }
    if lambda.iter().any(|l| !(*l > 0.0)) {
        return Err(invalid("eigenvalues must be positive"));
    }
    if xi.iter().any(|x| !(*x > 0.0)) {
        return Err(invalid("variational index must be positive"));
    }
    let jd = DVector::from_fn(d, |i, _| lambda[i] / (xi[i] * xi[i]));
    let sd = DVector::from_fn(d, |i, _| xi[i] / lambda[i].sqrt());
    let j = e * DMatrix::from_diagonal(&jd) * e.transpose();
    let s = e * DMatrix::from_diagonal(&sd) * e.transpose();
    Ok((j, s))
}

/// Per-level calibration diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelDiagnostics {
    pub alpha: f64,
    pub iterations: usize,
    /// Mean of `p - alpha` over the averaging window.
    pub residual: f64,
    /// The level failed and its row was interpolated from neighbours.
    pub interpolated: bool,
    /// Highest boundary plausibility in the optional diagnostics pass.
    pub boundary_max: Option<f64>,
}

/// `xi(alpha)` over an ascending grid, plus the spectral pair of `J_z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTable {
    pub alpha_grid: Vec<f64>,
    pub xi_rows: Vec<Vec<f64>>,
    /// `psi_hat` on the working scale.
    pub center: Vec<f64>,
    /// Eigenvectors of `J_z` as columns, row-major.
    pub eigvecs: Vec<Vec<f64>>,
    pub eigvals: Vec<f64>,
    pub diagnostics: Vec<LevelDiagnostics>,
    pub seed: u64,
    pub model: String,
    pub param_names: Vec<String>,
    pub scale: WorkingScale,
}

impl CalibrationTable {
    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn eigvec_matrix(&self) -> DMatrix<f64> {
        rows_to_matrix(&self.eigvecs)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if self.alpha_grid.is_empty() || self.alpha_grid.len() != self.xi_rows.len() {
            return Err(invalid("calibration table: grid and rows differ"));
        }
        if self.alpha_grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid("calibration grid must be strictly ascending"));
        }
        if self.alpha_grid.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
            return Err(invalid("calibration levels must lie in (0, 1)"));
        }
        if self
            .xi_rows
            .iter()
            .any(|r| r.len() != d || r.iter().any(|x| !(*x > 0.0)))
        {
            return Err(invalid("calibration rows must be positive d-vectors"));
        }
        if self.eigvals.len() != d || self.eigvals.iter().any(|l| !(*l > 0.0)) {
            return Err(invalid("eigenvalues must be d positive numbers"));
        }
        let e = self.eigvec_matrix();
        if e.nrows() != d || e.ncols() != d {
            return Err(invalid("eigenvector matrix must be d x d"));
        }
        let err = (e.transpose() * &e - DMatrix::identity(d, d)).amax();
        if err > 1e-10 {
            return Err(invalid(format!(
                "eigenvectors not orthonormal (error {err:.2e})"
            )));
        }
        if self.scale.dim() != d {
            return Err(invalid("working scale dimension mismatch"));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let t: Self = serde_json::from_str(s)?;
        t.validate()?;
        Ok(t)
    }
}

/// Componentwise linear interpolation of `xi` in `alpha`, clamped to the
/// end rows outside the grid.
pub fn interpolate_xi(table: &CalibrationTable, alpha: f64) -> Vec<f64> {
    let g = &table.alpha_grid;
    let rows = &table.xi_rows;
    if alpha <= g[0] {
        return rows[0].clone();
    }
    let last = g.len() - 1;
    if alpha >= g[last] {
        return rows[last].clone();
    }
    let hi = g.partition_point(|&a| a < alpha);
    if g[hi] == alpha {
        return rows[hi].clone();
    }
    let lo = hi - 1;
    let w = (alpha - g[lo]) / (g[hi] - g[lo]);
    rows[lo]
        .iter()
        .zip(&rows[hi])
        .map(|(a, b)| a + w * (b - a))
        .collect()
}

/// Equally spaced levels on `[lo, hi]` (a single level sits at the midpoint).
pub fn alpha_grid(size: usize, lo: f64, hi: f64) -> Result<Vec<f64>> {
    if size == 0 || !(0.0 < lo && lo <= hi && hi < 1.0) {
        return Err(invalid(format!(
            "bad alpha grid: {size} levels on [{lo}, {hi}]"
        )));
    }
    if size == 1 {
        return Ok(vec![0.5 * (lo + hi)]);
    }
    Ok((0..size)
        .map(|i| lo + (hi - lo) * i as f64 / (size - 1) as f64)
        .collect())
}
