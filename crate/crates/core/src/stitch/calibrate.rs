//! Stochastic-approximation calibration of `xi(z, alpha)`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{alpha_grid, spectral_scale, CalibrationTable, LevelDiagnostics};
use crate::error::{invalid, Error, Result};
use crate::models::{Fit, ParametricModel};
use crate::oracle::{NaiveOracle, OracleConfig};
use crate::rng::{child_seed, substream, unit_sphere};
use crate::special::{chi2_pdf, chi2_quantile};

const ORACLE_TAG: u64 = 0x0c1e;
const DIRECTION_TAG: u64 = 0xd1e;
const DIAGNOSTIC_TAG: u64 = 0xd1a6;
const LOG_XI_BOUND: f64 = 3.0;

/// How the plausibilities at an antipodal boundary pair `psi_hat +- v` are
/// combined into one calibration signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryAggregate {
    /// The larger of the two: the ellipsoid grows until neither side of the
    /// line through the centre pokes inside the alpha-cut.
    Max,
    /// The average: the ellipsoid matches the alpha-cut on average over
    /// directions.
    #[default]
    Mean,
}

/// Pooling of the per-level `log xi` estimates across the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum CrossLevelSmoothing {
    #[default]
    None,
    /// Weighted least-squares polynomial in the boundary radius
    /// `sqrt(F_d^{-1}(1 - alpha))`, each level weighted by the precision of
    /// its estimate.
    Polynomial { degree: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    pub grid_size: usize,
    pub alpha_min: f64,
    pub alpha_max: f64,
    /// Oracle replicates per boundary evaluation.
    pub inner_replicates: usize,
    pub min_iter: usize,
    pub max_iter: usize,
    /// Stop once the mean signal over the averaging window is this small.
    pub tolerance: f64,
    /// A level whose final residual exceeds this fails.
    pub fail_residual: f64,
    /// Upper bound on the Newton-scaled gain.
    pub gain_cap: f64,
    pub gain_t0: f64,
    pub gain_exponent: f64,
    /// Largest change of any `log xi_j` in one update.
    pub step_clamp: f64,
    /// Fraction of the final iterates that are averaged.
    pub tail_frac: f64,
    pub aggregate: BoundaryAggregate,
    pub smoothing: CrossLevelSmoothing,
    /// Replicates for the post-calibration boundary check; 0 skips it.
    pub diagnostic_replicates: usize,
    /// Allowed excess of boundary plausibility over alpha in the check.
    pub slack: f64,
    pub seed: u64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            grid_size: 100,
            alpha_min: 0.001,
            alpha_max: 0.999,
            inner_replicates: 50,
            min_iter: 12,
            max_iter: 300,
            tolerance: 0.02,
            fail_residual: 0.05,
            gain_cap: 10.0,
            gain_t0: 10.0,
            gain_exponent: 0.7,
            step_clamp: 0.5,
            tail_frac: 0.5,
            aggregate: BoundaryAggregate::Mean,
            smoothing: CrossLevelSmoothing::Polynomial { degree: 3 },
            diagnostic_replicates: 0,
            slack: 0.02,
            seed: 0,
        }
    }
}

impl CalibrationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.inner_replicates == 0 || self.max_iter == 0 || self.min_iter > self.max_iter {
            return Err(invalid(
                "calibration needs replicates > 0 and 0 < min_iter <= max_iter",
            ));
        }
        if !(self.tail_frac > 0.0 && self.tail_frac <= 1.0) {
            return Err(invalid("tail fraction must lie in (0, 1]"));
        }
        if !(self.gain_cap > 0.0 && self.gain_t0 > 0.0 && self.step_clamp > 0.0) {
            return Err(invalid("gain parameters must be positive"));
        }

        Ok(())
    }

    fn oracle_config(&self) -> OracleConfig {
        OracleConfig::new(self.inner_replicates, child_seed(self.seed, ORACLE_TAG))
    }
}

/// Result of calibrating one level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelCalibration {
    pub alpha: f64,
    pub xi: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Newton gain for `log xi`: on an exactly Gaussian contour the boundary
/// plausibility is `1 - F_d(q exp(2 delta))`, whose slope at `delta = 0` is
/// `-2 q f_d(q)`.
fn newton_gain(d: usize, q: f64, cap: f64) -> f64 {
    let slope = 2.0 * q * chi2_pdf(d, q);
    if slope > 0.0 {
        (1.0 / slope).min(cap)
    } else {
        cap
    }
}

fn calibrate_level<M: ParametricModel>(
    oracle: &NaiveOracle<'_, M>,
    fit: &Fit,
    alpha: f64,
    level: u64,
    cfg: &CalibrationConfig,
) -> Result<LevelCalibration> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let model = oracle.model();
    let d = fit.dim();
    let q = chi2_quantile(d, 1.0 - alpha)?;
    let radius = q.sqrt();
    let gain = newton_gain(d, q, cfg.gain_cap);
    let e = fit.eigvec_matrix();
    let center = DVector::from_column_slice(&fit.psi_hat);
    let mut dir_rng = substream(child_seed(cfg.seed, DIRECTION_TAG), level);

    let mut log_xi = vec![0.0; d];
    let mut iterates: Vec<Vec<f64>> = Vec::new();
    let mut signals: Vec<f64> = Vec::new();
    let window = |n: usize| ((cfg.tail_frac * n as f64).ceil() as usize).clamp(1, n);
    let mut residual = f64::INFINITY;
    for t in 0..cfg.max_iter {
        let xi: Vec<f64> = log_xi.iter().map(|l: &f64| l.exp()).collect();
        let (_, s) = spectral_scale(&e, &fit.eigvals, &xi)?;
        let u = DVector::from_vec(unit_sphere(d, &mut dir_rng));
        let coords = e.transpose() * &u;
        let step = &s * &u * radius;
        let key = (level << 32) | t as u64;
        let plus = model.from_working((&center + &step).as_slice());
        let minus = model.from_working((&center - &step).as_slice());
        let p_plus = oracle.estimate_at(&plus, key)?;
        let p_minus = oracle.estimate_at(&minus, key)?;
        let p = match cfg.aggregate {
            BoundaryAggregate::Max => p_plus.max(p_minus),
            BoundaryAggregate::Mean => 0.5 * (p_plus + p_minus),
        };
        let signal = p - alpha;
        let a = gain / (1.0 + t as f64 / cfg.gain_t0).powf(cfg.gain_exponent);
        for j in 0..d {
            let w = d as f64 * coords[j] * coords[j];
            let delta = (a * signal * w).clamp(-cfg.step_clamp, cfg.step_clamp);
            log_xi[j] = (log_xi[j] + delta).clamp(-LOG_XI_BOUND, LOG_XI_BOUND);
        }
        iterates.push(log_xi.clone());
        signals.push(signal);
        let n = t + 1;
        let k = window(n);
        residual = signals[n - k..].iter().sum::<f64>() / k as f64;
        if n >= cfg.min_iter && residual.abs() <= cfg.tolerance {
            break;
        }
    }
    let n = iterates.len();
    if residual.abs() > cfg.fail_residual {
        return Err(Error::CalibrationFailed {
            alpha,
            residual: residual.abs(),
            iterations: n,
        });
    }
    let k = window(n);
    let xi = (0..d)
        .map(|j| (iterates[n - k..].iter().map(|it| it[j]).sum::<f64>() / k as f64).exp())
        .collect();
    Ok(LevelCalibration {
        alpha,
        xi,
        iterations: n,
        residual,
    })
}

/// Calibrate a single level with its own oracle.
pub fn calibrate_xi<M: ParametricModel>(
    model: &M,
    data: &M::Data,
    fit: &Fit,
    alpha: f64,
    cfg: &CalibrationConfig,
) -> Result<LevelCalibration> {
    cfg.validate()?;
    let oracle = NaiveOracle::new(model, data, cfg.oracle_config())?;
    calibrate_level(&oracle, fit, alpha, 0, cfg)
}

/// Calibrate every level of the grid (in parallel, one RNG stream per
/// level). Up to 5% of levels may fail; their rows are interpolated from
/// the nearest successful neighbours and flagged.
pub fn build_calibration_table<M: ParametricModel>(
    model: &M,
    data: &M::Data,
    fit: &Fit,
    cfg: &CalibrationConfig,
) -> Result<CalibrationTable> {
    cfg.validate()?;
    let grid = alpha_grid(cfg.grid_size, cfg.alpha_min, cfg.alpha_max)?;
    let oracle = NaiveOracle::new(model, data, cfg.oracle_config())?;
    let results: Vec<Result<LevelCalibration>> = grid
        .par_iter()
        .enumerate()
        .map(|(i, &a)| calibrate_level(&oracle, fit, a, i as u64, cfg))
        .collect();

    let needed = (0.95 * grid.len() as f64).ceil() as usize;
    let ok = results.iter().filter(|r| r.is_ok()).count();
    if ok < needed {
        let first = results
            .into_iter()
            .find_map(Result::err)
            .expect("some level failed");
        return Err(first);
    }
    let mut diagnostics = Vec::with_capacity(grid.len());
    let mut log_rows: Vec<Option<Vec<f64>>> = Vec::with_capacity(grid.len());
    for (r, &alpha) in results.into_iter().zip(&grid) {
        match r {
            Ok(c) => {
                diagnostics.push(LevelDiagnostics {
                    alpha,
                    iterations: c.iterations,
                    residual: c.residual,
                    interpolated: false,
                    boundary_max: None,
                });
                log_rows.push(Some(c.xi.iter().map(|x| x.ln()).collect()));
            }
            Err(e) => {
                log::warn!("calibration at alpha={alpha:.4} failed ({e}); interpolating");
                let (iterations, residual) = match e {
                    Error::CalibrationFailed {
                        iterations,
                        residual,
                        ..
                    } => (iterations, residual),
                    _ => (0, f64::NAN),
                };
                diagnostics.push(LevelDiagnostics {
                    alpha,
                    iterations,
                    residual,
                    interpolated: true,
                    boundary_max: None,
                });
                log_rows.push(None);
            }
        }
    }
    let mut rows = fill_gaps(&grid, &log_rows);
    let degree = match cfg.smoothing {
        CrossLevelSmoothing::Polynomial { degree } if grid.len() > degree + 1 => Some(degree),
        _ => None,
    };
    if let Some(degree) = degree {
        let d = fit.dim();
        let mut radius = Vec::with_capacity(grid.len());
        let mut weights = Vec::with_capacity(grid.len());
        for (&a, diag) in grid.iter().zip(&diagnostics) {
            let q = chi2_quantile(d, 1.0 - a)?;
            let slope = 2.0 * q * chi2_pdf(d, q);
            radius.push(q.sqrt());
            weights.push(if diag.interpolated {
                0.0
            } else {
                slope * slope * (diag.iterations * cfg.inner_replicates) as f64 / (a * (1.0 - a))
            });
        }
        match poly_smooth(&radius, &rows, &weights, degree) {
            Some(smoothed) => rows = smoothed,
            None => {
                log::warn!("cross-level smoothing is ill-conditioned; keeping per-level estimates")
            }
        }
    }
    let xi_rows: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| r.iter().map(|l| l.exp()).collect())
        .collect();

    let mut table = CalibrationTable {
        alpha_grid: grid,
        xi_rows,
        center: fit.psi_hat.clone(),
        eigvecs: fit.eigvecs.clone(),
        eigvals: fit.eigvals.clone(),
        diagnostics,
        seed: cfg.seed,
        model: fit.model.clone(),
        param_names: fit.param_names.clone(),
        scale: fit.scale.clone(),
    };
    if cfg.diagnostic_replicates > 0 {
        boundary_check(model, data, &mut table, cfg)?;
    }
    Ok(table)
}

/// Linear interpolation (in alpha) of missing rows from the nearest
/// present neighbours; rows past the last present one are copied.
fn fill_gaps(grid: &[f64], rows: &[Option<Vec<f64>>]) -> Vec<Vec<f64>> {
    let present: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].is_some()).collect();
    (0..rows.len())
        .map(|i| {
            if let Some(r) = &rows[i] {
                return r.clone();
            }
            let lo = present.iter().rev().find(|&&j| j < i);
            let hi = present.iter().find(|&&j| j > i);
            match (lo, hi) {
                (Some(&l), Some(&h)) => {
                    let w = (grid[i] - grid[l]) / (grid[h] - grid[l]);
                    let (a, b) = (
                        rows[l].as_ref().expect("present"),
                        rows[h].as_ref().expect("present"),
                    );
                    a.iter().zip(b).map(|(x, y)| x + w * (y - x)).collect()
                }
                (Some(&j), None) | (None, Some(&j)) => rows[j].clone().expect("present"),
                (None, None) => unreachable!("at least one level succeeded"),
            }
        })
        .collect()
}

/// Weighted least-squares polynomial of degree `degree` in `t`, fitted to
/// each component of `rows`; `None` when the weighted design is singular.
fn poly_smooth(
    t: &[f64],
    rows: &[Vec<f64>],
    weights: &[f64],
    degree: usize,
) -> Option<Vec<Vec<f64>>> {
    let n = rows.len();
    let d = rows[0].len();
    let p = degree + 1;
    let tmax = t.iter().cloned().fold(0.0, f64::max);
    if !(tmax > 0.0) {
        return None;
    }
    let design = DMatrix::from_fn(n, p, |i, k| (t[i] / tmax).powi(k as i32));
    let w = DVector::from_column_slice(weights);
    let weighted = DMatrix::from_fn(n, p, |i, k| w[i] * design[(i, k)]);
    let chol = (design.transpose() * &weighted).cholesky()?;
    let y = DMatrix::from_fn(n, d, |i, j| rows[i][j]);
    let coef = chol.solve(&(weighted.transpose() * y));
    let fitted = design * coef;
    let out: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..d).map(|j| fitted[(i, j)]).collect())
        .collect();
    out.iter().flatten().all(|v| v.is_finite()).then_some(out)
}

/// Plausibility at the `2d` axis points of each level's boundary, with a
/// fresh high-replicate oracle.
fn boundary_check<M: ParametricModel>(
    model: &M,
    data: &M::Data,
    table: &mut CalibrationTable,
    cfg: &CalibrationConfig,
) -> Result<()> {
    let oracle = NaiveOracle::new(
        model,
        data,
        OracleConfig::new(
            cfg.diagnostic_replicates,
            child_seed(cfg.seed, DIAGNOSTIC_TAG),
        ),
    )?;
    let d = table.dim();
    let e = table.eigvec_matrix();
    let center = DVector::from_column_slice(&table.center);
    let maxima: Vec<Result<f64>> = (0..table.alpha_grid.len())
        .into_par_iter()
        .map(|i| {
            let alpha = table.alpha_grid[i];
            let radius = chi2_quantile(d, 1.0 - alpha)?.sqrt();
            let (_, s) = spectral_scale(&e, &table.eigvals, &table.xi_rows[i])?;
            let mut best = 0.0f64;
            for j in 0..d {
                let step = &s * e.column(j) * radius;
                for sign in [1.0, -1.0] {
                    let psi = &center + &step * sign;
                    let p = oracle.estimate_at(&model.from_working(psi.as_slice()), i as u64)?;
                    best = best.max(p);
                }
            }
            Ok(best)
        })
        .collect();
    let mut worst = 0.0f64;
    for (diag, m) in table.diagnostics.iter_mut().zip(maxima) {
        let m = m?;
        worst = worst.max(m - diag.alpha);
        diag.boundary_max = Some(m);
    }
    if worst > cfg.slack {
        log::warn!(
            "boundary plausibility exceeds alpha by up to {worst:.3} (slack {})",
            cfg.slack
        );
    }
    Ok(())
}
