//! Brute-force Monte Carlo evaluation of the IM contour.
//!
//! `pi_z(theta)` is estimated by simulating `M` datasets under `theta` and
//! counting how often their relative likelihood at `theta` does not exceed
//! the observed one. Ties count as "not exceeding".

mod profile;
mod validity;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::models::{
    log_relative, CensoredObs, CensoringEstimate, ParametricModel, WeibullCensoredModel,
};
use crate::possibility::{ContourTable, TableMeta};
use crate::rng::{substream, StreamRng};

pub use profile::{profile_contour_at, profile_log_rel_lik, ProfileOracle};
pub use validity::{validity_rates, ValidityReport, ValidityRow};

/// Largest tolerated fraction of replicates resolved by the fallback sup.
pub const MAX_FAILURE_RATE: f64 = 0.05;

/// How replicate datasets are drawn across evaluation points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReusePolicy {
    /// Every evaluation point gets its own RNG stream.
    #[default]
    FreshDraws,
    /// Every evaluation point reuses the same stream, so the replicate
    /// uniforms are shared and the estimate is smooth in `theta`.
    CommonRandomNumbers,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub replicates: usize,
    pub seed: u64,
    pub reuse: ReusePolicy,
}

impl OracleConfig {
    pub fn new(replicates: usize, seed: u64) -> Self {
        Self {
            replicates,
            seed,
            reuse: ReusePolicy::FreshDraws,
        }
    }

    pub fn with_reuse(mut self, reuse: ReusePolicy) -> Self {
        self.reuse = reuse;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(invalid("oracle needs at least one replicate"));
        }
        Ok(())
    }

    pub(crate) fn stream(&self, key: u64) -> StreamRng {
        match self.reuse {
            ReusePolicy::FreshDraws => substream(self.seed, key),
            ReusePolicy::CommonRandomNumbers => substream(self.seed, 0),
        }
    }
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self::new(1000, 0)
    }
}

/// A Monte Carlo plausibility with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleEstimate {
    pub value: f64,
    pub std_error: f64,
    pub replicates: usize,
    /// Replicates whose MLE failed twice and were scored with the fallback sup.
    pub failures: usize,
}

impl OracleEstimate {
    pub(crate) fn from_counts(hits: usize, m: usize, failures: usize) -> Self {
        let p = hits as f64 / m as f64;
        Self {
            value: p,
            std_error: (p * (1.0 - p) / m as f64).sqrt(),
            replicates: m,
            failures,
        }
    }

    pub(crate) fn check(self) -> Result<Self> {
        if self.failures as f64 > MAX_FAILURE_RATE * self.replicates as f64 {
            return Err(Error::OracleDegraded {
                failures: self.failures,
                total: self.replicates,
            });
        }
        Ok(self)
    }
}

/// Observed data bound to a model, with the observed likelihood sup cached.
pub struct NaiveOracle<'a, M: ParametricModel> {
    model: &'a M,
    data: &'a M::Data,
    loglik_max: f64,
    cfg: OracleConfig,
}

impl<'a, M: ParametricModel> NaiveOracle<'a, M> {
    pub fn new(model: &'a M, data: &'a M::Data, cfg: OracleConfig) -> Result<Self> {
        cfg.validate()?;
        model.check_data(data)?;
        let hat = model.mle(data)?;
        let loglik_max = model.loglik(&hat, data);
        if !loglik_max.is_finite() {
            return Err(Error::ModelViolation(
                "likelihood supremum is not finite".into(),
            ));
        }
        Ok(Self {
            model,
            data,
            loglik_max,
            cfg,
        })
    }

    pub fn config(&self) -> &OracleConfig {
        &self.cfg
    }

    pub fn model(&self) -> &M {
        self.model
    }

    pub fn data(&self) -> &M::Data {
        self.data
    }

    /// Observed `log R(z, theta)`.
    pub fn observed_log_rel_lik(&self, theta: &[f64]) -> f64 {
        log_relative(self.model.loglik(theta, self.data), self.loglik_max)
    }

    /// `log R(Z_m, theta)` for the `M` replicates on stream `key`, and the
    /// number of replicates resolved by the fallback sup.
    pub fn replicate_log_rel_lik(&self, theta: &[f64], key: u64) -> Result<(Vec<f64>, usize)> {
        self.model.check_param(theta)?;
        let mut rng = self.cfg.stream(key);
        let mut out = Vec::with_capacity(self.cfg.replicates);
        let mut failures = 0;
        for _ in 0..self.cfg.replicates {
            let (v, failed) = replicate(self.model, self.data, theta, &mut rng)?;
            failures += failed as usize;
            out.push(v);
        }
        Ok((out, failures))
    }

    /// Estimate without the degradation check.
    pub(crate) fn estimate(&self, theta: &[f64], key: u64) -> Result<OracleEstimate> {
        let obs = self.observed_log_rel_lik(theta);
        let (reps, failures) = self.replicate_log_rel_lik(theta, key)?;
        let hits = reps.iter().filter(|&&r| r <= obs).count();
        Ok(OracleEstimate::from_counts(hits, reps.len(), failures))
    }

    /// Point estimate on stream `key`, without the degradation check.
    pub fn estimate_at(&self, theta: &[f64], key: u64) -> Result<f64> {
        Ok(self.estimate(theta, key)?.value)
    }

    /// `pi_z(theta)` on the RNG stream `key`.
    pub fn contour_at_keyed(&self, theta: &[f64], key: u64) -> Result<OracleEstimate> {
        self.estimate(theta, key)?.check()
    }

    pub fn contour_at(&self, theta: &[f64]) -> Result<OracleEstimate> {
        self.contour_at_keyed(theta, 0)
    }

    /// Evaluate every grid point in parallel; point `i` uses stream `i`.
    /// Points that fail are recorded in the table metadata; a degraded
    /// point keeps its fallback-scored value, a hard failure gets 0.
    pub fn contour_grid(&self, grid: &[Vec<f64>]) -> Result<ContourTable> {
        if grid.is_empty() {
            return Err(invalid("empty evaluation grid"));
        }
        let results: Vec<Result<OracleEstimate>> = grid
            .par_iter()
            .enumerate()
            .map(|(i, p)| self.estimate(p, i as u64))
            .collect();
        let mut values = Vec::with_capacity(grid.len());
        let mut failures = Vec::new();
        for (i, r) in results.into_iter().enumerate() {
            match r {
                Ok(e) => {
                    if let Err(err) = e.check() {
                        failures.push((i, err.to_string()));
                    }
                    values.push(e.value);
                }
                Err(e) => {
                    values.push(0.0);
                    failures.push((i, e.to_string()));
                }
            }
        }
        let mut table = ContourTable::new(self.model.param_names(), grid.to_vec(), values)?;
        table.meta = TableMeta {
            model: self.model.id().to_string(),
            data: String::new(),
            replicates: self.cfg.replicates,
            seed: self.cfg.seed,
            failures,
        };
        Ok(table)
    }
}

/// One replicate: simulate under `theta`, return `log R(Z, theta)`. A
/// failed MLE is retried once on a fresh dataset, then scored with the
/// fallback sup.
fn replicate<M: ParametricModel>(
    model: &M,
    template: &M::Data,
    theta: &[f64],
    rng: &mut StreamRng,
) -> Result<(f64, bool)> {
    let mut last = None;
    for _ in 0..2 {
        let z = model.simulate(theta, template, rng)?;
        match model.mle(&z) {
            Ok(hat) => {
                let lmax = model.loglik(&hat, &z);
                if lmax.is_finite() {
                    return Ok((log_relative(model.loglik(theta, &z), lmax), false));
                }
                last = Some(z);
            }
            Err(_) => last = Some(z),
        }
    }
    let z = last.expect("two attempts");
    let lmax = fallback_sup(model, &z, theta);
    Ok((log_relative(model.loglik(theta, &z), lmax), true))
}

/// Max log-likelihood over a working-scale grid around `theta`.
pub(crate) fn fallback_sup<M: ParametricModel>(model: &M, z: &M::Data, theta: &[f64]) -> f64 {
    const HALF_WIDTH: f64 = 6.0;
    let d = model.dim();
    let per_dim: usize = if d == 1 { 241 } else { 41 };
    let center = model.to_working(theta);
    let mut best = model.loglik(theta, z);
    let total = per_dim.pow(d as u32);
    let mut psi = center.clone();
    for idx in 0..total {
        let mut rem = idx;
        for j in 0..d {
            let k = rem % per_dim;
            rem /= per_dim;
            psi[j] = center[j] - HALF_WIDTH + 2.0 * HALF_WIDTH * k as f64 / (per_dim - 1) as f64;
        }
        let l = model.loglik(&model.from_working(&psi), z);
        if l > best {
            best = l;
        }
    }
    best
}

/// `pi_z(theta)` with `cfg.replicates` replicates on stream 0.
pub fn contour_at<M: ParametricModel>(
    model: &M,
    z: &M::Data,
    theta: &[f64],
    cfg: &OracleConfig,
) -> Result<OracleEstimate> {
    NaiveOracle::new(model, z, *cfg)?.contour_at(theta)
}

pub fn contour_grid<M: ParametricModel>(
    model: &M,
    z: &M::Data,
    grid: &[Vec<f64>],
    cfg: &OracleConfig,
) -> Result<ContourTable> {
    NaiveOracle::new(model, z, *cfg)?.contour_grid(grid)
}

/// Plug-in contour for censored Weibull data: replicates are drawn with
/// censoring times from `g`.
pub fn censored_contour_at(
    z: &CensoredObs,
    theta: &[f64],
    g: &CensoringEstimate,
    cfg: &OracleConfig,
) -> Result<OracleEstimate> {
    let model = WeibullCensoredModel::with_censoring(g.clone());
    contour_at(&model, z, theta, cfg)
}

/// Regular grid from `(min, max, count)` per dimension; the first
/// coordinate varies slowest.
pub fn regular_grid(spec: &[(f64, f64, usize)]) -> Result<Vec<Vec<f64>>> {
    if spec.is_empty() {
        return Err(invalid("grid spec needs at least one dimension"));
    }
    let mut axes = Vec::with_capacity(spec.len());
    for &(lo, hi, n) in spec {
        if n == 0 || !lo.is_finite() || !hi.is_finite() || (n > 1 && !(hi > lo)) {
            return Err(invalid(format!("bad grid axis {lo}:{hi}:{n}")));
        }
        let axis: Vec<f64> = if n == 1 {
            vec![lo]
        } else {
            (0..n)
                .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
                .collect()
        };
        axes.push(axis);
    }
    let mut out = vec![Vec::new()];
    for axis in &axes {
        let mut next = Vec::with_capacity(out.len() * axis.len());
        for p in &out {
            for &v in axis {
                let mut q = p.clone();
                q.push(v);
                next.push(q);
            }
        }
        out = next;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{CorrelationModel, NormalMeanModel, Paired};
    use crate::special::chi2_sf;

    fn normal_data() -> Vec<f64> {
        vec![0.3, -0.5, 1.1, 0.2, -0.1, 0.8, 0.4, -0.9, 0.6, 0.05]
    }

    #[test]
    fn mle_has_plausibility_one() {
        let z = normal_data();
        let hat = NormalMeanModel.mle(&z).unwrap();
        for m in [1, 7, 200] {
            let e = contour_at(&NormalMeanModel, &z, &hat, &OracleConfig::new(m, 4)).unwrap();
            assert_eq!(e.value, 1.0);
        }
    }

    #[test]
    fn single_replicate_is_binary() {
        let z = normal_data();
        let e = contour_at(&NormalMeanModel, &z, &[0.9], &OracleConfig::new(1, 4)).unwrap();
        assert!(e.value == 0.0 || e.value == 1.0);
    }

    #[test]
    fn pivotal_normal_mean_matches_closed_form() {
        let z = normal_data();
        let n = z.len() as f64;
        let xbar = z.iter().sum::<f64>() / n;
        let grid = regular_grid(&[(xbar - 1.0, xbar + 1.0, 21)]).unwrap();
        let t = contour_grid(&NormalMeanModel, &z, &grid, &OracleConfig::new(2000, 9)).unwrap();
        for (p, v) in t.points.iter().zip(&t.values) {
            let exact = chi2_sf(1, n * (p[0] - xbar).powi(2));
            let se = (exact * (1.0 - exact) / 2000.0).sqrt().max(1e-3);
            assert!(
                (v - exact).abs() <= 4.0 * se,
                "theta={} oracle={v} exact={exact}",
                p[0]
            );
        }
    }

    #[test]
    fn common_random_numbers_are_monotone_in_observed_ratio() {
        let z = Paired::new(
            vec![0.3, -1.2, 0.8, 2.0, -0.4, 0.7, 1.1, -0.2],
            vec![0.1, -0.9, 1.1, 1.4, 0.2, -0.3, 0.5, 0.1],
        );
        let cfg = OracleConfig::new(300, 2).with_reuse(ReusePolicy::CommonRandomNumbers);
        let o = NaiveOracle::new(&CorrelationModel, &z, cfg).unwrap();
        let (reps, _) = o.replicate_log_rel_lik(&[0.4], 17).unwrap();
        let mut last = 0usize;
        for obs in [-8.0, -3.0, -1.0, -0.5, -0.1, 0.0] {
            let hits = reps.iter().filter(|&&r| r <= obs).count();
            assert!(hits >= last);
            last = hits;
        }
    }

    #[test]
    fn grid_is_deterministic() {
        let z = normal_data();
        let grid = regular_grid(&[(-1.0, 1.0, 7)]).unwrap();
        let cfg = OracleConfig::new(100, 5);
        let a = contour_grid(&NormalMeanModel, &z, &grid, &cfg).unwrap();
        let b = contour_grid(&NormalMeanModel, &z, &grid, &cfg).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn regular_grid_layout() {
        let g = regular_grid(&[(0.0, 1.0, 2), (5.0, 7.0, 3)]).unwrap();
        assert_eq!(g.len(), 6);
        assert_eq!(g[0], vec![0.0, 5.0]);
        assert_eq!(g[1], vec![0.0, 6.0]);
        assert_eq!(g[5], vec![1.0, 7.0]);
        assert!(regular_grid(&[(1.0, 0.0, 3)]).is_err());
    }

    #[test]
    fn zero_replicates_rejected() {
        let z = normal_data();
        assert!(contour_at(&NormalMeanModel, &z, &[0.0], &OracleConfig::new(0, 1)).is_err());
    }
}
