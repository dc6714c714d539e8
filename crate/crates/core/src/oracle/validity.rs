//! Repeated-sampling check of `P{pi_Z(theta) <= alpha} <= alpha`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{NaiveOracle, OracleConfig, MAX_FAILURE_RATE};
use crate::error::{invalid, Result};
use crate::models::ParametricModel;
use crate::rng::{child_seed, substream};

const DATA_STREAM_TAG: u64 = 0x7a11d;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityRow {
    pub alpha: f64,
    /// Fraction of replications with `pi_Z(truth) <= alpha`.
    pub rate: f64,
    /// Binomial 95% interval for the rate.
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// `alpha + 2 sqrt(alpha (1 - alpha) / R)`.
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub truth: Vec<f64>,
    pub replications: usize,
    pub failures: usize,
    pub degraded: bool,
    pub rows: Vec<ValidityRow>,
    /// `pi_Z(truth)` per successful replication.
    pub plausibilities: Vec<f64>,
}

/// Simulate `replications` datasets shaped like `template` under `truth`
/// and evaluate the oracle contour at the truth for each.
pub fn validity_rates<M: ParametricModel>(
    model: &M,
    truth: &[f64],
    template: &M::Data,
    replications: usize,
    alphas: &[f64],
    cfg: &OracleConfig,
) -> Result<ValidityReport> {
    model.check_param(truth)?;
    if replications == 0 {
        return Err(invalid("need at least one replication"));
    }
    let data_seed = child_seed(cfg.seed, DATA_STREAM_TAG);
    let outcomes: Vec<Option<f64>> = (0..replications)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream(data_seed, r as u64);
            let z = model.simulate(truth, template, &mut rng).ok()?;
            let inner = OracleConfig {
                seed: child_seed(cfg.seed, r as u64),
                ..*cfg
            };
            let oracle = NaiveOracle::new(model, &z, inner).ok()?;
            oracle.contour_at(truth).ok().map(|e| e.value)
        })
        .collect();
    let plaus: Vec<f64> = outcomes.iter().flatten().copied().collect();
    let failures = replications - plaus.len();
    let ok = plaus.len().max(1) as f64;
    let rows = alphas
        .iter()
        .map(|&alpha| {
            let rate = plaus.iter().filter(|&&p| p <= alpha).count() as f64 / ok;
            let se = (rate * (1.0 - rate) / ok).sqrt();
            let bound = alpha + 2.0 * (alpha * (1.0 - alpha) / ok).sqrt();
            ValidityRow {
                alpha,
                rate,
                ci_lo: (rate - 1.96 * se).max(0.0),
                ci_hi: (rate + 1.96 * se).min(1.0),
                bound,
                pass: rate <= bound,
            }
        })
        .collect();
    Ok(ValidityReport {
        truth: truth.to_vec(),
        replications,
        failures,
        degraded: failures as f64 > MAX_FAILURE_RATE * replications as f64,
        rows,
        plausibilities: plaus,
    })
}
