//! Run configuration shared by every subcommand.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::ValueEnum;
use imstitch_core::possibilize::RankingKind;
use imstitch_core::FeatureMap;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelId {
    /// Bivariate standard normal with unknown correlation.
    Corr,
    /// Gamma shape and scale.
    Gamma,
    /// Logistic regression with intercept and slope.
    Logistic,
    /// Weibull lifetimes under random right censoring.
    WeibullCens,
}

impl ModelId {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelId::Corr => "corr",
            ModelId::Gamma => "gamma",
            ModelId::Logistic => "logistic",
            ModelId::WeibullCens => "weibull-cens",
        }
    }

    /// Scalar features that make sense for the model.
    pub fn features(self) -> &'static [FeatureMap] {
        match self {
            ModelId::Corr => &[],
            ModelId::Gamma => &[FeatureMap::GammaMean],
            ModelId::Logistic => &[FeatureMap::Ld50],
            ModelId::WeibullCens => &[FeatureMap::WeibullLogMean],
        }
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Axes `min:max:count`, comma separated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec(pub Vec<(f64, f64, usize)>);

impl FromStr for GridSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let mut axes = Vec::new();
        for part in s.split(',') {
            let f: Vec<&str> = part.trim().split(':').collect();
            let [lo, hi, n] = f.as_slice() else {
                return Err(format!("grid axis `{part}` is not min:max:count"));
            };
            let lo: f64 = lo.parse().map_err(|_| format!("bad grid minimum `{lo}`"))?;
            let hi: f64 = hi.parse().map_err(|_| format!("bad grid maximum `{hi}`"))?;
            let n: usize = n.parse().map_err(|_| format!("bad grid count `{n}`"))?;
            if n == 0 || !lo.is_finite() || !hi.is_finite() || (n > 1 && hi <= lo) {
                return Err(format!("grid axis `{part}` needs count >= 1 and min < max"));
            }
            axes.push((lo, hi, n));
        }
        Ok(GridSpec(axes))
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .0
            .iter()
            .map(|(a, b, n)| format!("{a}:{b}:{n}"))
            .collect();
        f.write_str(&parts.join(","))
    }
}

/// Everything a command needs. The seed has no default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelId,
    /// Dataset CSV; the bundled fixture for the model when absent.
    pub data: Option<PathBuf>,
    pub seed: u64,
    /// Number of calibration levels.
    pub alpha_grid: usize,
    /// Draws from the stitched sampler.
    pub draws: usize,
    /// Oracle replicates; each command has its own default.
    pub replicates: Option<usize>,
    /// Ranking for the possibilize step; Gaussian density for joint
    /// contours and kernel density for feature marginals when absent.
    pub ranking: Option<RankingKind>,
    pub feature: Option<FeatureMap>,
    pub grid_spec: Option<GridSpec>,
    /// Level of the reported interval.
    pub alpha: f64,
    /// True parameter for the validity simulation.
    pub truth: Option<Vec<f64>>,
    /// Simulated datasets in the validity simulation.
    pub replications: usize,
    /// Levels checked by the validity simulation.
    pub alphas: Vec<f64>,
    /// Worker threads; all logical cores when absent.
    pub threads: Option<usize>,
    pub out: PathBuf,
}

impl RunConfig {
    pub fn new(model: ModelId, seed: u64, out: impl Into<PathBuf>) -> Self {
        Self {
            model,
            data: None,
            seed,
            alpha_grid: 100,
            draws: 10_000,
            replicates: None,
            ranking: None,
            feature: None,
            grid_spec: None,
            alpha: 0.1,
            truth: None,
            replications: 500,
            alphas: vec![0.05, 0.1, 0.2],
            threads: None,
            out: out.into(),
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.alpha_grid == 0
            || self.draws == 0
            || self.replications == 0
            || self.replicates == Some(0)
        {
            return Err(CliError::usage("counts must be at least 1"));
        }
        if self.threads == Some(0) {
            return Err(CliError::usage("--threads must be at least 1"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(CliError::usage(format!(
                "--alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if let Some(a) = self.alphas.iter().find(|a| !(**a >= 0.0 && **a <= 1.0)) {
            return Err(CliError::usage(format!(
                "validity level {a} outside [0, 1]"
            )));
        }
        Ok(())
    }

    pub fn replicates_or(&self, default: usize) -> usize {
        self.replicates.unwrap_or(default)
    }
}
