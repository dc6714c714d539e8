use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::models::{golden_max, ParametricModel};
use crate::special::ln_gamma;

/// Scalar features of the natural parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureMap {
    /// Gamma mean `shape * scale`.
    GammaMean,
    /// Logistic LD50 `-intercept / slope`.
    Ld50,
    /// Weibull log-mean `log scale + lgamma(1 + 1/shape)`.
    WeibullLogMean,
    /// A single natural coordinate.
    Coordinate(usize),
}

impl FeatureMap {
    pub fn name(&self) -> String {
        match self {
            FeatureMap::GammaMean => "gamma-mean".into(),
            FeatureMap::Ld50 => "ld50".into(),
            FeatureMap::WeibullLogMean => "weibull-log-mean".into(),
            FeatureMap::Coordinate(j) => format!("coord{j}"),
        }
    }

    pub fn eval(&self, theta: &[f64]) -> f64 {
        match self {
            FeatureMap::GammaMean => theta[0] * theta[1],
            FeatureMap::Ld50 => -theta[0] / theta[1],
            FeatureMap::WeibullLogMean => theta[1].ln() + ln_gamma(1.0 + 1.0 / theta[0]),
            FeatureMap::Coordinate(j) => theta[*j],
        }
    }

    /// Free coordinate parametrizing the level set `{phi = v}` in two
    /// dimensions.
    fn free_coordinate(&self, theta: &[f64]) -> Result<f64> {
        match self {
            FeatureMap::GammaMean | FeatureMap::WeibullLogMean => Ok(theta[0].ln()),
            FeatureMap::Ld50 => Ok(theta[1]),
            FeatureMap::Coordinate(_) => Err(invalid(
                "profile likelihood needs a named two-parameter feature",
            )),
        }
    }

    /// The point of `{phi = v}` with free coordinate `t`.
    pub fn complete(&self, v: f64, t: f64) -> Vec<f64> {
        match self {
            FeatureMap::GammaMean => {
                let k = t.exp();
                vec![k, v / k]
            }
            FeatureMap::Ld50 => vec![-v * t, t],
            FeatureMap::WeibullLogMean => {
                let k = t.exp();
                vec![k, (v - ln_gamma(1.0 + 1.0 / k)).exp()]
            }
            FeatureMap::Coordinate(_) => vec![v],
        }
    }

    fn free_bracket(&self, t0: f64) -> (f64, f64) {
        match self {
            FeatureMap::Ld50 => {
                let w = 10.0 * (t0.abs() + 1.0);
                (t0 - w, t0 + w)
            }
            _ => (t0 - 4.0, t0 + 4.0),
        }
    }

    /// `sup { l(theta) : phi(theta) = v }` and its maximizer, searched
    /// around the free coordinate of `hint`.
    pub fn profile_loglik<M: ParametricModel>(
        &self,
        model: &M,
        z: &M::Data,
        v: f64,
        hint: &[f64],
    ) -> Result<(f64, Vec<f64>)> {
        if model.dim() != 2 {
            return Err(invalid(
                "profile likelihood is implemented for two-parameter models",
            ));
        }
        let t0 = self.free_coordinate(hint)?;
        let (lo, hi) = self.free_bracket(t0);
        let f = |t: f64| {
            let l = model.loglik(&self.complete(v, t), z);
            if l.is_nan() {
                f64::NEG_INFINITY
            } else {
                l
            }
        };
        const SCAN: usize = 40;
        let step = (hi - lo) / SCAN as f64;
        let (mut best_i, mut best) = (0, f64::NEG_INFINITY);
        for i in 0..=SCAN {
            let l = f(lo + step * i as f64);
            if l > best {
                best = l;
                best_i = i;
            }
        }
        let a = lo + step * best_i.saturating_sub(1) as f64;
        let b = lo + step * (best_i + 1).min(SCAN) as f64;
        let (t, l) = golden_max(f, a, b, 1e-9 * (1.0 + t0.abs()));
        let (t, l) = if l >= best {
            (t, l)
        } else {
            (lo + step * best_i as f64, best)
        };
        Ok((l, self.complete(v, t)))
    }
}

impl fmt::Display for FeatureMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for FeatureMap {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gamma-mean" => Ok(FeatureMap::GammaMean),
            "ld50" => Ok(FeatureMap::Ld50),
            "weibull-mean" | "weibull-log-mean" => Ok(FeatureMap::WeibullLogMean),
            other => other
                .strip_prefix("coord")
                .and_then(|j| j.parse().ok())
                .map(FeatureMap::Coordinate)
                .ok_or_else(|| invalid(format!("unknown feature `{other}`"))),
        }
    }
}
