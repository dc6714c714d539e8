//! Marginal plausibility of a scalar feature by profiling the likelihood.

use rayon::prelude::*;

use super::{fallback_sup, OracleConfig, OracleEstimate};
use crate::error::{Error, Result};
use crate::models::{log_relative, ParametricModel};
use crate::possibilize::FeatureMap;
use crate::rng::StreamRng;

/// `log R^pr(z, v) = sup{l : phi = v} - sup l`, clamped at 0.
pub fn profile_log_rel_lik<M: ParametricModel>(
    model: &M,
    z: &M::Data,
    feature: FeatureMap,
    v: f64,
) -> Result<f64> {
    let hat = model.mle(z)?;
    let lmax = model.loglik(&hat, z);
    let (lp, _) = feature.profile_loglik(model, z, v, &hat)?;
    Ok(log_relative(lp, lmax))
}

/// Oracle for the marginal contour of `feature`: replicates are simulated
/// at the constrained MLE for each feature value and ranked by the
/// relative profile likelihood.
pub struct ProfileOracle<'a, M: ParametricModel> {
    model: &'a M,
    data: &'a M::Data,
    feature: FeatureMap,
    theta_hat: Vec<f64>,
    loglik_max: f64,
    cfg: OracleConfig,
}

impl<'a, M: ParametricModel> ProfileOracle<'a, M> {
    pub fn new(
        model: &'a M,
        data: &'a M::Data,
        feature: FeatureMap,
        cfg: OracleConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        model.check_data(data)?;
        let theta_hat = model.mle(data)?;
        let loglik_max = model.loglik(&theta_hat, data);
        if !loglik_max.is_finite() {
            return Err(Error::ModelViolation(
                "likelihood supremum is not finite".into(),
            ));
        }
        Ok(Self {
            model,
            data,
            feature,
            theta_hat,
            loglik_max,
            cfg,
        })
    }

    fn replicate(&self, v: f64, theta_v: &[f64], rng: &mut StreamRng) -> Result<(f64, bool)> {
        let mut last = None;
        for _ in 0..2 {
            let z = self.model.simulate(theta_v, self.data, rng)?;
            if let Ok(hat) = self.model.mle(&z) {
                let lmax = self.model.loglik(&hat, &z);
                if lmax.is_finite() {
                    let (lp, _) = self.feature.profile_loglik(self.model, &z, v, &hat)?;
                    return Ok((log_relative(lp, lmax), false));
                }
            }
            last = Some(z);
        }
        let z = last.expect("two attempts");
        let lmax = fallback_sup(self.model, &z, theta_v);
        let (lp, _) = self.feature.profile_loglik(self.model, &z, v, theta_v)?;
        Ok((log_relative(lp, lmax.max(lp)), true))
    }

    fn estimate(&self, v: f64, key: u64) -> Result<OracleEstimate> {
        let (lp, theta_v) =
            self.feature
                .profile_loglik(self.model, self.data, v, &self.theta_hat)?;
        let obs = log_relative(lp, self.loglik_max);
        let mut rng = self.cfg.stream(key);
        let (mut hits, mut failures) = (0, 0);
        for _ in 0..self.cfg.replicates {
            let (r, failed) = self.replicate(v, &theta_v, &mut rng)?;
            hits += (r <= obs) as usize;
            failures += failed as usize;
        }
        Ok(OracleEstimate::from_counts(
            hits,
            self.cfg.replicates,
            failures,
        ))
    }

    pub fn contour_at_keyed(&self, v: f64, key: u64) -> Result<OracleEstimate> {
        self.estimate(v, key)?.check()
    }

    /// Marginal plausibility at each feature value; value `i` uses stream `i`.
    pub fn contour_values(&self, values: &[f64]) -> Result<Vec<OracleEstimate>> {
        values
            .par_iter()
            .enumerate()
            .map(|(i, &v)| self.contour_at_keyed(v, i as u64))
            .collect()
    }
}

pub fn profile_contour_at<M: ParametricModel>(
    model: &M,
    z: &M::Data,
    feature: FeatureMap,
    v: f64,
    cfg: &OracleConfig,
) -> Result<OracleEstimate> {
    ProfileOracle::new(model, z, feature, *cfg)?.contour_at_keyed(v, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::GammaModel;

    #[test]
    fn profile_plausibility_is_one_at_feature_mle() {
        let z = vec![1.2, 0.4, 2.2, 3.1, 0.9, 1.7, 2.5, 0.7];
        let hat = GammaModel.mle(&z).unwrap();
        let v = FeatureMap::GammaMean.eval(&hat);
        let e = profile_contour_at(
            &GammaModel,
            &z,
            FeatureMap::GammaMean,
            v,
            &OracleConfig::new(50, 1),
        )
        .unwrap();
        assert!(e.value > 0.97, "{e:?}");
    }

    #[test]
    fn profile_plausibility_small_far_away() {
        let z = vec![1.2, 0.4, 2.2, 3.1, 0.9, 1.7, 2.5, 0.7];
        let e = profile_contour_at(
            &GammaModel,
            &z,
            FeatureMap::GammaMean,
            8.0,
            &OracleConfig::new(200, 1),
        )
        .unwrap();
        assert!(e.value < 0.02, "{e:?}");
    }
}
