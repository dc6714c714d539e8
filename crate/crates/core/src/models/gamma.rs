use rand_distr::{Distribution, Gamma};

use super::{ParametricModel, Transform, WorkingScale};
use crate::error::{invalid, Error, Result};
use crate::special::{digamma, ln_gamma, trigamma};

/// Gamma model with shape `theta1` and scale `theta2`; working scale is
/// `(log theta1, log theta2)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct GammaModel;

struct Suff {
    n: f64,
    sum: f64,
    sum_log: f64,
}

fn suff(y: &[f64]) -> Suff {
    let mut s = Suff {
        n: y.len() as f64,
        sum: 0.0,
        sum_log: 0.0,
    };
    for &v in y {
        s.sum += v;
        s.sum_log += v.ln();
    }
    s
}

fn loglik_suff(shape: f64, scale: f64, s: &Suff) -> f64 {
    if !(shape > 0.0 && scale > 0.0) {
        return f64::NEG_INFINITY;
    }
    (shape - 1.0) * s.sum_log - s.sum / scale - s.n * (ln_gamma(shape) + shape * scale.ln())
}

/// Solve `log k - digamma(k) = target` by Newton on `log k`.
pub(crate) fn solve_shape(target: f64) -> Result<f64> {
    if !(target > 1e-13) {
        return Err(Error::BoundaryDivergence(
            "gamma shape MLE diverges: sample has (near) zero spread".into(),
        ));
    }
    // Minka's closed-form start
    let mut k = (3.0 - target + ((target - 3.0).powi(2) + 24.0 * target).sqrt()) / (12.0 * target);
    for _ in 0..100 {
        let g = k.ln() - digamma(k) - target;
        let dg = 1.0 - k * trigamma(k);
        let step = g / dg;
        let step = step.clamp(-2.0, 2.0);
        let next = (k.ln() - step).exp();
        if (next - k).abs() <= 1e-13 * k {
            k = next;
            break;
        }
        k = next;
    }
    if !k.is_finite() || k > 1e12 {
        return Err(Error::BoundaryDivergence("gamma shape MLE diverges".into()));
    }
    Ok(k)
}

impl GammaModel {
    /// `log(mean) - mean(log y)`, the shape equation's right-hand side.
    fn spread(s: &Suff) -> f64 {
        (s.sum / s.n).ln() - s.sum_log / s.n
    }
}

impl ParametricModel for GammaModel {
    type Data = Vec<f64>;

    fn id(&self) -> &'static str {
        "gamma"
    }

    fn param_names(&self) -> Vec<String> {
        vec!["shape".into(), "scale".into()]
    }

    fn scale(&self) -> WorkingScale {
        WorkingScale(vec![Transform::Log, Transform::Log])
    }

    fn check_param(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != 2
            || !(theta[0] > 0.0 && theta[1] > 0.0)
            || theta.iter().any(|v| !v.is_finite())
        {
            return Err(invalid(format!(
                "gamma shape and scale must be positive, got {theta:?}"
            )));
        }
        Ok(())
    }

    fn sample_size(&self, data: &Vec<f64>) -> usize {
        data.len()
    }

    fn check_data(&self, data: &Vec<f64>) -> Result<()> {
        if data.len() < 3 {
            return Err(invalid("need at least 3 observations"));
        }
        if let Some(v) = data.iter().find(|v| !(**v > 0.0)) {
            return Err(invalid(format!("gamma data must be positive, got {v}")));
        }
        Ok(())
    }

    fn loglik(&self, theta: &[f64], data: &Vec<f64>) -> f64 {
        loglik_suff(theta[0], theta[1], &suff(data))
    }

    fn simulate(
        &self,
        theta: &[f64],
        template: &Vec<f64>,
        rng: &mut dyn rand::RngCore,
    ) -> Result<Vec<f64>> {
        self.check_param(theta)?;
        let dist = Gamma::new(theta[0], theta[1]).map_err(|e| invalid(e.to_string()))?;
        Ok((0..template.len()).map(|_| dist.sample(rng)).collect())
    }

    fn mle(&self, data: &Vec<f64>) -> Result<Vec<f64>> {
        self.check_data(data)?;
        let s = suff(data);
        let shape = solve_shape(Self::spread(&s))?;
        Ok(vec![shape, s.sum / s.n / shape])
    }
}
