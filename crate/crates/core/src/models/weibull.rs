use rand::Rng;

use super::{CensoredObs, CensoringEstimate, ParametricModel, Transform, WorkingScale};
use crate::error::{invalid, Error, Result};
use crate::special::ln_gamma;

/// Weibull lifetimes (shape `theta1`, scale `theta2`) under independent
/// right censoring. The likelihood is the parametric factor only; the
/// censoring estimate is used by the simulator.
#[derive(Debug, Clone, Default)]
pub struct WeibullCensoredModel {
    pub censoring: Option<CensoringEstimate>,
}

impl WeibullCensoredModel {
    pub fn with_censoring(censoring: CensoringEstimate) -> Self {
        Self {
            censoring: Some(censoring),
        }
    }

    /// Attach the reverse Kaplan-Meier estimate computed from `z`.
    pub fn from_data(z: &CensoredObs) -> Result<Self> {
        Ok(Self::with_censoring(super::kaplan_meier_censoring(z)?))
    }

    /// Log of the mean lifetime, `log theta2 + lgamma(1 + 1/theta1)`.
    pub fn log_mean(theta: &[f64]) -> f64 {
        theta[1].ln() + ln_gamma(1.0 + 1.0 / theta[0])
    }
}

/// Draw `n` pairs `X = min(Y, C)`, `T = 1{Y <= C}` with `Y ~ Weibull(theta)`
/// and `C ~ g`.
pub fn simulate_censored<R: Rng + ?Sized>(
    theta: &[f64],
    g: &CensoringEstimate,
    n: usize,
    rng: &mut R,
) -> CensoredObs {
    let (k, lam) = (theta[0], theta[1]);
    let mut time = Vec::with_capacity(n);
    let mut event = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.random();
        let y = lam * (-(1.0 - u).ln()).powf(1.0 / k);
        let c = g.sample(rng);
        time.push(y.min(c));
        event.push(y <= c);
    }
    CensoredObs { time, event }
}

struct Scaled {
    xmax: f64,
    /// `log(x / xmax)` for every observation.
    lx: Vec<f64>,
    /// mean of `lx` over events
    a: f64,
    r: f64,
}

impl Scaled {
    fn new(z: &CensoredObs) -> Self {
        let xmax = z.time.iter().copied().fold(f64::MIN, f64::max);
        let lx: Vec<f64> = z.time.iter().map(|x| (x / xmax).ln()).collect();
        let r = z.events() as f64;
        let a = lx
            .iter()
            .zip(&z.event)
            .filter(|(_, &e)| e)
            .map(|(l, _)| l)
            .sum::<f64>()
            / r;
        Self { xmax, lx, a, r }
    }

    /// Profile score `1/k + a - B(k)` and its derivative.
    fn score(&self, k: f64) -> (f64, f64) {
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for &l in &self.lx {
            let w = (k * l).exp();
            s0 += w;
            s1 += w * l;
            s2 += w * l * l;
        }
        let b = s1 / s0;
        (1.0 / k + self.a - b, -1.0 / (k * k) - (s2 / s0 - b * b))
    }

    fn scale_at(&self, k: f64) -> f64 {
        let s0: f64 = self.lx.iter().map(|l| (k * l).exp()).sum();
        self.xmax * (s0 / self.r).powf(1.0 / k)
    }
}

impl ParametricModel for WeibullCensoredModel {
    type Data = CensoredObs;

    fn id(&self) -> &'static str {
        "weibull-cens"
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
                "Weibull shape and scale must be positive, got {theta:?}"
            )));
        }
        Ok(())
    }

    fn sample_size(&self, data: &CensoredObs) -> usize {
        data.len()
    }

    fn check_data(&self, data: &CensoredObs) -> Result<()> {
        if data.len() < 2 {
            return Err(invalid("need at least 2 observations"));
        }
        if let Some(v) = data.time.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(invalid(format!(
                "survival times must be positive and finite, got {v}"
            )));
        }
        Ok(())
    }

    fn loglik(&self, theta: &[f64], data: &CensoredObs) -> f64 {
        let (k, lam) = (theta[0], theta[1]);
        if !(k > 0.0 && lam > 0.0) {
            return f64::NEG_INFINITY;
        }
        let (lk, llam) = (k.ln(), lam.ln());
        let mut l = 0.0;
        for (&x, &e) in data.time.iter().zip(&data.event) {
            let lz = x.ln() - llam;
            if e {
                l += lk - llam + (k - 1.0) * lz;
            }
            l -= (k * lz).exp();
        }
        l
    }

    fn simulate(
        &self,
        theta: &[f64],
        template: &CensoredObs,
        rng: &mut dyn rand::RngCore,
    ) -> Result<CensoredObs> {
        self.check_param(theta)?;
        let g = self
            .censoring
            .as_ref()
            .ok_or_else(|| invalid("simulating censored data needs a censoring estimate"))?;
        Ok(simulate_censored(theta, g, template.len(), rng))
    }

    fn mle(&self, data: &CensoredObs) -> Result<Vec<f64>> {
        self.check_data(data)?;
        if data.events() == 0 {
            return Err(Error::ModelViolation(
                "every observation is censored".into(),
            ));
        }
        let s = Scaled::new(data);
        // profile score is decreasing in k; bracket then safeguarded Newton
        let (mut lo, mut hi) = (1e-3, 1.0);
        while s.score(hi).0 > 0.0 {
            lo = hi;
            hi *= 4.0;
            if hi > 1e6 {
                return Err(Error::BoundaryDivergence(
                    "Weibull shape MLE diverges".into(),
                ));
            }
        }
        while s.score(lo).0 < 0.0 {
            hi = lo;
            lo /= 4.0;
            if lo < 1e-9 {
                return Err(Error::BoundaryDivergence(
                    "Weibull shape MLE collapses to 0".into(),
                ));
            }
        }
        let mut k = 0.5 * (lo + hi);
        for _ in 0..200 {
            let (f, df) = s.score(k);
            if f > 0.0 {
                lo = k;
            } else {
                hi = k;
            }
            let mut next = k - f / df;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - k).abs() <= 1e-14 * k {
                k = next;
                break;
            }
            k = next;
        }
        Ok(vec![k, s.scale_at(k)])
    }
}
