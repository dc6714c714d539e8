use nalgebra::{DMatrix, Matrix2, Vector2};
use rand::Rng;

use super::{Paired, ParametricModel, WorkingScale};
use crate::error::{invalid, Error, Result};

const MAX_ITER: usize = 200;
const GRAD_TOL: f64 = 1e-8;

/// Logistic regression with intercept `theta1` and slope `theta2` on a
/// single covariate; the design `x` is held fixed under simulation.
#[derive(Debug, Clone, Copy, Default)]
pub struct LogisticModel;

fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Complete or quasi-complete separation of a binary response by a scalar
/// covariate: some threshold puts every 1 on one side and every 0 on the
/// other (ties at the threshold allowed).
pub(crate) fn separated(z: &Paired) -> bool {
    let mut max0 = f64::NEG_INFINITY;
    let mut min0 = f64::INFINITY;
    let mut max1 = f64::NEG_INFINITY;
    let mut min1 = f64::INFINITY;
    let mut n1 = 0;
    for (&x, &y) in z.x.iter().zip(&z.y) {
        if y > 0.5 {
            n1 += 1;
            max1 = max1.max(x);
            min1 = min1.min(x);
        } else {
            max0 = max0.max(x);
            min0 = min0.min(x);
        }
    }
    n1 == 0 || n1 == z.len() || max0 <= min1 || max1 <= min0
}

fn grad_hess(theta: &[f64], z: &Paired) -> (Vector2<f64>, Matrix2<f64>) {
    let mut g = Vector2::zeros();
    let mut h = Matrix2::zeros();
    for (&x, &y) in z.x.iter().zip(&z.y) {
        let p = sigmoid(theta[0] + theta[1] * x);
        let r = y - p;
        g[0] += r;
        g[1] += r * x;
        let w = p * (1.0 - p);
        h[(0, 0)] += w;
        h[(0, 1)] += w * x;
        h[(1, 1)] += w * x * x;
    }
    h[(1, 0)] = h[(0, 1)];
    (g, h)
}

impl LogisticModel {
    /// LD50 `-theta1 / theta2`.
    pub fn ld50(theta: &[f64]) -> f64 {
        -theta[0] / theta[1]
    }
}

impl ParametricModel for LogisticModel {
    type Data = Paired;

    fn id(&self) -> &'static str {
        "logistic"
    }

    fn param_names(&self) -> Vec<String> {
        vec!["intercept".into(), "slope".into()]
    }

    fn scale(&self) -> WorkingScale {
        WorkingScale::identity(2)
    }

    fn check_param(&self, theta: &[f64]) -> Result<()> {
        super::require_finite(theta, 2)
    }

    fn sample_size(&self, data: &Paired) -> usize {
        data.len()
    }

    fn check_data(&self, data: &Paired) -> Result<()> {
        if data.len() < 3 {
            return Err(invalid("need at least 3 observations"));
        }
        if data.y.iter().any(|&y| y != 0.0 && y != 1.0) {
            return Err(invalid("logistic responses must be 0 or 1"));
        }
        Ok(())
    }

    fn loglik(&self, theta: &[f64], data: &Paired) -> f64 {
        data.x
            .iter()
            .zip(&data.y)
            .map(|(&x, &y)| {
                let eta = theta[0] + theta[1] * x;
                y * eta - softplus(eta)
            })
            .sum()
    }

    fn simulate(
        &self,
        theta: &[f64],
        template: &Paired,
        rng: &mut dyn rand::RngCore,
    ) -> Result<Paired> {
        self.check_param(theta)?;
        let y = template
            .x
            .iter()
            .map(|&x| {
                let p = sigmoid(theta[0] + theta[1] * x);
                if rng.random::<f64>() < p {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        Ok(Paired {
            x: template.x.clone(),
            y,
        })
    }

    fn mle(&self, data: &Paired) -> Result<Vec<f64>> {
        self.check_data(data)?;
        if separated(data) {
            return Err(Error::ModelViolation(
                "responses are separated by the covariate; no finite MLE".into(),
            ));
        }
        let ybar = data.y.iter().sum::<f64>() / data.len() as f64;
        let mut theta = vec![(ybar / (1.0 - ybar)).ln(), 0.0];
        let mut l = self.loglik(&theta, data);
        for _ in 0..MAX_ITER {
            let (g, h) = grad_hess(&theta, data);
            if g.amax() < GRAD_TOL {
                return Ok(theta);
            }
            let step = h
                .cholesky()
                .map(|c| c.solve(&g))
                .ok_or_else(|| Error::ModelViolation("singular logistic information".into()))?;
            let mut t = 1.0;
            loop {
                let cand = vec![theta[0] + t * step[0], theta[1] + t * step[1]];
                let lc = self.loglik(&cand, data);
                if lc >= l - 1e-12 * l.abs() || t < 1e-10 {
                    theta = cand;
                    l = lc;
                    break;
                }
                t *= 0.5;
            }
        }
        let (g, _) = grad_hess(&theta, data);
        if g.amax() < 1e-6 {
            Ok(theta)
        } else {
            Err(Error::ModelViolation(
                "logistic Newton-Raphson did not converge".into(),
            ))
        }
    }

    fn observed_info(&self, data: &Paired) -> Result<DMatrix<f64>> {
        let theta = self.mle(data)?;
        let (_, h) = grad_hess(&theta, data);
        Ok(DMatrix::from_fn(2, 2, |i, j| h[(i, j)]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_ones_is_separated() {
        let z = Paired::new(vec![0.1, 0.2, 0.3, 0.4], vec![1.0; 4]);
        assert!(matches!(
            LogisticModel.mle(&z),
            Err(Error::ModelViolation(_))
        ));
    }

    #[test]
    fn threshold_separation_detected() {
        let z = Paired::new(vec![0.1, 0.2, 0.3, 0.4], vec![0.0, 0.0, 1.0, 1.0]);
        assert!(separated(&z));
        let z = Paired::new(vec![0.1, 0.2, 0.2, 0.4], vec![0.0, 1.0, 0.0, 1.0]);
        assert!(separated(&z), "quasi-complete: tie at the threshold");
        let z = Paired::new(vec![0.1, 0.2, 0.3, 0.4], vec![1.0, 0.0, 1.0, 0.0]);
        assert!(!separated(&z));
    }

    #[test]
    fn balanced_no_association_gives_zero_slope() {
        let x = vec![0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0];
        let y = vec![0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0];
        let hat = LogisticModel.mle(&Paired::new(x, y)).unwrap();
        assert!(hat[0].abs() < 1e-10 && hat[1].abs() < 1e-10, "{hat:?}");
    }
}
