use nalgebra::DMatrix;

use super::{std_normal, Paired, ParametricModel, Transform, WorkingScale};
use crate::error::{invalid, Error, Result};

/// Bivariate normal with zero means, unit variances and unknown
/// correlation. Working scale is Fisher's z.
#[derive(Debug, Clone, Copy, Default)]
pub struct CorrelationModel;

struct Moments {
    n: f64,
    sxx: f64,
    syy: f64,
    sxy: f64,
}

fn moments(z: &Paired) -> Moments {
    let mut m = Moments {
        n: z.len() as f64,
        sxx: 0.0,
        syy: 0.0,
        sxy: 0.0,
    };
    for (x, y) in z.x.iter().zip(&z.y) {
        m.sxx += x * x;
        m.syy += y * y;
        m.sxy += x * y;
    }
    m
}

fn loglik_moments(r: f64, m: &Moments) -> f64 {
    let one_m = 1.0 - r * r;
    if !(one_m > 0.0) {
        return f64::NEG_INFINITY;
    }
    -0.5 * m.n * one_m.ln() - (m.sxx - 2.0 * r * m.sxy + m.syy) / (2.0 * one_m)
}

// Score times (1 - r²)²: n r (1-r²) + (1+r²) Sxy - r (Sxx+Syy).
fn score_poly(r: f64, m: &Moments) -> f64 {
    m.n * r * (1.0 - r * r) + (1.0 + r * r) * m.sxy - r * (m.sxx + m.syy)
}

fn score_poly_deriv(r: f64, m: &Moments) -> f64 {
    m.n * (1.0 - 3.0 * r * r) + 2.0 * r * m.sxy - (m.sxx + m.syy)
}

/// Root of the score polynomial on a sign-changing bracket: Newton with
/// bisection fallback.
fn bracketed_root(mut lo: f64, mut hi: f64, m: &Moments) -> f64 {
    let flo = score_poly(lo, m);
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = score_poly(x, m);
        if f == 0.0 {
            return x;
        }
        if (f > 0.0) == (flo > 0.0) {
            lo = x;
        } else {
            hi = x;
        }
        let df = score_poly_deriv(x, m);
        let mut next = x - f / df;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() < 1e-15 || hi - lo < 1e-15 {
            return next;
        }
        x = next;
    }
    x
}

impl CorrelationModel {
    fn mle_moments(m: &Moments) -> Result<f64> {
        // The cubic has s(-1) >= 0 >= s(1); split (-1,1) at the critical
        // points and keep the root with the largest likelihood.
        let a = 3.0 * m.n;
        let b = -2.0 * m.sxy;
        let c = (m.sxx + m.syy) - m.n;
        let mut knots = vec![-1.0, 1.0];
        let disc = b * b - 4.0 * a * c;
        if disc >= 0.0 {
            for r in [
                (-b - disc.sqrt()) / (2.0 * a),
                (-b + disc.sqrt()) / (2.0 * a),
            ] {
                if r > -1.0 && r < 1.0 {
                    knots.push(r);
                }
            }
        }
        knots.sort_by(f64::total_cmp);
        let mut best: Option<(f64, f64)> = None;
        for w in knots.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let (flo, fhi) = (score_poly(lo, m), score_poly(hi, m));
            let root = if flo == 0.0 && lo > -1.0 {
                lo
            } else if fhi == 0.0 && hi < 1.0 {
                hi
            } else if (flo > 0.0) != (fhi > 0.0) {
                bracketed_root(lo, hi, m)
            } else {
                continue;
            };
            if root <= -1.0 || root >= 1.0 {
                continue;
            }
            let l = loglik_moments(root, m);
            if best.is_none_or(|(_, bl)| l > bl) {
                best = Some((root, l));
            }
        }
        best.map(|(r, _)| r).ok_or_else(|| {
            Error::BoundaryDivergence("correlation MLE on the boundary |r| = 1".into())
        })
    }
}

impl ParametricModel for CorrelationModel {
    type Data = Paired;

    fn id(&self) -> &'static str {
        "corr"
    }

    fn param_names(&self) -> Vec<String> {
        vec!["rho".into()]
    }

    fn scale(&self) -> WorkingScale {
        WorkingScale(vec![Transform::Atanh])
    }

    fn check_param(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != 1 || !(theta[0].abs() < 1.0) {
            return Err(invalid(format!(
                "correlation must lie in (-1, 1), got {theta:?}"
            )));
        }
        Ok(())
    }

    fn sample_size(&self, data: &Paired) -> usize {
        data.len()
    }

    fn check_data(&self, data: &Paired) -> Result<()> {
        if data.len() < 2 {
            return Err(invalid("need at least 2 observations"));
        }
        Ok(())
    }

    fn loglik(&self, theta: &[f64], data: &Paired) -> f64 {
        loglik_moments(theta[0], &moments(data))
    }

    fn simulate(
        &self,
        theta: &[f64],
        template: &Paired,
        rng: &mut dyn rand::RngCore,
    ) -> Result<Paired> {
        self.check_param(theta)?;
        let r = theta[0];
        let s = (1.0 - r * r).sqrt();
        let n = template.len();
        let mut x = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let a = std_normal(rng);
            let e = std_normal(rng);
            x.push(a);
            y.push(r * a + s * e);
        }
        Ok(Paired { x, y })
    }

    fn mle(&self, data: &Paired) -> Result<Vec<f64>> {
        Ok(vec![Self::mle_moments(&moments(data))?])
    }

    fn observed_info(&self, data: &Paired) -> Result<DMatrix<f64>> {
        let m = moments(data);
        let r = Self::mle_moments(&m)?;
        // d²l/dr² at the MLE, then chain rule to z = atanh(r); the score
        // term vanishes at the MLE.
        let u = 1.0 - r * r;
        let q = m.sxx - 2.0 * r * m.sxy + m.syy;
        let d2 = m.n * (1.0 + r * r) / (u * u) - q * (1.0 + 3.0 * r * r) / (u * u * u)
            + 4.0 * r * m.sxy / (u * u);
        let info_r = -d2;
        Ok(DMatrix::from_element(1, 1, info_r * u * u))
    }
}
