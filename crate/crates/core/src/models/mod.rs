//! Parametric models: likelihood, simulator, MLE and observed information.
//!
//! Every model works on a natural parameter scale (what users read and
//! write) and an unconstrained working scale (where the Gaussian
//! approximation, calibration and sampling happen). The observed Fisher
//! information returned by [`ParametricModel::observed_info`] is always on
//! the working scale.

mod censoring;
mod correlation;
mod data;
mod gamma;
mod logistic;
mod normal;
mod weibull;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use censoring::{kaplan_meier_censoring, CensoringEstimate};
pub use correlation::CorrelationModel;
pub use data::{read_censored, read_pairs, read_positive, CensoredObs, Paired};
pub use gamma::GammaModel;
pub use logistic::LogisticModel;
pub use normal::NormalMeanModel;
pub use weibull::{simulate_censored, WeibullCensoredModel};

use crate::error::{invalid, Error, Result};

/// Coordinate-wise map from natural to working scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    Identity,
    Log,
    /// Fisher's z.
    Atanh,
}

impl Transform {
    pub fn forward(self, x: f64) -> f64 {
        match self {
            Transform::Identity => x,
            Transform::Log => x.ln(),
            Transform::Atanh => x.atanh(),
        }
    }

    pub fn inverse(self, y: f64) -> f64 {
        match self {
            Transform::Identity => y,
            Transform::Log => y.exp(),
            Transform::Atanh => y.tanh(),
        }
    }
}

/// Per-coordinate working-scale transforms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkingScale(pub Vec<Transform>);

impl WorkingScale {
    pub fn identity(d: usize) -> Self {
        Self(vec![Transform::Identity; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn to_working(&self, theta: &[f64]) -> Vec<f64> {
        self.0
            .iter()
            .zip(theta)
            .map(|(t, &x)| t.forward(x))
            .collect()
    }

    pub fn from_working(&self, psi: &[f64]) -> Vec<f64> {
        self.0.iter().zip(psi).map(|(t, &y)| t.inverse(y)).collect()
    }
}

/// A parametric statistical model for a fixed data schema.
pub trait ParametricModel: Send + Sync {
    type Data: Clone + Send + Sync;

    /// Short identifier, e.g. `gamma`.
    fn id(&self) -> &'static str;

    /// Natural-scale coordinate names.
    fn param_names(&self) -> Vec<String>;

    fn dim(&self) -> usize {
        self.scale().dim()
    }

    fn scale(&self) -> WorkingScale;

    fn check_param(&self, theta: &[f64]) -> Result<()>;

    fn sample_size(&self, data: &Self::Data) -> usize;

    fn check_data(&self, data: &Self::Data) -> Result<()>;

    /// Log-likelihood on the natural scale. `-inf` outside the support.
    fn loglik(&self, theta: &[f64], data: &Self::Data) -> f64;

    /// A fresh dataset with the same size and design as `template`.
    fn simulate(
        &self,
        theta: &[f64],
        template: &Self::Data,
        rng: &mut dyn rand::RngCore,
    ) -> Result<Self::Data>;

    /// Natural-scale MLE.
    fn mle(&self, data: &Self::Data) -> Result<Vec<f64>>;

    /// Observed information at the MLE, working scale.
    fn observed_info(&self, data: &Self::Data) -> Result<DMatrix<f64>> {
        let theta = self.mle(data)?;
        let psi = self.scale().to_working(&theta);
        let h = fd_hessian(|p| self.loglik(&self.scale().from_working(p), data), &psi);
        Ok(-h)
    }

    fn to_working(&self, theta: &[f64]) -> Vec<f64> {
        self.scale().to_working(theta)
    }

    #[allow(clippy::wrong_self_convention)]
    fn from_working(&self, psi: &[f64]) -> Vec<f64> {
        self.scale().from_working(psi)
    }
}

/// `L(theta) / sup L`, computed in the log domain.
pub fn relative_likelihood<M: ParametricModel>(
    model: &M,
    data: &M::Data,
    theta: &[f64],
) -> Result<f64> {
    model.check_param(theta)?;
    let hat = model.mle(data)?;
    let lmax = model.loglik(&hat, data);
    if !lmax.is_finite() {
        return Err(Error::ModelViolation(
            "likelihood supremum is not finite".into(),
        ));
    }
    Ok(log_relative(model.loglik(theta, data), lmax).exp())
}

/// `min(l - lmax, 0)`: the sup dominates every likelihood value, so a
/// positive difference can only be optimizer slack.
pub(crate) fn log_relative(l: f64, lmax: f64) -> f64 {
    if l.is_nan() {
        return f64::NEG_INFINITY;
    }
    (l - lmax).min(0.0)
}

/// Central finite-difference Hessian, step `1e-5 * (1 + |x_i|)`.
pub fn fd_hessian<F: Fn(&[f64]) -> f64>(f: F, x: &[f64]) -> DMatrix<f64> {
    let d = x.len();
    let h: Vec<f64> = x.iter().map(|v| 1e-5 * (1.0 + v.abs())).collect();
    let mut out = DMatrix::zeros(d, d);
    let mut p = x.to_vec();
    let f0 = f(x);
    for i in 0..d {
        p[i] = x[i] + h[i];
        let fp = f(&p);
        p[i] = x[i] - h[i];
        let fm = f(&p);
        p[i] = x[i];
        out[(i, i)] = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
        for j in 0..i {
            let mut eval = |si: f64, sj: f64| {
                p[i] = x[i] + si * h[i];
                p[j] = x[j] + sj * h[j];
                let v = f(&p);
                p[i] = x[i];
                p[j] = x[j];
                v
            };
            let v = (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0))
                / (4.0 * h[i] * h[j]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// MLE, observed information and its spectral decomposition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Fit {
    pub model: String,
    pub param_names: Vec<String>,
    pub scale: WorkingScale,
    pub theta_hat: Vec<f64>,
    pub psi_hat: Vec<f64>,
    pub loglik_max: f64,
    /// Working-scale observed information, row-major.
    pub info: Vec<Vec<f64>>,
    /// Eigenvectors of the information as columns, row-major storage.
    pub eigvecs: Vec<Vec<f64>>,
    pub eigvals: Vec<f64>,
    pub n: usize,
}

impl Fit {
    pub fn info_matrix(&self) -> DMatrix<f64> {
        rows_to_matrix(&self.info)
    }

    pub fn eigvec_matrix(&self) -> DMatrix<f64> {
        rows_to_matrix(&self.eigvecs)
    }

    pub fn dim(&self) -> usize {
        self.psi_hat.len()
    }
}

pub(crate) fn rows_to_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    DMatrix::from_fn(n, m, |i, j| rows[i][j])
}

pub(crate) fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

/// Fit `model` to `data`: MLE, working-scale information, eigenpairs.
pub fn fit<M: ParametricModel>(model: &M, data: &M::Data) -> Result<Fit> {
    model.check_data(data)?;
    let theta_hat = model.mle(data)?;
    let loglik_max = model.loglik(&theta_hat, data);
    if !loglik_max.is_finite() {
        return Err(Error::ModelViolation(
            "likelihood at the MLE is not finite".into(),
        ));
    }
    let info = model.observed_info(data)?;
    let info = (&info + info.transpose()) * 0.5;
    let eig = SymmetricEigen::new(info.clone());
    if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::ModelViolation(format!(
            "observed information is not positive definite (eigenvalues {:?})",
            eig.eigenvalues.as_slice()
        )));
    }
    // ascending eigenvalues, deterministic sign: largest |component| positive
    let d = info.nrows();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut vecs = DMatrix::zeros(d, d);
    let mut vals = Vec::with_capacity(d);
    for (k, &j) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(j).clone_owned();
        let imax = col.iamax();
        if col[imax] < 0.0 {
            col = -col;
        }
        vecs.set_column(k, &col);
        vals.push(eig.eigenvalues[j]);
    }
    Ok(Fit {
        model: model.id().to_string(),
        param_names: model.param_names(),
        scale: model.scale(),
        psi_hat: model.to_working(&theta_hat),
        theta_hat,
        loglik_max,
        info: matrix_to_rows(&info),
        eigvecs: matrix_to_rows(&vecs),
        eigvals: vals,
        n: model.sample_size(data),
    })
}

/// Golden-section maximization of a unimodal function on `[lo, hi]`.
pub(crate) fn golden_max<F: Fn(f64) -> f64>(
    f: F,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> (f64, f64) {
    const INVPHI: f64 = 0.618_033_988_749_894_8;
    let mut c = hi - INVPHI * (hi - lo);
    let mut d = lo + INVPHI * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    while (hi - lo).abs() > tol {
        if fc > fd || (fd.is_nan() && !fc.is_nan()) {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INVPHI * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INVPHI * (hi - lo);
            fd = f(d);
        }
    }
    let x = 0.5 * (lo + hi);
    (x, f(x))
}

pub(crate) fn require_finite(theta: &[f64], d: usize) -> Result<()> {
    if theta.len() != d {
        return Err(invalid(format!(
            "expected {d} parameters, got {}",
            theta.len()
        )));
    }
    if theta.iter().any(|x| !x.is_finite()) {
        return Err(invalid("parameter is not finite"));
    }
    Ok(())
}

/// Draw a standard normal.
pub(crate) fn std_normal(rng: &mut dyn rand::RngCore) -> f64 {
    rng.sample(rand_distr::StandardNormal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn transforms_round_trip() {
        let s = WorkingScale(vec![Transform::Log, Transform::Atanh, Transform::Identity]);
        let theta = [2.5, -0.3, -7.0];
        let back = s.from_working(&s.to_working(&theta));
        for (a, b) in theta.iter().zip(&back) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn fd_hessian_of_quadratic() {
        let h = fd_hessian(
            |p| 1.5 * p[0] * p[0] - p[0] * p[1] + 4.0 * p[1] * p[1],
            &[0.3, -0.2],
        );
        assert_relative_eq!(h[(0, 0)], 3.0, epsilon = 1e-4);
        assert_relative_eq!(h[(0, 1)], -1.0, epsilon = 1e-4);
        assert_relative_eq!(h[(1, 1)], 8.0, epsilon = 1e-4);
    }

    #[test]
    fn golden_finds_peak() {
        let (x, _) = golden_max(|x| -(x - 1.3).powi(2), -5.0, 5.0, 1e-10);
        assert_relative_eq!(x, 1.3, epsilon = 1e-8);
    }
}
