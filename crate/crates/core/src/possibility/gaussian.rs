use nalgebra::{DMatrix, DVector};

use super::PossibilityContour;
use crate::error::{invalid, Result};
use crate::special::{chi2_quantile, chi2_sf};

/// Relative tolerance of [`Ellipsoid::on_boundary`].
pub const BOUNDARY_RTOL: f64 = 1e-10;

/// Gaussian possibility measure with contour `1 - F_d((t-m)' V^-1 (t-m))`.
#[derive(Debug, Clone)]
pub struct GaussianPossibility {
    center: DVector<f64>,
    scale: DMatrix<f64>,
    precision: DMatrix<f64>,
}

impl GaussianPossibility {
    pub fn new(center: Vec<f64>, scale: DMatrix<f64>) -> Result<Self> {
        let d = center.len();
        if d == 0 || scale.nrows() != d || scale.ncols() != d {
            return Err(invalid("center/scale dimension mismatch"));
        }
        if (&scale - scale.transpose()).amax() > 1e-12 * scale.amax().max(1.0) {
            return Err(invalid("scale matrix is not symmetric"));
        }
        let chol = scale
            .clone()
            .cholesky()
            .ok_or_else(|| invalid("scale matrix is not positive definite"))?;
        Ok(Self {
            center: DVector::from_vec(center),
            precision: chol.inverse(),
            scale,
        })
    }

    /// Standard Gaussian possibility in `d` dimensions.
    pub fn standard(d: usize) -> Self {
        Self::new(vec![0.0; d], DMatrix::identity(d, d)).expect("identity is SPD")
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn scale(&self) -> &DMatrix<f64> {
        &self.scale
    }

    pub fn quadratic_form(&self, theta: &[f64]) -> f64 {
        let diff = DVector::from_column_slice(theta) - &self.center;
        (diff.transpose() * &self.precision * &diff)[(0, 0)]
    }

    /// The alpha-cut: ellipsoid with shape `V^-1` and radius² `F_d^{-1}(1-alpha)`.
    pub fn alpha_cut(&self, alpha: f64) -> Result<Ellipsoid> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(invalid(format!("alpha {alpha} outside (0, 1)")));
        }
        Ok(Ellipsoid {
            center: self.center.clone(),
            shape: self.precision.clone(),
            radius2: chi2_quantile(self.center.len(), 1.0 - alpha)?,
        })
    }
}

impl PossibilityContour for GaussianPossibility {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn eval(&self, theta: &[f64]) -> f64 {
        assert_eq!(theta.len(), self.dim(), "parameter dimension mismatch");
        chi2_sf(self.dim(), self.quadratic_form(theta))
    }
}

/// Contour of `g` at `theta`, validating dimensions.
pub fn gaussian_contour(theta: &[f64], g: &GaussianPossibility) -> Result<f64> {
    if theta.len() != g.dim() {
        return Err(invalid("parameter dimension mismatch"));
    }
    Ok(g.eval(theta))
}

/// `{t : (t-c)' A (t-c) <= r²}`.
#[derive(Debug, Clone)]
pub struct Ellipsoid {
    pub center: DVector<f64>,
    pub shape: DMatrix<f64>,
    pub radius2: f64,
}

impl Ellipsoid {
    pub fn quadratic_form(&self, theta: &[f64]) -> f64 {
        let diff = DVector::from_column_slice(theta) - &self.center;
        (diff.transpose() * &self.shape * &diff)[(0, 0)]
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        self.quadratic_form(theta) <= self.radius2
    }

    pub fn on_boundary(&self, theta: &[f64]) -> bool {
        let q = self.quadratic_form(theta);
        (q - self.radius2).abs() <= BOUNDARY_RTOL * self.radius2.max(f64::MIN_POSITIVE)
    }
}
