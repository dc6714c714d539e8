use nalgebra::DMatrix;

use super::{require_finite, std_normal, ParametricModel, WorkingScale};
use crate::error::{invalid, Result};

/// Unit-variance normal location model. The relative likelihood
/// `exp(-n (xbar - theta)^2 / 2)` is pivotal, so the IM contour is exactly
/// `1 - F_1(n (theta - xbar)^2)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct NormalMeanModel;

impl ParametricModel for NormalMeanModel {
    type Data = Vec<f64>;

    fn id(&self) -> &'static str {
        "normal-mean"
    }

    fn param_names(&self) -> Vec<String> {
        vec!["mean".into()]
    }

    fn scale(&self) -> WorkingScale {
        WorkingScale::identity(1)
    }

    fn check_param(&self, theta: &[f64]) -> Result<()> {
        require_finite(theta, 1)
    }

    fn sample_size(&self, data: &Vec<f64>) -> usize {
        data.len()
    }

    fn check_data(&self, data: &Vec<f64>) -> Result<()> {
        if data.len() < 2 {
            return Err(invalid("need at least 2 observations"));
        }
        Ok(())
    }

    fn loglik(&self, theta: &[f64], data: &Vec<f64>) -> f64 {
        -0.5 * data.iter().map(|x| (x - theta[0]).powi(2)).sum::<f64>()
    }

    fn simulate(
        &self,
        theta: &[f64],
        template: &Vec<f64>,
        rng: &mut dyn rand::RngCore,
    ) -> Result<Vec<f64>> {
        Ok((0..template.len())
            .map(|_| theta[0] + std_normal(rng))
            .collect())
    }

    fn mle(&self, data: &Vec<f64>) -> Result<Vec<f64>> {
        if data.is_empty() {
            return Err(invalid("empty dataset"));
        }
        Ok(vec![data.iter().sum::<f64>() / data.len() as f64])
    }

    fn observed_info(&self, data: &Vec<f64>) -> Result<DMatrix<f64>> {
        Ok(DMatrix::from_element(1, 1, data.len() as f64))
    }
}
