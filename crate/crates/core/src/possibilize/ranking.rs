use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::FeatureMap;
use crate::error::{invalid, Error, Result};
use crate::models::{ParametricModel, WorkingScale};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RankingKind {
    Likelihood,
    GaussianDensity,
    KernelDensity,
    Custom,
}

impl fmt::Display for RankingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RankingKind::Likelihood => "likelihood",
            RankingKind::GaussianDensity => "gauss",
            RankingKind::KernelDensity => "kde",
            RankingKind::Custom => "custom",
        })
    }
}

impl FromStr for RankingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "likelihood" => Ok(RankingKind::Likelihood),
            "gauss" | "gaussian" => Ok(RankingKind::GaussianDensity),
            "kde" => Ok(RankingKind::KernelDensity),
            other => Err(invalid(format!("unknown ranking `{other}`"))),
        }
    }
}

/// Data-dependent ordering of parameter values; larger means more central.
pub trait RankingFunction: Send + Sync {
    fn rank(&self, theta: &[f64]) -> f64;
    fn kind(&self) -> RankingKind;
}

impl<R: RankingFunction + ?Sized> RankingFunction for Box<R> {
    fn rank(&self, theta: &[f64]) -> f64 {
        (**self).rank(theta)
    }
    fn kind(&self) -> RankingKind {
        (**self).kind()
    }
}

impl<R: RankingFunction + ?Sized> RankingFunction for &R {
    fn rank(&self, theta: &[f64]) -> f64 {
        (**self).rank(theta)
    }
    fn kind(&self) -> RankingKind {
        (**self).kind()
    }
}

/// A ranking given by a closure.
pub struct FnRanking<F>(pub F);

impl<F: Fn(&[f64]) -> f64 + Send + Sync> RankingFunction for FnRanking<F> {
    fn rank(&self, theta: &[f64]) -> f64 {
        (self.0)(theta)
    }
    fn kind(&self) -> RankingKind {
        RankingKind::Custom
    }
}

/// `r(theta) = log L_z(theta)`.
#[derive(Debug, Clone)]
pub struct LikelihoodRanking<M: ParametricModel> {
    model: M,
    data: M::Data,
}

pub fn likelihood_ranking<M: ParametricModel + Clone>(
    model: &M,
    data: &M::Data,
) -> LikelihoodRanking<M> {
    LikelihoodRanking {
        model: model.clone(),
        data: data.clone(),
    }
}

impl<M: ParametricModel> RankingFunction for LikelihoodRanking<M> {
    fn rank(&self, theta: &[f64]) -> f64 {
        self.model.loglik(theta, &self.data)
    }
    fn kind(&self) -> RankingKind {
        RankingKind::Likelihood
    }
}

/// Profile log-likelihood of a scalar feature.
#[derive(Debug, Clone)]
pub struct ProfileRanking<M: ParametricModel> {
    model: M,
    data: M::Data,
    feature: FeatureMap,
    theta_hat: Vec<f64>,
}

pub fn profile_ranking<M: ParametricModel + Clone>(
    model: &M,
    data: &M::Data,
    feature: FeatureMap,
) -> Result<ProfileRanking<M>> {
    Ok(ProfileRanking {
        theta_hat: model.mle(data)?,
        model: model.clone(),
        data: data.clone(),
        feature,
    })
}

impl<M: ParametricModel> RankingFunction for ProfileRanking<M> {
    fn rank(&self, v: &[f64]) -> f64 {
        self.feature
            .profile_loglik(&self.model, &self.data, v[0], &self.theta_hat)
            .map_or(f64::NAN, |(l, _)| l)
    }
    fn kind(&self) -> RankingKind {
        RankingKind::Likelihood
    }
}

fn mean_cov(points: &[Vec<f64>]) -> (DVector<f64>, DMatrix<f64>) {
    let d = points[0].len();
    let n = points.len() as f64;
    let mut mean = DVector::zeros(d);
    for p in points {
        mean += DVector::from_column_slice(p);
    }
    mean /= n;
    let mut cov = DMatrix::zeros(d, d);
    for p in points {
        let c = DVector::from_column_slice(p) - &mean;
        cov += &c * c.transpose();
    }
    cov /= n - 1.0;
    (mean, cov)
}

fn check_points(points: &[Vec<f64>], scale: &WorkingScale, min_n: usize) -> Result<usize> {
    let d = scale.dim();
    if points.len() < min_n {
        return Err(invalid(format!(
            "need at least {min_n} points, got {}",
            points.len()
        )));
    }
    if points
        .iter()
        .any(|p| p.len() != d || p.iter().any(|x| !x.is_finite()))
    {
        return Err(invalid(
            "points must be finite vectors of the scale's dimension",
        ));
    }
    Ok(d)
}

/// Negative Mahalanobis distance to a Gaussian fitted on the working scale.
#[derive(Debug, Clone)]
pub struct GaussianRanking {
    mean: DVector<f64>,
    precision: DMatrix<f64>,
    scale: WorkingScale,
}

/// Fit from working-scale points.
pub fn gaussian_density_ranking(
    points: &[Vec<f64>],
    scale: &WorkingScale,
) -> Result<GaussianRanking> {
    check_points(points, scale, scale.dim() + 2)?;
    let (mean, cov) = mean_cov(points);
    let eig = cov.clone().symmetric_eigenvalues();
    let (lo, hi) = (eig.min(), eig.max());
    if !(hi > 0.0 && lo > 1e-12 * hi) {
        return Err(invalid("sample covariance is singular"));
    }
    let precision = cov
        .cholesky()
        .ok_or_else(|| invalid("sample covariance is singular"))?
        .inverse();
    Ok(GaussianRanking {
        mean,
        precision,
        scale: scale.clone(),
    })
}

impl GaussianRanking {
    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }
}

impl RankingFunction for GaussianRanking {
    fn rank(&self, theta: &[f64]) -> f64 {
        let psi = DVector::from_vec(self.scale.to_working(theta));
        let c = psi - &self.mean;
        -(c.transpose() * &self.precision * &c)[(0, 0)]
    }
    fn kind(&self) -> RankingKind {
        RankingKind::GaussianDensity
    }
}

/// Product Gaussian kernel density estimate on the working scale.
#[derive(Debug, Clone)]
pub struct KdeRanking {
    /// Points sorted by the first coordinate.
    points: Vec<Vec<f64>>,
    bandwidth: Vec<f64>,
    scale: WorkingScale,
}

/// Kernel contributions beyond this many bandwidths are dropped.
const KDE_CUTOFF: f64 = 8.0;

/// Per-coordinate bandwidth `1.06 sd N^{-1/(4+d)}`.
pub fn silverman_bandwidth(points: &[Vec<f64>]) -> Vec<f64> {
    let d = points[0].len();
    let n = points.len() as f64;
    let (_, cov) = mean_cov(points);
    (0..d)
        .map(|j| 1.06 * cov[(j, j)].sqrt() * n.powf(-1.0 / (4.0 + d as f64)))
        .collect()
}

pub fn kde_ranking(points: &[Vec<f64>], scale: &WorkingScale) -> Result<KdeRanking> {
    let d = check_points(points, scale, 2)?;
    if !(1..=2).contains(&d) {
        return Err(invalid(
            "kernel density ranking supports one or two dimensions",
        ));
    }
    let bandwidth = silverman_bandwidth(points);
    if bandwidth.iter().any(|h| !(*h > 0.0)) {
        return Err(invalid("a coordinate has zero variance"));
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a[0].total_cmp(&b[0]));
    Ok(KdeRanking {
        points: sorted,
        bandwidth,
        scale: scale.clone(),
    })
}

impl KdeRanking {
    pub fn bandwidth(&self) -> &[f64] {
        &self.bandwidth
    }

    fn density_working(&self, psi: &[f64]) -> f64 {
        let h0 = self.bandwidth[0];
        let lo = self
            .points
            .partition_point(|p| p[0] < psi[0] - KDE_CUTOFF * h0);
        let hi = self
            .points
            .partition_point(|p| p[0] <= psi[0] + KDE_CUTOFF * h0);
        let mut acc = 0.0;
        for p in &self.points[lo..hi] {
            let mut e = 0.0;
            for ((x, c), h) in psi.iter().zip(p).zip(&self.bandwidth) {
                let u = (x - c) / h;
                e += u * u;
            }
            acc += (-0.5 * e).exp();
        }
        let norm: f64 = self
            .bandwidth
            .iter()
            .map(|h| h * (2.0 * std::f64::consts::PI).sqrt())
            .product();
        acc / (norm * self.points.len() as f64)
    }
}

impl RankingFunction for KdeRanking {
    fn rank(&self, theta: &[f64]) -> f64 {
        self.density_working(&self.scale.to_working(theta))
    }
    fn kind(&self) -> RankingKind {
        RankingKind::KernelDensity
    }
}
