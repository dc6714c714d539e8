//! Probability-to-possibility transform of stitched samples.
//!
//! Given draws `Theta_i` from `Q*` and a ranking `r`, the stitched contour
//! is `omega(theta) = (1/N) #{i : r(Theta_i) <= r(theta)}`. Feature
//! marginals push the draws through a scalar map first.

mod feature;
mod ranking;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::models::WorkingScale;
use crate::possibility::PossibilityContour;
use crate::stitch::WeightedSampleSet;

pub use feature::FeatureMap;
pub use ranking::{
    gaussian_density_ranking, kde_ranking, likelihood_ranking, profile_ranking,
    silverman_bandwidth, FnRanking, GaussianRanking, KdeRanking, LikelihoodRanking, ProfileRanking,
    RankingFunction, RankingKind,
};

/// Smallest sample a stitched contour accepts.
pub const MIN_SAMPLES: usize = 100;

/// `omega(theta)` from sorted sample ranks; evaluation is a binary search.
pub struct StitchedContour<R: RankingFunction> {
    points: Vec<Vec<f64>>,
    ranks: Vec<f64>,
    sorted_ranks: Vec<f64>,
    ranking: R,
}

impl<R: RankingFunction> StitchedContour<R> {
    /// Build from (natural-scale) points and a ranking.
    pub fn from_points(points: Vec<Vec<f64>>, ranking: R) -> Result<Self> {
        if points.len() < MIN_SAMPLES {
            return Err(invalid(format!(
                "need at least {MIN_SAMPLES} samples, got {}",
                points.len()
            )));
        }
        let ranks: Vec<f64> = points.iter().map(|p| ranking.rank(p)).collect();
        if let Some(i) = ranks.iter().position(|r| r.is_nan()) {
            return Err(Error::InvalidRanking(format!(
                "ranking is undefined at sample {i}: {:?}",
                points[i]
            )));
        }
        let mut sorted_ranks = ranks.clone();
        sorted_ranks.sort_by(f64::total_cmp);
        Ok(Self {
            points,
            ranks,
            sorted_ranks,
            ranking,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    /// Rank of each sample, in sample order.
    pub fn sample_ranks(&self) -> &[f64] {
        &self.ranks
    }

    pub fn ranking(&self) -> &R {
        &self.ranking
    }

    /// Fraction of sample ranks not exceeding `r`.
    pub fn eval_rank(&self, r: f64) -> f64 {
        if r.is_nan() {
            return 0.0;
        }
        self.sorted_ranks.partition_point(|&s| s <= r) as f64 / self.sorted_ranks.len() as f64
    }

    pub fn eval(&self, theta: &[f64]) -> f64 {
        self.eval_rank(self.ranking.rank(theta))
    }

    /// Contour value at every sample.
    pub fn sample_values(&self) -> Vec<f64> {
        self.ranks.iter().map(|&r| self.eval_rank(r)).collect()
    }
}

impl<R: RankingFunction> PossibilityContour for StitchedContour<R> {
    fn dim(&self) -> usize {
        self.points[0].len()
    }

    fn eval(&self, theta: &[f64]) -> f64 {
        StitchedContour::eval(self, theta)
    }
}

/// Stitched contour of the natural-scale draws.
pub fn stitched_contour<R: RankingFunction>(
    samples: &WeightedSampleSet,
    ranking: R,
) -> Result<StitchedContour<R>> {
    StitchedContour::from_points(samples.natural().map(<[f64]>::to_vec).collect(), ranking)
}

/// Feature values of the draws.
pub fn feature_values(samples: &WeightedSampleSet, feature: FeatureMap) -> Result<Vec<f64>> {
    let vals: Vec<f64> = samples.natural().map(|t| feature.eval(t)).collect();
    if let Some(i) = vals.iter().position(|v| !v.is_finite()) {
        return Err(invalid(format!(
            "feature {feature} is not finite at sample {i}"
        )));
    }
    Ok(vals)
}

/// Marginal contour of a feature with the default ranking: a 1-d kernel
/// density estimate of the pushed-forward draws.
pub fn marginal_contour(
    samples: &WeightedSampleSet,
    feature: FeatureMap,
) -> Result<StitchedContour<KdeRanking>> {
    let pts: Vec<Vec<f64>> = feature_values(samples, feature)?
        .into_iter()
        .map(|v| vec![v])
        .collect();
    let r = kde_ranking(&pts, &WorkingScale::identity(1))?;
    StitchedContour::from_points(pts, r)
}

/// Marginal contour of a feature with a caller-supplied 1-d ranking.
pub fn marginal_contour_with<R: RankingFunction>(
    samples: &WeightedSampleSet,
    feature: FeatureMap,
    ranking: R,
) -> Result<StitchedContour<R>> {
    let pts: Vec<Vec<f64>> = feature_values(samples, feature)?
        .into_iter()
        .map(|v| vec![v])
        .collect();
    StitchedContour::from_points(pts, ranking)
}

/// Interval read off a scalar contour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub feature: String,
    pub alpha: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Smallest interval holding every sample value with `omega >= alpha`;
/// each end is interpolated linearly between the neighbouring order
/// statistics at the alpha crossing.
pub fn confidence_interval<R: RankingFunction>(
    contour: &StitchedContour<R>,
    alpha: f64,
) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if contour.points.first().is_some_and(|p| p.len() != 1) {
        return Err(invalid("confidence intervals need a scalar contour"));
    }
    let mut pairs: Vec<(f64, f64)> = contour
        .points
        .iter()
        .zip(contour.sample_values())
        .map(|(p, w)| (p[0], w))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let max = pairs.iter().map(|p| p.1).fold(0.0, f64::max);
    let first = pairs.iter().position(|p| p.1 >= alpha);
    let last = pairs.iter().rposition(|p| p.1 >= alpha);
    let (Some(i), Some(j)) = (first, last) else {
        return Err(Error::EmptyInterval { alpha, max });
    };
    let cross = |a: (f64, f64), b: (f64, f64)| {
        if b.1 == a.1 {
            b.0
        } else {
            a.0 + (alpha - a.1) / (b.1 - a.1) * (b.0 - a.0)
        }
    };
    let lo = if i == 0 {
        pairs[0].0
    } else {
        cross(pairs[i - 1], pairs[i])
    };
    let n = pairs.len();
    let hi = if j == n - 1 {
        pairs[n - 1].0
    } else {
        cross(pairs[j + 1], pairs[j])
    };
    Ok((lo, hi))
}

/// Write `feature,plaus` rows for `count` equally spaced feature values
/// spanning the sample range.
pub fn write_marginal_csv<R: RankingFunction, W: Write>(
    contour: &StitchedContour<R>,
    count: usize,
    w: W,
) -> Result<()> {
    let (lo, hi) = contour
        .points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
            (a.min(p[0]), b.max(p[0]))
        });
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["feature", "plaus"])?;
    let count = count.max(2);
    for k in 0..count {
        let v = lo + (hi - lo) * k as f64 / (count - 1) as f64;
        out.write_record([v.to_string(), contour.eval(&[v]).to_string()])?;
    }
    out.flush()?;
    Ok(())
}
