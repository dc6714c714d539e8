//! Possibilistic inferential-model contours and their stitched Monte Carlo
//! approximation.
//!
//! The crate is organised bottom-up: [`possibility`] holds contour
//! primitives, [`models`] the parametric models, [`oracle`] the brute-force
//! Monte Carlo contour, [`stitch`] the calibrated Gaussian family and its
//! mixture sampler, and [`possibilize`] the conversion of samples back into
//! contours and marginal intervals.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fixtures;
pub mod models;
pub mod oracle;
pub mod possibility;
pub mod possibilize;
pub mod rng;
pub mod special;
pub mod stitch;

pub use error::{Error, Result};
pub use models::{fit, Fit, ParametricModel, WorkingScale};
pub use oracle::{NaiveOracle, OracleConfig, OracleEstimate, ReusePolicy};
pub use possibility::{ContourTable, GaussianPossibility, PossibilityContour};
pub use possibilize::{FeatureMap, RankingFunction, StitchedContour};
pub use stitch::{CalibrationConfig, CalibrationTable, StitchSampler, WeightedSampleSet};
