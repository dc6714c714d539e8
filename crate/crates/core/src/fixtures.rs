//! Bundled datasets for the worked analyses.

use crate::error::Result;
use crate::models::{read_censored, read_pairs, read_positive, CensoredObs, Paired};

/// LSAT/GPA pairs for 15 law schools, each coordinate centred and scaled
/// to unit sample variance.
pub const LAW_SCHOOL_CSV: &str = include_str!("../data/law_school.csv");
/// Survival times (weeks) of 20 rats.
pub const RATS_CSV: &str = include_str!("../data/rats.csv");
/// Dose (x) and binary mortality (y) for 120 animals at 10 dose levels.
pub const CHLORACETIC_CSV: &str = include_str!("../data/chloracetic.csv");
/// Ovarian cancer follow-up times (days) and death indicators, n = 26.
pub const OVARIAN_CSV: &str = include_str!("../data/ovarian.csv");

pub fn law_school() -> Result<Paired> {
    read_pairs(LAW_SCHOOL_CSV.as_bytes())
}

pub fn rats() -> Result<Vec<f64>> {
    read_positive(RATS_CSV.as_bytes())
}

pub fn chloracetic() -> Result<Paired> {
    read_pairs(CHLORACETIC_CSV.as_bytes())
}

pub fn ovarian() -> Result<CensoredObs> {
    read_censored(OVARIAN_CSV.as_bytes())
}
