//! Shared inputs for the benchmarks.

use imstitch_core::models::GammaModel;
use imstitch_core::stitch::build_calibration_table;
use imstitch_core::{fit, fixtures, CalibrationConfig, CalibrationTable, Fit};

/// Gamma fixture with its fit.
pub fn gamma_problem() -> (Vec<f64>, Fit) {
    let z = fixtures::rats().expect("bundled fixture");
    let f = fit(&GammaModel, &z).expect("gamma fit");
    (z, f)
}

/// Calibration table for the gamma fixture with `levels` levels.
pub fn gamma_table(levels: usize) -> CalibrationTable {
    let (z, f) = gamma_problem();
    let cfg = CalibrationConfig {
        grid_size: levels,
        seed: 1,
        ..CalibrationConfig::default()
    };
    build_calibration_table(&GammaModel, &z, &f, &cfg).expect("calibration")
}
