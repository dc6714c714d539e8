//! The pipeline stages. Each stage reads the previous stage's files from
//! the output directory and writes its own.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use imstitch_core::models::ParametricModel;
use imstitch_core::oracle::{regular_grid, validity_rates, ProfileOracle, ValidityReport};
use imstitch_core::possibilize::{
    confidence_interval, feature_values, gaussian_density_ranking, kde_ranking, likelihood_ranking,
    profile_ranking, write_marginal_csv, ConfidenceInterval, RankingKind,
};
use imstitch_core::stitch::build_calibration_table;
use imstitch_core::{
    fit, CalibrationConfig, CalibrationTable, ContourTable, FeatureMap, Fit, NaiveOracle,
    OracleConfig, RankingFunction, StitchSampler, StitchedContour, WeightedSampleSet, WorkingScale,
};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::dataset::Dataset;
use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;
use crate::with_model;

pub const FIT_FILE: &str = "fit.json";
pub const CONTOUR_FILE: &str = "contour.csv";
pub const CALIBRATION_FILE: &str = "calibration.json";
pub const SAMPLES_FILE: &str = "samples.csv";
pub const STITCHED_FILE: &str = "stitched.csv";
pub const MARGINAL_FILE: &str = "marginal.csv";
pub const INTERVAL_FILE: &str = "interval.json";
pub const VALIDITY_FILE: &str = "validity.json";

/// Default oracle replicates for `contour`.
pub const CONTOUR_REPLICATES: usize = 1000;
/// Default oracle replicates for `validate`.
pub const VALIDITY_REPLICATES: usize = 500;
/// Points per axis of the automatic grid.
pub const AUTO_GRID_POINTS: usize = 50;
/// Half-width of the automatic grid in standard errors.
pub const AUTO_GRID_HALF_WIDTH: f64 = 4.0;

/// MLE report with the model's scalar features evaluated at the MLE.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    #[serde(flatten)]
    pub fit: Fit,
    pub features: BTreeMap<String, f64>,
}

pub(crate) fn write_with(
    dir: &Path,
    name: &str,
    manifest: &mut RunManifest,
    f: impl FnOnce(&mut BufWriter<File>) -> imstitch_core::Result<()>,
) -> CliResult<()> {
    let path = dir.join(name);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(imstitch_core::Error::from)?;
    }
    let wrap = |source| CliError::File {
        path: path.clone(),
        source,
    };
    let mut w = BufWriter::new(File::create(&path).map_err(|e| wrap(e.into()))?);
    f(&mut w).map_err(wrap)?;
    w.flush().map_err(|e| wrap(e.into()))?;
    manifest.output(name);
    Ok(())
}

pub(crate) fn write_json<T: Serialize>(
    dir: &Path,
    name: &str,
    manifest: &mut RunManifest,
    value: &T,
) -> CliResult<()> {
    write_with(dir, name, manifest, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)?;
        Ok(())
    })
}

fn open(dir: &Path, name: &str) -> CliResult<BufReader<File>> {
    let path = dir.join(name);
    File::open(&path)
        .map(BufReader::new)
        .map_err(|e| CliError::File {
            path,
            source: e.into(),
        })
}

pub(crate) fn read_table(dir: &Path) -> CliResult<CalibrationTable> {
    let mut s = String::new();
    std::io::Read::read_to_string(&mut open(dir, CALIBRATION_FILE)?, &mut s)
        .map_err(imstitch_core::Error::from)?;
    CalibrationTable::from_json(&s).map_err(|source| CliError::File {
        path: dir.join(CALIBRATION_FILE),
        source,
    })
}

pub(crate) fn read_samples(dir: &Path, seed: u64) -> CliResult<WeightedSampleSet> {
    WeightedSampleSet::read_csv(open(dir, SAMPLES_FILE)?, seed).map_err(|source| CliError::File {
        path: dir.join(SAMPLES_FILE),
        source,
    })
}

/// Regular grid on the working scale spanning `psi_hat +- half_width`
/// standard errors per coordinate, returned on the natural scale.
pub fn auto_grid(fit: &Fit, half_width: f64, count: usize) -> imstitch_core::Result<Vec<Vec<f64>>> {
    let cov = fit.info_matrix().try_inverse().ok_or_else(|| {
        imstitch_core::Error::ModelViolation("observed information is singular".into())
    })?;
    let spec: Vec<(f64, f64, usize)> = (0..fit.dim())
        .map(|j| {
            let se = cov[(j, j)].sqrt();
            (
                fit.psi_hat[j] - half_width * se,
                fit.psi_hat[j] + half_width * se,
                count,
            )
        })
        .collect();
    Ok(regular_grid(&spec)?
        .into_iter()
        .map(|p| fit.scale.from_working(&p))
        .collect())
}

fn joint_grid(cfg: &RunConfig, fit: &Fit) -> CliResult<Vec<Vec<f64>>> {
    match &cfg.grid_spec {
        Some(g) => {
            if g.0.len() != fit.dim() {
                return Err(CliError::usage(format!(
                    "--grid-spec has {} axes but the model has {} parameters",
                    g.0.len(),
                    fit.dim()
                )));
            }
            Ok(regular_grid(&g.0)?)
        }
        None => Ok(auto_grid(fit, AUTO_GRID_HALF_WIDTH, AUTO_GRID_POINTS)?),
    }
}

fn feature_grid(cfg: &RunConfig) -> CliResult<Option<Vec<f64>>> {
    match &cfg.grid_spec {
        Some(g) if g.0.len() == 1 => Ok(Some(
            regular_grid(&g.0)?.into_iter().map(|p| p[0]).collect(),
        )),
        Some(_) => Err(CliError::usage(
            "a feature grid needs a single min:max:count axis",
        )),
        None => Ok(None),
    }
}

fn check_feature(cfg: &RunConfig, feature: FeatureMap, d: usize) -> CliResult<()> {
    let ok = match feature {
        FeatureMap::Coordinate(j) => j < d,
        f => cfg.model.features().contains(&f),
    };
    if ok {
        Ok(())
    } else {
        Err(CliError::usage(format!(
            "feature {} does not apply to model {}",
            feature.name(),
            cfg.model
        )))
    }
}

pub fn fit_report<M: ParametricModel>(
    model: &M,
    z: &M::Data,
    cfg: &RunConfig,
) -> CliResult<FitReport> {
    let fit = fit(model, z)?;
    let mut features = BTreeMap::new();
    for f in cfg.model.features().iter().chain(cfg.feature.iter()) {
        check_feature(cfg, *f, fit.dim())?;
        features.insert(f.name(), f.eval(&fit.theta_hat));
    }
    Ok(FitReport { fit, features })
}

pub fn calibration_config(cfg: &RunConfig) -> CalibrationConfig {
    let base = CalibrationConfig::default();
    CalibrationConfig {
        grid_size: cfg.alpha_grid,
        inner_replicates: cfg.replicates_or(base.inner_replicates),
        seed: cfg.seed,
        ..base
    }
}

pub(crate) fn cmd_fit(cfg: &RunConfig, data: &Dataset, m: &mut RunManifest) -> CliResult<()> {
    let report = m.time("fit", || {
        with_model!(data, |model, z| fit_report(model, z, cfg))
    })?;
    m.note("theta_hat", &report.fit.theta_hat);
    write_json(&cfg.out, FIT_FILE, m, &report)
}

fn contour_stage<M: ParametricModel>(
    model: &M,
    z: &M::Data,
    cfg: &RunConfig,
    m: &mut RunManifest,
) -> CliResult<()> {
    let ocfg = OracleConfig::new(cfg.replicates_or(CONTOUR_REPLICATES), cfg.seed);
    if let Some(feature) = cfg.feature {
        let f = fit(model, z)?;
        check_feature(cfg, feature, f.dim())?;
        let values = match feature_grid(cfg)? {
            Some(v) => v,
            None => {
                let pts = auto_grid(&f, AUTO_GRID_HALF_WIDTH, AUTO_GRID_POINTS)?;
                let fv: Vec<f64> = pts.iter().map(|p| feature.eval(p)).collect();
                let (lo, hi) = fv
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
                        (a.min(v), b.max(v))
                    });
                regular_grid(&[(lo, hi, AUTO_GRID_POINTS)])?
                    .into_iter()
                    .map(|p| p[0])
                    .collect()
            }
        };
        let est = m.time("profile-oracle", || {
            ProfileOracle::new(model, z, feature, ocfg).and_then(|o| o.contour_values(&values))
        })?;
        let table = ContourTable::new(
            vec!["feature".into()],
            values.iter().map(|&v| vec![v]).collect(),
            est.iter().map(|e| e.value).collect(),
        )?;
        m.note("feature", feature.name());
        return write_with(&cfg.out, CONTOUR_FILE, m, |w| table.write_csv(w));
    }
    let f = fit(model, z)?;
    let grid = joint_grid(cfg, &f)?;
    let oracle = NaiveOracle::new(model, z, ocfg)?;
    let mut table = m.time("oracle", || oracle.contour_grid(&grid))?;
    table.meta.data = cfg
        .data
        .as_ref()
        .map_or_else(|| "fixture".to_string(), |p| p.display().to_string());
    m.note("grid_points", table.len());
    m.note("failed_points", table.meta.failures.len());
    write_with(&cfg.out, CONTOUR_FILE, m, |w| table.write_csv(w))
}

pub(crate) fn cmd_contour(cfg: &RunConfig, data: &Dataset, m: &mut RunManifest) -> CliResult<()> {
    with_model!(data, |model, z| contour_stage(model, z, cfg, m))
}

fn calibrate_stage<M: ParametricModel>(
    model: &M,
    z: &M::Data,
    cfg: &RunConfig,
    m: &mut RunManifest,
) -> CliResult<()> {
    let f = m.time("fit", || fit(model, z))?;
    let ccfg = calibration_config(cfg);
    let table = m.time("calibrate", || build_calibration_table(model, z, &f, &ccfg))?;
    let interpolated = table.diagnostics.iter().filter(|d| d.interpolated).count();
    let worst = table
        .diagnostics
        .iter()
        .map(|d| d.residual.abs())
        .fold(0.0, f64::max);
    m.note("levels", table.alpha_grid.len());
    m.note("interpolated_levels", interpolated);
    m.note("max_abs_residual", worst);
    write_json(&cfg.out, CALIBRATION_FILE, m, &table)
}

pub(crate) fn cmd_calibrate(cfg: &RunConfig, data: &Dataset, m: &mut RunManifest) -> CliResult<()> {
    with_model!(data, |model, z| calibrate_stage(model, z, cfg, m))
}

pub(crate) fn cmd_sample(cfg: &RunConfig, m: &mut RunManifest) -> CliResult<()> {
    let table = read_table(&cfg.out)?;
    if table.model != cfg.model.as_str() {
        return Err(CliError::usage(format!(
            "calibration table is for model {}, not {}",
            table.model, cfg.model
        )));
    }
    let samples = m.time("sample", || {
        StitchSampler::new(table).and_then(|s| s.sample(cfg.draws, cfg.seed))
    })?;
    m.note("draws", samples.len());
    write_with(&cfg.out, SAMPLES_FILE, m, |w| samples.write_csv(w))
}

/// Ranking over the joint parameter, fitted to the draws where needed.
pub fn joint_ranking<M: ParametricModel + Clone + 'static>(
    model: &M,
    z: &M::Data,
    kind: RankingKind,
    samples: &WeightedSampleSet,
) -> CliResult<Box<dyn RankingFunction>> {
    let scale = model.scale();
    let working: Vec<Vec<f64>> = samples.working().map(<[f64]>::to_vec).collect();
    Ok(match kind {
        RankingKind::Likelihood => Box::new(likelihood_ranking(model, z)),
        RankingKind::GaussianDensity => Box::new(gaussian_density_ranking(&working, &scale)?),
        RankingKind::KernelDensity => Box::new(kde_ranking(&working, &scale)?),
        RankingKind::Custom => return Err(CliError::usage("custom rankings are library-only")),
    })
}

/// Ranking over the values of a scalar feature.
pub fn feature_ranking<M: ParametricModel + Clone + 'static>(
    model: &M,
    z: &M::Data,
    feature: FeatureMap,
    kind: RankingKind,
    values: &[Vec<f64>],
) -> CliResult<Box<dyn RankingFunction>> {
    let id = WorkingScale::identity(1);
    Ok(match kind {
        RankingKind::Likelihood => Box::new(profile_ranking(model, z, feature)?),
        RankingKind::GaussianDensity => Box::new(gaussian_density_ranking(values, &id)?),
        RankingKind::KernelDensity => Box::new(kde_ranking(values, &id)?),
        RankingKind::Custom => return Err(CliError::usage("custom rankings are library-only")),
    })
}

fn possibilize_stage<M: ParametricModel + Clone + 'static>(
    model: &M,
    z: &M::Data,
    cfg: &RunConfig,
    m: &mut RunManifest,
) -> CliResult<()> {
    let samples = read_samples(&cfg.out, cfg.seed)?;
    if samples.names != model.param_names() {
        return Err(CliError::usage(format!(
            "sample columns {:?} do not match model {} parameters {:?}",
            samples.names,
            cfg.model,
            model.param_names()
        )));
    }
    if let Some(feature) = cfg.feature {
        check_feature(cfg, feature, samples.dim())?;
        let kind = cfg.ranking.unwrap_or(RankingKind::KernelDensity);
        let values: Vec<Vec<f64>> = feature_values(&samples, feature)?
            .into_iter()
            .map(|v| vec![v])
            .collect();
        let contour = m.time("possibilize", || -> CliResult<_> {
            let r = feature_ranking(model, z, feature, kind, &values)?;
            Ok(StitchedContour::from_points(values, r)?)
        })?;
        match feature_grid(cfg)? {
            Some(grid) => {
                let table = ContourTable::from_contour(
                    &contour,
                    vec!["feature".into()],
                    grid.into_iter().map(|v| vec![v]).collect(),
                )?;
                write_with(&cfg.out, MARGINAL_FILE, m, |w| table.write_csv(w))?;
            }
            None => write_with(&cfg.out, MARGINAL_FILE, m, |w| {
                write_marginal_csv(&contour, 200, w)
            })?,
        }
        let (lo, hi) = confidence_interval(&contour, cfg.alpha)?;
        let ci = ConfidenceInterval {
            feature: feature.name(),
            alpha: cfg.alpha,
            lo,
            hi,
        };
        m.note("ranking", kind.to_string());
        m.note("interval", [lo, hi]);
        return write_json(&cfg.out, INTERVAL_FILE, m, &ci);
    }
    let kind = cfg.ranking.unwrap_or(RankingKind::GaussianDensity);
    let f = fit(model, z)?;
    let grid = joint_grid(cfg, &f)?;
    let table = m.time("possibilize", || -> CliResult<_> {
        let r = joint_ranking(model, z, kind, &samples)?;
        let contour =
            StitchedContour::from_points(samples.natural().map(<[f64]>::to_vec).collect(), r)?;
        Ok(ContourTable::from_contour(
            &contour,
            model.param_names(),
            grid,
        )?)
    })?;
    m.note("ranking", kind.to_string());
    write_with(&cfg.out, STITCHED_FILE, m, |w| table.write_csv(w))
}

pub(crate) fn cmd_possibilize(
    cfg: &RunConfig,
    data: &Dataset,
    m: &mut RunManifest,
) -> CliResult<()> {
    with_model!(data, |model, z| possibilize_stage(model, z, cfg, m))
}

fn validate_stage<M: ParametricModel>(
    model: &M,
    z: &M::Data,
    cfg: &RunConfig,
    m: &mut RunManifest,
) -> CliResult<ValidityReport> {
    let truth = cfg
        .truth
        .as_ref()
        .ok_or_else(|| CliError::usage("validate needs --truth"))?;
    if truth.len() != model.dim() {
        return Err(CliError::usage(format!(
            "--truth has {} values but model {} has {} parameters",
            truth.len(),
            cfg.model,
            model.dim()
        )));
    }
    let ocfg = OracleConfig::new(cfg.replicates_or(VALIDITY_REPLICATES), cfg.seed);
    let report = m.time("validate", || {
        validity_rates(model, truth, z, cfg.replications, &cfg.alphas, &ocfg)
    })?;
    m.note("degraded", report.degraded);
    m.note("failures", report.failures);
    m.note("pass", report.rows.iter().all(|r| r.pass));
    Ok(report)
}

pub(crate) fn cmd_validate(cfg: &RunConfig, data: &Dataset, m: &mut RunManifest) -> CliResult<()> {
    let report = with_model!(data, |model, z| validate_stage(model, z, cfg, m))?;
    write_json(&cfg.out, VALIDITY_FILE, m, &report)
}
