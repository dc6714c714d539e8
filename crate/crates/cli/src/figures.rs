//! CSV data behind each figure of the analyses. Figures always use the
//! bundled fixtures; `--data` is ignored here.

use std::fmt;

use clap::ValueEnum;
use imstitch_core::models::{
    CorrelationModel, GammaModel, LogisticModel, ParametricModel, WeibullCensoredModel,
};
use imstitch_core::oracle::{regular_grid, ProfileOracle};
use imstitch_core::possibilize::{
    confidence_interval, feature_values, ConfidenceInterval, RankingKind,
};
use imstitch_core::stitch::build_calibration_table;
use imstitch_core::{
    fit, fixtures, CalibrationConfig, FeatureMap, Fit, GaussianPossibility, NaiveOracle,
    OracleConfig, PossibilityContour, StitchSampler, StitchedContour, WeightedSampleSet,
};
use serde::{Deserialize, Serialize};

use crate::commands::{
    auto_grid, feature_ranking, joint_ranking, write_json, write_with, AUTO_GRID_POINTS,
};
use crate::config::RunConfig;
use crate::error::CliResult;
use crate::manifest::RunManifest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FigureId {
    /// Correlation: oracle contour against three stitched rankings.
    Fig1,
    /// Gamma: draws from the stitched sampler.
    Fig2,
    /// Gamma: joint contours and the mean marginal, direct and indirect.
    Fig3,
    /// Logistic: data and fitted dose-response curve.
    Fig4,
    /// Logistic: draws, joint contour and LD50 marginal.
    Fig5,
    /// Censored Weibull: draws, stitched and asymptotic joint contours.
    Fig6,
    /// Censored Weibull: log-mean draws, marginal contour and interval.
    Fig7,
}

impl fmt::Display for FigureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = self.to_possible_value().expect("no skipped variants");
        f.write_str(v.get_name())
    }
}

/// Oracle replicates for the correlation figure.
const FIG1_REPLICATES: usize = 5000;
/// Oracle replicates for the gamma figure.
const FIG3_REPLICATES: usize = 1000;

fn write_rows(
    m: &mut RunManifest,
    cfg: &RunConfig,
    name: String,
    header: Vec<String>,
    rows: impl IntoIterator<Item = Vec<f64>>,
) -> CliResult<()> {
    write_with(&cfg.out, &name, m, |w| {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&header)?;
        for r in rows {
            out.write_record(r.iter().map(f64::to_string))?;
        }
        out.flush()?;
        Ok(())
    })
}

/// Fit, calibrate and sample.
fn pipeline<M: ParametricModel>(
    model: &M,
    z: &M::Data,
    cfg: &RunConfig,
    m: &mut RunManifest,
) -> CliResult<(Fit, WeightedSampleSet)> {
    let f = m.time("fit", || fit(model, z))?;
    let ccfg = CalibrationConfig {
        grid_size: cfg.alpha_grid,
        seed: cfg.seed,
        ..CalibrationConfig::default()
    };
    let table = m.time("calibrate", || build_calibration_table(model, z, &f, &ccfg))?;
    let s = m.time("sample", || {
        StitchSampler::new(table).and_then(|s| s.sample(cfg.draws, cfg.seed))
    })?;
    Ok((f, s))
}

fn samples_csv(
    fig: FigureId,
    s: &WeightedSampleSet,
    cfg: &RunConfig,
    m: &mut RunManifest,
) -> CliResult<()> {
    write_with(&cfg.out, &format!("{fig}/samples.csv"), m, |w| {
        s.write_csv(w)
    })
}

fn joint_contours<M: ParametricModel + Clone + 'static>(
    model: &M,
    z: &M::Data,
    s: &WeightedSampleSet,
    kinds: &[RankingKind],
    grid: &[Vec<f64>],
) -> CliResult<Vec<Vec<f64>>> {
    let pts: Vec<Vec<f64>> = s.natural().map(<[f64]>::to_vec).collect();
    let mut cols = Vec::new();
    for &k in kinds {
        let c = StitchedContour::from_points(pts.clone(), joint_ranking(model, z, k, s)?)?;
        cols.push(grid.iter().map(|p| c.eval(p)).collect());
    }
    Ok(cols)
}

fn rows_of(grid: &[Vec<f64>], cols: &[Vec<f64>]) -> Vec<Vec<f64>> {
    grid.iter()
        .enumerate()
        .map(|(i, p)| p.iter().copied().chain(cols.iter().map(|c| c[i])).collect())
        .collect()
}

fn header(model: &impl ParametricModel, extra: &[&str]) -> Vec<String> {
    model
        .param_names()
        .into_iter()
        .chain(extra.iter().map(|s| s.to_string()))
        .collect()
}

/// Feature marginal from the draws, written to `<fig>/marginal.csv`,
/// plus its interval at `cfg.alpha`.
fn marginal<M: ParametricModel + Clone + 'static>(
    fig: FigureId,
    (model, z): (&M, &M::Data),
    (feature, default_kind): (FeatureMap, RankingKind),
    s: &WeightedSampleSet,
    cfg: &RunConfig,
    m: &mut RunManifest,
) -> CliResult<ConfidenceInterval> {
    let kind = cfg.ranking.unwrap_or(default_kind);
    let values: Vec<Vec<f64>> = feature_values(s, feature)?
        .into_iter()
        .map(|v| vec![v])
        .collect();
    let c = StitchedContour::from_points(
        values.clone(),
        feature_ranking(model, z, feature, kind, &values)?,
    )?;
    write_with(&cfg.out, &format!("{fig}/marginal.csv"), m, |w| {
        imstitch_core::possibilize::write_marginal_csv(&c, 200, w)
    })?;
    let (lo, hi) = confidence_interval(&c, cfg.alpha)?;
    Ok(ConfidenceInterval {
        feature: feature.name(),
        alpha: cfg.alpha,
        lo,
        hi,
    })
}

fn fig1(cfg: &RunConfig, m: &mut RunManifest) -> CliResult<()> {
    let (model, z) = (CorrelationModel, fixtures::law_school()?);
    let (f, s) = pipeline(&model, &z, cfg, m)?;
    samples_csv(FigureId::Fig1, &s, cfg, m)?;
    let grid = auto_grid(&f, 4.0, AUTO_GRID_POINTS)?;
    let oracle = NaiveOracle::new(
        &model,
        &z,
        OracleConfig::new(cfg.replicates_or(FIG1_REPLICATES), cfg.seed),
    )?;
    let table = m.time("oracle", || oracle.contour_grid(&grid))?;
    let kinds = [
        RankingKind::Likelihood,
        RankingKind::GaussianDensity,
        RankingKind::KernelDensity,
    ];
    let mut cols = vec![table.values];
    cols.extend(joint_contours(&model, &z, &s, &kinds, &grid)?);
    let h = header(&model, &["oracle", "likelihood", "gauss", "kde"]);
    write_rows(m, cfg, "fig1/contours.csv".into(), h, rows_of(&grid, &cols))
}

fn fig2(cfg: &RunConfig, m: &mut RunManifest) -> CliResult<()> {
    let (_, s) = pipeline(&GammaModel, &fixtures::rats()?, cfg, m)?;
    samples_csv(FigureId::Fig2, &s, cfg, m)
}

fn fig3(cfg: &RunConfig, m: &mut RunManifest) -> CliResult<()> {
    let (model, z) = (GammaModel, fixtures::rats()?);
    let (f, s) = pipeline(&model, &z, cfg, m)?;
    let ocfg = OracleConfig::new(cfg.replicates_or(FIG3_REPLICATES), cfg.seed);
    let grid = auto_grid(&f, 4.0, AUTO_GRID_POINTS)?;
    let oracle = NaiveOracle::new(&model, &z, ocfg)?;
    let table = m.time("oracle", || oracle.contour_grid(&grid))?;
    let mut cols = vec![table.values];
    cols.extend(joint_contours(
        &model,
        &z,
        &s,
        &[RankingKind::GaussianDensity, RankingKind::Likelihood],
        &grid,
    )?);
    write_rows(
        m,
        cfg,
        "fig3/joint.csv".into(),
        header(&model, &["oracle", "gauss", "likelihood"]),
        rows_of(&grid, &cols),
    )?;

    let feature = FeatureMap::GammaMean;
    let mut fv = feature_values(&s, feature)?;
    fv.sort_by(f64::total_cmp);
    let q = |p: f64| fv[((fv.len() - 1) as f64 * p).round() as usize];
    let values: Vec<f64> = regular_grid(&[(q(0.005), q(0.995), AUTO_GRID_POINTS)])?
        .into_iter()
        .map(|p| p[0])
        .collect();
    let direct = m.time("profile-oracle", || {
        ProfileOracle::new(&model, &z, feature, ocfg).and_then(|o| o.contour_values(&values))
    })?;
    let pts: Vec<Vec<f64>> = fv.iter().map(|&v| vec![v]).collect();
    let indirect = StitchedContour::from_points(
        pts.clone(),
        feature_ranking(&model, &z, feature, RankingKind::KernelDensity, &pts)?,
    )?;
    let rows = values
        .iter()
        .zip(&direct)
        .map(|(&v, e)| vec![v, e.value, indirect.eval(&[v])]);
    write_rows(
        m,
        cfg,
        "fig3/mean.csv".into(),
        vec!["mean".into(), "direct".into(), "indirect".into()],
        rows,
    )
}

#[derive(Serialize)]
struct LogisticSummary {
    theta_hat: Vec<f64>,
    ld50: f64,
}

fn fig4(cfg: &RunConfig, m: &mut RunManifest) -> CliResult<()> {
    let z = fixtures::chloracetic()?;
    let f = m.time("fit", || fit(&LogisticModel, &z))?;
    let rows = z.x.iter().zip(&z.y).map(|(&x, &y)| vec![x, y]);
    write_rows(
        m,
        cfg,
        "fig4/data.csv".into(),
        vec!["x".into(), "y".into()],
        rows,
    )?;
    let (lo, hi) =
        z.x.iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
                (a.min(x), b.max(x))
            });
    let (b0, b1) = (f.theta_hat[0], f.theta_hat[1]);
    let curve = (0..200).map(|i| {
        let x = lo + (hi - lo) * i as f64 / 199.0;
        vec![x, 1.0 / (1.0 + (-(b0 + b1 * x)).exp())]
    });
    write_rows(
        m,
        cfg,
        "fig4/curve.csv".into(),
        vec!["dose".into(), "prob".into()],
        curve,
    )?;
    let summary = LogisticSummary {
        ld50: LogisticModel::ld50(&f.theta_hat),
        theta_hat: f.theta_hat,
    };
    write_json(&cfg.out, "fig4/summary.json", m, &summary)
}

fn fig5(cfg: &RunConfig, m: &mut RunManifest) -> CliResult<()> {
    let (model, z) = (LogisticModel, fixtures::chloracetic()?);
    let (f, s) = pipeline(&model, &z, cfg, m)?;
    samples_csv(FigureId::Fig5, &s, cfg, m)?;
    let grid = auto_grid(&f, 4.0, AUTO_GRID_POINTS)?;
    let cols = joint_contours(&model, &z, &s, &[RankingKind::GaussianDensity], &grid)?;
    write_rows(
        m,
        cfg,
        "fig5/joint.csv".into(),
        header(&model, &["gauss"]),
        rows_of(&grid, &cols),
    )?;
    let ci = marginal(
        FigureId::Fig5,
        (&model, &z),
        (FeatureMap::Ld50, RankingKind::GaussianDensity),
        &s,
        cfg,
        m,
    )?;
    write_json(&cfg.out, "fig5/interval.json", m, &ci)
}

fn fig6(cfg: &RunConfig, m: &mut RunManifest) -> CliResult<()> {
    let z = fixtures::ovarian()?;
    let model = WeibullCensoredModel::from_data(&z)?;
    let (f, s) = pipeline(&model, &z, cfg, m)?;
    samples_csv(FigureId::Fig6, &s, cfg, m)?;
    let grid = auto_grid(&f, 5.0, AUTO_GRID_POINTS)?;
    let mut cols = joint_contours(&model, &z, &s, &[RankingKind::GaussianDensity], &grid)?;
    let cov = f.info_matrix().try_inverse().ok_or_else(|| {
        imstitch_core::Error::ModelViolation("observed information is singular".into())
    })?;
    let asym = GaussianPossibility::new(f.psi_hat.clone(), cov)?;
    cols.push(
        grid.iter()
            .map(|p| asym.eval(&f.scale.to_working(p)))
            .collect(),
    );
    write_rows(
        m,
        cfg,
        "fig6/joint.csv".into(),
        header(&model, &["gauss", "asymptotic"]),
        rows_of(&grid, &cols),
    )
}

#[derive(Serialize)]
struct MeanInterval {
    #[serde(flatten)]
    log_scale: ConfidenceInterval,
    mean_lo: f64,
    mean_hi: f64,
}

fn fig7(cfg: &RunConfig, m: &mut RunManifest) -> CliResult<()> {
    let z = fixtures::ovarian()?;
    let model = WeibullCensoredModel::from_data(&z)?;
    let (_, s) = pipeline(&model, &z, cfg, m)?;
    let feature = FeatureMap::WeibullLogMean;
    let vals = feature_values(&s, feature)?;
    write_rows(
        m,
        cfg,
        "fig7/log_mean.csv".into(),
        vec!["log_mean".into()],
        vals.into_iter().map(|v| vec![v]),
    )?;
    let ci = marginal(
        FigureId::Fig7,
        (&model, &z),
        (feature, RankingKind::KernelDensity),
        &s,
        cfg,
        m,
    )?;
    m.note("interval", [ci.lo, ci.hi]);
    let out = MeanInterval {
        mean_lo: ci.lo.exp(),
        mean_hi: ci.hi.exp(),
        log_scale: ci,
    };
    write_json(&cfg.out, "fig7/interval.json", m, &out)
}

pub(crate) fn reproduce(fig: FigureId, cfg: &RunConfig, m: &mut RunManifest) -> CliResult<()> {
    match fig {
        FigureId::Fig1 => fig1(cfg, m),
        FigureId::Fig2 => fig2(cfg, m),
        FigureId::Fig3 => fig3(cfg, m),
        FigureId::Fig4 => fig4(cfg, m),
        FigureId::Fig5 => fig5(cfg, m),
        FigureId::Fig6 => fig6(cfg, m),
        FigureId::Fig7 => fig7(cfg, m),
    }
}
