//! Argument parsing.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use imstitch_core::possibilize::RankingKind;
use imstitch_core::FeatureMap;

use crate::config::{GridSpec, ModelId, RunConfig};
use crate::error::{CliError, CliResult};
use crate::figures::FigureId;
use crate::Command;

#[derive(Debug, Parser)]
#[command(
    name = "imstitch",
    version,
    about = "Stitched Monte Carlo approximation of possibilistic inferential models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,

    #[command(flatten)]
    pub args: CommonArgs,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Maximum likelihood fit and observed information.
    Fit,
    /// Brute-force Monte Carlo contour on a grid.
    Contour,
    /// Calibrate the variational index over the level grid.
    Calibrate,
    /// Draw from the stitched sampler (needs calibration.json).
    Sample,
    /// Stitched joint or marginal contour (needs samples.csv).
    Possibilize,
    /// Repeated-sampling validity check at a known truth.
    Validate,
    /// Emit the CSV data behind a figure.
    Reproduce {
        #[arg(value_enum)]
        figure: FigureId,
    },
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long, global = true, value_enum, default_value = "corr")]
    pub model: ModelId,
    /// Dataset CSV; the bundled fixture when omitted.
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
    /// RNG seed (required).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Number of calibration levels.
    #[arg(long, global = true, default_value_t = 100)]
    pub alpha_grid: usize,
    /// Draws from the stitched sampler.
    #[arg(long, global = true, default_value_t = 10_000)]
    pub draws: usize,
    /// Oracle replicates.
    #[arg(long, global = true)]
    pub replicates: Option<usize>,
    /// likelihood, gauss or kde.
    #[arg(long, global = true)]
    pub ranking: Option<RankingKind>,
    /// gamma-mean, ld50, weibull-mean or coord<j>.
    #[arg(long, global = true)]
    pub feature: Option<FeatureMap>,
    /// min:max:count[,min:max:count] on the natural scale.
    #[arg(long, global = true)]
    pub grid_spec: Option<GridSpec>,
    /// Level of the reported interval.
    #[arg(long, global = true, default_value_t = 0.1)]
    pub alpha: f64,
    /// True parameter for validate, comma separated.
    #[arg(
        long,
        global = true,
        value_delimiter = ',',
        allow_negative_numbers = true
    )]
    pub truth: Option<Vec<f64>>,
    /// Simulated datasets for validate.
    #[arg(long, global = true, default_value_t = 500)]
    pub replications: usize,
    /// Levels checked by validate, comma separated.
    #[arg(
        long,
        global = true,
        value_delimiter = ',',
        default_value = "0.05,0.1,0.2"
    )]
    pub alphas: Vec<f64>,
    /// Worker threads (default: all logical cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
}

impl Cli {
    pub fn into_parts(self) -> CliResult<(Command, RunConfig)> {
        let cmd = match self.command {
            Cmd::Fit => Command::Fit,
            Cmd::Contour => Command::Contour,
            Cmd::Calibrate => Command::Calibrate,
            Cmd::Sample => Command::Sample,
            Cmd::Possibilize => Command::Possibilize,
            Cmd::Validate => Command::Validate,
            Cmd::Reproduce { figure } => Command::Reproduce(figure),
        };
        let a = self.args;
        let seed = a
            .seed
            .ok_or_else(|| CliError::usage("--seed is required"))?;
        let cfg = RunConfig {
            model: a.model,
            data: a.data,
            seed,
            alpha_grid: a.alpha_grid,
            draws: a.draws,
            replicates: a.replicates,
            ranking: a.ranking,
            feature: a.feature,
            grid_spec: a.grid_spec,
            alpha: a.alpha,
            truth: a.truth,
            replications: a.replications,
            alphas: a.alphas,
            threads: a.threads,
            out: a.out,
        };
        cfg.validate()?;
        Ok((cmd, cfg))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> CliResult<(Command, RunConfig)> {
        Cli::try_parse_from(std::iter::once("imstitch").chain(args.iter().copied()))
            .map_err(|e| CliError::usage(e.to_string()))?
            .into_parts()
    }

    #[test]
    fn full_flag_set() {
        let (cmd, cfg) = parse(&[
            "possibilize",
            "--model",
            "weibull-cens",
            "--seed",
            "3",
            "--ranking",
            "kde",
            "--feature",
            "weibull-mean",
            "--grid-spec",
            "6:8:20",
            "--out",
            "o",
        ])
        .unwrap();
        assert_eq!(cmd, Command::Possibilize);
        assert_eq!(cfg.model, ModelId::WeibullCens);
        assert_eq!(cfg.ranking, Some(RankingKind::KernelDensity));
        assert_eq!(cfg.feature, Some(FeatureMap::WeibullLogMean));
        assert_eq!(cfg.grid_spec, Some(GridSpec(vec![(6.0, 8.0, 20)])));
    }

    #[test]
    fn seed_is_mandatory() {
        assert_eq!(
            parse(&["fit", "--model", "gamma"]).unwrap_err().exit_code(),
            2
        );
    }

    #[test]
    fn truth_and_figures() {
        let (_, cfg) = parse(&["validate", "--seed", "1", "--truth", "-0.5"]).unwrap();
        assert_eq!(cfg.truth, Some(vec![-0.5]));
        let (cmd, _) = parse(&["reproduce", "fig6", "--seed", "1"]).unwrap();
        assert_eq!(cmd, Command::Reproduce(FigureId::Fig6));
        assert!(parse(&["reproduce", "fig9", "--seed", "1"]).is_err());
    }
}
