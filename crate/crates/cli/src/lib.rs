//! Command-line harness: dataset ingestion, the fit, contour, calibrate,
//! sample, possibilize and validate stages, and figure reproduction.
//!
//! Stages communicate through files in the output directory so the
//! expensive ones can be cached. Every command also writes
//! `<command>.manifest.json` describing the run.

pub mod cli;
pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod figures;
pub mod manifest;

pub use config::{GridSpec, ModelId, RunConfig};
pub use error::{CliError, CliResult};
pub use figures::FigureId;
pub use manifest::RunManifest;

use dataset::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Fit,
    Contour,
    Calibrate,
    Sample,
    Possibilize,
    Validate,
    Reproduce(FigureId),
}

impl Command {
    pub fn name(self) -> String {
        match self {
            Command::Fit => "fit".into(),
            Command::Contour => "contour".into(),
            Command::Calibrate => "calibrate".into(),
            Command::Sample => "sample".into(),
            Command::Possibilize => "possibilize".into(),
            Command::Validate => "validate".into(),
            Command::Reproduce(f) => format!("reproduce-{f}"),
        }
    }
}

/// Run one command and write its manifest.
pub fn run(cmd: Command, cfg: &RunConfig) -> CliResult<RunManifest> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out).map_err(imstitch_core::Error::from)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::usage(format!("cannot start worker pool: {e}")))?;
    let mut m = RunManifest::new(&cmd.name(), cfg);
    pool.install(|| -> CliResult<()> {
        let load = || Dataset::load(cfg.model, cfg.data.as_deref());
        match cmd {
            Command::Fit => commands::cmd_fit(cfg, &load()?, &mut m),
            Command::Contour => commands::cmd_contour(cfg, &load()?, &mut m),
            Command::Calibrate => commands::cmd_calibrate(cfg, &load()?, &mut m),
            Command::Sample => commands::cmd_sample(cfg, &mut m),
            Command::Possibilize => commands::cmd_possibilize(cfg, &load()?, &mut m),
            Command::Validate => commands::cmd_validate(cfg, &load()?, &mut m),
            Command::Reproduce(f) => figures::reproduce(f, cfg, &mut m),
        }
    })?;
    m.check_outputs(&cfg.out)?;
    let name = m.file_name();
    let mut sink = RunManifest::new(&cmd.name(), cfg);
    commands::write_json(&cfg.out, &name, &mut sink, &m)?;
    Ok(m)
}
