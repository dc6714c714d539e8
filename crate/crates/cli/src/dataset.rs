//! Dataset ingestion and dispatch over the model set.

use std::fs::File;
use std::path::Path;

use imstitch_core::fixtures;
use imstitch_core::models::{read_censored, read_pairs, read_positive, CensoredObs, Paired};

use crate::config::ModelId;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone)]
pub enum Dataset {
    Corr(Paired),
    Gamma(Vec<f64>),
    Logistic(Paired),
    WeibullCens(CensoredObs),
}

impl Dataset {
    /// Read `path`, or the bundled fixture for the model.
    pub fn load(model: ModelId, path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(match model {
                ModelId::Corr => Dataset::Corr(fixtures::law_school()?),
                ModelId::Gamma => Dataset::Gamma(fixtures::rats()?),
                ModelId::Logistic => Dataset::Logistic(fixtures::chloracetic()?),
                ModelId::WeibullCens => Dataset::WeibullCens(fixtures::ovarian()?),
            });
        };
        let wrap = |source| CliError::File {
            path: path.to_path_buf(),
            source,
        };
        let f = File::open(path).map_err(|e| wrap(e.into()))?;
        Ok(match model {
            ModelId::Corr => Dataset::Corr(read_pairs(f).map_err(wrap)?),
            ModelId::Gamma => Dataset::Gamma(read_positive(f).map_err(wrap)?),
            ModelId::Logistic => Dataset::Logistic(read_pairs(f).map_err(wrap)?),
            ModelId::WeibullCens => Dataset::WeibullCens(read_censored(f).map_err(wrap)?),
        })
    }
}

/// Run `$body` with `$m` bound to a model reference and `$z` to its data.
#[macro_export]
macro_rules! with_model {
    ($ds:expr, |$m:ident, $z:ident| $body:expr) => {
        match $ds {
            $crate::dataset::Dataset::Corr($z) => {
                let $m = &imstitch_core::models::CorrelationModel;
                $body
            }
            $crate::dataset::Dataset::Gamma($z) => {
                let $m = &imstitch_core::models::GammaModel;
                $body
            }
            $crate::dataset::Dataset::Logistic($z) => {
                let $m = &imstitch_core::models::LogisticModel;
                $body
            }
            $crate::dataset::Dataset::WeibullCens($z) => {
                let model = imstitch_core::models::WeibullCensoredModel::from_data($z)?;
                let $m = &model;
                $body
            }
        }
    };
}
