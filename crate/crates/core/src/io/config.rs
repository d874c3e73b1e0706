//! Run configuration files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ToyConfig;
use crate::barycenter::BarycenterConfig;
use crate::error::{Error, Result};
use crate::gmm::EmConfig;
use crate::msda::DadilConfig;

/// Every tunable of a pipeline run, mirroring the library config types.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub em: EmConfig,
    pub barycenter: BarycenterConfig,
    pub dadil: DadilConfig,
    pub toy: ToyConfig,
    pub data: Option<PathBuf>,
    pub sources: Vec<PathBuf>,
    pub target: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

impl RunConfig {
    /// Checks the module configs and that every referenced input exists.
    pub fn validate(&self) -> Result<()> {
        self.em.validate()?;
        self.barycenter.validate()?;
        self.dadil.validate()?;
        for p in self.data.iter().chain(&self.sources).chain(&self.target) {
            if !p.exists() {
                return Err(Error::input(format!("input file {} does not exist", p.display())));
            }
        }
        Ok(())
    }
}

pub fn load_run_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let cfg: RunConfig = super::read_json(path)?;
    cfg.validate()?;
    Ok(cfg)
}
