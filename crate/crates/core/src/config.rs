//! Run configuration: one TOML document with `[instrument]`, `[scenario]`,
//! `[hyper]`, `[chain]` and optional `[model]` sections.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::ModelOptions;
use crate::sampler::ChainConfig;
use crate::simulator::{default_scenario, Scenario};
use crate::types::{HyperConfig, InstrumentConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub instrument: InstrumentConfig<f64>,
    pub scenario: Scenario,
    pub hyper: HyperConfig<f64>,
    pub chain: ChainConfig,
    #[serde(default)]
    pub model: ModelOptions<f64>,
}

impl Default for RunConfig {
    /// Cryosat-2 instrument and the 500-echo synthetic benchmark scenario.
    fn default() -> Self {
        RunConfig {
            instrument: InstrumentConfig::cryosat2(),
            scenario: default_scenario(500),
            hyper: HyperConfig::default(),
            chain: ChainConfig::default(),
            model: ModelOptions::default(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::InvalidConfig(msg) => Error::InvalidConfig(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn dump(&self) -> String {
        toml::to_string(self).expect("configuration serialises to TOML")
    }

    pub fn validate(&self) -> Result<()> {
        self.instrument.validate()?;
        self.scenario.validate()?;
        self.hyper.validate()?;
        self.chain.validate()?;
        if self.scenario.seed > i64::MAX as u64 {
            return Err(Error::InvalidConfig("scenario.seed must fit in a signed 64-bit integer".into()));
        }
        Ok(())
    }
}
