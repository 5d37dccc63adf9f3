//! The run configuration file: TOML with `[scene]`, `[data]`, `[train]`
//! and `[augment]` tables. Unknown keys are rejected so that typos in an
//! ablation matrix fail loudly.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::augment::AugmentationSpec;
use crate::synthdata::{ClickScheme, SceneConfig};
use crate::trainer::TrainConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClickSchemeName {
    /// One click per object instance.
    #[default]
    Otoc,
    /// Three clicks per object instance.
    Ottc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub n_train: usize,
    pub n_test: usize,
    pub click_scheme: ClickSchemeName,
    pub click_seed: u64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            n_train: 20,
            n_test: 5,
            click_scheme: ClickSchemeName::Otoc,
            click_seed: 1000,
        }
    }
}

impl DataConfig {
    pub fn scheme(&self) -> ClickScheme {
        match self.click_scheme {
            ClickSchemeName::Otoc => ClickScheme::otoc(self.click_seed),
            ClickSchemeName::Ottc => ClickScheme::ottc(self.click_seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub scene: SceneConfig,
    pub data: DataConfig,
    pub train: TrainConfig,
    pub augment: AugmentationSpec,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let wrap = |e: Error| match e {
            Error::Argument(m) => Error::Config(m),
            other => other,
        };
        self.scene.validate().map_err(wrap)?;
        self.train.validate().map_err(wrap)?;
        self.augment.validate().map_err(wrap)?;
        if self.data.n_train + self.data.n_test == 0 {
            return Err(Error::Config("data needs at least one scene".into()));
        }
        Ok(())
    }

    /// Canonical TOML text; `parse(canonical(x)) == x`.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
