use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::sweep::SweepSpec;
use crate::channel::{IslParams, LinkParams};
use crate::env::{EnvConfig, SimConfig, Variant};
use crate::orbits::{ConstellationConfig, UserConfig};
use crate::reinforcepp::TrainConfig;
use crate::scenario::ScenarioConfig;
use crate::semantics::SemanticsConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Evaluation episodes per seed.
    pub episodes: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { episodes: 5 }
    }
}

/// Complete description of one experiment, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub variant: Variant,
    pub constellation: ConstellationConfig,
    pub users: UserConfig,
    pub channel: LinkParams,
    pub isl: IslParams,
    pub semantics: SemanticsConfig,
    pub scenario: ScenarioConfig,
    pub env: EnvConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub sweep: Option<SweepSpec>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: PathBuf::from("out"),
            variant: Variant::default(),
            constellation: ConstellationConfig::default(),
            users: UserConfig::default(),
            channel: LinkParams::default(),
            isl: IslParams::default(),
            semantics: SemanticsConfig::default(),
            scenario: ScenarioConfig::default(),
            env: EnvConfig::default(),
            train: TrainConfig::default(),
            eval: EvalConfig::default(),
            sweep: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn sim(&self) -> SimConfig {
        SimConfig {
            constellation: self.constellation.clone(),
            users: self.users.clone(),
            channel: self.channel.clone(),
            isl: self.isl.clone(),
            semantics: self.semantics.clone(),
            scenario: self.scenario.clone(),
            env: self.env.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sim().validate()?;
        self.train.validate()?;
        if self.eval.episodes == 0 {
            return Err(Error::config("eval.episodes", "must be at least 1"));
        }
        if let Some(s) = &self.sweep {
            s.validate()?;
        }
        Ok(())
    }

    /// Hex SHA-256 prefix of the canonical serialisation, excluding the output directory.
    pub fn fingerprint(&self) -> String {
        let mut canonical = self.clone();
        canonical.out_dir = PathBuf::new();
        let text = toml::to_string(&canonical).expect("configuration serialises");
        let digest = Sha256::digest(text.as_bytes());
        hex::encode(&digest[..8])
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.out_dir.join("ckpt").join(format!("{}.bin", self.fingerprint()))
    }
}
