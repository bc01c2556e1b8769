//! Run configuration, read from TOML and overridden by command-line flags.
//!
//! ```toml
//! manifest = "data/manifest.json"
//! temperature = 0.01
//! workers = 4
//! output_dir = "out"
//! dump_predictions = false
//! enable_gmg = true
//! enable_csa = true
//! enable_templates = true
//!
//! [gmg]
//! beta = 1.2
//! gamma = 3.0
//! geo_stage = 3
//!
//! [fusion]
//! w_max = 0.5
//! tau = 0.5
//! ```
//!
//! Relative `manifest` and `output_dir` paths in a file resolve against the
//! file's directory.

use std::path::{Path, PathBuf};

use aquaseg_core::csa::FusionConfig;
use aquaseg_core::gmg::GmgConfig;
use aquaseg_core::mask_classifier::DEFAULT_TEMPERATURE;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(rename = "manifest")]
    pub manifest_path: PathBuf,
    pub gmg: GmgConfig,
    pub fusion: FusionConfig,
    pub enable_gmg: bool,
    pub enable_csa: bool,
    pub enable_templates: bool,
    pub temperature: f64,
    pub workers: usize,
    pub output_dir: PathBuf,
    pub dump_predictions: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            manifest_path: PathBuf::new(),
            gmg: GmgConfig::default(),
            fusion: FusionConfig::default(),
            enable_gmg: true,
            enable_csa: true,
            enable_templates: true,
            temperature: DEFAULT_TEMPERATURE,
            workers: 1,
            output_dir: PathBuf::from("aquaseg-out"),
            dump_predictions: false,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| BenchError::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)
            .map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        if !cfg.manifest_path.as_os_str().is_empty() && cfg.manifest_path.is_relative() {
            cfg.manifest_path = base.join(&cfg.manifest_path);
        }
        if cfg.output_dir.is_relative() {
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.manifest_path.as_os_str().is_empty() {
            return Err(BenchError::Config("no manifest given".into()));
        }
        if !(self.enable_gmg || self.enable_csa || self.enable_templates) {
            return Err(BenchError::Config(
                "every pipeline stage is disabled; enable at least one of GMG, CSA or templates".into(),
            ));
        }
        if self.workers == 0 {
            return Err(BenchError::Config("workers must be at least 1".into()));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(BenchError::Config(format!(
                "temperature must be > 0, got {}",
                self.temperature
            )));
        }
        self.gmg.validate()?;
        self.fusion.validate()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let cfg = RunConfig::default();
        assert_eq!((cfg.gmg.beta, cfg.gmg.gamma, cfg.gmg.geo_stage), (1.2, 3.0, 3));
        assert_eq!((cfg.fusion.w_max, cfg.fusion.tau), (0.5, 0.5));
        assert_eq!(cfg.temperature, 0.01);
        assert!(cfg.enable_gmg && cfg.enable_csa && cfg.enable_templates);
    }

    #[test]
    fn partial_toml_keeps_defaults() {
        let cfg = RunConfig::from_toml_str("manifest = \"m.json\"\n[fusion]\ntau = 1.0\n").unwrap();
        assert_eq!(cfg.fusion.tau, 1.0);
        assert_eq!(cfg.fusion.w_max, 0.5);
        assert_eq!(cfg.gmg, GmgConfig::default());
        cfg.validate().unwrap();
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(RunConfig::from_toml_str("bogus = 1").is_err());
        let base = RunConfig {
            manifest_path: "m.json".into(),
            ..RunConfig::default()
        };
        let bad = [
            RunConfig { workers: 0, ..base.clone() },
            RunConfig { temperature: 0.0, ..base.clone() },
            RunConfig {
                enable_gmg: false,
                enable_csa: false,
                enable_templates: false,
                ..base.clone()
            },
            RunConfig {
                gmg: GmgConfig { geo_stage: 4, ..GmgConfig::default() },
                ..base.clone()
            },
            RunConfig {
                fusion: FusionConfig { w_max: 0.5, tau: 1.5 },
                ..base.clone()
            },
            RunConfig::default(),
        ];
        for cfg in bad {
            let err = cfg.validate().unwrap_err();
            assert_eq!(err.exit_code(), crate::error::EXIT_CONFIG, "{err}");
        }
    }
}
