//! Project settings file: one TOML table per module, every field optional.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dbgen::DbConfig;
use crate::eval::EvalConfig;
use crate::goals::GoalConfig;
use crate::simulator::CorpusConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Read { path: String, message: String },
    #[error("invalid settings in {path}: {message}")]
    Parse { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub db: DbConfig,
    pub goals: GoalConfig,
    pub corpus: CorpusConfig,
    pub eval: EvalConfig,
}

impl Settings {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let shown = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: shown.clone(),
            message: e.to_string(),
        })?;
        Self::from_toml(&text).map_err(|e| ConfigError::Parse {
            path: shown,
            message: e.to_string(),
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("settings serialize to TOML")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_default() {
        assert_eq!(Settings::from_toml("").unwrap(), Settings::default());
    }

    #[test]
    fn sections_override_single_fields() {
        let s = Settings::from_toml("[corpus.splits]\ntrain = 10\n[eval]\nmax_args = 3\n").unwrap();
        assert_eq!(s.corpus.splits.train, 10);
        assert_eq!(s.corpus.splits.dev, 100);
        assert_eq!(s.eval.max_args, 3);
    }

    #[test]
    fn unknown_section_is_rejected() {
        assert!(Settings::from_toml("[nope]\nx = 1\n").is_err());
    }

    #[test]
    fn round_trips_through_toml() {
        let s = Settings::default();
        assert_eq!(Settings::from_toml(&s.to_toml()).unwrap(), s);
    }
}
