//! Run configuration: one TOML file with a section per subsystem.
//!
//! ```toml
//! seed = 1
//!
//! [env]
//! variant = "empty_9"
//!
//! [run]
//! updates = 2500
//!
//! [agent]
//! mode = "a2c_advantage_injection"
//!
//! [shaping]
//! reward_set = ["id", "re3"]
//! ```
//!
//! Omitted keys take their defaults; [`TrainConfig::to_toml`] writes every key.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agent::{AgentConfig, ShapingConfig};
use crate::envs::Variant;
use crate::error::{Error, Result};
use crate::rewards::RewardParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub variant: Variant,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Empty(9),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub updates: u64,
    /// Save a checkpoint every this many updates; 0 saves only the final one.
    pub checkpoint_every: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            updates: 2500,
            checkpoint_every: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub seed: u64,
    pub env: EnvConfig,
    pub run: RunConfig,
    pub agent: AgentConfig,
    pub shaping: ShapingConfig,
    pub rewards: RewardParams,
}

impl TrainConfig {
    pub fn from_toml(src: &str) -> Result<Self> {
        let cfg: TrainConfig = toml::from_str(src).map_err(|e| {
            let field = e
                .span()
                .and_then(|s| field_at(src, s.start))
                .unwrap_or_else(|| "<root>".into());
            Error::config(field, e.message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let src = fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::NotFound(path.display().to_string()),
            _ => Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))),
        })?;
        Self::from_toml(&src)
    }

    pub fn validate(&self) -> Result<()> {
        if self.run.updates == 0 {
            return Err(Error::config("run.updates", "must be at least 1"));
        }
        self.agent.validate()?;
        self.shaping.validate()?;
        self.rewards.validate()
    }

    /// Every field written out, defaults included.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }
}

/// Dotted key of the assignment covering byte `offset`, qualified by the
/// nearest table header above it.
fn field_at(src: &str, offset: usize) -> Option<String> {
    let offset = offset.min(src.len());
    let line_start = src[..offset].rfind('\n').map_or(0, |i| i + 1);
    let line_end = src[offset..].find('\n').map_or(src.len(), |i| offset + i);
    let line = src[line_start..line_end].trim();
    let key = line.split('=').next()?.trim().trim_matches('"');
    let table = src[..line_start]
        .lines()
        .rev()
        .map(str::trim)
        .find(|l| l.starts_with('[') && l.ends_with(']'))
        .map(|l| l.trim_matches(|c| c == '[' || c == ']').trim());
    if line.starts_with('[') {
        return Some(line.trim_matches(|c| c == '[' || c == ']').trim().to_string());
    }
    if key.is_empty() {
        return table.map(str::to_string);
    }
    Some(match table {
        Some(t) => format!("{t}.{key}"),
        None => key.to_string(),
    })
}
