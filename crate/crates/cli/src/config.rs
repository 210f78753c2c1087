use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use genver_core::orchestrator::HttpPolicyConfig;
use genver_core::{EpisodeConfig, Mode, SandboxConfig};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

/// Everything a batch run needs. Sections missing from the file keep their
/// defaults field by field; `eval` defaults differ from `train`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub sandbox: SandboxConfig,
    pub train: EpisodeConfig,
    pub eval: EpisodeConfig,
    pub policy: HttpPolicyConfig,
    pub paths: Paths,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    pub dataset: Option<PathBuf>,
    pub traces: Option<PathBuf>,
    pub script: Option<PathBuf>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            sandbox: SandboxConfig::default(),
            train: EpisodeConfig::train(),
            eval: EpisodeConfig::eval(),
            policy: HttpPolicyConfig::default(),
            paths: Paths::default(),
        }
    }
}

fn merge(base: &mut Table, patch: Table) {
    for (key, value) in patch {
        match (base.get_mut(&key), value) {
            (Some(Value::Table(b)), Value::Table(p)) => merge(b, p),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

fn overlay<T: Serialize + DeserializeOwned>(base: &T, patch: Option<Value>, section: &str) -> Result<T> {
    let Some(patch) = patch else {
        return Ok(toml::Value::try_from(base)?.try_into()?);
    };
    let Value::Table(patch) = patch else {
        bail!("[{section}] must be a table");
    };
    let Value::Table(mut table) = toml::Value::try_from(base)? else {
        bail!("[{section}] default is not a table");
    };
    merge(&mut table, patch);
    Value::Table(table).try_into().with_context(|| format!("invalid [{section}] section"))
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let mut raw: Table = toml::from_str(text).context("config is not valid TOML")?;
        let defaults = Config::default();
        let known = ["sandbox", "train", "eval", "policy", "paths"];
        if let Some(unknown) = raw.keys().find(|k| !known.contains(&k.as_str())) {
            bail!("unknown config section [{unknown}]");
        }
        let mut cfg = Config {
            sandbox: overlay(&defaults.sandbox, raw.remove("sandbox"), "sandbox")?,
            train: overlay(&defaults.train, raw.remove("train"), "train")?,
            eval: overlay(&defaults.eval, raw.remove("eval"), "eval")?,
            policy: overlay(&defaults.policy, raw.remove("policy"), "policy")?,
            paths: overlay(&defaults.paths, raw.remove("paths"), "paths")?,
        };
        cfg.train.mode = Mode::Train;
        cfg.eval.mode = Mode::Infer;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Config::default()),
            Some(p) => {
                let text = fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
                Self::from_toml(&text)
            }
        }
    }

    pub fn episode(&self, mode: Mode) -> &EpisodeConfig {
        match mode {
            Mode::Train => &self.train,
            Mode::Infer => &self.eval,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_sections_keep_defaults() {
        let cfg = Config::from_toml(
            "[eval]\nrollouts = 8\n[sandbox.limits]\nwall_time = 2.5\n[train.rewards]\nabs = 0.5\n",
        )
        .unwrap();
        assert_eq!(cfg.eval.rollouts, 8);
        assert_eq!(cfg.eval.max_turns, 6);
        assert_eq!(cfg.eval.sampling.temperature, 0.6);
        assert_eq!(cfg.sandbox.limits.wall_time, 2.5);
        assert_eq!(cfg.sandbox.limits.memory, 1 << 30);
        assert_eq!(cfg.train.rewards.abs, 0.5);
        assert_eq!(cfg.train.rewards.imp, 1.0);
        assert_eq!(cfg.train.tool_feedback_budget, 4096);
    }

    #[test]
    fn rejects_unknown_sections() {
        assert!(Config::from_toml("[sandbx]\nworkers = 1\n").is_err());
        assert!(Config::from_toml("[train]\nmax_turns = \"three\"\n").is_err());
    }
}
