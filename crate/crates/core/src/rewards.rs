//! Outcome reward and dense per-turn generation/verification rewards.
//!
//! The outcome reward is `r_format + r_passrate` where `r_format` is ±1 and
//! `r_passrate = scale * passrate` of the final code. Generation turn `k`
//! earns `scale * p^1` at `k = 1` and
//! `abs * scale * p^k + imp * scale * (p^k - p^(k-2))` afterwards; a
//! verification turn earns the fraction of its tests that the golden program
//! confirms.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::ParsedRollout;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    pub abs: f64,
    pub imp: f64,
    pub passrate_scale: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self { abs: 0.0, imp: 1.0, passrate_scale: 5.0 }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RewardError {
    #[error("passrate {0} outside [0, 1]")]
    PassrateOutOfRange(f64),
    #[error("turn {0} is not a generation turn")]
    NotGenerationTurn(usize),
    #[error("missing passrate for turn {0}")]
    MissingPassrate(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_format: f64,
    pub r_passrate: f64,
    pub r_outcome: f64,
    /// Keyed by odd turn index.
    pub r_gen: BTreeMap<usize, f64>,
    /// Keyed by even turn index.
    pub r_ver: BTreeMap<usize, f64>,
    /// Ground-truth passrate per generation turn.
    pub passrates: BTreeMap<usize, f64>,
}

pub fn format_reward(format_ok: bool) -> f64 {
    if format_ok {
        1.0
    } else {
        -1.0
    }
}

fn check_passrate(p: f64) -> Result<f64, RewardError> {
    if (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(RewardError::PassrateOutOfRange(p))
    }
}

impl RewardConfig {
    pub fn passrate_reward(&self, p: f64) -> Result<f64, RewardError> {
        Ok(self.passrate_scale * check_passrate(p)?)
    }
}

/// `5 * p` with the default scale.
pub fn passrate_reward(p: f64) -> Result<f64, RewardError> {
    RewardConfig::default().passrate_reward(p)
}

pub fn generation_turn_reward(
    k: usize,
    passrates: &BTreeMap<usize, f64>,
    cfg: &RewardConfig,
) -> Result<f64, RewardError> {
    if k.is_multiple_of(2) {
        return Err(RewardError::NotGenerationTurn(k));
    }
    let scaled = |k: usize| -> Result<f64, RewardError> {
        let p = passrates.get(&k).copied().ok_or(RewardError::MissingPassrate(k))?;
        cfg.passrate_reward(p)
    };
    let current = scaled(k)?;
    if k == 1 {
        return Ok(current);
    }
    let previous = scaled(k - 2)?;
    Ok(cfg.abs * current + cfg.imp * (current - previous))
}

pub fn verification_turn_reward(valid_count: usize, total_count: usize) -> f64 {
    if total_count == 0 {
        0.0
    } else {
        valid_count as f64 / total_count as f64
    }
}

/// Scores a parsed rollout.
///
/// `passrates` maps generation turns to their ground-truth passrate and
/// `validity` maps verification turns to their valid-test fraction. A
/// generation turn without extractable code scores passrate 0, and so does a
/// generation index missing from the rollout. A verification turn without
/// test cases scores 0. Inputs are clamped to `[0, 1]`.
pub fn score_trajectory(
    parsed: &ParsedRollout,
    passrates: &BTreeMap<usize, f64>,
    validity: &BTreeMap<usize, f64>,
    cfg: &RewardConfig,
) -> RewardBreakdown {
    let mut per_turn = BTreeMap::new();
    for t in parsed.generation_turns() {
        let p = match t.code {
            Some(_) => passrates.get(&t.k).copied().unwrap_or(0.0).clamp(0.0, 1.0),
            None => 0.0,
        };
        per_turn.insert(t.k, p);
    }

    let mut filled = per_turn.clone();
    let last_k = per_turn.keys().next_back().copied().unwrap_or(0);
    for k in (1..=last_k).step_by(2) {
        filled.entry(k).or_insert(0.0);
    }
    let r_gen = per_turn
        .keys()
        .map(|&k| (k, generation_turn_reward(k, &filled, cfg).expect("passrates filled and clamped")))
        .collect();

    let r_ver = parsed
        .verification_turns()
        .map(|t| {
            let r = if t.test_cases.is_empty() {
                0.0
            } else {
                validity.get(&t.k).copied().unwrap_or(0.0).clamp(0.0, 1.0)
            };
            (t.k, r)
        })
        .collect();

    let final_p = parsed
        .generation_turns()
        .filter(|t| t.code.is_some())
        .last()
        .map_or(0.0, |t| per_turn[&t.k]);
    let r_format = format_reward(parsed.format_ok);
    let r_passrate = cfg.passrate_scale * final_p;
    RewardBreakdown {
        r_format,
        r_passrate,
        r_outcome: r_format + r_passrate,
        r_gen,
        r_ver,
        passrates: per_turn,
    }
}
