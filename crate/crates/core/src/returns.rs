//! Token-level returns, turn-level returns and turn-aware advantages.
//!
//! Positions run `0..=T`. The token-level return is the undiscounted
//! reward-to-go `R_t = r_t + R_{t+1}`. Each turn `k` ending at position
//! `t_k` gets a turn return: its generation reward for a generation turn, or
//! its verification reward plus the following generation turn's return for a
//! verification turn. Every position inherits the turn return of the first
//! turn ending at or after it (0 past the last turn). The advantage is
//! `R_t + R_turn_t - V_t`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::{ParsedRollout, TurnKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnBoundary {
    pub k: usize,
    pub kind: TurnKind,
    pub end_pos: usize,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReturnsError {
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("turn boundaries must have strictly increasing positions and indices")]
    NotIncreasing,
    #[error("turn {k} has kind {kind:?} but its parity says otherwise")]
    ParityMismatch { k: usize, kind: TurnKind },
    #[error("turn {k} ends at {end_pos}, beyond the last position {last}")]
    OutOfRange { k: usize, end_pos: usize, last: usize },
    #[error("no reward for turn {0}")]
    MissingReward(usize),
    #[error("gamma and lambda must lie in [0, 1]")]
    InvalidDiscount,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvantageVector {
    /// Token-level return `R_t`.
    pub returns: Vec<f64>,
    /// Broadcast turn-level return `R_turn_t`.
    pub turn_returns: Vec<f64>,
    /// `R_t + R_turn_t`.
    pub turn_aware_returns: Vec<f64>,
    /// `R_t + R_turn_t - V_t`.
    pub advantages: Vec<f64>,
}

pub fn boundaries_from_rollout(parsed: &ParsedRollout) -> Vec<TurnBoundary> {
    parsed
        .turns
        .iter()
        .map(|t| TurnBoundary { k: t.k, kind: t.kind, end_pos: t.end_offset })
        .collect()
}

/// Token rewards with the whole outcome reward on the final position.
pub fn outcome_token_rewards(num_positions: usize, r_outcome: f64) -> Vec<f64> {
    let mut r = vec![0.0; num_positions];
    if let Some(last) = r.last_mut() {
        *last = r_outcome;
    }
    r
}

pub fn token_returns(token_rewards: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; token_rewards.len()];
    let mut next = 0.0;
    for (o, r) in out.iter_mut().zip(token_rewards).rev() {
        next += r;
        *o = next;
    }
    out
}

fn check_boundaries(boundaries: &[TurnBoundary]) -> Result<(), ReturnsError> {
    for b in boundaries {
        let expected = if b.k % 2 == 1 { TurnKind::Generation } else { TurnKind::Verification };
        if b.k == 0 || b.kind != expected {
            return Err(ReturnsError::ParityMismatch { k: b.k, kind: b.kind });
        }
    }
    if boundaries.windows(2).any(|w| w[0].end_pos >= w[1].end_pos || w[0].k >= w[1].k) {
        return Err(ReturnsError::NotIncreasing);
    }
    Ok(())
}

/// Turn-level return for each boundary, aligned with `boundaries`.
///
/// A verification turn adds the return of turn `k + 1`; when that turn is
/// absent (last turn, or a phase that produced nothing) it adds 0.
pub fn turn_returns(
    boundaries: &[TurnBoundary],
    r_gen: &BTreeMap<usize, f64>,
    r_ver: &BTreeMap<usize, f64>,
) -> Result<Vec<f64>, ReturnsError> {
    check_boundaries(boundaries)?;
    let mut by_k: BTreeMap<usize, f64> = BTreeMap::new();
    let mut out = vec![0.0; boundaries.len()];
    for (i, b) in boundaries.iter().enumerate().rev() {
        let value = match b.kind {
            TurnKind::Generation => *r_gen.get(&b.k).ok_or(ReturnsError::MissingReward(b.k))?,
            TurnKind::Verification => {
                let own = *r_ver.get(&b.k).ok_or(ReturnsError::MissingReward(b.k))?;
                own + by_k.get(&(b.k + 1)).copied().unwrap_or(0.0)
            }
        };
        by_k.insert(b.k, value);
        out[i] = value;
    }
    Ok(out)
}

/// Spreads turn returns over positions `0..num_positions`.
pub fn broadcast_turn_returns(
    turn_values: &[f64],
    boundaries: &[TurnBoundary],
    num_positions: usize,
) -> Result<Vec<f64>, ReturnsError> {
    if turn_values.len() != boundaries.len() {
        return Err(ReturnsError::LengthMismatch { expected: boundaries.len(), got: turn_values.len() });
    }
    if boundaries.windows(2).any(|w| w[0].end_pos >= w[1].end_pos) {
        return Err(ReturnsError::NotIncreasing);
    }
    if let Some(b) = boundaries.iter().find(|b| b.end_pos >= num_positions) {
        return Err(ReturnsError::OutOfRange {
            k: b.k,
            end_pos: b.end_pos,
            last: num_positions.saturating_sub(1),
        });
    }
    let mut out = vec![0.0; num_positions];
    let mut idx = 0;
    for (t, o) in out.iter_mut().enumerate() {
        while idx < boundaries.len() && boundaries[idx].end_pos < t {
            idx += 1;
        }
        if idx < boundaries.len() {
            *o = turn_values[idx];
        }
    }
    Ok(out)
}

/// Generalized advantage estimate with `V_{T+1} = 0`.
pub fn gae_advantages(
    rewards: &[f64],
    values: &[f64],
    gamma: f64,
    lambda: f64,
) -> Result<Vec<f64>, ReturnsError> {
    if rewards.len() != values.len() {
        return Err(ReturnsError::LengthMismatch { expected: rewards.len(), got: values.len() });
    }
    if !(0.0..=1.0).contains(&gamma) || !(0.0..=1.0).contains(&lambda) {
        return Err(ReturnsError::InvalidDiscount);
    }
    let mut adv = vec![0.0; rewards.len()];
    let mut next_adv = 0.0;
    let mut next_value = 0.0;
    for t in (0..rewards.len()).rev() {
        let delta = rewards[t] + gamma * next_value - values[t];
        next_adv = delta + gamma * lambda * next_adv;
        adv[t] = next_adv;
        next_value = values[t];
    }
    Ok(adv)
}

pub fn turn_aware_advantages(
    token_rewards: &[f64],
    boundaries: &[TurnBoundary],
    r_gen: &BTreeMap<usize, f64>,
    r_ver: &BTreeMap<usize, f64>,
    values: &[f64],
) -> Result<AdvantageVector, ReturnsError> {
    let n = token_rewards.len();
    if values.len() != n {
        return Err(ReturnsError::LengthMismatch { expected: n, got: values.len() });
    }
    let returns = token_returns(token_rewards);
    let per_turn = turn_returns(boundaries, r_gen, r_ver)?;
    let turn_returns = broadcast_turn_returns(&per_turn, boundaries, n)?;
    let turn_aware_returns: Vec<f64> = returns.iter().zip(&turn_returns).map(|(r, u)| r + u).collect();
    let advantages = turn_aware_returns.iter().zip(values).map(|(r, v)| r - v).collect();
    Ok(AdvantageVector { returns, turn_returns, turn_aware_returns, advantages })
}
