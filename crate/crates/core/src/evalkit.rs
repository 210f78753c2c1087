//! Pass@1, Pass@k, revision deltas and per-turn accuracy curves.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::orchestrator::EpisodeRecord;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleOutcome {
    pub problem_id: String,
    pub rollout: usize,
    /// Whether the code standing after each generation turn passes every
    /// ground-truth test. Never empty.
    pub turn_correct: Vec<bool>,
}

impl SampleOutcome {
    pub fn initial_correct(&self) -> bool {
        self.turn_correct.first().copied().unwrap_or(false)
    }

    pub fn final_correct(&self) -> bool {
        self.turn_correct.last().copied().unwrap_or(false)
    }

    /// Correctness of the solution standing at generation ordinal `j`
    /// (1-based); the last solution persists past the end of the episode.
    pub fn correct_at(&self, j: usize) -> bool {
        let idx = j.min(self.turn_correct.len()).saturating_sub(1);
        self.turn_correct.get(idx).copied().unwrap_or(false)
    }
}

/// A generation turn without extractable code keeps the previous solution.
pub fn outcome_from_record(record: &EpisodeRecord) -> SampleOutcome {
    let mut turn_correct = Vec::new();
    let mut standing = false;
    for t in record.parsed.generation_turns() {
        if t.code.is_some() {
            standing = record.passrates.get(&t.k).copied().unwrap_or(0.0) >= 1.0;
        }
        turn_correct.push(standing);
    }
    if turn_correct.is_empty() {
        turn_correct.push(false);
    }
    SampleOutcome { problem_id: record.problem_id.clone(), rollout: record.rollout, turn_correct }
}

pub fn outcomes_from_records(records: &[EpisodeRecord]) -> Vec<SampleOutcome> {
    records.iter().map(outcome_from_record).collect()
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("no samples")]
    Empty,
    #[error("k = {k} exceeds the {n} samples of problem {problem}")]
    KTooLarge { k: usize, n: usize, problem: String },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("{c} correct out of {n} samples")]
    BadCounts { n: usize, c: usize },
}

pub fn pass_at_1(outcomes: &[SampleOutcome]) -> Result<f64, EvalError> {
    if outcomes.is_empty() {
        return Err(EvalError::Empty);
    }
    let correct = outcomes.iter().filter(|o| o.final_correct()).count();
    Ok(correct as f64 / outcomes.len() as f64)
}

/// Unbiased estimate of the chance that at least one of `k` samples drawn
/// without replacement from `n` (with `c` correct) is correct:
/// `1 - C(n-c, k) / C(n, k)`, evaluated as a product to stay stable for
/// large `n`.
pub fn pass_at_k_single(n: usize, c: usize, k: usize) -> Result<f64, EvalError> {
    if c > n {
        return Err(EvalError::BadCounts { n, c });
    }
    if k == 0 {
        return Err(EvalError::ZeroK);
    }
    if k > n {
        return Err(EvalError::KTooLarge { k, n, problem: String::new() });
    }
    if n - c < k {
        return Ok(1.0);
    }
    let miss: f64 = ((n - c + 1)..=n).map(|i| 1.0 - k as f64 / i as f64).product();
    Ok(1.0 - miss)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemCounts {
    pub problem_id: String,
    pub n: usize,
    pub c: usize,
}

/// Per-problem sample and final-correct counts, in first-seen order.
pub fn problem_counts(outcomes: &[SampleOutcome]) -> Vec<ProblemCounts> {
    let mut order: Vec<ProblemCounts> = Vec::new();
    let mut index: BTreeMap<&str, usize> = BTreeMap::new();
    for o in outcomes {
        let i = *index.entry(o.problem_id.as_str()).or_insert_with(|| {
            order.push(ProblemCounts { problem_id: o.problem_id.clone(), n: 0, c: 0 });
            order.len() - 1
        });
        order[i].n += 1;
        order[i].c += usize::from(o.final_correct());
    }
    order
}

/// Mean of the per-problem estimates.
pub fn pass_at_k(counts: &[ProblemCounts], k: usize) -> Result<f64, EvalError> {
    if counts.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut total = 0.0;
    for pc in counts {
        total += pass_at_k_single(pc.n, pc.c, k).map_err(|e| match e {
            EvalError::KTooLarge { k, n, .. } => EvalError::KTooLarge { k, n, problem: pc.problem_id.clone() },
            other => other,
        })?;
    }
    Ok(total / counts.len() as f64)
}

/// Fractions of all samples that flip wrong-to-right and right-to-wrong
/// between the first and the final generation turn.
pub fn revision_deltas(outcomes: &[SampleOutcome]) -> (f64, f64) {
    if outcomes.is_empty() {
        return (0.0, 0.0);
    }
    let n = outcomes.len() as f64;
    let up = outcomes.iter().filter(|o| !o.initial_correct() && o.final_correct()).count();
    let down = outcomes.iter().filter(|o| o.initial_correct() && !o.final_correct()).count();
    (up as f64 / n, down as f64 / n)
}

/// Pass@1 of the solutions standing at each generation ordinal.
pub fn per_turn_curve(outcomes: &[SampleOutcome]) -> BTreeMap<usize, f64> {
    let depth = outcomes.iter().map(|o| o.turn_correct.len()).max().unwrap_or(0);
    let n = outcomes.len() as f64;
    (1..=depth)
        .map(|j| {
            let correct = outcomes.iter().filter(|o| o.correct_at(j)).count();
            (j, correct as f64 / n)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub samples: usize,
    pub problems: usize,
    pub pass_at_1: f64,
    pub initial_pass_at_1: f64,
    pub pass_at_k: BTreeMap<usize, f64>,
    pub delta_up: f64,
    pub delta_down: f64,
    pub per_turn_curve: BTreeMap<usize, f64>,
}

pub fn metrics_report(outcomes: &[SampleOutcome], ks: &[usize]) -> Result<MetricsReport, EvalError> {
    let counts = problem_counts(outcomes);
    let mut at_k = BTreeMap::new();
    for &k in ks {
        at_k.insert(k, pass_at_k(&counts, k)?);
    }
    let (delta_up, delta_down) = revision_deltas(outcomes);
    let initial = outcomes.iter().filter(|o| o.initial_correct()).count() as f64;
    Ok(MetricsReport {
        samples: outcomes.len(),
        problems: counts.len(),
        pass_at_1: pass_at_1(outcomes)?,
        initial_pass_at_1: initial / outcomes.len() as f64,
        pass_at_k: at_k,
        delta_up,
        delta_down,
        per_turn_curve: per_turn_curve(outcomes),
    })
}

/// Plain-text rendering of a report, one metric per line.
pub fn render_table(report: &MetricsReport) -> String {
    let mut s = String::new();
    let pct = |x: f64| format!("{:6.2}", 100.0 * x);
    let _ = writeln!(s, "samples        {}", report.samples);
    let _ = writeln!(s, "problems       {}", report.problems);
    let _ = writeln!(s, "pass@1         {}", pct(report.pass_at_1));
    for (k, v) in &report.pass_at_k {
        let _ = writeln!(s, "{:<14} {}", format!("pass@{k}"), pct(*v));
    }
    let _ = writeln!(s, "delta_up       {}", pct(report.delta_up));
    let _ = writeln!(s, "delta_down     {}", pct(report.delta_down));
    for (j, v) in &report.per_turn_curve {
        let _ = writeln!(s, "{:<14} {}", format!("turn {j}"), pct(*v));
    }
    s
}
