//! Multi-turn episode loop: prompt, generate, parse, judge, inject feedback,
//! repeat until the code passes its own verification, the turn cap is hit or
//! the response budget runs out.

mod policy;

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use log::{debug, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use policy::{
    GenerationRequest, HttpPolicy, HttpPolicyConfig, Policy, PolicyError, SamplingParams, ScriptError,
    ScriptedPolicy,
};

use crate::datapipe::Problem;
use crate::protocol::{
    loss_mask_spans, parse_rollout_with, render_error_format, render_feedback_with_budget, render_prompt,
    MaskSpan, ParseOptions, ParsedRollout, TagKind, DEFAULT_TOOL_FEEDBACK_BUDGET,
};
use crate::rewards::{score_trajectory, RewardBreakdown, RewardConfig};
use crate::sandbox::{ExecLimits, Sandbox};
use crate::verifier::{
    filter_against_golden, ground_truth_passrates, judge_candidate, verification_validity_fraction, JudgedCase,
    Mode, Validity, Verdict, VerifierError,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpisodeConfig {
    /// Cap on generation plus verification phases, each counted once.
    pub max_turns: usize,
    pub mode: Mode,
    /// Cap on transcript bytes (model text plus injected feedback).
    pub response_budget: usize,
    pub tool_feedback_budget: usize,
    pub sampling: SamplingParams,
    pub rollouts: usize,
    /// Transport retries before an episode is recorded as a policy failure.
    pub retries: usize,
    /// Milliseconds; doubled after each failed attempt.
    pub retry_backoff_ms: u64,
    /// Keep wall-clock durations in judgements. Off by default so that
    /// records are reproducible byte for byte.
    pub record_timings: bool,
    pub rewards: RewardConfig,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self::train()
    }
}

impl EpisodeConfig {
    pub fn train() -> Self {
        Self {
            max_turns: 3,
            mode: Mode::Train,
            response_budget: 32_768,
            tool_feedback_budget: DEFAULT_TOOL_FEEDBACK_BUDGET,
            sampling: SamplingParams { temperature: 1.0, top_p: 1.0 },
            rollouts: 1,
            retries: 2,
            retry_backoff_ms: 500,
            record_timings: false,
            rewards: RewardConfig::default(),
        }
    }

    pub fn eval() -> Self {
        Self {
            max_turns: 6,
            mode: Mode::Infer,
            sampling: SamplingParams { temperature: 0.6, top_p: 0.9 },
            ..Self::train()
        }
    }

    pub fn validate(&self) -> Result<(), OrchestratorError> {
        if self.max_turns == 0 {
            return Err(OrchestratorError::InvalidConfig("max_turns must be at least 1".into()));
        }
        if self.rollouts == 0 {
            return Err(OrchestratorError::InvalidConfig("rollouts must be at least 1".into()));
        }
        if self.response_budget == 0 {
            return Err(OrchestratorError::InvalidConfig("response_budget must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OrchestratorError {
    #[error("invalid episode config: {0}")]
    InvalidConfig(String),
    #[error("problem {0}: train mode requires a golden solution")]
    MissingGolden(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    AllTestsPassed,
    MaxTurns,
    BudgetExhausted,
    PolicyFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub problem_id: String,
    pub rollout: usize,
    pub mode: Mode,
    pub prompt: String,
    /// Everything after the prompt: model text and injected feedback.
    pub transcript: String,
    /// The last response was cut by the budget.
    pub truncated: bool,
    pub parsed: ParsedRollout,
    pub mask: Vec<MaskSpan>,
    /// Judged cases per verification turn.
    pub judgements: BTreeMap<usize, Vec<JudgedCase>>,
    /// Valid-test fraction per verification turn (train mode).
    pub validity: BTreeMap<usize, f64>,
    /// Ground-truth passrate per generation turn with code.
    pub passrates: BTreeMap<usize, f64>,
    pub rewards: Option<RewardBreakdown>,
    pub termination: Termination,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl EpisodeRecord {
    pub fn parse_options(&self, problem_kind: crate::verifier::TestKind) -> ParseOptions {
        ParseOptions { truncated: self.truncated, test_kind: problem_kind }
    }
}

/// Outcome of the latest verification turn, used by [`should_terminate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TurnState {
    pub turns_used: usize,
    pub max_turns: usize,
    pub budget_exhausted: bool,
    pub all_passed: bool,
}

/// Budget exhaustion wins over a verified pass, which wins over the turn cap.
pub fn should_terminate(state: &TurnState) -> Option<Termination> {
    if state.budget_exhausted {
        Some(Termination::BudgetExhausted)
    } else if state.all_passed {
        Some(Termination::AllTestsPassed)
    } else if state.turns_used >= state.max_turns {
        Some(Termination::MaxTurns)
    } else {
        None
    }
}

/// Whether a verification turn's judgements count as a pass: at least one
/// test and every test passed. In train mode only golden-confirmed tests
/// count.
pub fn verification_passed(judged: &[JudgedCase], mode: Mode) -> bool {
    let considered: Vec<&JudgedCase> = match mode {
        Mode::Train => judged.iter().filter(|c| c.validity == Validity::Valid).collect(),
        Mode::Infer => judged.iter().collect(),
    };
    !considered.is_empty() && considered.iter().all(|c| c.verdict == Verdict::Passed)
}

fn floor_char_boundary(s: &str, mut i: usize) -> usize {
    if i >= s.len() {
        return s.len();
    }
    while !s.is_char_boundary(i) {
        i -= 1;
    }
    i
}

/// Cuts `text` right after the first stop marker, if any.
fn cut_at_stop(text: &str, stop: &[String]) -> String {
    let end = stop
        .iter()
        .filter_map(|s| text.find(s.as_str()).map(|at| at + s.len()))
        .min()
        .unwrap_or(text.len());
    text[..end].to_string()
}

fn zero_durations(cases: &mut [JudgedCase]) {
    for c in cases {
        for e in c.exec.iter_mut().chain(c.golden.iter_mut()) {
            e.duration = 0.0;
        }
    }
}

struct Caller<'a> {
    policy: &'a dyn Policy,
    lock: Option<&'a Mutex<()>>,
}

impl Caller<'_> {
    fn call(&self, req: &GenerationRequest<'_>, cfg: &EpisodeConfig) -> Result<String, PolicyError> {
        let mut backoff = cfg.retry_backoff_ms;
        let mut attempt = 0;
        loop {
            let result = {
                let _guard = self.lock.map(|m| m.lock().unwrap_or_else(|p| p.into_inner()));
                self.policy.generate(req)
            };
            match result {
                Err(PolicyError::Transport(msg)) if attempt < cfg.retries => {
                    warn!("problem {} rollout {}: {msg}; retrying", req.problem_id, req.rollout);
                    thread::sleep(Duration::from_millis(backoff));
                    backoff = backoff.saturating_mul(2);
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}

/// Runs one episode. Policy failures are recorded in the returned record;
/// only precondition violations are errors.
pub fn run_episode(
    problem: &Problem,
    policy: &dyn Policy,
    sandbox: &Sandbox,
    cfg: &EpisodeConfig,
    golden: Option<&str>,
    rollout: usize,
) -> Result<EpisodeRecord, OrchestratorError> {
    run_episode_inner(problem, &Caller { policy, lock: None }, sandbox, cfg, golden, rollout)
}

fn run_episode_inner(
    problem: &Problem,
    caller: &Caller<'_>,
    sandbox: &Sandbox,
    cfg: &EpisodeConfig,
    golden: Option<&str>,
    rollout: usize,
) -> Result<EpisodeRecord, OrchestratorError> {
    cfg.validate()?;
    if cfg.mode == Mode::Train && golden.is_none() {
        return Err(OrchestratorError::MissingGolden(problem.id.clone()));
    }
    let limits: ExecLimits = sandbox.limits();
    let prompt = render_prompt(problem);
    let opts = |truncated| ParseOptions { truncated, test_kind: problem.kind };

    let mut transcript = String::new();
    let mut truncated = false;
    let mut judgements = BTreeMap::new();
    let mut validity = BTreeMap::new();
    let mut error = None;
    let mut termination = None;

    let mut cycle = 0usize;
    while termination.is_none() {
        let k_gen = 2 * cycle + 1;
        let k_ver = k_gen + 1;
        let gen_only = k_ver > cfg.max_turns;
        let stop_tag = if gen_only { TagKind::GenerationAnswer } else { TagKind::VerificationAnswer };
        let stop = vec![stop_tag.close_tag().to_string()];

        let remaining = cfg.response_budget.saturating_sub(transcript.len());
        if remaining == 0 {
            termination = Some(Termination::BudgetExhausted);
            break;
        }
        let context = format!("{prompt}{transcript}");
        let req = GenerationRequest {
            problem_id: &problem.id,
            rollout,
            call_index: cycle,
            context: &context,
            stop: &stop,
            sampling: cfg.sampling,
            max_len: remaining,
        };
        let text = match caller.call(&req, cfg) {
            Ok(text) => cut_at_stop(&text, &stop),
            Err(e) => {
                error = Some(e.to_string());
                termination = Some(Termination::PolicyFailure);
                break;
            }
        };
        if text.len() > remaining {
            transcript.push_str(&text[..floor_char_boundary(&text, remaining)]);
            truncated = true;
            termination = Some(Termination::BudgetExhausted);
            break;
        }
        transcript.push_str(&text);

        if gen_only {
            termination = Some(Termination::MaxTurns);
            break;
        }

        let parsed = parse_rollout_with(&transcript, opts(false));
        let code = parsed.turn(k_gen).and_then(|t| t.code.clone());
        let tests = parsed
            .turn(k_ver)
            .map(|t| t.test_cases.clone())
            .unwrap_or_default();

        let mut all_passed = false;
        let feedback = match (&code, tests.is_empty()) {
            (Some(code), false) => {
                let mut judged = judge_candidate(sandbox, code, &tests, cfg.mode, golden, &limits)
                    .map_err(|e| match e {
                        VerifierError::MissingGolden => OrchestratorError::MissingGolden(problem.id.clone()),
                    })?;
                if !cfg.record_timings {
                    zero_durations(&mut judged);
                }
                all_passed = verification_passed(&judged, cfg.mode);
                if cfg.mode == Mode::Train {
                    validity.insert(k_ver, verification_validity_fraction(&judged));
                }
                let fb = render_feedback_with_budget(&judged, false, cfg.tool_feedback_budget);
                judgements.insert(k_ver, judged);
                fb
            }
            _ => {
                // Tests still earn their verification reward without code.
                if let (Mode::Train, Some(g), false) = (cfg.mode, golden, tests.is_empty()) {
                    let checks = filter_against_golden(sandbox, &tests, g, &limits);
                    let valid = checks.iter().filter(|c| c.validity == Validity::Valid).count();
                    validity.insert(k_ver, valid as f64 / checks.len() as f64);
                }
                debug!("problem {} rollout {rollout}: format error in cycle {cycle}", problem.id);
                render_error_format()
            }
        };
        transcript.push('\n');
        transcript.push_str(&feedback);
        transcript.push('\n');

        termination = should_terminate(&TurnState {
            turns_used: k_ver,
            max_turns: cfg.max_turns,
            budget_exhausted: transcript.len() >= cfg.response_budget,
            all_passed,
        });
        cycle += 1;
    }

    let parsed = parse_rollout_with(&transcript, opts(truncated));
    let gen_turns: Vec<(usize, Option<&str>)> =
        parsed.generation_turns().map(|t| (t.k, t.code.as_deref())).collect();
    let candidates: Vec<Option<&str>> = gen_turns.iter().map(|(_, c)| *c).collect();
    let rates = ground_truth_passrates(sandbox, &candidates, problem, &limits);
    let passrates: BTreeMap<usize, f64> = gen_turns
        .iter()
        .zip(rates)
        .filter(|((_, c), _)| c.is_some())
        .map(|((k, _), p)| (*k, p))
        .collect();
    let rewards = match (cfg.mode, &error) {
        (Mode::Train, None) => Some(score_trajectory(&parsed, &passrates, &validity, &cfg.rewards)),
        _ => None,
    };

    Ok(EpisodeRecord {
        problem_id: problem.id.clone(),
        rollout,
        mode: cfg.mode,
        prompt,
        mask: loss_mask_spans(&parsed),
        transcript,
        truncated,
        parsed,
        judgements,
        validity,
        passrates,
        rewards,
        termination: termination.unwrap_or(Termination::MaxTurns),
        error,
    })
}

/// Runs `cfg.rollouts` episodes per problem in parallel. Records come back in
/// problem-major, rollout-minor order. Calls to a policy that does not
/// support concurrency are serialized.
pub fn batch_rollouts(
    problems: &[Problem],
    policy: &dyn Policy,
    sandbox: &Sandbox,
    cfg: &EpisodeConfig,
) -> Result<Vec<EpisodeRecord>, OrchestratorError> {
    cfg.validate()?;
    if cfg.mode == Mode::Train {
        if let Some(p) = problems.iter().find(|p| p.golden().is_none()) {
            return Err(OrchestratorError::MissingGolden(p.id.clone()));
        }
    }
    let lock = Mutex::new(());
    let caller = Caller { policy, lock: (!policy.supports_concurrency()).then_some(&lock) };
    let jobs: Vec<(&Problem, usize)> =
        problems.iter().flat_map(|p| (0..cfg.rollouts).map(move |r| (p, r))).collect();
    jobs.par_iter()
        .map(|(p, r)| {
            let golden = if cfg.mode == Mode::Train { p.golden() } else { None };
            run_episode_inner(p, &caller, sandbox, cfg, golden, *r)
        })
        .collect()
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
}

pub fn write_traces(path: &Path, records: &[EpisodeRecord]) -> Result<(), TraceError> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    for r in records {
        let line = serde_json::to_string(r).map_err(|source| TraceError::Json { line: 0, source })?;
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_traces(path: &Path) -> Result<Vec<EpisodeRecord>, TraceError> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line).map_err(|source| TraceError::Json { line: i + 1, source })?);
    }
    Ok(records)
}
