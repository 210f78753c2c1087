//! Test-case validity checks against a golden solution and candidate judging.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datapipe::Problem;
use crate::sandbox::{ExecLimits, ExecStatus, ExecutionResult, Job, Sandbox};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    #[default]
    Stdio,
    CallBased,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestOrigin {
    #[default]
    GroundTruth,
    ModelGenerated,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TestCase {
    pub input: String,
    pub expected_output: String,
    #[serde(default)]
    pub kind: TestKind,
    #[serde(default)]
    pub origin: TestOrigin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Validity {
    Valid,
    Invalid,
    /// Inference mode: no golden solution to check against.
    Unchecked,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailReason {
    OutputMismatch,
    RuntimeError,
    Timeout,
}

impl fmt::Display for FailReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FailReason::OutputMismatch => "output mismatch",
            FailReason::RuntimeError => "runtime error",
            FailReason::Timeout => "timeout",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Passed,
    Failed(FailReason),
    WrongTestCase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgedCase {
    pub test: TestCase,
    pub validity: Validity,
    /// Candidate execution; absent when the test was rejected as invalid.
    pub exec: Option<ExecutionResult>,
    /// Golden execution used for the validity check (train mode).
    pub golden: Option<ExecutionResult>,
    pub verdict: Verdict,
}

impl JudgedCase {
    /// Output shown to the model: the candidate's, or the golden program's
    /// for a test that was rejected before the candidate ran.
    pub fn actual_output(&self) -> String {
        self.exec
            .as_ref()
            .or(self.golden.as_ref())
            .map(|e| normalize_output(&e.stdout))
            .unwrap_or_default()
    }

    pub fn failed_reason_text(&self) -> String {
        let Verdict::Failed(reason) = self.verdict else {
            return String::new();
        };
        let detail = self.exec.as_ref().and_then(|e| match e.status {
            ExecStatus::OutputLimit => Some("output limit exceeded".to_string()),
            ExecStatus::RuntimeError | ExecStatus::SandboxError => e
                .stderr
                .lines()
                .rev()
                .find(|l| !l.trim().is_empty())
                .map(|l| l.trim().to_string()),
            _ => None,
        });
        match detail {
            Some(d) if reason == FailReason::RuntimeError => format!("{reason}\n{d}"),
            _ => reason.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Train,
    Infer,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum VerifierError {
    #[error("train mode requires a golden solution")]
    MissingGolden,
}

/// Unifies line endings, strips trailing whitespace on every line and drops
/// trailing blank lines.
pub fn normalize_output(text: &str) -> String {
    let unified = text.replace("\r\n", "\n").replace('\r', "\n");
    let lines: Vec<&str> = unified.split('\n').map(str::trim_end).collect();
    let mut out = lines.join("\n");
    let kept = out.trim_end_matches('\n').len();
    out.truncate(kept);
    out
}

fn verdict_for(exec: &ExecutionResult, expected: &str) -> Verdict {
    match exec.status {
        ExecStatus::Ok if normalize_output(&exec.stdout) == normalize_output(expected) => Verdict::Passed,
        ExecStatus::Ok => Verdict::Failed(FailReason::OutputMismatch),
        ExecStatus::Timeout => Verdict::Failed(FailReason::Timeout),
        ExecStatus::RuntimeError | ExecStatus::OutputLimit | ExecStatus::SandboxError => {
            Verdict::Failed(FailReason::RuntimeError)
        }
    }
}

fn jobs(source: &str, tests: &[TestCase], limits: &ExecLimits) -> Vec<Job> {
    let source: Arc<str> = source.into();
    tests
        .iter()
        .map(|t| Job { source: source.clone(), test: t.clone(), limits: *limits })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldenCheck {
    pub test: TestCase,
    pub validity: Validity,
    pub golden: ExecutionResult,
}

/// A test is valid iff the golden program runs cleanly on its input and
/// prints the expected output (after normalization).
pub fn filter_against_golden(
    sandbox: &Sandbox,
    tests: &[TestCase],
    golden: &str,
    limits: &ExecLimits,
) -> Vec<GoldenCheck> {
    let results = sandbox.execute_batch(&jobs(golden, tests, limits));
    tests
        .iter()
        .zip(results)
        .map(|(t, r)| {
            let validity = if verdict_for(&r, &t.expected_output) == Verdict::Passed {
                Validity::Valid
            } else {
                Validity::Invalid
            };
            GoldenCheck { test: t.clone(), validity, golden: r }
        })
        .collect()
}

/// Judges a candidate against model-generated tests. In train mode invalid
/// tests are reported as wrong test cases and never run on the candidate; in
/// inference mode every test is taken at face value.
pub fn judge_candidate(
    sandbox: &Sandbox,
    candidate: &str,
    tests: &[TestCase],
    mode: Mode,
    golden: Option<&str>,
    limits: &ExecLimits,
) -> Result<Vec<JudgedCase>, VerifierError> {
    match mode {
        Mode::Infer => {
            let results = sandbox.execute_batch(&jobs(candidate, tests, limits));
            Ok(tests
                .iter()
                .zip(results)
                .map(|(t, r)| JudgedCase {
                    test: t.clone(),
                    validity: Validity::Unchecked,
                    verdict: verdict_for(&r, &t.expected_output),
                    exec: Some(r),
                    golden: None,
                })
                .collect())
        }
        Mode::Train => {
            let golden = golden.ok_or(VerifierError::MissingGolden)?;
            let checks = filter_against_golden(sandbox, tests, golden, limits);
            let valid: Vec<TestCase> = checks
                .iter()
                .filter(|c| c.validity == Validity::Valid)
                .map(|c| c.test.clone())
                .collect();
            let mut results = sandbox.execute_batch(&jobs(candidate, &valid, limits)).into_iter();
            Ok(checks
                .into_iter()
                .map(|c| match c.validity {
                    Validity::Valid => {
                        let r = results.next().expect("one result per valid test");
                        JudgedCase {
                            verdict: verdict_for(&r, &c.test.expected_output),
                            test: c.test,
                            validity: Validity::Valid,
                            exec: Some(r),
                            golden: Some(c.golden),
                        }
                    }
                    _ => JudgedCase {
                        test: c.test,
                        validity: Validity::Invalid,
                        exec: None,
                        golden: Some(c.golden),
                        verdict: Verdict::WrongTestCase,
                    },
                })
                .collect())
        }
    }
}

/// Fraction of the problem's ground-truth tests passed by `candidate`;
/// 0 when there is no code.
pub fn ground_truth_passrate(
    sandbox: &Sandbox,
    candidate: Option<&str>,
    problem: &Problem,
    limits: &ExecLimits,
) -> f64 {
    ground_truth_passrates(sandbox, &[candidate], problem, limits)[0]
}

/// Passrates for several candidates of one problem in a single batch.
pub fn ground_truth_passrates(
    sandbox: &Sandbox,
    candidates: &[Option<&str>],
    problem: &Problem,
    limits: &ExecLimits,
) -> Vec<f64> {
    let n = problem.tests.len();
    let mut all = Vec::new();
    for code in candidates.iter().flatten() {
        all.extend(jobs(code, &problem.tests, limits));
    }
    let results = sandbox.execute_batch(&all);
    let mut chunks = results.chunks(n.max(1));
    candidates
        .iter()
        .map(|c| match c {
            Some(_) if n > 0 => {
                let chunk = chunks.next().expect("one chunk per candidate");
                let passed = chunk
                    .iter()
                    .zip(&problem.tests)
                    .filter(|(r, t)| verdict_for(r, &t.expected_output) == Verdict::Passed)
                    .count();
                passed as f64 / n as f64
            }
            _ => 0.0,
        })
        .collect()
}

/// Share of judged tests that were valid against the golden solution;
/// 0 for an empty list.
pub fn verification_validity_fraction(judged: &[JudgedCase]) -> f64 {
    if judged.is_empty() {
        return 0.0;
    }
    let valid = judged.iter().filter(|c| c.validity == Validity::Valid).count();
    valid as f64 / judged.len() as f64
}
