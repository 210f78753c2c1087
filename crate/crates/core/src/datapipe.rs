//! Corpus preprocessing: schema normalization, unsupported-content
//! filtering, test-format unification and golden-solution validation.
//!
//! Input records follow the TACO/APPS layout: `question`, `solutions`,
//! `input_output` (with optional `fn_name`) and tag lists, where the nested
//! fields may also arrive JSON-encoded as strings.

use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::sandbox::{ExecLimits, ExecStatus, Job, Sandbox};
use crate::verifier::{normalize_output, TestCase, TestKind, TestOrigin};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub id: String,
    pub statement: String,
    #[serde(default)]
    pub tags: Vec<String>,
    pub kind: TestKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fn_name: Option<String>,
    pub tests: Vec<TestCase>,
    pub golden_solutions: Vec<String>,
    #[serde(default)]
    pub chosen_golden: usize,
}

impl Problem {
    /// A stdio problem with no tests or solutions.
    pub fn stub(id: &str, statement: &str) -> Self {
        Self {
            id: id.to_string(),
            statement: statement.to_string(),
            tags: Vec::new(),
            kind: TestKind::Stdio,
            fn_name: None,
            tests: Vec::new(),
            golden_solutions: Vec::new(),
            chosen_golden: 0,
        }
    }

    pub fn golden(&self) -> Option<&str> {
        self.golden_solutions.get(self.chosen_golden).map(String::as_str)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RejectReason {
    SchemaError,
    UnsupportedContent,
    GoldenFails,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub reason: RejectReason,
    pub detail: String,
}

impl Rejection {
    fn new(reason: RejectReason, detail: impl Into<String>) -> Self {
        Self { reason, detail: detail.into() }
    }
}

/// Decodes a field that may be stored either as JSON or as a JSON string.
fn decoded(v: Option<&Value>) -> Option<Value> {
    match v? {
        Value::String(s) if s.trim_start().starts_with(['[', '{']) => serde_json::from_str(s).ok(),
        Value::Null => None,
        other => Some(other.clone()),
    }
}

fn string_list(v: Option<&Value>) -> Vec<String> {
    match decoded(v) {
        Some(Value::Array(items)) => items
            .into_iter()
            .filter_map(|x| match x {
                Value::String(s) => Some(s),
                _ => None,
            })
            .collect(),
        Some(Value::String(s)) => vec![s],
        _ => Vec::new(),
    }
}

fn stdio_text(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Array(lines) => lines
            .iter()
            .map(|l| l.as_str().map(str::to_string))
            .collect::<Option<Vec<_>>>()
            .map(|ls| ls.join("\n")),
        _ => None,
    }
}

/// Python literal syntax for a JSON value, matching `repr` in the sandbox
/// runtime for the JSON-representable subset.
pub fn python_literal(v: &Value) -> String {
    match v {
        Value::Null => "None".into(),
        Value::Bool(true) => "True".into(),
        Value::Bool(false) => "False".into(),
        Value::Number(n) => {
            if n.is_i64() || n.is_u64() {
                n.to_string()
            } else {
                python_float(n.as_f64().unwrap_or(f64::NAN))
            }
        }
        Value::String(s) => python_str(s),
        Value::Array(items) => {
            let inner: Vec<String> = items.iter().map(python_literal).collect();
            format!("[{}]", inner.join(", "))
        }
        Value::Object(map) => {
            let inner: Vec<String> =
                map.iter().map(|(k, v)| format!("{}: {}", python_str(k), python_literal(v))).collect();
            format!("{{{}}}", inner.join(", "))
        }
    }
}

fn python_float(x: f64) -> String {
    let s = format!("{x:?}");
    match s.split_once('e') {
        Some((mantissa, exp)) => {
            let (sign, digits) = match exp.strip_prefix('-') {
                Some(d) => ('-', d),
                None => ('+', exp),
            };
            format!("{mantissa}e{sign}{digits:0>2}")
        }
        None => s,
    }
}

fn python_str(s: &str) -> String {
    let quote = if s.contains('\'') && !s.contains('"') { '"' } else { '\'' };
    let mut out = String::with_capacity(s.len() + 2);
    out.push(quote);
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if c == quote => {
                out.push('\\');
                out.push(c);
            }
            c if (c as u32) < 0x20 || c as u32 == 0x7f => out.push_str(&format!("\\x{:02x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push(quote);
    out
}

/// Renders `fn_name(arg1, arg2, ...)`; a non-list argument value is a
/// single argument.
pub fn call_expression(fn_name: &str, args: &Value) -> String {
    let rendered: Vec<String> = match args {
        Value::Array(items) => items.iter().map(python_literal).collect(),
        other => vec![python_literal(other)],
    };
    format!("{fn_name}({})", rendered.join(", "))
}

fn is_unsupported(tags: &[String], statement: &str, raw: &Value) -> Option<String> {
    for t in tags {
        let lower = t.to_lowercase();
        if lower.contains("interactive") || lower.contains("image") {
            return Some(format!("tagged {t:?}"));
        }
    }
    if raw.get("picture_num").and_then(Value::as_u64).unwrap_or(0) > 0 {
        return Some("has pictures".into());
    }
    if statement.contains("<image>") {
        return Some("statement references an image".into());
    }
    None
}

/// Converts a raw corpus record. `fallback_id` is used when the record has
/// no `id` field.
pub fn normalize_problem(raw: &Value, fallback_id: &str) -> Result<Problem, Rejection> {
    let schema = |msg: &str| Rejection::new(RejectReason::SchemaError, msg);
    let obj = raw.as_object().ok_or_else(|| schema("record is not an object"))?;
    let id = match obj.get("id") {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Number(n)) => n.to_string(),
        _ => fallback_id.to_string(),
    };
    let statement = obj
        .get("question")
        .or_else(|| obj.get("statement"))
        .and_then(Value::as_str)
        .ok_or_else(|| schema("missing question"))?
        .to_string();
    let solutions = string_list(obj.get("solutions"));
    if solutions.is_empty() {
        return Err(schema("no golden solutions"));
    }
    let io = decoded(obj.get("input_output")).ok_or_else(|| schema("missing input_output"))?;
    let inputs = io.get("inputs").and_then(Value::as_array).ok_or_else(|| schema("missing inputs"))?;
    let outputs = io.get("outputs").and_then(Value::as_array).ok_or_else(|| schema("missing outputs"))?;
    if inputs.len() != outputs.len() {
        return Err(schema("inputs and outputs differ in length"));
    }
    if inputs.is_empty() {
        return Err(schema("no test cases"));
    }
    let fn_name = io.get("fn_name").and_then(Value::as_str).map(str::to_string);

    let mut tags = Vec::new();
    for key in ["tags", "skill_types", "raw_tags"] {
        tags.extend(string_list(obj.get(key)));
    }
    if let Some(why) = is_unsupported(&tags, &statement, raw) {
        return Err(Rejection::new(RejectReason::UnsupportedContent, why));
    }

    let (kind, tests) = match &fn_name {
        Some(name) => {
            let tests = inputs
                .iter()
                .zip(outputs)
                .map(|(i, o)| TestCase {
                    input: call_expression(name, i),
                    expected_output: python_literal(o),
                    kind: TestKind::CallBased,
                    origin: TestOrigin::GroundTruth,
                })
                .collect();
            (TestKind::CallBased, tests)
        }
        None => {
            let tests = inputs
                .iter()
                .zip(outputs)
                .map(|(i, o)| {
                    Some(TestCase {
                        input: stdio_text(i)?,
                        expected_output: stdio_text(o)?,
                        kind: TestKind::Stdio,
                        origin: TestOrigin::GroundTruth,
                    })
                })
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| schema("stdio test is not text"))?;
            (TestKind::Stdio, tests)
        }
    };

    Ok(Problem {
        id,
        statement,
        tags,
        kind,
        fn_name,
        tests,
        golden_solutions: solutions,
        chosen_golden: 0,
    })
}

const SYNTAX_CHECK: &str = "import sys\ncompile(sys.stdin.read(), '<golden>', 'exec')\n";

/// Drops golden solutions that do not compile, keeping order, and points
/// `chosen_golden` at the first remaining one. Only as many solutions as
/// needed are checked.
fn drop_unparsable(sandbox: &Sandbox, problems: &mut [Problem], limits: &ExecLimits) {
    let checker: Arc<str> = SYNTAX_CHECK.into();
    let mut cursor = vec![0usize; problems.len()];
    let mut settled = vec![false; problems.len()];
    loop {
        let pending: Vec<usize> = (0..problems.len())
            .filter(|&i| !settled[i] && cursor[i] < problems[i].golden_solutions.len())
            .collect();
        if pending.is_empty() {
            break;
        }
        let jobs: Vec<Job> = pending
            .iter()
            .map(|&i| Job {
                source: checker.clone(),
                test: TestCase {
                    input: problems[i].golden_solutions[cursor[i]].clone(),
                    expected_output: String::new(),
                    kind: TestKind::Stdio,
                    origin: TestOrigin::GroundTruth,
                },
                limits: *limits,
            })
            .collect();
        for (&i, r) in pending.iter().zip(sandbox.execute_batch(&jobs)) {
            if r.status == ExecStatus::Ok {
                settled[i] = true;
            } else {
                cursor[i] += 1;
            }
        }
    }
    for (p, first_ok) in problems.iter_mut().zip(cursor) {
        p.golden_solutions.drain(..first_ok.min(p.golden_solutions.len()));
        p.chosen_golden = 0;
    }
}

/// Runs the chosen golden solution against every test of each problem.
pub fn validate_golden_batch(
    sandbox: &Sandbox,
    problems: &[Problem],
    limits: &ExecLimits,
) -> Vec<Result<(), Rejection>> {
    let mut jobs = Vec::new();
    let mut owners = Vec::new();
    for (pi, p) in problems.iter().enumerate() {
        let Some(golden) = p.golden() else { continue };
        let source: Arc<str> = golden.into();
        for t in &p.tests {
            jobs.push(Job { source: source.clone(), test: t.clone(), limits: *limits });
            owners.push(pi);
        }
    }
    let results = sandbox.execute_batch(&jobs);
    let mut verdicts: Vec<Result<(), Rejection>> = problems
        .iter()
        .map(|p| match p.golden() {
            Some(_) => Ok(()),
            None => Err(Rejection::new(RejectReason::GoldenFails, "no parsable golden solution")),
        })
        .collect();
    for ((pi, job), r) in owners.into_iter().zip(&jobs).zip(results) {
        if verdicts[pi].is_err() {
            continue;
        }
        let failure = match r.status {
            ExecStatus::Ok if normalize_output(&r.stdout) == normalize_output(&job.test.expected_output) => None,
            ExecStatus::Ok => Some("wrong output".to_string()),
            other => Some(format!("{other:?}")),
        };
        if let Some(why) = failure {
            let input: String = job.test.input.chars().take(40).collect();
            verdicts[pi] = Err(Rejection::new(
                RejectReason::GoldenFails,
                format!("{why} on input {input:?}"),
            ));
        }
    }
    verdicts
}

pub fn validate_golden(sandbox: &Sandbox, problem: &Problem, limits: &ExecLimits) -> Result<(), Rejection> {
    validate_golden_batch(sandbox, std::slice::from_ref(problem), limits).remove(0)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitManifest {
    #[serde(default)]
    pub train: Vec<String>,
    #[serde(default)]
    pub test: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectedRecord {
    pub id: String,
    pub reason: RejectReason,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildReport {
    pub total: usize,
    pub retained: usize,
    pub rejected: BTreeMap<RejectReason, usize>,
    pub rejections: Vec<RejectedRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitCounts>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub test: usize,
    pub unassigned: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    /// Retained problems in input order.
    pub problems: Vec<Problem>,
    pub report: BuildReport,
}

impl Dataset {
    pub fn split(&self, manifest: &SplitManifest) -> (Vec<&Problem>, Vec<&Problem>) {
        let train: HashSet<&str> = manifest.train.iter().map(String::as_str).collect();
        let test: HashSet<&str> = manifest.test.iter().map(String::as_str).collect();
        let pick = |set: &HashSet<&str>| self.problems.iter().filter(|p| set.contains(p.id.as_str())).collect();
        (pick(&train), pick(&test))
    }
}

/// Normalizes, filters and validates raw records. Rejections follow rule
/// order schema, unsupported content, golden validation; each record is
/// rejected at most once.
pub fn build_dataset(sandbox: &Sandbox, records: &[Value], limits: &ExecLimits) -> Dataset {
    let mut report = BuildReport { total: records.len(), ..Default::default() };
    let mut slots: Vec<Result<Problem, RejectedRecord>> = records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            normalize_problem(r, &i.to_string()).map_err(|rej| RejectedRecord {
                id: r.get("id").map_or_else(|| i.to_string(), |v| v.as_str().map_or(v.to_string(), str::to_string)),
                reason: rej.reason,
                detail: rej.detail,
            })
        })
        .collect();

    let mut candidates: Vec<Problem> = slots.iter().filter_map(|s| s.as_ref().ok().cloned()).collect();
    drop_unparsable(sandbox, &mut candidates, limits);
    let verdicts = validate_golden_batch(sandbox, &candidates, limits);
    let mut checked = candidates.into_iter().zip(verdicts);
    for slot in slots.iter_mut() {
        if slot.is_ok() {
            let (p, verdict) = checked.next().expect("one verdict per candidate");
            *slot = match verdict {
                Ok(()) => Ok(p),
                Err(rej) => Err(RejectedRecord { id: p.id, reason: rej.reason, detail: rej.detail }),
            };
        }
    }

    let mut problems = Vec::new();
    for slot in slots {
        match slot {
            Ok(p) => problems.push(p),
            Err(r) => {
                *report.rejected.entry(r.reason).or_default() += 1;
                report.rejections.push(r);
            }
        }
    }
    report.retained = problems.len();
    Dataset { problems, report }
}

#[derive(Debug, Error)]
pub enum DatapipeError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {source}")]
    Json { path: PathBuf, line: usize, source: serde_json::Error },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatapipeError + '_ {
    move |source| DatapipeError::Io { path: path.to_path_buf(), source }
}

/// Reads a corpus given as JSON-lines or as a single JSON array.
pub fn read_corpus(path: &Path) -> Result<Vec<Value>, DatapipeError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    if text.trim_start().starts_with('[') {
        return serde_json::from_str(&text)
            .map_err(|source| DatapipeError::Json { path: path.to_path_buf(), line: 1, source });
    }
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|source| DatapipeError::Json { path: path.to_path_buf(), line: i + 1, source })
        })
        .collect()
}

pub fn read_problems(path: &Path) -> Result<Vec<Problem>, DatapipeError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|source| DatapipeError::Json { path: path.to_path_buf(), line: i + 1, source })?,
        );
    }
    Ok(out)
}

fn write_jsonl<'a>(path: &Path, problems: impl IntoIterator<Item = &'a Problem>) -> Result<(), DatapipeError> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    for p in problems {
        let line = serde_json::to_string(p).expect("problem serializes");
        writeln!(w, "{line}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Writes `dataset.jsonl`, `report.json` and, given a manifest,
/// `train.jsonl` / `test.jsonl` into `out_dir`. The report is written last
/// so a failure leaves no report claiming success.
pub fn write_dataset(
    dataset: &mut Dataset,
    out_dir: &Path,
    manifest: Option<&SplitManifest>,
) -> Result<(), DatapipeError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    write_jsonl(&out_dir.join("dataset.jsonl"), &dataset.problems)?;
    if let Some(m) = manifest {
        let (train, test) = dataset.split(m);
        write_jsonl(&out_dir.join("train.jsonl"), train.iter().copied())?;
        write_jsonl(&out_dir.join("test.jsonl"), test.iter().copied())?;
        let counts = SplitCounts {
            train: train.len(),
            test: test.len(),
            unassigned: dataset.problems.len() - train.len() - test.len(),
        };
        dataset.report.split = Some(counts);
    }
    let report_path = out_dir.join("report.json");
    let text = serde_json::to_string_pretty(&dataset.report).expect("report serializes");
    fs::write(&report_path, text + "\n").map_err(io_err(&report_path))
}
