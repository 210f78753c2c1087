//! `genver`: batch front end for dataset building, episode runs, judging,
//! scoring, advantage computation and evaluation.

mod config;

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use genver_core::datapipe::{build_dataset, read_corpus, read_problems, write_dataset, SplitManifest};
use genver_core::evalkit::{metrics_report, outcomes_from_records, render_table};
use genver_core::orchestrator::{
    batch_rollouts, read_traces, write_traces, EpisodeRecord, HttpPolicy, Policy, ScriptedPolicy, Termination,
};
use genver_core::protocol::render_feedback_with_budget;
use genver_core::returns::{boundaries_from_rollout, outcome_token_rewards, turn_aware_advantages, AdvantageVector};
use genver_core::rewards::{score_trajectory, RewardBreakdown, RewardConfig};
use genver_core::verifier::judge_candidate;
use genver_core::{Mode, Sandbox, TestCase};
use log::{info, warn};
use serde::{Deserialize, Serialize};

use config::Config;

/// Failure class reported on stderr and mapped to the exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Category {
    Config,
    Io,
    Input,
    Sandbox,
    Policy,
}

impl Category {
    fn name(self) -> &'static str {
        match self {
            Category::Config => "config",
            Category::Io => "io",
            Category::Input => "input",
            Category::Sandbox => "sandbox",
            Category::Policy => "policy",
        }
    }

    fn exit_code(self) -> u8 {
        match self {
            Category::Config => 2,
            Category::Io => 3,
            Category::Input => 4,
            Category::Sandbox => 5,
            Category::Policy => 6,
        }
    }
}

struct CliError {
    category: Category,
    source: anyhow::Error,
}

impl fmt::Debug for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {:#}", self.category.name(), self.source)
    }
}

trait Categorize<T> {
    fn cat(self, category: Category) -> Result<T, CliError>;
}

impl<T, E: Into<anyhow::Error>> Categorize<T> for Result<T, E> {
    fn cat(self, category: Category) -> Result<T, CliError> {
        self.map_err(|e| CliError { category, source: e.into() })
    }
}

type CliResult<T = ()> = Result<T, CliError>;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Train,
    Infer,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Train => Mode::Train,
            ModeArg::Infer => Mode::Infer,
        }
    }
}

#[derive(Parser)]
#[command(name = "genver", version, about = "Generate-then-verify coding episodes: run, judge, score, evaluate")]
struct Cli {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Sandbox worker threads.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true)]
    max_turns: Option<usize>,
    #[arg(long, global = true, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long, global = true)]
    policy_url: Option<String>,
    /// Seed for scripted policies.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file or directory; stdout when omitted (file outputs only).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Normalize, filter and validate a raw problem corpus.
    Preprocess {
        /// JSON-lines or JSON-array corpus.
        #[arg(long)]
        input: PathBuf,
        /// Split manifest `{"train": [ids], "test": [ids]}`.
        #[arg(long)]
        split: Option<PathBuf>,
    },
    /// Run episodes against an HTTP policy or a scripted policy file.
    Run {
        /// Problems as written by `preprocess`.
        #[arg(long)]
        problems: Option<PathBuf>,
        /// Scripted policy file; the HTTP endpoint is used otherwise.
        #[arg(long)]
        script: Option<PathBuf>,
        #[arg(long)]
        rollouts: Option<usize>,
    },
    /// Judge one candidate program against test cases.
    Judge {
        #[arg(long)]
        code: PathBuf,
        /// JSON-lines test cases.
        #[arg(long)]
        tests: PathBuf,
        /// Golden program; required in train mode.
        #[arg(long)]
        golden: Option<PathBuf>,
        /// Print the rendered feedback block instead of JSON.
        #[arg(long)]
        feedback: bool,
    },
    /// Recompute reward breakdowns for every record of a trace file.
    Score {
        #[arg(long)]
        trace: PathBuf,
    },
    /// Turn-aware returns and advantages for every record of a trace file.
    Advantages {
        #[arg(long)]
        trace: PathBuf,
        /// JSON-lines `{"values": [...]}`, one line per record; zeros if omitted.
        #[arg(long)]
        values: Option<PathBuf>,
    },
    /// Pass@1, Pass@k, revision deltas and per-turn curve.
    Eval {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1")]
        k: Vec<usize>,
        /// Print a plain-text table instead of JSON.
        #[arg(long)]
        table: bool,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let report = serde_json::json!({
                "error": e.category.name(),
                "message": format!("{:#}", e.source),
            });
            eprintln!("{report}");
            ExitCode::from(e.category.exit_code())
        }
    }
}

fn load_config(cli: &Cli) -> CliResult<Config> {
    let mut cfg = Config::load(cli.config.as_deref()).cat(Category::Config)?;
    if let Some(w) = cli.workers {
        cfg.sandbox.workers = w;
    }
    if let Some(t) = cli.max_turns {
        cfg.train.max_turns = t;
        cfg.eval.max_turns = t;
    }
    if let Some(url) = &cli.policy_url {
        cfg.policy.url = url.clone();
    }
    Ok(cfg)
}

fn sandbox(cfg: &Config) -> CliResult<Sandbox> {
    Sandbox::new(cfg.sandbox.clone()).cat(Category::Sandbox)
}

fn emit(out: Option<&Path>, text: &str) -> CliResult {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("cannot write {}", p.display())).cat(Category::Io),
        None => io::stdout().write_all(text.as_bytes()).cat(Category::Io),
    }
}

fn jsonl<T: Serialize>(items: &[T]) -> String {
    items.iter().map(|i| serde_json::to_string(i).expect("serializable") + "\n").collect()
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<Vec<T>> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display())).cat(Category::Io)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .with_context(|| format!("{}:{}", path.display(), i + 1))
                .cat(Category::Input)
        })
        .collect()
}

fn traces(path: &Path) -> CliResult<Vec<EpisodeRecord>> {
    read_traces(path).with_context(|| format!("cannot load traces {}", path.display())).cat(Category::Input)
}

fn run(cli: Cli) -> CliResult {
    let cfg = load_config(&cli)?;
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Preprocess { input, split } => {
            let records = read_corpus(input).cat(Category::Input)?;
            let manifest: Option<SplitManifest> = match split {
                Some(p) => {
                    let text = fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()));
                    Some(serde_json::from_str(&text.cat(Category::Io)?).cat(Category::Input)?)
                }
                None => None,
            };
            let sb = sandbox(&cfg)?;
            let mut dataset = build_dataset(&sb, &records, &sb.limits());
            info!("retained {} of {} problems", dataset.report.retained, dataset.report.total);
            match out {
                Some(dir) => write_dataset(&mut dataset, dir, manifest.as_ref()).cat(Category::Io),
                None => emit(None, &jsonl(&dataset.problems)),
            }
        }
        Command::Run { problems, script, rollouts } => {
            let mode: Mode = cli.mode.map_or(Mode::Train, Mode::from);
            let mut episode = cfg.episode(mode).clone();
            if let Some(r) = rollouts {
                episode.rollouts = *r;
            }
            let path = problems
                .clone()
                .or_else(|| cfg.paths.dataset.clone())
                .ok_or_else(|| anyhow!("no problems file: pass --problems or set paths.dataset"))
                .cat(Category::Config)?;
            let problems = read_problems(&path).cat(Category::Input)?;
            let policy: Box<dyn Policy> = match script.clone().or_else(|| cfg.paths.script.clone()) {
                Some(p) => Box::new(ScriptedPolicy::from_file(&p, cli.seed.unwrap_or(0)).cat(Category::Input)?),
                None => Box::new(HttpPolicy::new(cfg.policy.clone())),
            };
            let sb = sandbox(&cfg)?;
            let records = batch_rollouts(&problems, policy.as_ref(), &sb, &episode).cat(Category::Config)?;
            let failures = records.iter().filter(|r| r.termination == Termination::PolicyFailure).count();
            if failures > 0 {
                warn!("{failures} of {} episodes ended in a policy failure", records.len());
            }
            let target = out.map(Path::to_path_buf).or_else(|| cfg.paths.traces.clone());
            match target {
                Some(p) => write_traces(&p, &records).cat(Category::Io)?,
                None => emit(None, &jsonl(&records))?,
            }
            // Traces are kept either way; a run where nothing got through is
            // still reported as a failure.
            if !records.is_empty() && failures == records.len() {
                let first = records[0].error.clone().unwrap_or_default();
                return Err(anyhow!("every episode failed: {first}")).cat(Category::Policy);
            }
            Ok(())
        }
        Command::Judge { code, tests, golden, feedback } => {
            let mode: Mode = cli.mode.map_or(Mode::Infer, Mode::from);
            let read = |p: &Path| {
                fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display())).cat(Category::Io)
            };
            let candidate = read(code)?;
            let golden = golden.as_deref().map(read).transpose()?;
            let cases: Vec<TestCase> = read_jsonl(tests)?;
            let sb = sandbox(&cfg)?;
            let judged =
                judge_candidate(&sb, &candidate, &cases, mode, golden.as_deref(), &sb.limits()).cat(Category::Input)?;
            let text = if *feedback {
                render_feedback_with_budget(&judged, false, cfg.episode(mode).tool_feedback_budget)
            } else {
                serde_json::to_string_pretty(&judged).expect("serializable") + "\n"
            };
            emit(out, &text)
        }
        Command::Score { trace } => {
            let records = traces(trace)?;
            let scored: Vec<ScoreLine> =
                records.iter().map(|r| ScoreLine::new(r, &cfg.train.rewards)).collect();
            emit(out, &jsonl(&scored))
        }
        Command::Advantages { trace, values } => {
            let records = traces(trace)?;
            let values: Vec<ValueLine> = match values {
                Some(p) => read_jsonl(p)?,
                None => records.iter().map(|r| ValueLine { values: vec![0.0; r.transcript.len()] }).collect(),
            };
            if values.len() != records.len() {
                return Err(anyhow!("{} value lines for {} records", values.len(), records.len()))
                    .cat(Category::Input);
            }
            let lines = records
                .iter()
                .zip(&values)
                .map(|(r, v)| AdvantageLine::new(r, &v.values, &cfg.train.rewards))
                .collect::<anyhow::Result<Vec<_>>>()
                .cat(Category::Input)?;
            emit(out, &jsonl(&lines))
        }
        Command::Eval { trace, k, table } => {
            let records = traces(trace)?;
            let report = metrics_report(&outcomes_from_records(&records), k).cat(Category::Input)?;
            let text = if *table {
                render_table(&report)
            } else {
                serde_json::to_string_pretty(&report).expect("serializable") + "\n"
            };
            emit(out, &text)
        }
    }
}

#[derive(Serialize)]
struct ScoreLine {
    problem_id: String,
    rollout: usize,
    rewards: RewardBreakdown,
}

impl ScoreLine {
    fn new(r: &EpisodeRecord, cfg: &RewardConfig) -> Self {
        Self {
            problem_id: r.problem_id.clone(),
            rollout: r.rollout,
            rewards: score_trajectory(&r.parsed, &r.passrates, &r.validity, cfg),
        }
    }
}

#[derive(Deserialize)]
struct ValueLine {
    values: Vec<f64>,
}

/// Positions are transcript bytes; the outcome reward sits on the last one.
#[derive(Serialize)]
struct AdvantageLine {
    problem_id: String,
    rollout: usize,
    /// Per-position loss mask (false inside tool feedback).
    mask: Vec<bool>,
    #[serde(flatten)]
    vector: AdvantageVector,
}

impl AdvantageLine {
    fn new(r: &EpisodeRecord, values: &[f64], cfg: &RewardConfig) -> anyhow::Result<Self> {
        let rewards = score_trajectory(&r.parsed, &r.passrates, &r.validity, cfg);
        let n = r.transcript.len();
        let token_rewards = outcome_token_rewards(n, rewards.r_outcome);
        let vector =
            turn_aware_advantages(&token_rewards, &boundaries_from_rollout(&r.parsed), &rewards.r_gen, &rewards.r_ver, values)
                .with_context(|| format!("problem {} rollout {}", r.problem_id, r.rollout))?;
        Ok(Self {
            problem_id: r.problem_id.clone(),
            rollout: r.rollout,
            mask: genver_core::protocol::loss_mask(&r.parsed),
            vector,
        })
    }
}
