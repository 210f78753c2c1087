//! Runs untrusted programs in a child process under resource limits.
//!
//! Each execution gets a fresh temporary working directory, a cleared
//! environment, its own process group (killed as a whole on timeout), an
//! address-space rlimit and capped stdout/stderr. This is process-level
//! isolation only; it is not a security boundary against hostile code.

use std::io::{Read, Write};
use std::os::unix::process::CommandExt;
use std::path::Path;
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::verifier::{TestCase, TestKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExecLimits {
    /// Seconds.
    pub wall_time: f64,
    /// Bytes of address space.
    pub memory: u64,
    /// Bytes per captured stream.
    pub max_output: usize,
}

impl Default for ExecLimits {
    fn default() -> Self {
        Self { wall_time: 10.0, memory: 1 << 30, max_output: 1 << 20 }
    }
}

impl ExecLimits {
    pub fn validate(&self) -> Result<(), SandboxSetupError> {
        if self.wall_time > 0.0 && self.wall_time.is_finite() && self.memory > 0 && self.max_output > 0 {
            Ok(())
        } else {
            Err(SandboxSetupError::InvalidLimits(*self))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecStatus {
    Ok,
    RuntimeError,
    Timeout,
    OutputLimit,
    SandboxError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionResult {
    pub status: ExecStatus,
    pub stdout: String,
    pub stderr: String,
    /// Seconds.
    pub duration: f64,
}

impl ExecutionResult {
    fn sandbox_error(msg: impl Into<String>) -> Self {
        Self { status: ExecStatus::SandboxError, stdout: String::new(), stderr: msg.into(), duration: 0.0 }
    }
}

#[derive(Debug, Error)]
pub enum SandboxSetupError {
    #[error("interpreter command is empty")]
    EmptyInterpreter,
    #[error("invalid execution limits {0:?}")]
    InvalidLimits(ExecLimits),
    #[error("failed to build worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SandboxConfig {
    /// Program and leading arguments; the script path is appended.
    pub interpreter_cmd: Vec<String>,
    pub limits: ExecLimits,
    pub workers: usize,
}

impl Default for SandboxConfig {
    fn default() -> Self {
        Self {
            interpreter_cmd: vec!["python3".to_string()],
            limits: ExecLimits::default(),
            workers: thread::available_parallelism().map_or(4, |n| n.get()),
        }
    }
}

/// One unit of batch work.
#[derive(Debug, Clone)]
pub struct Job {
    pub source: Arc<str>,
    pub test: TestCase,
    pub limits: ExecLimits,
}

const CALL_DRIVER: &str = r#"import sys
_fn = sys.argv[1]
with open("call_expr.txt", encoding="utf-8") as _f:
    _call = _f.read()
_out = sys.stdout
sys.stdout = sys.stderr
_ns = {"__name__": "__solution__"}
with open("solution.py", encoding="utf-8") as _f:
    exec(compile(_f.read(), "solution.py", "exec"), _ns)
if _fn not in _ns and isinstance(_ns.get("Solution"), type) and hasattr(_ns["Solution"], _fn):
    _ns[_fn] = getattr(_ns["Solution"](), _fn)
if _fn not in _ns:
    raise NameError("name %r is not defined" % _fn)
_result = eval(compile(_call, "<call>", "eval"), _ns)
sys.stdout = _out
sys.stdout.write(repr(_result))
sys.stdout.flush()
"#;

/// Function name of a call expression such as `add(2, 3)`.
pub fn call_target(call_expr: &str) -> &str {
    let head = call_expr.trim_start();
    head.split('(').next().unwrap_or(head).trim()
}

pub struct Sandbox {
    config: SandboxConfig,
    pool: rayon::ThreadPool,
}

impl std::fmt::Debug for Sandbox {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Sandbox").field("config", &self.config).finish()
    }
}

impl Sandbox {
    pub fn new(config: SandboxConfig) -> Result<Self, SandboxSetupError> {
        if config.interpreter_cmd.is_empty() {
            return Err(SandboxSetupError::EmptyInterpreter);
        }
        config.limits.validate()?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers.max(1))
            .thread_name(|i| format!("sandbox-{i}"))
            .build()?;
        Ok(Self { config, pool })
    }

    pub fn config(&self) -> &SandboxConfig {
        &self.config
    }

    pub fn limits(&self) -> ExecLimits {
        self.config.limits
    }

    pub fn execute_stdio(&self, source: &str, stdin: &str, limits: &ExecLimits) -> ExecutionResult {
        self.run(&[("solution.py", source)], "solution.py", &[], stdin, limits)
    }

    /// Loads `source`, evaluates `call_expr` and prints the `repr` of the
    /// result. Output printed by the program itself goes to stderr.
    pub fn execute_call(
        &self,
        source: &str,
        fn_name: &str,
        call_expr: &str,
        limits: &ExecLimits,
    ) -> ExecutionResult {
        self.run(
            &[("solution.py", source), ("call_expr.txt", call_expr.trim()), ("driver.py", CALL_DRIVER)],
            "driver.py",
            &[fn_name],
            "",
            limits,
        )
    }

    pub fn execute_test(&self, source: &str, test: &TestCase, limits: &ExecLimits) -> ExecutionResult {
        match test.kind {
            TestKind::Stdio => self.execute_stdio(source, &test.input, limits),
            TestKind::CallBased => {
                self.execute_call(source, call_target(&test.input), &test.input, limits)
            }
        }
    }

    /// Runs all jobs on the worker pool; results are positionally aligned.
    pub fn execute_batch(&self, jobs: &[Job]) -> Vec<ExecutionResult> {
        self.pool.install(|| {
            jobs.par_iter()
                .map(|j| self.execute_test(&j.source, &j.test, &j.limits))
                .collect()
        })
    }

    fn run(
        &self,
        files: &[(&str, &str)],
        script: &str,
        args: &[&str],
        stdin: &str,
        limits: &ExecLimits,
    ) -> ExecutionResult {
        if let Err(e) = limits.validate() {
            return ExecutionResult::sandbox_error(e.to_string());
        }
        let dir = match tempfile::Builder::new().prefix("genver-").tempdir() {
            Ok(d) => d,
            Err(e) => return ExecutionResult::sandbox_error(format!("tempdir: {e}")),
        };
        for (name, content) in files {
            if let Err(e) = std::fs::write(dir.path().join(name), content) {
                return ExecutionResult::sandbox_error(format!("write {name}: {e}"));
            }
        }
        let mut cmd = self.command(dir.path(), script, args, limits);
        let start = Instant::now();
        match cmd.spawn() {
            Ok(child) => {
                let mut result = supervise(child, stdin, limits, start);
                // Tracebacks name the script by absolute path; drop the
                // per-run directory so results do not depend on it.
                let prefix = format!("{}/", dir.path().display());
                if result.stderr.contains(&prefix) {
                    result.stderr = result.stderr.replace(&prefix, "");
                }
                result
            }
            Err(e) => ExecutionResult::sandbox_error(format!(
                "cannot start {:?}: {e}",
                self.config.interpreter_cmd[0]
            )),
        }
    }

    fn command(&self, dir: &Path, script: &str, args: &[&str], limits: &ExecLimits) -> Command {
        let interp = &self.config.interpreter_cmd;
        let mut cmd = Command::new(&interp[0]);
        cmd.args(&interp[1..])
            .arg(script)
            .args(args)
            .current_dir(dir)
            .env_clear()
            .env("PATH", std::env::var_os("PATH").unwrap_or_else(|| "/usr/bin:/bin".into()))
            .env("HOME", dir)
            .env("PYTHONHASHSEED", "0")
            .env("PYTHONDONTWRITEBYTECODE", "1")
            .env("PYTHONIOENCODING", "utf-8")
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped());
        let memory = limits.memory as libc::rlim_t;
        let cpu = limits.wall_time.ceil() as libc::rlim_t + 1;
        // SAFETY: only async-signal-safe libc calls between fork and exec.
        unsafe {
            cmd.pre_exec(move || {
                libc::setsid();
                let set = |res, v: libc::rlim_t| {
                    let lim = libc::rlimit { rlim_cur: v, rlim_max: v };
                    libc::setrlimit(res, &lim);
                };
                set(libc::RLIMIT_AS, memory);
                set(libc::RLIMIT_CPU, cpu);
                set(libc::RLIMIT_CORE, 0);
                Ok(())
            });
        }
        cmd
    }
}

fn spawn_reader<R: Read + Send + 'static>(
    mut stream: R,
    cap: usize,
    exceeded: Arc<AtomicBool>,
) -> thread::JoinHandle<Vec<u8>> {
    thread::spawn(move || {
        let mut buf = Vec::new();
        let mut chunk = [0u8; 8192];
        loop {
            match stream.read(&mut chunk) {
                Ok(0) | Err(_) => break,
                Ok(n) => {
                    if buf.len() + n > cap {
                        let room = cap - buf.len();
                        buf.extend_from_slice(&chunk[..room]);
                        exceeded.store(true, Ordering::SeqCst);
                        break;
                    }
                    buf.extend_from_slice(&chunk[..n]);
                }
            }
        }
        buf
    })
}

fn kill_group(child: &Child) {
    // The child called setsid, so its pid is the process group id.
    unsafe {
        libc::killpg(child.id() as libc::pid_t, libc::SIGKILL);
    }
}

fn supervise(mut child: Child, stdin: &str, limits: &ExecLimits, start: Instant) -> ExecutionResult {
    let exceeded = Arc::new(AtomicBool::new(false));
    let out = spawn_reader(child.stdout.take().unwrap(), limits.max_output, exceeded.clone());
    let err = spawn_reader(child.stderr.take().unwrap(), limits.max_output, exceeded.clone());
    let mut pipe = child.stdin.take().unwrap();
    let input = stdin.as_bytes().to_vec();
    let writer = thread::spawn(move || {
        // A child that exits without reading its input is not an error.
        let _ = pipe.write_all(&input);
    });

    let wall = Duration::from_secs_f64(limits.wall_time);
    let mut poll = Duration::from_millis(1);
    let (status, exit) = loop {
        match child.try_wait() {
            Ok(Some(exit)) => {
                let status = if exceeded.load(Ordering::SeqCst) {
                    ExecStatus::OutputLimit
                } else if exit.success() {
                    ExecStatus::Ok
                } else {
                    ExecStatus::RuntimeError
                };
                break (status, Some(exit));
            }
            Ok(None) => {}
            Err(e) => {
                kill_group(&child);
                let _ = child.wait();
                return ExecutionResult::sandbox_error(format!("wait: {e}"));
            }
        }
        if exceeded.load(Ordering::SeqCst) {
            break (ExecStatus::OutputLimit, None);
        }
        if start.elapsed() >= wall {
            break (ExecStatus::Timeout, None);
        }
        thread::sleep(poll);
        poll = (poll * 2).min(Duration::from_millis(10));
    };
    let duration = start.elapsed().as_secs_f64();
    kill_group(&child);
    if exit.is_none() {
        let _ = child.wait();
    }
    let _ = writer.join();
    let stdout = out.join().unwrap_or_default();
    let stderr = err.join().unwrap_or_default();
    let mut stderr = String::from_utf8_lossy(&stderr).into_owned();
    if let Some(code) = exit.and_then(|e| std::os::unix::process::ExitStatusExt::signal(&e)) {
        if stderr.is_empty() {
            stderr = format!("killed by signal {code}");
        }
    }
    ExecutionResult {
        status,
        stdout: String::from_utf8_lossy(&stdout).into_owned(),
        stderr,
        duration,
    }
}
