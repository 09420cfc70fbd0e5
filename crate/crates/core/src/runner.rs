//! Executes generated programs with the Python interpreter and collects
//! one outcome per test instance.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::io::{self, Read, Write};
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use wait_timeout::ChildExt;

use crate::synthesizer::{self, FilePlan, GeneratedProgram, TestInstance, BEGIN_SENTINEL, END_SENTINEL};

pub const INTERPRETER_ENV: &str = "ITEST_INTERPRETER";
pub const DEFAULT_INTERPRETER: &str = "python3";
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

#[derive(Debug, Error)]
pub enum RunError {
    #[error("interpreter `{0}` not found")]
    InterpreterNotFound(String),
    #[error("line {line} of program output is not a valid result record: {text}")]
    ProtocolViolation { line: usize, text: String },
    #[error("invalid run configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Error,
    Skipped,
    Timeout,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Error => "error",
            Status::Skipped => "skipped",
            Status::Timeout => "timeout",
        }
    }

    /// Statuses that make a run unsuccessful.
    pub fn is_failure(self) -> bool {
        matches!(self, Status::Fail | Status::Error | Status::Timeout)
    }
}

/// One result record, both as emitted by generated programs and as reported.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub id: String,
    pub file: String,
    pub line: usize,
    pub status: Status,
    pub duration_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observed: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl TestOutcome {
    fn synthesized(id: &str, file: &str, line: usize, status: Status, message: impl Into<String>) -> Self {
        TestOutcome {
            id: id.to_string(),
            file: file.to_string(),
            line,
            status,
            duration_ms: 0.0,
            expected: None,
            observed: None,
            message: Some(message.into()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub interpreter: String,
    pub jobs: usize,
    pub timeout: Duration,
    pub tag_filter: Option<BTreeSet<String>>,
    pub name_filter: Option<String>,
    pub env: Vec<(String, String)>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            interpreter: resolve_interpreter(None),
            jobs: thread::available_parallelism().map_or(1, usize::from),
            timeout: DEFAULT_TIMEOUT,
            tag_filter: None,
            name_filter: None,
            env: Vec::new(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), RunError> {
        if self.jobs == 0 {
            return Err(RunError::InvalidConfig("jobs must be at least 1".into()));
        }
        if self.timeout.is_zero() {
            return Err(RunError::InvalidConfig("timeout must be positive".into()));
        }
        if let Some(pattern) = &self.name_filter {
            glob::Pattern::new(pattern).map_err(|e| RunError::InvalidConfig(format!("bad --name pattern: {e}")))?;
        }
        Ok(())
    }
}

/// Interpreter lookup: explicit choice, then `ITEST_INTERPRETER`, then `python3`.
pub fn resolve_interpreter(explicit: Option<&str>) -> String {
    if let Some(path) = explicit.filter(|p| !p.is_empty()) {
        return path.to_string();
    }
    match std::env::var(INTERPRETER_ENV) {
        Ok(value) if !value.is_empty() => value,
        _ => DEFAULT_INTERPRETER.to_string(),
    }
}

/// Result of executing one generated program.
#[derive(Debug, Clone)]
pub struct ProgramRun {
    pub outcomes: Vec<TestOutcome>,
    pub wall_ms: f64,
    pub timed_out: bool,
    pub exit_code: Option<i32>,
    pub stderr: String,
}

fn spawn_error(interpreter: &str, err: io::Error) -> RunError {
    if err.kind() == io::ErrorKind::NotFound {
        RunError::InterpreterNotFound(interpreter.to_string())
    } else {
        RunError::Io(err)
    }
}

fn tail(text: &str, lines: usize) -> String {
    let all: Vec<&str> = text.lines().collect();
    all[all.len().saturating_sub(lines)..].join("\n")
}

/// Runs `program` in a fresh interpreter process.
pub fn run_program(program: &GeneratedProgram, cfg: &RunConfig) -> Result<ProgramRun, RunError> {
    let mut script = tempfile::Builder::new().prefix("itest_").suffix(".py").tempfile()?;
    script.write_all(program.source_text.as_bytes())?;
    script.flush()?;

    let started = Instant::now();
    let mut child = Command::new(&cfg.interpreter)
        .arg(script.path())
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .env("PYTHONDONTWRITEBYTECODE", "1")
        .env("PYTHONIOENCODING", "utf-8")
        .envs(cfg.env.iter().map(|(k, v)| (k, v)))
        .spawn()
        .map_err(|e| spawn_error(&cfg.interpreter, e))?;

    let mut stdout = child.stdout.take().expect("stdout is piped");
    let mut stderr = child.stderr.take().expect("stderr is piped");
    let out_reader = thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = stdout.read_to_end(&mut buf);
        buf
    });
    let err_reader = thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = stderr.read_to_end(&mut buf);
        buf
    });

    let (status, timed_out) = match child.wait_timeout(cfg.timeout)? {
        Some(status) => (Some(status), false),
        None => {
            let _ = child.kill();
            let _ = child.wait();
            (None, true)
        }
    };
    let stdout = out_reader.join().unwrap_or_default();
    let stderr = String::from_utf8_lossy(&err_reader.join().unwrap_or_default()).into_owned();
    let wall_ms = started.elapsed().as_secs_f64() * 1000.0;
    let exit_code = status.and_then(|s| s.code());

    let records = parse_records(&String::from_utf8_lossy(&stdout), timed_out)?;
    let mut by_key: HashMap<(String, usize), VecDeque<TestOutcome>> = HashMap::new();
    for record in records {
        by_key
            .entry((record.id.clone(), record.line))
            .or_default()
            .push_back(record);
    }

    let file = program.origin.display().to_string();
    let outcomes = program
        .instance_ids
        .iter()
        .zip(&program.instance_lines)
        .map(|(id, &line)| {
            if let Some(record) = by_key.get_mut(&(id.clone(), line)).and_then(VecDeque::pop_front) {
                return record;
            }
            if timed_out {
                TestOutcome::synthesized(
                    id,
                    &file,
                    line,
                    Status::Timeout,
                    format!("timed out after {:.1} s", cfg.timeout.as_secs_f64()),
                )
            } else {
                let exit = exit_code.map_or_else(|| "killed by signal".to_string(), |c| format!("exit status {c}"));
                TestOutcome::synthesized(
                    id,
                    &file,
                    line,
                    Status::Error,
                    format!("program exited before reporting ({exit}): {}", tail(&stderr, 5)),
                )
            }
        })
        .collect();

    Ok(ProgramRun {
        outcomes,
        wall_ms,
        timed_out,
        exit_code,
        stderr,
    })
}

/// Parses the sentinel-delimited records of a program's standard output.
pub fn parse_records(stdout: &str, truncated: bool) -> Result<Vec<TestOutcome>, RunError> {
    let mut records = Vec::new();
    let mut inside = false;
    let ends_cleanly = stdout.ends_with('\n');
    let lines: Vec<&str> = stdout.lines().collect();
    for (i, raw) in lines.iter().enumerate() {
        let line = raw.trim_end_matches('\r');
        if !inside {
            inside = line == BEGIN_SENTINEL;
            continue;
        }
        if line == END_SENTINEL {
            break;
        }
        match serde_json::from_str::<TestOutcome>(line) {
            Ok(record) if record.status != Status::Timeout => records.push(record),
            // A killed program may leave a partial last line behind.
            _ if truncated && i + 1 == lines.len() && !ends_cleanly => break,
            _ => {
                return Err(RunError::ProtocolViolation {
                    line: i + 1,
                    text: line.to_string(),
                })
            }
        }
    }
    Ok(records)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProgramTiming {
    pub origin: PathBuf,
    pub instances: usize,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteRun {
    pub outcomes: Vec<TestOutcome>,
    pub wall_ms: f64,
    pub programs: Vec<ProgramTiming>,
}

impl SuiteRun {
    pub fn per_test_ms(&self) -> f64 {
        if self.outcomes.is_empty() {
            0.0
        } else {
            self.wall_ms / self.outcomes.len() as f64
        }
    }
}

/// Whether an instance survives the tag and name filters.
fn selected(instance: &TestInstance, tags: Option<&BTreeSet<String>>, name: Option<&glob::Pattern>) -> bool {
    let tag_ok = tags.is_none_or(|wanted| !instance.tags.is_disjoint(wanted));
    let name_ok = name.is_none_or(|p| p.matches(&instance.name) || p.matches(&instance.id));
    tag_ok && name_ok
}

enum Slot {
    Done(TestOutcome),
    /// Position in a program's instance list.
    Pending(usize, usize),
}

/// Fails fast when the interpreter cannot be started at all.
pub fn check_interpreter(interpreter: &str) -> Result<(), RunError> {
    Command::new(interpreter)
        .arg("--version")
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .status()
        .map(|_| ())
        .map_err(|e| spawn_error(interpreter, e))
}

/// Runs every planned file, at most `cfg.jobs` interpreter processes at a time.
///
/// Outcomes come back in file order, then line, then row/repetition, no
/// matter how the processes were scheduled.
pub fn run_suite(plans: &[FilePlan], cfg: &RunConfig) -> Result<SuiteRun, RunError> {
    cfg.validate()?;
    let name_pattern = cfg
        .name_filter
        .as_deref()
        .map(glob::Pattern::new)
        .transpose()
        .map_err(|e| RunError::InvalidConfig(e.to_string()))?;

    let started = Instant::now();
    let mut programs: Vec<GeneratedProgram> = Vec::new();
    let mut slots: Vec<(usize, Slot)> = Vec::new();
    let mut file_slots: Vec<Vec<(usize, Slot)>> = Vec::new();
    for plan in plans {
        let file = plan.origin.display().to_string();
        let mut this_file = Vec::new();
        for err in &plan.errors {
            this_file.push((
                err.line,
                Slot::Done(TestOutcome::synthesized(&err.id, &file, err.line, Status::Error, err.message.clone())),
            ));
        }
        let mut runnable = Vec::new();
        for instance in &plan.instances {
            if !selected(instance, cfg.tag_filter.as_ref(), name_pattern.as_ref()) {
                this_file.push((
                    instance.line,
                    Slot::Done(TestOutcome::synthesized(&instance.id, &file, instance.line, Status::Skipped, "filtered")),
                ));
            } else if instance.skipped {
                let reason = instance.skip_reason.clone().unwrap_or_else(|| "skipped".into());
                this_file.push((
                    instance.line,
                    Slot::Done(TestOutcome::synthesized(&instance.id, &file, instance.line, Status::Skipped, reason)),
                ));
            } else {
                this_file.push((instance.line, Slot::Pending(programs.len(), runnable.len())));
                runnable.push(instance.clone());
            }
        }
        if !runnable.is_empty() {
            programs.push(synthesizer::render_program(&runnable, &plan.origin));
        }
        // Stable: collection errors and instances interleave by line only.
        this_file.sort_by_key(|(line, _)| *line);
        file_slots.push(this_file);
    }
    for file in file_slots {
        slots.extend(file);
    }

    if !programs.is_empty() {
        check_interpreter(&cfg.interpreter)?;
    }
    let results = execute_all(&programs, cfg);

    let mut timings = Vec::new();
    let mut program_outcomes: Vec<Vec<TestOutcome>> = Vec::with_capacity(programs.len());
    for (program, result) in programs.iter().zip(results) {
        match result {
            Ok(run) => {
                timings.push(ProgramTiming {
                    origin: program.origin.clone(),
                    instances: run.outcomes.len(),
                    wall_ms: run.wall_ms,
                });
                program_outcomes.push(run.outcomes);
            }
            Err(err) => {
                let file = program.origin.display().to_string();
                program_outcomes.push(
                    program
                        .instance_ids
                        .iter()
                        .zip(&program.instance_lines)
                        .map(|(id, &line)| TestOutcome::synthesized(id, &file, line, Status::Error, err.to_string()))
                        .collect(),
                );
            }
        }
    }

    let outcomes = slots
        .into_iter()
        .map(|(_, slot)| match slot {
            Slot::Done(outcome) => outcome,
            Slot::Pending(program, index) => program_outcomes[program][index].clone(),
        })
        .collect();

    Ok(SuiteRun {
        outcomes,
        wall_ms: started.elapsed().as_secs_f64() * 1000.0,
        programs: timings,
    })
}

fn execute_all(programs: &[GeneratedProgram], cfg: &RunConfig) -> Vec<Result<ProgramRun, RunError>> {
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel();
    let workers = cfg.jobs.min(programs.len());
    thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let next = &next;
            scope.spawn(move || loop {
                let index = next.fetch_add(1, Ordering::SeqCst);
                let Some(program) = programs.get(index) else {
                    break;
                };
                if tx.send((index, run_program(program, cfg))).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        let mut results: Vec<Option<Result<ProgramRun, RunError>>> = (0..programs.len()).map(|_| None).collect();
        for (index, result) in rx {
            results[index] = Some(result);
        }
        results
            .into_iter()
            .map(|r| r.expect("every program reports exactly once"))
            .collect()
    })
}
