//! Console, JSON and HTML reports.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::runner::{RunConfig, Status, SuiteRun, TestOutcome};

pub const REPORT_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURES: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot write report to {path}: {source}")]
    DestinationUnwritable { path: PathBuf, source: io::Error },
    #[error("invalid JSON report: {0}")]
    Parse(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Console,
    Json,
    Html,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "console" => Ok(Format::Console),
            "json" => Ok(Format::Json),
            "html" => Ok(Format::Html),
            other => Err(format!("unknown format `{other}` (expected console, json or html)")),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub pass: usize,
    pub fail: usize,
    pub error: usize,
    pub skipped: usize,
    pub timeout: usize,
}

impl Counts {
    pub fn total(&self) -> usize {
        self.pass + self.fail + self.error + self.skipped + self.timeout
    }

    pub fn get(&self, status: Status) -> usize {
        match status {
            Status::Pass => self.pass,
            Status::Fail => self.fail,
            Status::Error => self.error,
            Status::Skipped => self.skipped,
            Status::Timeout => self.timeout,
        }
    }
}

/// Settings the suite ran with, echoed into the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub interpreter: String,
    pub jobs: usize,
    pub timeout_s: f64,
    pub tags: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

impl From<&RunConfig> for ConfigEcho {
    fn from(cfg: &RunConfig) -> Self {
        ConfigEcho {
            interpreter: cfg.interpreter.clone(),
            jobs: cfg.jobs,
            timeout_s: cfg.timeout.as_secs_f64(),
            tags: cfg.tag_filter.iter().flatten().cloned().collect(),
            name: cfg.name_filter.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub version: u32,
    pub tool_version: String,
    /// Unix time in milliseconds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub started_at: Option<u64>,
    pub counts: Counts,
    pub suite_wall_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<ConfigEcho>,
    pub outcomes: Vec<TestOutcome>,
}

impl TestReport {
    pub fn exit_code(&self) -> i32 {
        if self.outcomes.iter().any(|o| o.status.is_failure()) {
            EXIT_FAILURES
        } else {
            EXIT_OK
        }
    }

    /// Attaches timing and configuration of the suite run.
    pub fn with_run(mut self, run: &SuiteRun, cfg: &RunConfig, started_at: Option<u64>) -> Self {
        self.suite_wall_ms = run.wall_ms;
        self.config = Some(ConfigEcho::from(cfg));
        self.started_at = started_at;
        self
    }
}

pub fn summarize(outcomes: &[TestOutcome]) -> TestReport {
    let mut counts = Counts::default();
    for outcome in outcomes {
        match outcome.status {
            Status::Pass => counts.pass += 1,
            Status::Fail => counts.fail += 1,
            Status::Error => counts.error += 1,
            Status::Skipped => counts.skipped += 1,
            Status::Timeout => counts.timeout += 1,
        }
    }
    TestReport {
        version: REPORT_VERSION,
        tool_version: TOOL_VERSION.to_string(),
        started_at: None,
        counts,
        suite_wall_ms: 0.0,
        config: None,
        outcomes: outcomes.to_vec(),
    }
}

pub fn render_console(report: &TestReport) -> String {
    let mut out = String::new();
    for o in report.outcomes.iter().filter(|o| o.status != Status::Pass) {
        let _ = write!(out, "{:<7} {}:{} {}", o.status.as_str().to_uppercase(), o.file, o.line, o.id);
        if let (Some(expected), Some(observed)) = (&o.expected, &o.observed) {
            let _ = write!(out, "  expected: {expected}, observed: {observed}");
        }
        if let Some(message) = &o.message {
            let first = message.lines().next().unwrap_or_default();
            let _ = write!(out, "  ({first})");
        }
        out.push('\n');
    }
    let c = &report.counts;
    if c.total() == 0 {
        let _ = writeln!(out, "0 tests collected");
    } else {
        let _ = writeln!(
            out,
            "{} passed, {} failed, {} errors, {} skipped, {} timed out ({} tests) in {:.1} ms",
            c.pass,
            c.fail,
            c.error,
            c.skipped,
            c.timeout,
            c.total(),
            report.suite_wall_ms
        );
    }
    out
}

pub fn render_json(report: &TestReport) -> String {
    let mut text = serde_json::to_string_pretty(report).expect("reports always serialize");
    text.push('\n');
    text
}

pub fn parse_json(text: &str) -> Result<TestReport, ReportError> {
    Ok(serde_json::from_str(text)?)
}

fn escape_html(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

const STYLE: &str = "body{font-family:sans-serif;margin:2em}table{border-collapse:collapse}\
td,th{border:1px solid #ccc;padding:4px 8px;text-align:left;vertical-align:top}\
tr.pass td.status{color:#187a2f}tr.fail td.status,tr.error td.status,tr.timeout td.status{color:#b3261e}\
tr.skipped td.status{color:#777}pre{margin:0;white-space:pre-wrap}";

pub fn render_html(report: &TestReport) -> String {
    let mut out = String::new();
    out.push_str("<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<title>Inline test report</title>\n");
    let _ = writeln!(out, "<style>{STYLE}</style>\n</head>\n<body>\n<h1>Inline test report</h1>");
    let _ = writeln!(
        out,
        "<p>{} tests ran in {:.1} ms (itest {}).</p>",
        report.counts.total(),
        report.suite_wall_ms,
        escape_html(&report.tool_version)
    );
    out.push_str("<table class=\"summary\">\n<tr><th>Status</th><th>Count</th></tr>\n");
    for status in [Status::Pass, Status::Fail, Status::Error, Status::Skipped, Status::Timeout] {
        let _ = writeln!(out, "<tr><td>{}</td><td>{}</td></tr>", status.as_str(), report.counts.get(status));
    }
    out.push_str("</table>\n<h2>Results</h2>\n<table class=\"results\">\n");
    out.push_str("<tr><th>Test</th><th>Location</th><th>Status</th><th>Duration (ms)</th><th>Expected</th><th>Observed</th><th>Message</th></tr>\n");
    for o in &report.outcomes {
        let cell = |v: &Option<String>| v.as_deref().map(escape_html).unwrap_or_default();
        let _ = writeln!(
            out,
            "<tr class=\"{status}\" data-id=\"{id}\"><td>{id}</td><td>{file}:{line}</td><td class=\"status\">{status}</td>\
             <td>{dur:.3}</td><td><pre>{exp}</pre></td><td><pre>{obs}</pre></td><td><pre>{msg}</pre></td></tr>",
            status = o.status.as_str(),
            id = escape_html(&o.id),
            file = escape_html(&o.file),
            line = o.line,
            dur = o.duration_ms,
            exp = cell(&o.expected),
            obs = cell(&o.observed),
            msg = cell(&o.message),
        );
    }
    out.push_str("</table>\n</body>\n</html>\n");
    out
}

pub fn render(report: &TestReport, format: Format) -> String {
    match format {
        Format::Console => render_console(report),
        Format::Json => render_json(report),
        Format::Html => render_html(report),
    }
}

/// Writes the report to `out`.
pub fn emit(report: &TestReport, format: Format, out: &mut dyn Write) -> io::Result<()> {
    out.write_all(render(report, format).as_bytes())?;
    out.flush()
}

pub fn emit_to_path(report: &TestReport, format: Format, path: &Path) -> Result<(), ReportError> {
    fs::write(path, render(report, format)).map_err(|source| ReportError::DestinationUnwritable {
        path: path.to_path_buf(),
        source,
    })
}
