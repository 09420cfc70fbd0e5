//! The `itest` command line.

use std::collections::BTreeSet;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};

use crate::extractor::{self, ExtractOptions};
use crate::pipeline::{self, SourceFile};
use crate::reporter::{self, Format, EXIT_OK, EXIT_USAGE};
use crate::rewriter;
use crate::runner::{self, RunConfig};
use crate::scanner;

#[derive(Debug, Parser)]
#[command(name = "itest", version, about = "Run, list, strip and benchmark statement-level inline tests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Extract, execute and report inline tests.
    Run {
        #[command(flatten)]
        exec: ExecArgs,
        /// Report format: console, json or html.
        #[arg(long, default_value = "console")]
        format: Format,
        /// Write the report here instead of standard output.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Print inline-test declarations without executing them.
    List {
        #[arg(long)]
        copy_all_imports: bool,
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Remove inline tests from source files.
    Strip {
        #[command(flatten)]
        dest: DestArgs,
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Replace each inline test with K renamed copies.
    Dup {
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        k: u32,
        #[command(flatten)]
        dest: DestArgs,
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Time the suite with every inline test duplicated 1, 10, 100 and 1000 times.
    Bench {
        #[command(flatten)]
        exec: ExecArgs,
        /// Duplication factors to measure (repeatable).
        #[arg(long = "k", value_parser = clap::value_parser!(u32).range(1..))]
        ks: Vec<u32>,
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct ExecArgs {
    /// Maximum concurrent interpreter processes.
    #[arg(long)]
    jobs: Option<usize>,
    /// Per-program timeout in seconds.
    #[arg(long, default_value_t = 60.0)]
    timeout: f64,
    /// Only run tests carrying this tag (repeatable).
    #[arg(long = "tag")]
    tags: Vec<String>,
    /// Only run tests whose name matches this glob.
    #[arg(long)]
    name: Option<String>,
    /// Python interpreter (default: $ITEST_INTERPRETER, then python3).
    #[arg(long)]
    interpreter: Option<String>,
    /// Copy every import of the source file, not only the ones used.
    #[arg(long)]
    copy_all_imports: bool,
}

#[derive(Debug, Args)]
#[group(multiple = false)]
struct DestArgs {
    /// Rewrite files in place, keeping a `.orig` backup.
    #[arg(long)]
    in_place: bool,
    /// Write rewritten files under this directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

struct UsageError(String);

impl<E: std::fmt::Display> From<E> for UsageError {
    fn from(e: E) -> Self {
        UsageError(e.to_string())
    }
}

impl ExecArgs {
    fn config(&self) -> Result<RunConfig, UsageError> {
        if !(self.timeout > 0.0 && self.timeout.is_finite()) {
            return Err(UsageError("--timeout must be a positive number of seconds".into()));
        }
        let mut cfg = RunConfig {
            interpreter: runner::resolve_interpreter(self.interpreter.as_deref()),
            timeout: Duration::from_secs_f64(self.timeout),
            tag_filter: (!self.tags.is_empty()).then(|| self.tags.iter().cloned().collect::<BTreeSet<_>>()),
            name_filter: self.name.clone(),
            ..RunConfig::default()
        };
        if let Some(jobs) = self.jobs {
            cfg.jobs = jobs;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn options(&self) -> ExtractOptions {
        ExtractOptions {
            copy_all_imports: self.copy_all_imports,
        }
    }
}

/// Runs the command line and returns the process exit code.
pub fn main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match dispatch(cli.command, &mut out) {
        Ok(code) => code,
        Err(UsageError(message)) => {
            let _ = out.flush();
            eprintln!("itest: {message}");
            EXIT_USAGE
        }
    }
}

fn now_ms() -> Option<u64> {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .ok()
        .map(|d| d.as_millis() as u64)
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<i32, UsageError> {
    match command {
        Command::Run { exec, format, output, paths } => {
            let cfg = exec.config()?;
            let files = pipeline::discover(&paths)?;
            let plans = pipeline::plan_files(&files, exec.options());
            let started_at = now_ms();
            let run = runner::run_suite(&plans, &cfg)?;
            let report = reporter::summarize(&run.outcomes).with_run(&run, &cfg, started_at);
            match output {
                Some(path) => {
                    reporter::emit_to_path(&report, format, &path)?;
                    if format != Format::Console {
                        write!(out, "{}", reporter::render_console(&report))?;
                    }
                }
                None => reporter::emit(&report, format, out)?,
            }
            Ok(report.exit_code())
        }
        Command::List { copy_all_imports, paths } => {
            let files = pipeline::discover(&paths)?;
            list(&files, ExtractOptions { copy_all_imports }, out)
        }
        Command::Strip { dest, paths } => {
            let files = pipeline::discover(&paths)?;
            rewrite_all(&files, &dest, out, rewriter::strip)
        }
        Command::Dup { k, dest, paths } => {
            let files = pipeline::discover(&paths)?;
            rewrite_all(&files, &dest, out, |unit| rewriter::duplicate(unit, k as usize))
        }
        Command::Bench { exec, ks, paths } => {
            let cfg = exec.config()?;
            let ks: Vec<usize> = if ks.is_empty() {
                vec![1, 10, 100, 1000]
            } else {
                ks.into_iter().map(|k| k as usize).collect()
            };
            let files = pipeline::discover(&paths)?;
            let mut sources = Vec::new();
            for f in &files {
                sources.push((f.path.clone(), fs::read_to_string(&f.path)?));
            }
            writeln!(out, "{:>6}  {:>8}  {:>12}  {:>15}", "k", "tests", "total (s)", "per test (ms)")?;
            for k in ks {
                let (point, _) = pipeline::bench_point(&sources, k, &cfg, exec.options())?;
                writeln!(
                    out,
                    "{:>6}  {:>8}  {:>12.3}  {:>15.3}",
                    point.k,
                    point.tests,
                    point.total_ms / 1000.0,
                    point.per_test_ms
                )?;
            }
            Ok(EXIT_OK)
        }
    }
}

fn list(files: &[SourceFile], options: ExtractOptions, out: &mut dyn Write) -> Result<i32, UsageError> {
    let mut code = EXIT_OK;
    let mut count = 0;
    for file in files {
        let text = fs::read_to_string(&file.path)?;
        let unit = match scanner::scan_file(&file.path, &text) {
            Ok(unit) => unit,
            Err(e) => {
                writeln!(out, "{e}")?;
                code = reporter::EXIT_FAILURES;
                continue;
            }
        };
        for result in extractor::extract_file(&unit, options) {
            match result {
                Ok(test) => {
                    count += 1;
                    let d = &test.decl;
                    let mut flags = Vec::new();
                    if d.disabled {
                        flags.push("disabled".to_string());
                    }
                    if d.parameterized {
                        flags.push("parameterized".to_string());
                    }
                    if d.repeated > 1 {
                        flags.push(format!("repeated={}", d.repeated));
                    }
                    if !d.tags.is_empty() {
                        flags.push(format!("tags={}", d.tags.iter().cloned().collect::<Vec<_>>().join(",")));
                    }
                    let flags = if flags.is_empty() { String::new() } else { format!(" [{}]", flags.join(" ")) };
                    writeln!(
                        out,
                        "{}:{} {}{} -> {:?} line {}: {}",
                        file.path.display(),
                        d.line,
                        d.name,
                        flags,
                        test.target.kind,
                        test.target.start_line,
                        test.target.verbatim.lines().next().unwrap_or_default()
                    )?;
                }
                Err(e) => {
                    writeln!(out, "{e}")?;
                    code = reporter::EXIT_FAILURES;
                }
            }
        }
    }
    writeln!(out, "{count} inline tests")?;
    Ok(code)
}

fn rewrite_all(
    files: &[SourceFile],
    dest: &DestArgs,
    out: &mut dyn Write,
    rewrite: impl Fn(&scanner::SourceUnit) -> String,
) -> Result<i32, UsageError> {
    for file in files {
        let text = fs::read_to_string(&file.path)?;
        let unit = scanner::scan_file(&file.path, &text)?;
        let rewritten = rewrite(&unit);
        if dest.in_place {
            let mut backup = file.path.clone().into_os_string();
            backup.push(".orig");
            fs::write(Path::new(&backup), &text)?;
            fs::write(&file.path, rewritten)?;
        } else if let Some(dir) = &dest.out_dir {
            let target = dir.join(&file.relative);
            if let Some(parent) = target.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::write(target, rewritten)?;
        } else {
            out.write_all(rewritten.as_bytes())?;
        }
    }
    Ok(EXIT_OK)
}
