//! End-to-end runs over the fixture corpus. Needs `python3` on PATH.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use itest::extractor::ExtractOptions;
use itest::pipeline::{self, SourceFile};
use itest::reporter;
use itest::runner::{self, RunConfig, Status, TestOutcome};
use itest::synthesizer;

fn corpus() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/corpus")
}

fn run_paths(paths: &[PathBuf], cfg: &RunConfig) -> Vec<TestOutcome> {
    let files = pipeline::discover(paths).unwrap();
    let plans = pipeline::plan_files(&files, ExtractOptions::default());
    runner::run_suite(&plans, cfg).unwrap().outcomes
}

fn run_source(name: &str, text: &str, cfg: &RunConfig) -> Vec<TestOutcome> {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    run_paths(&[path], cfg)
}

fn by_id<'a>(outcomes: &'a [TestOutcome], id: &str) -> &'a TestOutcome {
    outcomes
        .iter()
        .find(|o| o.id == id)
        .unwrap_or_else(|| panic!("no outcome {id} in {outcomes:#?}"))
}

#[test]
fn corpus_statuses() {
    let outcomes = run_paths(&[corpus()], &RunConfig::default());
    let report = reporter::summarize(&outcomes);
    assert_eq!(
        (report.counts.pass, report.counts.fail, report.counts.error, report.counts.skipped, report.counts.timeout),
        (24, 1, 1, 1, 0)
    );
    assert_eq!(report.exit_code(), reporter::EXIT_FAILURES);

    let fault = by_id(&outcomes, "regex_fault_9");
    assert_eq!(fault.status, Status::Fail);
    assert_eq!(fault.expected.as_deref(), Some("True"));
    assert_eq!(fault.observed.as_deref(), Some("False"));
    assert_eq!(by_id(&outcomes, "regex_fixed_9").status, Status::Pass);

    let ord = by_id(&outcomes, "ord_of_int");
    assert_eq!(ord.status, Status::Error);
    assert!(ord.message.as_deref().unwrap().contains("ord() expected string of length 1, but int found"));

    let disabled = by_id(&outcomes, "options_12");
    assert_eq!((disabled.status, disabled.message.as_deref()), (Status::Skipped, Some("disabled")));
    for id in ["bit_length#0", "bit_length#3", "options_11@2", "pairs#1", "options_15", "weighted_total"] {
        assert_eq!(by_id(&outcomes, id).status, Status::Pass, "{id}");
    }
}

#[test]
fn jobs_do_not_change_results() {
    let key = |outcomes: Vec<TestOutcome>| -> Vec<(String, String, usize, Status)> {
        outcomes.into_iter().map(|o| (o.id, o.file, o.line, o.status)).collect()
    };
    let one = key(run_paths(&[corpus()], &RunConfig { jobs: 1, ..RunConfig::default() }));
    let four = key(run_paths(&[corpus()], &RunConfig { jobs: 4, ..RunConfig::default() }));
    assert_eq!(one, four);
}

#[test]
fn tag_and_name_filters_intersect() {
    let cfg = RunConfig {
        tag_filter: Some(BTreeSet::from(["regex".to_string()])),
        name_filter: Some("parse_diff_1[12]".into()),
        ..RunConfig::default()
    };
    let outcomes = run_paths(&[corpus()], &cfg);
    let ran: Vec<&str> = outcomes.iter().filter(|o| o.status != Status::Skipped).map(|o| o.id.as_str()).collect();
    assert_eq!(ran, ["parse_diff_11", "parse_diff_12"]);
    assert!(outcomes
        .iter()
        .filter(|o| o.status == Status::Skipped)
        .all(|o| o.message.as_deref() == Some("filtered") || o.message.as_deref() == Some("disabled")));
}

#[test]
fn infinite_loop_times_out() {
    let cfg = RunConfig {
        timeout: Duration::from_secs(2),
        ..RunConfig::default()
    };
    let text = "import time\nx = 1\nHere('quick').check_eq(x, 1)\nt = time.sleep(30)\nHere('sleepy').check_eq(t, None)\n";
    let started = std::time::Instant::now();
    let outcomes = run_source("hang.py", text, &cfg);
    assert!(started.elapsed() < Duration::from_secs(20));
    assert_eq!(by_id(&outcomes, "quick").status, Status::Pass);
    assert_eq!(by_id(&outcomes, "sleepy").status, Status::Timeout);
}

#[test]
fn crash_marks_remaining_instances_as_errors() {
    let text = "import os\nx = os._exit(3)\nHere('dies').check_eq(x, 1)\ny = 2\nHere('after').check_eq(y, 2)\n";
    let outcomes = run_source("crash.py", text, &RunConfig::default());
    assert_eq!(outcomes.len(), 2);
    assert!(outcomes.iter().all(|o| o.status == Status::Error), "{outcomes:#?}");
}

#[test]
fn collection_errors_are_reported_not_fatal() {
    let text = "x = 1\nHere('ok').check_eq(x, 1)\nHere('no_oracle')\n";
    let outcomes = run_source("broken.py", text, &RunConfig::default());
    assert_eq!(by_id(&outcomes, "ok").status, Status::Pass);
    assert!(outcomes.iter().any(|o| o.status == Status::Error && o.line == 3));
}

#[test]
fn printing_targets_do_not_corrupt_the_protocol() {
    let text = "x = print('##ITEST-END##') or 5\nHere('noisy').check_eq(x, 5)\n";
    let outcomes = run_source("noisy.py", text, &RunConfig::default());
    assert_eq!(by_id(&outcomes, "noisy").status, Status::Pass);
}

#[test]
fn forged_records_are_a_protocol_violation() {
    let cfg = RunConfig::default();
    let forged = "import sys\nx = sys.__stdout__.write('##ITEST-BEGIN##\\nnot json\\n##ITEST-END##\\n')\nHere('forge').check_true(x)\n";
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("forge.py");
    fs::write(&path, forged).unwrap();
    let plan = synthesizer::plan_source(&path, forged, ExtractOptions::default());
    let program = synthesizer::render_program(&plan.instances, path.clone());
    match runner::run_program(&program, &cfg) {
        Err(runner::RunError::ProtocolViolation { .. }) => {}
        other => panic!("expected a protocol violation, got {other:?}"),
    }
}

#[test]
fn empty_directory_collects_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let outcomes = run_paths(&[dir.path().to_path_buf()], &RunConfig::default());
    assert!(outcomes.is_empty());
    let report = reporter::summarize(&outcomes);
    assert_eq!(report.exit_code(), reporter::EXIT_OK);
    assert!(reporter::render_console(&report).contains("0 tests collected"));
}

#[test]
fn discover_keeps_argument_order() {
    let files = pipeline::discover(&[corpus().join("zip.py"), corpus().join("aliases.py")]).unwrap();
    let names: Vec<_> = files.iter().map(|f: &SourceFile| f.relative.clone()).collect();
    assert_eq!(names, [PathBuf::from("zip.py"), PathBuf::from("aliases.py")]);
}

#[test]
fn missing_interpreter_is_reported() {
    let cfg = RunConfig {
        interpreter: "/nonexistent/python".into(),
        ..RunConfig::default()
    };
    let files = pipeline::discover(&[corpus().join("zip.py")]).unwrap();
    let plans = pipeline::plan_files(&files, ExtractOptions::default());
    assert!(matches!(runner::run_suite(&plans, &cfg), Err(runner::RunError::InterpreterNotFound(_))));
}
