//! Python bindings for the `itest` toolchain.
//!
//! ```python
//! import pyitest
//! report = pyitest.run(["src/"], jobs=4, tags=["regex"])
//! print(report.to_console())
//! ```

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::time::Duration;

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

use itest::extractor::{self, ExtractOptions};
use itest::pipeline;
use itest::reporter::{self, TestReport};
use itest::rewriter;
use itest::runner::{self, RunConfig, TestOutcome};
use itest::scanner;
use itest::synthesizer;

create_exception!(pyitest, ItestError, PyException);
create_exception!(pyitest, ScanError, ItestError);
create_exception!(pyitest, RunError, ItestError);

fn scan(path: &str, text: &str) -> PyResult<scanner::SourceUnit> {
    scanner::scan_file(path, text).map_err(|e| ScanError::new_err(e.to_string()))
}

/// A logical statement of a scanned file.
#[pyclass(frozen, get_all, module = "pyitest")]
struct Statement {
    kind: String,
    start_line: usize,
    end_line: usize,
    indent: String,
    verbatim: String,
}

#[pymethods]
impl Statement {
    fn __repr__(&self) -> String {
        format!("Statement({}, lines {}-{})", self.kind, self.start_line, self.end_line)
    }
}

/// A file split into logical statements.
#[pyclass(frozen, module = "pyitest")]
struct SourceUnit {
    inner: scanner::SourceUnit,
}

#[pymethods]
impl SourceUnit {
    #[new]
    #[pyo3(signature = (text, path = "<string>"))]
    fn new(text: &str, path: &str) -> PyResult<Self> {
        Ok(SourceUnit { inner: scan(path, text)? })
    }

    #[getter]
    fn path(&self) -> String {
        self.inner.path.display().to_string()
    }

    #[getter]
    fn statements(&self) -> Vec<Statement> {
        self.inner
            .statements
            .iter()
            .map(|s| Statement {
                kind: s.kind.as_str().to_string(),
                start_line: s.start_line,
                end_line: s.end_line,
                indent: s.indent.clone(),
                verbatim: s.verbatim.clone(),
            })
            .collect()
    }

    /// Indices into `statements` of the inline tests.
    fn inline_tests(&self) -> Vec<usize> {
        scanner::find_inline_tests(&self.inner)
    }

    fn reconstruct(&self) -> String {
        self.inner.reconstruct()
    }

    fn strip(&self) -> String {
        rewriter::strip(&self.inner)
    }

    fn duplicate(&self, k: usize) -> PyResult<String> {
        if k == 0 {
            return Err(PyValueError::new_err("k must be at least 1"));
        }
        Ok(rewriter::duplicate(&self.inner, k))
    }

    fn __len__(&self) -> usize {
        self.inner.statements.len()
    }
}

/// An extracted inline-test declaration and its target.
#[pyclass(frozen, get_all, module = "pyitest")]
struct Declaration {
    name: String,
    line: usize,
    disabled: bool,
    parameterized: bool,
    repeated: u32,
    tags: Vec<String>,
    givens: Vec<(String, String)>,
    oracles: Vec<String>,
    target_kind: String,
    target_line: usize,
    target: String,
    imports: Vec<String>,
}

#[pymethods]
impl Declaration {
    fn __repr__(&self) -> String {
        format!("Declaration({:?}, line {})", self.name, self.line)
    }
}

/// Extracts declarations from source text. Returns the declarations and the
/// messages of malformed tests.
#[pyfunction]
#[pyo3(signature = (text, path = "<string>", copy_all_imports = false))]
fn extract(text: &str, path: &str, copy_all_imports: bool) -> PyResult<(Vec<Declaration>, Vec<String>)> {
    let unit = scan(path, text)?;
    let mut decls = Vec::new();
    let mut errors = Vec::new();
    for result in extractor::extract_file(&unit, ExtractOptions { copy_all_imports }) {
        match result {
            Ok(t) => decls.push(Declaration {
                name: t.decl.name.clone(),
                line: t.decl.line,
                disabled: t.decl.disabled,
                parameterized: t.decl.parameterized,
                repeated: t.decl.repeated,
                tags: t.decl.tags.iter().cloned().collect(),
                givens: t.decl.givens.iter().map(|g| (g.name.clone(), g.value.clone())).collect(),
                oracles: t.decl.oracles.iter().map(|o| o.call_text()).collect(),
                target_kind: format!("{:?}", t.target.kind),
                target_line: t.target.start_line,
                target: t.target.verbatim.clone(),
                imports: t.imports.clone(),
            }),
            Err(e) => errors.push(e.to_string()),
        }
    }
    Ok((decls, errors))
}

/// Splits a branch header into its top-level `and`/`or` operands.
#[pyfunction]
fn split_conditions(header: &str) -> Vec<String> {
    extractor::split_conditions(header)
}

#[pyfunction]
#[pyo3(signature = (text, path = "<string>"))]
fn strip(text: &str, path: &str) -> PyResult<String> {
    Ok(rewriter::strip(&scan(path, text)?))
}

#[pyfunction]
#[pyo3(signature = (text, k, path = "<string>"))]
fn duplicate(text: &str, k: usize, path: &str) -> PyResult<String> {
    SourceUnit { inner: scan(path, text)? }.duplicate(k)
}

/// The Python program that `run` would execute for this file.
#[pyfunction]
#[pyo3(signature = (text, path = "<string>", copy_all_imports = false))]
fn render_program(text: &str, path: &str, copy_all_imports: bool) -> String {
    let plan = synthesizer::plan_source(path, text, ExtractOptions { copy_all_imports });
    synthesizer::render_program(&plan.instances, PathBuf::from(path)).source_text
}

/// One reported result.
#[pyclass(frozen, get_all, module = "pyitest")]
struct Outcome {
    id: String,
    file: String,
    line: usize,
    status: String,
    duration_ms: f64,
    expected: Option<String>,
    observed: Option<String>,
    message: Option<String>,
}

#[pymethods]
impl Outcome {
    fn __repr__(&self) -> String {
        format!("Outcome({:?}, {})", self.id, self.status)
    }
}

impl From<&TestOutcome> for Outcome {
    fn from(o: &TestOutcome) -> Self {
        Outcome {
            id: o.id.clone(),
            file: o.file.clone(),
            line: o.line,
            status: o.status.as_str().to_string(),
            duration_ms: o.duration_ms,
            expected: o.expected.clone(),
            observed: o.observed.clone(),
            message: o.message.clone(),
        }
    }
}

/// A finished run.
#[pyclass(frozen, module = "pyitest")]
struct Report {
    inner: TestReport,
}

#[pymethods]
impl Report {
    #[getter]
    fn outcomes(&self) -> Vec<Outcome> {
        self.inner.outcomes.iter().map(Outcome::from).collect()
    }

    /// Counts by status name.
    #[getter]
    fn counts(&self) -> std::collections::BTreeMap<&'static str, usize> {
        let c = &self.inner.counts;
        [("pass", c.pass), ("fail", c.fail), ("error", c.error), ("skipped", c.skipped), ("timeout", c.timeout)]
            .into_iter()
            .collect()
    }

    #[getter]
    fn exit_code(&self) -> i32 {
        self.inner.exit_code()
    }

    #[getter]
    fn suite_wall_ms(&self) -> f64 {
        self.inner.suite_wall_ms
    }

    fn to_json(&self) -> String {
        reporter::render_json(&self.inner)
    }

    fn to_console(&self) -> String {
        reporter::render_console(&self.inner)
    }

    fn to_html(&self) -> String {
        reporter::render_html(&self.inner)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        reporter::parse_json(text)
            .map(|inner| Report { inner })
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn __len__(&self) -> usize {
        self.inner.outcomes.len()
    }
}

/// Discovers, extracts and runs every inline test under `paths`.
#[pyfunction]
#[pyo3(signature = (paths, jobs = None, timeout = 60.0, tags = None, name = None, interpreter = None, copy_all_imports = false))]
#[allow(clippy::too_many_arguments)]
fn run(
    py: Python<'_>,
    paths: Vec<PathBuf>,
    jobs: Option<usize>,
    timeout: f64,
    tags: Option<Vec<String>>,
    name: Option<String>,
    interpreter: Option<String>,
    copy_all_imports: bool,
) -> PyResult<Report> {
    if !(timeout > 0.0 && timeout.is_finite()) {
        return Err(PyValueError::new_err("timeout must be a positive number of seconds"));
    }
    let mut cfg = RunConfig {
        interpreter: runner::resolve_interpreter(interpreter.as_deref()),
        timeout: Duration::from_secs_f64(timeout),
        tag_filter: tags.filter(|t| !t.is_empty()).map(|t| t.into_iter().collect::<BTreeSet<_>>()),
        name_filter: name,
        ..RunConfig::default()
    };
    if let Some(jobs) = jobs {
        cfg.jobs = jobs;
    }
    cfg.validate().map_err(|e| PyValueError::new_err(e.to_string()))?;
    let options = ExtractOptions { copy_all_imports };
    py.detach(|| -> Result<Report, String> {
        let files = pipeline::discover(&paths).map_err(|e| e.to_string())?;
        let plans = pipeline::plan_files(&files, options);
        let run = runner::run_suite(&plans, &cfg).map_err(|e| e.to_string())?;
        Ok(Report {
            inner: reporter::summarize(&run.outcomes).with_run(&run, &cfg, None),
        })
    })
    .map_err(RunError::new_err)
}

#[pymodule]
fn pyitest(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("ItestError", py.get_type::<ItestError>())?;
    m.add("ScanError", py.get_type::<ScanError>())?;
    m.add("RunError", py.get_type::<RunError>())?;
    m.add("SHIM_MODULE", extractor::SHIM_MODULE)?;
    m.add_class::<SourceUnit>()?;
    m.add_class::<Statement>()?;
    m.add_class::<Declaration>()?;
    m.add_class::<Outcome>()?;
    m.add_class::<Report>()?;
    m.add_function(wrap_pyfunction!(extract, m)?)?;
    m.add_function(wrap_pyfunction!(split_conditions, m)?)?;
    m.add_function(wrap_pyfunction!(strip, m)?)?;
    m.add_function(wrap_pyfunction!(duplicate, m)?)?;
    m.add_function(wrap_pyfunction!(render_program, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
