//! Expands extracted tests into executable instances and renders one
//! standalone Python program per source file.
//!
//! The generated program reports through a line protocol on its standard
//! output: every record is a single-line JSON object, and all records sit
//! between the [`BEGIN_SENTINEL`] and [`END_SENTINEL`] lines. Anything the code
//! under test prints is redirected to standard error while an instance runs.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extractor::{self, ExtractOptions, ExtractedTest, OracleKind};
use crate::lexer::{self, TokenKind};
use crate::scanner::{self, SourceUnit};

pub const BEGIN_SENTINEL: &str = "##ITEST-BEGIN##";
pub const END_SENTINEL: &str = "##ITEST-END##";
pub const RESERVED_PREFIX: &str = "_itest_";
/// Longest observed/expected representation kept in a record.
pub const REPR_LIMIT: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SynthError {
    #[error("{file}:{line}: Group({index}) is out of range, the header has {operands} condition(s)")]
    GroupIndexOutOfRange {
        file: String,
        line: usize,
        index: usize,
        operands: usize,
    },
    #[error("{file}:{line}: Group is only valid when the target is an if/while header")]
    GroupOnNonHeader { file: String, line: usize },
    #[error("{file}:{line}: identifier `{name}` uses the reserved prefix `{RESERVED_PREFIX}`")]
    ReservedIdentifier {
        file: String,
        line: usize,
        name: String,
    },
}

/// What an instance executes in place of its target statement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TargetCode {
    /// The target statement, verbatim.
    Statement(String),
    /// Condition operands of a branch header, bound to `_itest_group_<i>`.
    Groups(Vec<(usize, String)>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedOracle {
    pub observed: String,
    pub expected: String,
    pub call_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestInstance {
    pub id: String,
    pub name: String,
    pub file: PathBuf,
    pub line: usize,
    pub row: Option<usize>,
    pub rep: Option<u32>,
    pub tags: BTreeSet<String>,
    pub bindings: Vec<(String, String)>,
    pub target: TargetCode,
    pub oracles: Vec<RenderedOracle>,
    pub imports: Vec<String>,
    pub skipped: bool,
    pub skip_reason: Option<String>,
}

impl TestInstance {
    pub fn target_text(&self) -> String {
        match &self.target {
            TargetCode::Statement(text) => text.clone(),
            TargetCode::Groups(groups) => groups
                .iter()
                .map(|(i, text)| format!("{RESERVED_PREFIX}group_{i} = bool({text})"))
                .collect::<Vec<_>>()
                .join("\n"),
        }
    }

    pub fn oracle_texts(&self) -> Vec<String> {
        self.oracles
            .iter()
            .map(|o| format!("({}) == ({})", o.observed, o.expected))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedProgram {
    pub source_text: String,
    pub instance_ids: Vec<String>,
    /// Inline-test line of each entry of `instance_ids`.
    pub instance_lines: Vec<usize>,
    pub origin: PathBuf,
}

/// Replaces every `Group(i)` call in `expr` with its reserved binding name.
fn substitute_groups(expr: &str) -> String {
    let Ok(tokens) = lexer::code_tokens(expr) else {
        return expr.to_string();
    };
    let mut out = String::with_capacity(expr.len());
    let mut copied = 0;
    let mut i = 0;
    while i < tokens.len() {
        let t = &tokens[i];
        let attribute = i > 0 && tokens[i - 1].is_op(expr, ".");
        if t.is_name(expr, "Group") && !attribute {
            if let Some([open, index, close]) = tokens.get(i + 1..i + 4) {
                if open.is_op(expr, "(") && index.kind == TokenKind::Number && close.is_op(expr, ")") {
                    out.push_str(&expr[copied..t.span.start]);
                    let _ = write!(out, "{RESERVED_PREFIX}group_{}", index.text(expr));
                    copied = close.span.end;
                    i += 4;
                    continue;
                }
            }
        }
        i += 1;
    }
    out.push_str(&expr[copied..]);
    out
}

fn reserved_identifier(texts: &[&str]) -> Option<String> {
    texts.iter().find_map(|text| {
        lexer::code_tokens(text).ok()?.into_iter().find_map(|t| {
            let word = t.text(text);
            (t.kind == TokenKind::Name && word.starts_with(RESERVED_PREFIX)).then(|| word.to_string())
        })
    })
}

/// Block openers such as `for x in xs:` need a body to be executable.
fn executable_statement(verbatim: &str) -> String {
    let Ok(tokens) = lexer::code_tokens(verbatim) else {
        return verbatim.to_string();
    };
    match tokens.last() {
        Some(last) if last.is_op(verbatim, ":") => format!("{} pass", &verbatim[..last.span.end]),
        _ => verbatim.to_string(),
    }
}

type Bindings = Vec<(String, String)>;

/// Expands one extracted test into its instances: one per parameter row,
/// times the repeat count.
pub fn expand(test: &ExtractedTest) -> Result<Vec<TestInstance>, SynthError> {
    let decl = &test.decl;
    let target = &test.target;
    let file = decl.file.display().to_string();

    let mut texts: Vec<&str> = vec![&target.verbatim];
    for given in &decl.givens {
        texts.push(&given.name);
        texts.push(&given.value);
    }
    for oracle in &decl.oracles {
        texts.push(&oracle.lhs);
        texts.extend(oracle.rhs.as_deref());
    }
    if let Some(name) = reserved_identifier(&texts) {
        return Err(SynthError::ReservedIdentifier { file, line: decl.line, name });
    }

    let target_code = if decl.group_refs.is_empty() {
        if target.kind.is_header() {
            TargetCode::Groups(Vec::new())
        } else {
            TargetCode::Statement(executable_statement(&target.verbatim))
        }
    } else {
        if !target.kind.is_header() {
            return Err(SynthError::GroupOnNonHeader { file, line: decl.line });
        }
        let operands = &target.condition_operands;
        let mut groups = Vec::new();
        for &index in &decl.group_refs {
            let text = operands.get(index).ok_or_else(|| SynthError::GroupIndexOutOfRange {
                file: file.clone(),
                line: decl.line,
                index,
                operands: operands.len(),
            })?;
            groups.push((index, text.clone()));
        }
        TargetCode::Groups(groups)
    };

    let oracles: Vec<RenderedOracle> = decl
        .oracles
        .iter()
        .map(|o| RenderedOracle {
            observed: substitute_groups(&o.lhs),
            expected: match o.kind {
                OracleKind::Eq => substitute_groups(o.expected_expr()),
                _ => o.expected_expr().to_string(),
            },
            call_text: o.call_text(),
        })
        .collect();

    // Row-wise zip of the given lists; a plain test is a single row.
    let rows: Vec<Option<(usize, Bindings)>> = if decl.parameterized {
        let columns: Vec<Vec<String>> = decl
            .givens
            .iter()
            .map(|g| extractor::list_elements(&g.value).unwrap_or_default())
            .collect();
        let len = columns.first().map_or(0, Vec::len);
        (0..len)
            .map(|row| {
                let bindings = decl
                    .givens
                    .iter()
                    .zip(&columns)
                    .map(|(g, col)| (g.name.clone(), col[row].clone()))
                    .collect();
                Some((row, bindings))
            })
            .collect()
    } else {
        vec![None]
    };

    let mut instances = Vec::with_capacity(rows.len() * decl.repeated as usize);
    for row in rows {
        for rep in 0..decl.repeated {
            let mut id = decl.name.clone();
            let (row_index, bindings) = match &row {
                Some((i, b)) => {
                    let _ = write!(id, "#{i}");
                    (Some(*i), b.clone())
                }
                None => (
                    None,
                    decl.givens.iter().map(|g| (g.name.clone(), g.value.clone())).collect(),
                ),
            };
            let rep_index = (decl.repeated > 1).then_some(rep);
            if let Some(rep) = rep_index {
                let _ = write!(id, "@{rep}");
            }
            instances.push(TestInstance {
                id,
                name: decl.name.clone(),
                file: decl.file.clone(),
                line: decl.line,
                row: row_index,
                rep: rep_index,
                tags: decl.tags.clone(),
                bindings,
                target: target_code.clone(),
                oracles: oracles.clone(),
                imports: test.imports.clone(),
                skipped: decl.disabled,
                skip_reason: decl.disabled.then(|| "disabled".to_string()),
            });
        }
    }
    Ok(instances)
}

fn py_str(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

const PRELUDE: &str = r#"import json as _itest_json
import sys as _itest_sys
import time as _itest_time

_itest_out = _itest_sys.stdout
_ITEST_REPR_LIMIT = @LIMIT@


class _ItestFailure(Exception):
    def __init__(self, expected, observed, message):
        Exception.__init__(self, message)
        self.expected = expected
        self.observed = observed


def _itest_repr(value):
    try:
        text = repr(value)
    except BaseException as exc:
        text = "<unrepresentable %s: %s>" % (type(value).__name__, exc)
    if len(text) > _ITEST_REPR_LIMIT:
        text = text[:_ITEST_REPR_LIMIT] + "...<truncated>"
    return text


def _itest_check(observed, expected, message):
    if not (observed == expected):
        raise _ItestFailure(_itest_repr(expected), _itest_repr(observed), message)


def _itest_emit(record):
    _itest_out.write(_itest_json.dumps(record) + "\n")
    _itest_out.flush()


def _itest_run(ident, file, line, case):
    record = {"id": ident, "file": file, "line": line}
    _itest_sys.stdout = _itest_sys.stderr
    start = _itest_time.perf_counter()
    try:
        case()
        record["status"] = "pass"
    except _ItestFailure as failure:
        record["status"] = "fail"
        record["expected"] = failure.expected
        record["observed"] = failure.observed
        record["message"] = str(failure)
    except BaseException as exc:
        record["status"] = "error"
        record["message"] = "%s: %s" % (type(exc).__name__, exc)
    finally:
        elapsed = _itest_time.perf_counter() - start
        _itest_sys.stdout = _itest_out
    record["duration_ms"] = elapsed * 1000.0
    _itest_emit(record)


def _itest_skip(ident, file, line, reason):
    _itest_emit({"id": ident, "file": file, "line": line, "status": "skipped",
                 "duration_ms": 0.0, "message": reason})
"#;

/// Renders all `instances` into one program for the source file `origin`.
pub fn render_program(instances: &[TestInstance], origin: impl AsRef<Path>) -> GeneratedProgram {
    let origin = origin.as_ref();
    let mut src = String::new();
    let _ = writeln!(src, "# Generated by itest from {}. Do not edit.", origin.display());
    src.push_str(&PRELUDE.replace("@LIMIT@", &REPR_LIMIT.to_string()));

    // Star imports are only legal at module level.
    let mut hoisted: Vec<&str> = Vec::new();
    for instance in instances {
        for import in &instance.imports {
            if is_star_import(import) && !hoisted.contains(&import.as_str()) {
                hoisted.push(import);
            }
        }
    }
    for import in hoisted {
        let _ = write!(src, "\ntry:\n    {import}\nexcept BaseException:\n    pass\n");
    }

    let mut calls = String::new();
    for (n, instance) in instances.iter().enumerate() {
        let file = py_str(&instance.file.display().to_string());
        let id = py_str(&instance.id);
        if instance.skipped {
            let reason = py_str(instance.skip_reason.as_deref().unwrap_or("skipped"));
            let _ = writeln!(calls, "_itest_skip({id}, {file}, {}, {reason})", instance.line);
            continue;
        }
        let _ = write!(src, "\n\ndef {RESERVED_PREFIX}case_{n}():\n");
        for import in instance.imports.iter().filter(|i| !is_star_import(i)) {
            let _ = writeln!(src, "    {import}");
        }
        for (name, value) in &instance.bindings {
            let _ = writeln!(src, "    {name} = {value}");
        }
        match &instance.target {
            TargetCode::Statement(text) => {
                let _ = writeln!(src, "    {text}");
            }
            TargetCode::Groups(groups) => {
                for (i, text) in groups {
                    let _ = writeln!(src, "    {RESERVED_PREFIX}group_{i} = bool({text})");
                }
            }
        }
        for oracle in &instance.oracles {
            let message = format!(
                "{}:{}: {} failed",
                instance.file.display(),
                instance.line,
                oracle.call_text
            );
            let _ = writeln!(
                src,
                "    _itest_check(({}), ({}), {})",
                oracle.observed,
                oracle.expected,
                py_str(&message)
            );
        }
        src.push_str("    pass\n");
        let _ = writeln!(calls, "_itest_run({id}, {file}, {}, {RESERVED_PREFIX}case_{n})", instance.line);
    }

    let _ = write!(src, "\n\n_itest_out.write({}+ \"\\n\")\n", py_str(BEGIN_SENTINEL));
    src.push_str(&calls);
    let _ = writeln!(src, "_itest_out.write({}+ \"\\n\")", py_str(END_SENTINEL));
    src.push_str("_itest_out.flush()\n");

    GeneratedProgram {
        source_text: src,
        instance_ids: instances.iter().map(|i| i.id.clone()).collect(),
        instance_lines: instances.iter().map(|i| i.line).collect(),
        origin: origin.to_path_buf(),
    }
}

fn is_star_import(import: &str) -> bool {
    import.starts_with("from") && import.trim_end().ends_with('*')
}

/// A problem that kept one inline test (or a whole file) from being planned.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollectError {
    pub id: String,
    pub file: PathBuf,
    pub line: usize,
    pub message: String,
}

/// Everything needed to run the inline tests of one source file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilePlan {
    pub origin: PathBuf,
    pub instances: Vec<TestInstance>,
    pub errors: Vec<CollectError>,
}

impl FilePlan {
    pub fn total(&self) -> usize {
        self.instances.len() + self.errors.len()
    }
}

/// Plans an already scanned unit.
pub fn plan_unit(unit: &SourceUnit, options: ExtractOptions) -> FilePlan {
    let stem = unit.stem();
    let mut instances = Vec::new();
    let mut errors = Vec::new();
    let indices = scanner::find_inline_tests(unit);
    for (result, index) in extractor::extract_file(unit, options).into_iter().zip(indices) {
        let line = unit.statements[index].start_line;
        let expanded = result
            .map_err(|e| (format!("{stem}_{line}"), e.to_string()))
            .and_then(|test| expand(&test).map_err(|e| (test.decl.name.clone(), e.to_string())));
        match expanded {
            Ok(mut list) => instances.append(&mut list),
            Err((id, message)) => errors.push(CollectError {
                id,
                file: unit.path.clone(),
                line,
                message,
            }),
        }
    }
    FilePlan {
        origin: unit.path.clone(),
        instances,
        errors,
    }
}

/// Scans and plans a source file given its text.
pub fn plan_source(path: impl AsRef<Path>, text: &str, options: ExtractOptions) -> FilePlan {
    let path = path.as_ref();
    match scanner::scan_file(path, text) {
        Ok(unit) => plan_unit(&unit, options),
        Err(e) => {
            let stem = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            FilePlan {
                origin: path.to_path_buf(),
                instances: Vec::new(),
                errors: vec![CollectError {
                    id: stem,
                    file: path.to_path_buf(),
                    line: e.line(),
                    message: e.to_string(),
                }],
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scanner::scan_file;

    fn extracted(text: &str) -> Vec<ExtractedTest> {
        let unit = scan_file("zip.py", text).unwrap();
        extractor::extract_file(&unit, ExtractOptions::default())
            .into_iter()
            .map(Result::unwrap)
            .collect()
    }

    #[test]
    fn parameterized_rows_zip() {
        let tests = extracted("y = x * 2\nHere(parameterized=True).given(x, [1, 2]).given(z, ['a', 'b']).check_eq(y, x * 2)\n");
        let instances = expand(&tests[0]).unwrap();
        assert_eq!(instances.len(), 2);
        assert_eq!(instances[0].id, "zip_2#0");
        assert_eq!(instances[1].bindings, vec![("x".into(), "2".into()), ("z".into(), "'b'".into())]);
    }

    #[test]
    fn repetition_keeps_bindings() {
        let tests = extracted("y = x\nHere(repeated=3).given(x, 1).check_eq(y, 1)\n");
        let instances = expand(&tests[0]).unwrap();
        assert_eq!(instances.len(), 3);
        assert_eq!(instances[2].id, "zip_2@2");
        assert!(instances.iter().all(|i| i.bindings == instances[0].bindings));
    }

    #[test]
    fn parameterized_and_repeated_multiply() {
        let tests = extracted("y = x\nHere(parameterized=True, repeated=2).given(x, [1, 2, 3]).check_eq(y, x)\n");
        let ids: Vec<_> = expand(&tests[0]).unwrap().into_iter().map(|i| i.id).collect();
        assert_eq!(ids, vec!["zip_2#0@0", "zip_2#0@1", "zip_2#1@0", "zip_2#1@1", "zip_2#2@0", "zip_2#2@1"]);
    }

    #[test]
    fn disabled_is_one_skipped_instance() {
        let tests = extracted("y = 1\nHere(disabled=True).check_eq(y, 1)\n");
        let instances = expand(&tests[0]).unwrap();
        assert_eq!(instances.len(), 1);
        assert!(instances[0].skipped);
    }

    #[test]
    fn group_errors() {
        let tests = extracted("if a and b:\n    Here().check_true(Group(2))\n    pass\n");
        assert!(matches!(
            expand(&tests[0]),
            Err(SynthError::GroupIndexOutOfRange { index: 2, operands: 2, .. })
        ));
        let tests = extracted("x = 1\nHere().check_true(Group(0))\n");
        assert!(matches!(expand(&tests[0]), Err(SynthError::GroupOnNonHeader { .. })));
    }

    #[test]
    fn reserved_prefix_is_rejected() {
        let tests = extracted("x = _itest_out\nHere().check_true(x)\n");
        assert!(matches!(expand(&tests[0]), Err(SynthError::ReservedIdentifier { .. })));
    }

    #[test]
    fn group_substitution() {
        assert_eq!(substitute_groups("Group(1)"), "_itest_group_1");
        assert_eq!(substitute_groups("not Group(0) and m.Group(1)"), "not _itest_group_0 and m.Group(1)");
    }

    #[test]
    fn target_is_rendered_verbatim() {
        let target = "dosdate = (dt[0] - 1980) << 9 | dt[1] << 5 | dt[2]";
        let tests = extracted(&format!("{target}\nHere().given(dt, (1980, 1, 25, 17, 13, 14)).check_eq(dosdate, 57)\n"));
        let instances = expand(&tests[0]).unwrap();
        let program = render_program(&instances, "zip.py");
        assert!(program.source_text.contains(&format!("    {target}\n")));
        assert!(program.source_text.contains("    dt = (1980, 1, 25, 17, 13, 14)\n"));
        assert!(program.source_text.contains("_itest_check((dosdate), (57), "));
        assert_eq!(program.instance_ids, vec!["zip_2"]);
        assert!(!program.source_text.contains("import inline"));
    }

    #[test]
    fn header_operands_are_bound_not_executed() {
        let tests = extracted(
            "import re\nif gen and re.match('^{0-9A-F-}{36}$', orig):\n    Here().given(orig, 'x').check_true(Group(1))\n    pass\n",
        );
        let instances = expand(&tests[0]).unwrap();
        assert_eq!(instances[0].imports, vec!["import re"]);
        let program = render_program(&instances, "zip.py");
        assert!(program
            .source_text
            .contains("    _itest_group_1 = bool(re.match('^{0-9A-F-}{36}$', orig))\n"));
        assert!(!program.source_text.contains("    if gen"));
        assert!(program.source_text.contains("_itest_check((_itest_group_1), (True), "));
    }

    #[test]
    fn true_and_eq_true_render_identically() {
        let a = expand(&extracted("x = 1\nHere('t').check_true(x)\n")[0]).unwrap();
        let b = expand(&extracted("x = 1\nHere('t').check_eq(x, True)\n")[0]).unwrap();
        let strip_message = |p: GeneratedProgram| {
            p.source_text
                .lines()
                .map(|l| l.split("\"zip.py:2:").next().unwrap().to_string())
                .collect::<Vec<_>>()
        };
        assert_eq!(strip_message(render_program(&a, "zip.py")), strip_message(render_program(&b, "zip.py")));
    }

    #[test]
    fn block_opener_targets_get_a_body() {
        assert_eq!(executable_statement("for i in range(3):  # loop"), "for i in range(3): pass");
        assert_eq!(executable_statement("x = {'a': 1}"), "x = {'a': 1}");
    }

    #[test]
    fn plan_records_collection_errors() {
        let plan = plan_source("m.py", "Here().check_true(1)\nx = 1\nHere().given(a, 1)\n", ExtractOptions::default());
        assert!(plan.instances.is_empty());
        assert_eq!(plan.errors.len(), 2);
        assert_eq!(plan.errors[0].id, "m_1");
        let plan = plan_source("m.py", "x = (\n", ExtractOptions::default());
        assert_eq!(plan.errors.len(), 1);
    }
}
