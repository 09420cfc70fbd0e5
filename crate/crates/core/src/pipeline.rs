//! File discovery and the end-to-end scan → extract → expand pipeline.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use walkdir::WalkDir;

use crate::extractor::ExtractOptions;
use crate::rewriter;
use crate::runner::{self, RunConfig, RunError, SuiteRun};
use crate::scanner;
use crate::synthesizer::{self, CollectError, FilePlan};

/// A discovered source file and its path relative to the argument it was
/// found under.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceFile {
    pub path: PathBuf,
    pub relative: PathBuf,
}

fn skipped_dir(name: &str) -> bool {
    name.starts_with('.') || name == "__pycache__"
}

/// Expands files and directories into `.py` files. Directory contents are
/// visited in sorted order.
pub fn discover(paths: &[PathBuf]) -> io::Result<Vec<SourceFile>> {
    let mut files = Vec::new();
    for root in paths {
        let meta = fs::metadata(root).map_err(|e| io::Error::new(e.kind(), format!("{}: {e}", root.display())))?;
        if meta.is_file() {
            files.push(SourceFile {
                path: root.clone(),
                relative: PathBuf::from(root.file_name().unwrap_or(root.as_os_str())),
            });
            continue;
        }
        let walker = WalkDir::new(root)
            .sort_by_file_name()
            .into_iter()
            .filter_entry(|e| e.depth() == 0 || !skipped_dir(&e.file_name().to_string_lossy()));
        for entry in walker {
            let entry = entry.map_err(io::Error::other)?;
            if entry.file_type().is_file() && entry.path().extension().is_some_and(|x| x == "py") {
                files.push(SourceFile {
                    path: entry.path().to_path_buf(),
                    relative: entry.path().strip_prefix(root).unwrap_or(entry.path()).to_path_buf(),
                });
            }
        }
    }
    Ok(files)
}

/// Reads and plans every file. Unreadable files become collection errors.
pub fn plan_files(files: &[SourceFile], options: ExtractOptions) -> Vec<FilePlan> {
    files
        .iter()
        .map(|f| match fs::read_to_string(&f.path) {
            Ok(text) => synthesizer::plan_source(&f.path, &text, options),
            Err(e) => FilePlan {
                origin: f.path.clone(),
                instances: Vec::new(),
                errors: vec![CollectError {
                    id: f.path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
                    file: f.path.clone(),
                    line: 0,
                    message: format!("cannot read {}: {e}", f.path.display()),
                }],
            },
        })
        .collect()
}

/// One row of the scaling table.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchPoint {
    pub k: usize,
    pub tests: usize,
    pub total_ms: f64,
    pub per_test_ms: f64,
}

/// Duplicates every inline test `k` times, then times extraction plus
/// execution of the resulting suite.
pub fn bench_point(
    sources: &[(PathBuf, String)],
    k: usize,
    cfg: &RunConfig,
    options: ExtractOptions,
) -> Result<(BenchPoint, SuiteRun), RunError> {
    let duplicated: Vec<(&Path, String)> = sources
        .iter()
        .map(|(path, text)| {
            let text = match scanner::scan_file(path, text) {
                Ok(unit) => rewriter::duplicate(&unit, k),
                Err(_) => text.clone(),
            };
            (path.as_path(), text)
        })
        .collect();
    let started = Instant::now();
    let plans: Vec<FilePlan> = duplicated
        .iter()
        .map(|(path, text)| synthesizer::plan_source(path, text, options))
        .collect();
    let run = runner::run_suite(&plans, cfg)?;
    let total_ms = started.elapsed().as_secs_f64() * 1000.0;
    let tests = run.outcomes.len();
    let point = BenchPoint {
        k,
        tests,
        total_ms,
        per_test_ms: if tests == 0 { 0.0 } else { total_ms / tests as f64 },
    };
    Ok((point, run))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn discovery_walks_sorted_and_skips_caches() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path();
        fs::create_dir_all(root.join("pkg/__pycache__")).unwrap();
        fs::create_dir_all(root.join(".hidden")).unwrap();
        for name in ["b.py", "a.py", "notes.txt", "pkg/c.py", "pkg/__pycache__/d.py", ".hidden/e.py"] {
            fs::write(root.join(name), "x = 1\n").unwrap();
        }
        let found: Vec<_> = discover(&[root.to_path_buf()])
            .unwrap()
            .into_iter()
            .map(|f| f.relative)
            .collect();
        assert_eq!(found, vec![PathBuf::from("a.py"), PathBuf::from("b.py"), PathBuf::from("pkg/c.py")]);
    }

    #[test]
    fn missing_path_is_an_error() {
        assert!(discover(&[PathBuf::from("/nonexistent/itest")]).is_err());
    }
}
