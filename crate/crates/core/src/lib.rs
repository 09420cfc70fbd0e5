//! Statement-level inline tests for Python source files.
//!
//! The pipeline runs in stages: [`scanner`] splits a file into logical
//! statements, [`extractor`] parses `Here(...)` chains and binds them to their
//! target statements, [`synthesizer`] expands them into test instances and
//! renders a standalone program per file, [`runner`] executes those programs
//! and [`reporter`] aggregates the outcomes. [`rewriter`] strips or
//! duplicates inline tests in source text.

pub mod cli;
pub mod extractor;
pub mod lexer;
pub mod pipeline;
pub mod reporter;
pub mod rewriter;
pub mod runner;
pub mod scanner;
pub mod synthesizer;
