//! Splits a source file into logical statements and finds inline-test chains.

use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexer::{self, LexError, Token, TokenKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScanError {
    #[error("{path}:{line}: unbalanced delimiter `{delimiter}`")]
    UnbalancedDelimiter {
        path: String,
        line: usize,
        delimiter: char,
    },
}

impl ScanError {
    pub fn line(&self) -> usize {
        match self {
            ScanError::UnbalancedDelimiter { line, .. } => *line,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StatementKind {
    Import,
    Assignment,
    IfHeader,
    WhileHeader,
    InlineTest,
    Other,
}

impl StatementKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StatementKind::Import => "IMPORT",
            StatementKind::Assignment => "ASSIGNMENT",
            StatementKind::IfHeader => "IF_HEADER",
            StatementKind::WhileHeader => "WHILE_HEADER",
            StatementKind::InlineTest => "INLINE_TEST",
            StatementKind::Other => "OTHER",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NewlineStyle {
    Lf,
    CrLf,
}

impl NewlineStyle {
    pub fn as_str(self) -> &'static str {
        match self {
            NewlineStyle::Lf => "\n",
            NewlineStyle::CrLf => "\r\n",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogicalStatement {
    /// Statement text from its first token to its last, without the
    /// indentation or the terminating newline.
    pub verbatim: String,
    pub start_line: usize,
    pub end_line: usize,
    pub indent: String,
    pub kind: StatementKind,
    /// Comments and blank lines preceding the statement.
    pub trivia: Range<usize>,
    /// Full physical lines of the statement, indentation and newline included.
    pub span: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceUnit {
    pub path: PathBuf,
    pub text: String,
    pub statements: Vec<LogicalStatement>,
    /// Trivia after the last statement.
    pub trailing: Range<usize>,
    pub newline_style: NewlineStyle,
}

impl SourceUnit {
    /// Reassembles the file from statement spans and trivia.
    pub fn reconstruct(&self) -> String {
        let mut out = String::with_capacity(self.text.len());
        for stmt in &self.statements {
            out.push_str(&self.text[stmt.trivia.clone()]);
            out.push_str(&self.text[stmt.span.clone()]);
        }
        out.push_str(&self.text[self.trailing.clone()]);
        out
    }

    /// File stem used for default test names.
    pub fn stem(&self) -> String {
        self.path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    }
}

const NON_ASSIGNMENT_LEADERS: &[&str] = &[
    "assert", "async", "await", "class", "def", "del", "elif", "else", "except", "finally", "for",
    "global", "if", "lambda", "nonlocal", "raise", "return", "try", "while", "with", "yield",
];

const ASSIGNMENT_OPS: &[&str] = &[
    "=", "+=", "-=", "*=", "/=", "//=", "%=", "**=", ">>=", "<<=", "&=", "|=", "^=", "@=",
];

fn classify(src: &str, tokens: &[Token]) -> StatementKind {
    let Some(first) = tokens.first() else {
        return StatementKind::Other;
    };
    if first.kind == TokenKind::Name {
        let word = first.text(src);
        if word == "Here" && tokens.get(1).is_some_and(|t| t.is_op(src, "(")) {
            return StatementKind::InlineTest;
        }
        match word {
            "import" | "from" => return StatementKind::Import,
            "if" | "elif" => return StatementKind::IfHeader,
            "while" => return StatementKind::WhileHeader,
            w if NON_ASSIGNMENT_LEADERS.contains(&w) => return StatementKind::Other,
            _ => {}
        }
    }
    let depths = lexer::depths(src, tokens);
    let assigns = tokens
        .iter()
        .zip(&depths)
        .any(|(t, &d)| d == 0 && t.kind == TokenKind::Op && ASSIGNMENT_OPS.contains(&t.text(src)));
    if assigns {
        StatementKind::Assignment
    } else {
        StatementKind::Other
    }
}

fn line_start(text: &str, offset: usize) -> usize {
    text[..offset].rfind('\n').map_or(0, |i| i + 1)
}

/// Decomposes `text` into logical statements.
pub fn scan_file(path: impl AsRef<Path>, text: &str) -> Result<SourceUnit, ScanError> {
    let path = path.as_ref();
    let tokens = lexer::tokenize(text).map_err(|e| match e {
        LexError::UnbalancedDelimiter { line, delimiter } => ScanError::UnbalancedDelimiter {
            path: path.display().to_string(),
            line,
            delimiter,
        },
    })?;

    let newline_style = match text.find('\n') {
        Some(i) if i > 0 && text.as_bytes()[i - 1] == b'\r' => NewlineStyle::CrLf,
        _ => NewlineStyle::Lf,
    };

    let mut statements = Vec::new();
    let mut cursor = 0usize;
    let mut current: Vec<Token> = Vec::new();
    for token in tokens {
        match token.kind {
            TokenKind::Newline => {
                let significant: Vec<&Token> = current
                    .iter()
                    .filter(|t| t.kind != TokenKind::Comment)
                    .collect();
                if let (Some(first), Some(last)) = (significant.first(), current.last()) {
                    let start = line_start(text, first.span.start);
                    let code: Vec<Token> = significant.iter().map(|t| (*t).clone()).collect();
                    let kind = classify(text, &code);
                    let first_stmt_token = current
                        .iter()
                        .position(|t| t.span.start >= start)
                        .expect("statement has a token on its first line");
                    let verbatim_start = current[first_stmt_token].span.start;
                    statements.push(LogicalStatement {
                        verbatim: text[verbatim_start..last.span.end].to_string(),
                        start_line: first.line,
                        end_line: token.line,
                        indent: text[start..first.span.start].to_string(),
                        kind,
                        trivia: cursor..start,
                        span: start..token.span.end,
                    });
                    cursor = token.span.end;
                }
                current.clear();
            }
            _ => current.push(token),
        }
    }

    Ok(SourceUnit {
        path: path.to_path_buf(),
        text: text.to_string(),
        statements,
        trailing: cursor..text.len(),
        newline_style,
    })
}

/// Indices of all inline-test statements, in file order.
pub fn find_inline_tests(unit: &SourceUnit) -> Vec<usize> {
    unit.statements
        .iter()
        .enumerate()
        .filter(|(_, s)| s.kind == StatementKind::InlineTest)
        .map(|(i, _)| i)
        .collect()
}
