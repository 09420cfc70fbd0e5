//! Turns inline-test chain statements into structured declarations and binds
//! each one to its target statement.

use std::collections::{BTreeSet, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexer::{self, is_keyword, Token, TokenKind};
use crate::scanner::{LogicalStatement, SourceUnit, StatementKind};

/// Module providing the production no-op `Here`/`Group`. Imports of it are
/// never copied into generated programs.
pub const SHIM_MODULE: &str = "inline";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExtractError {
    #[error("{file}:{line}: malformed inline test: {reason}")]
    MalformedChain {
        file: String,
        line: usize,
        reason: String,
    },
    #[error("{file}:{line}: inline test has no check_eq/check_true/check_false oracle")]
    NoOracle { file: String, line: usize },
    #[error("{file}:{line}: bad parameterization: {reason}")]
    BadParameterization {
        file: String,
        line: usize,
        reason: String,
    },
    #[error("{file}:{line}: inline test has no target statement")]
    NoTarget { file: String, line: usize },
}

impl ExtractError {
    pub fn line(&self) -> usize {
        match self {
            ExtractError::MalformedChain { line, .. }
            | ExtractError::NoOracle { line, .. }
            | ExtractError::BadParameterization { line, .. }
            | ExtractError::NoTarget { line, .. } => *line,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Given {
    pub name: String,
    pub value: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum OracleKind {
    Eq,
    True,
    False,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Oracle {
    pub kind: OracleKind,
    pub lhs: String,
    /// Only present for `Eq`.
    pub rhs: Option<String>,
}

impl Oracle {
    /// Expression the observed value is compared against.
    pub fn expected_expr(&self) -> &str {
        match self.kind {
            OracleKind::Eq => self.rhs.as_deref().unwrap_or_default(),
            OracleKind::True => "True",
            OracleKind::False => "False",
        }
    }

    /// Source form of the oracle call, used in failure messages.
    pub fn call_text(&self) -> String {
        match self.kind {
            OracleKind::Eq => format!(
                "check_eq({}, {})",
                self.lhs,
                self.rhs.as_deref().unwrap_or_default()
            ),
            OracleKind::True => format!("check_true({})", self.lhs),
            OracleKind::False => format!("check_false({})", self.lhs),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InlineTestDecl {
    pub name: String,
    pub file: PathBuf,
    pub line: usize,
    pub disabled: bool,
    pub parameterized: bool,
    pub repeated: u32,
    pub tags: BTreeSet<String>,
    pub givens: Vec<Given>,
    pub oracles: Vec<Oracle>,
    pub group_refs: BTreeSet<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TargetKind {
    Assignment,
    IfHeader,
    WhileHeader,
    Other,
}

impl TargetKind {
    pub fn is_header(self) -> bool {
        matches!(self, TargetKind::IfHeader | TargetKind::WhileHeader)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetStatement {
    pub kind: TargetKind,
    pub verbatim: String,
    pub start_line: usize,
    pub end_line: usize,
    pub assigned_names: Vec<String>,
    pub condition_operands: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractedTest {
    pub decl: InlineTestDecl,
    pub target: TargetStatement,
    pub imports: Vec<String>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ExtractOptions {
    pub copy_all_imports: bool,
}

struct Arg<'a> {
    keyword: Option<&'a str>,
    value: &'a str,
    tokens: &'a [Token],
}

struct ChainParser<'a> {
    src: &'a str,
    file: &'a Path,
    line: usize,
}

impl<'a> ChainParser<'a> {
    fn malformed(&self, reason: impl Into<String>) -> ExtractError {
        ExtractError::MalformedChain {
            file: self.file.display().to_string(),
            line: self.line,
            reason: reason.into(),
        }
    }

    /// Index of the bracket closing the one at `open`.
    fn matching(&self, tokens: &[Token], open: usize) -> Result<usize, ExtractError> {
        let mut depth = 0usize;
        for (i, t) in tokens.iter().enumerate().skip(open) {
            if t.kind != TokenKind::Op {
                continue;
            }
            match t.text(self.src) {
                "(" | "[" | "{" => depth += 1,
                ")" | "]" | "}" => {
                    depth -= 1;
                    if depth == 0 {
                        return Ok(i);
                    }
                }
                _ => {}
            }
        }
        Err(self.malformed("unclosed call"))
    }

    fn args(&self, tokens: &'a [Token]) -> Result<Vec<Arg<'a>>, ExtractError> {
        let mut args = Vec::new();
        for piece in split_top_level(self.src, tokens, ",") {
            if piece.is_empty() {
                if args.is_empty() && tokens.is_empty() {
                    break;
                }
                // Trailing comma.
                continue;
            }
            if piece[0].is_op(self.src, "*") || piece[0].is_op(self.src, "**") {
                return Err(self.malformed("star arguments are not supported"));
            }
            let (keyword, value_tokens) = if piece.len() > 2
                && piece[0].kind == TokenKind::Name
                && piece[1].is_op(self.src, "=")
            {
                (Some(piece[0].text(self.src)), &piece[2..])
            } else {
                (None, piece)
            };
            args.push(Arg {
                keyword,
                value: slice(self.src, value_tokens),
                tokens: value_tokens,
            });
        }
        Ok(args)
    }

    fn string_literal(&self, arg: &Arg<'_>, what: &str) -> Result<String, ExtractError> {
        match arg.tokens {
            [t] if t.kind == TokenKind::Str => {
                unquote(t.text(self.src)).ok_or_else(|| self.malformed(format!("{what} must be a plain string literal")))
            }
            _ => Err(self.malformed(format!("{what} must be a string literal"))),
        }
    }

    fn bool_literal(&self, arg: &Arg<'_>, what: &str) -> Result<bool, ExtractError> {
        match arg.value {
            "True" => Ok(true),
            "False" => Ok(false),
            _ => Err(self.malformed(format!("{what} must be True or False"))),
        }
    }

    fn parse(&self, path: &Path, stmt: &LogicalStatement) -> Result<InlineTestDecl, ExtractError> {
        let src = self.src;
        let tokens = lexer::code_tokens(src).map_err(|e| self.malformed(e.to_string()))?;
        if tokens.len() < 3 || !tokens[0].is_name(src, "Here") || !tokens[1].is_op(src, "(") {
            return Err(self.malformed("chain must start with Here("));
        }
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let mut decl = InlineTestDecl {
            name: format!("{stem}_{}", stmt.start_line),
            file: path.to_path_buf(),
            line: stmt.start_line,
            disabled: false,
            parameterized: false,
            repeated: 1,
            tags: BTreeSet::new(),
            givens: Vec::new(),
            oracles: Vec::new(),
            group_refs: BTreeSet::new(),
        };

        let close = self.matching(&tokens, 1)?;
        let here_args = self.args(&tokens[2..close])?;
        for (i, arg) in here_args.iter().enumerate() {
            match (arg.keyword, i) {
                (None, 0) | (Some("test_name"), _) => {
                    decl.name = self.string_literal(arg, "test_name")?;
                    if decl.name.is_empty() {
                        return Err(self.malformed("test_name must not be empty"));
                    }
                }
                (None, _) => return Err(self.malformed("Here takes at most one positional argument")),
                (Some("parameterized"), _) => decl.parameterized = self.bool_literal(arg, "parameterized")?,
                (Some("disabled"), _) => decl.disabled = self.bool_literal(arg, "disabled")?,
                (Some("repeated"), _) => {
                    decl.repeated = match arg.tokens {
                        [t] if t.kind == TokenKind::Number => t.text(src).replace('_', "").parse().ok(),
                        _ => None,
                    }
                    .filter(|n| *n >= 1)
                    .ok_or_else(|| self.malformed("repeated must be a positive integer literal"))?;
                }
                (Some("tag"), _) => decl.tags = self.tags(arg)?,
                (Some(other), _) => return Err(self.malformed(format!("unknown Here option `{other}`"))),
            }
        }

        let mut pos = close + 1;
        while pos < tokens.len() {
            if !tokens[pos].is_op(src, ".")
                || tokens.get(pos + 1).map(|t| t.kind) != Some(TokenKind::Name)
                || !tokens.get(pos + 2).is_some_and(|t| t.is_op(src, "("))
            {
                return Err(self.malformed("expected `.method(...)` after Here(...)"));
            }
            let method = tokens[pos + 1].text(src);
            let close = self.matching(&tokens, pos + 2)?;
            let args = self.args(&tokens[pos + 3..close])?;
            if args.iter().any(|a| a.keyword.is_some()) {
                return Err(self.malformed(format!("{method} takes positional arguments only")));
            }
            let arity = |n: usize| {
                if args.len() == n {
                    Ok(())
                } else {
                    Err(self.malformed(format!("{method} expects {n} argument(s), got {}", args.len())))
                }
            };
            match method {
                "given" => {
                    arity(2)?;
                    let name = match args[0].tokens {
                        [t] if t.kind == TokenKind::Name && !is_keyword(t.text(src)) => t.text(src),
                        _ => return Err(self.malformed("given expects a variable name first")),
                    };
                    decl.givens.push(Given {
                        name: name.to_string(),
                        value: args[1].value.to_string(),
                    });
                }
                "check_eq" => {
                    arity(2)?;
                    decl.oracles.push(Oracle {
                        kind: OracleKind::Eq,
                        lhs: args[0].value.to_string(),
                        rhs: Some(args[1].value.to_string()),
                    });
                }
                "check_true" | "check_false" => {
                    arity(1)?;
                    decl.oracles.push(Oracle {
                        kind: if method == "check_true" { OracleKind::True } else { OracleKind::False },
                        lhs: args[0].value.to_string(),
                        rhs: None,
                    });
                }
                other => return Err(self.malformed(format!("unknown chain call `{other}`"))),
            }
            for arg in &args {
                if method != "given" {
                    decl.group_refs.extend(self.group_refs(arg.tokens)?);
                }
            }
            pos = close + 1;
        }

        if decl.oracles.is_empty() {
            return Err(ExtractError::NoOracle {
                file: path.display().to_string(),
                line: self.line,
            });
        }
        if decl.parameterized {
            self.check_parameterization(&decl)?;
        }
        Ok(decl)
    }

    fn tags(&self, arg: &Arg<'_>) -> Result<BTreeSet<String>, ExtractError> {
        let src = self.src;
        let toks = arg.tokens;
        if let [t] = toks {
            if t.kind == TokenKind::Str {
                return Ok(BTreeSet::from([self.string_literal(arg, "tag")?]));
            }
        }
        let bracketed = toks.len() >= 2
            && ((toks[0].is_op(src, "[") && toks[toks.len() - 1].is_op(src, "]"))
                || (toks[0].is_op(src, "(") && toks[toks.len() - 1].is_op(src, ")")));
        if !bracketed || self.matching(toks, 0)? != toks.len() - 1 {
            return Err(self.malformed("tag must be a string or a list of strings"));
        }
        let mut tags = BTreeSet::new();
        for element in self.args(&toks[1..toks.len() - 1])? {
            if element.keyword.is_some() {
                return Err(self.malformed("tag must be a string or a list of strings"));
            }
            tags.insert(self.string_literal(&element, "tag")?);
        }
        Ok(tags)
    }

    fn group_refs(&self, tokens: &[Token]) -> Result<Vec<usize>, ExtractError> {
        let src = self.src;
        let mut refs = Vec::new();
        for (i, t) in tokens.iter().enumerate() {
            let attribute = i > 0 && tokens[i - 1].is_op(src, ".");
            if !t.is_name(src, "Group") || attribute {
                continue;
            }
            match tokens.get(i + 1..i + 4) {
                Some([open, index, close])
                    if open.is_op(src, "(") && index.kind == TokenKind::Number && close.is_op(src, ")") =>
                {
                    let index = index
                        .text(src)
                        .parse()
                        .map_err(|_| self.malformed("Group index must be a non-negative integer literal"))?;
                    refs.push(index);
                }
                _ => return Err(self.malformed("Group takes one integer literal")),
            }
        }
        Ok(refs)
    }

    fn check_parameterization(&self, decl: &InlineTestDecl) -> Result<(), ExtractError> {
        let bad = |reason: String| ExtractError::BadParameterization {
            file: decl.file.display().to_string(),
            line: decl.line,
            reason,
        };
        if decl.givens.is_empty() {
            return Err(bad("parameterized test has no given values".into()));
        }
        let mut length = None;
        for given in &decl.givens {
            let elements = list_elements(&given.value)
                .ok_or_else(|| bad(format!("value for `{}` is not a list literal", given.name)))?;
            if elements.is_empty() {
                return Err(bad(format!("value list for `{}` is empty", given.name)));
            }
            match length {
                None => length = Some(elements.len()),
                Some(n) if n != elements.len() => {
                    return Err(bad(format!(
                        "value lists have different lengths ({n} and {})",
                        elements.len()
                    )))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

fn slice<'a>(src: &'a str, tokens: &[Token]) -> &'a str {
    match (tokens.first(), tokens.last()) {
        (Some(first), Some(last)) => &src[first.span.start..last.span.end],
        _ => "",
    }
}

/// Splits `tokens` at depth-0 occurrences of `sep`.
fn split_top_level<'t>(src: &str, tokens: &'t [Token], sep: &str) -> Vec<&'t [Token]> {
    let depths = lexer::depths(src, tokens);
    let mut pieces = Vec::new();
    let mut start = 0;
    for (i, t) in tokens.iter().enumerate() {
        if depths[i] == 0 && t.kind == TokenKind::Op && t.text(src) == sep {
            pieces.push(&tokens[start..i]);
            start = i + 1;
        }
    }
    pieces.push(&tokens[start..]);
    pieces
}

/// Value of a plain (non-bytes, non-f) string literal.
pub(crate) fn unquote(literal: &str) -> Option<String> {
    let prefix_len = literal.find(['\'', '"'])?;
    let prefix = literal[..prefix_len].to_ascii_lowercase();
    if prefix.contains('b') || prefix.contains('f') {
        return None;
    }
    let raw = prefix.contains('r');
    let body = &literal[prefix_len..];
    let quote_len = if body.starts_with("'''") || body.starts_with("\"\"\"") { 3 } else { 1 };
    let inner = &body[quote_len..body.len() - quote_len];
    if raw {
        return Some(inner.to_string());
    }
    let mut out = String::with_capacity(inner.len());
    let mut chars = inner.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('n') => out.push('\n'),
            Some('t') => out.push('\t'),
            Some(c @ ('\\' | '\'' | '"')) => out.push(c),
            Some(other) => {
                out.push('\\');
                out.push(other);
            }
            None => out.push('\\'),
        }
    }
    Some(out)
}

/// Elements of a bracketed list literal, as verbatim texts. `None` when
/// `value` is not a single list literal.
pub fn list_elements(value: &str) -> Option<Vec<String>> {
    let tokens = lexer::code_tokens(value).ok()?;
    let (first, last) = (tokens.first()?, tokens.last()?);
    if !first.is_op(value, "[") || !last.is_op(value, "]") || tokens.len() < 2 {
        return None;
    }
    let depths = lexer::depths(value, &tokens);
    // The opening bracket must close at the very end.
    if depths[1..tokens.len() - 1].contains(&0) {
        return None;
    }
    let inner = &tokens[1..tokens.len() - 1];
    let mut elements: Vec<String> = Vec::new();
    let mut start = 0;
    let inner_depths = &depths[1..tokens.len() - 1];
    for i in 0..=inner.len() {
        let at_sep = i == inner.len() || (inner_depths[i] == 1 && inner[i].is_op(value, ","));
        if at_sep {
            let piece = &inner[start..i];
            if piece.is_empty() {
                if i != inner.len() {
                    return None;
                }
            } else {
                elements.push(slice(value, piece).to_string());
            }
            start = i + 1;
        }
    }
    Some(elements)
}

/// Parses one inline-test statement of the file at `path`.
pub fn parse_chain(path: impl AsRef<Path>, stmt: &LogicalStatement) -> Result<InlineTestDecl, ExtractError> {
    let path = path.as_ref();
    let parser = ChainParser {
        src: &stmt.verbatim,
        file: path,
        line: stmt.start_line,
    };
    if stmt.kind != StatementKind::InlineTest {
        return Err(parser.malformed("statement is not an inline test"));
    }
    parser.parse(path, stmt)
}

/// Finds the statement checked by the inline test at `test_index`: the nearest
/// preceding non-test statement at the same indentation, or the block header
/// the test directly opens the body of.
pub fn resolve_target(unit: &SourceUnit, test_index: usize) -> Result<TargetStatement, ExtractError> {
    let test = &unit.statements[test_index];
    let no_target = || ExtractError::NoTarget {
        file: unit.path.display().to_string(),
        line: test.start_line,
    };
    let indent = test.indent.len();
    let mut adjacent = true;
    for stmt in unit.statements[..test_index].iter().rev() {
        if stmt.kind == StatementKind::InlineTest {
            continue;
        }
        let depth = stmt.indent.len();
        if depth == indent {
            return Ok(target_from(stmt));
        }
        if depth < indent {
            let header = matches!(stmt.kind, StatementKind::IfHeader | StatementKind::WhileHeader);
            if adjacent && header {
                return Ok(target_from(stmt));
            }
            return Err(no_target());
        }
        adjacent = false;
    }
    Err(no_target())
}

fn target_from(stmt: &LogicalStatement) -> TargetStatement {
    let kind = match stmt.kind {
        StatementKind::Assignment => TargetKind::Assignment,
        StatementKind::IfHeader => TargetKind::IfHeader,
        StatementKind::WhileHeader => TargetKind::WhileHeader,
        _ => TargetKind::Other,
    };
    TargetStatement {
        kind,
        verbatim: stmt.verbatim.clone(),
        start_line: stmt.start_line,
        end_line: stmt.end_line,
        assigned_names: if kind == TargetKind::Assignment {
            assigned_names(&stmt.verbatim)
        } else {
            Vec::new()
        },
        condition_operands: if kind.is_header() {
            split_conditions(&stmt.verbatim)
        } else {
            Vec::new()
        },
    }
}

fn assigned_names(text: &str) -> Vec<String> {
    let Ok(tokens) = lexer::code_tokens(text) else {
        return Vec::new();
    };
    let depths = lexer::depths(text, &tokens);
    let mut names: Vec<String> = Vec::new();
    let mut start = 0;
    for (i, t) in tokens.iter().enumerate() {
        if depths[i] != 0 || t.kind != TokenKind::Op {
            continue;
        }
        let op = t.text(text);
        let augmented = op.len() > 1 && op.ends_with('=') && !matches!(op, "==" | "!=" | "<=" | ">=");
        if op != "=" && !augmented {
            continue;
        }
        let mut segment = &tokens[start..i];
        if segment.iter().any(|t| t.is_name(text, "lambda")) {
            break;
        }
        // Annotated assignment: `x: int = ...`.
        if let Some(colon) = segment
            .iter()
            .zip(&depths[start..i])
            .position(|(t, &d)| d == 0 && t.is_op(text, ":"))
        {
            segment = &segment[..colon];
        }
        // Brackets opened by a call or subscript hide the names inside them.
        let mut hidden: Vec<bool> = Vec::new();
        for (j, t) in segment.iter().enumerate() {
            let word = t.text(text);
            if t.kind == TokenKind::Op {
                match word {
                    "(" | "[" | "{" => {
                        let applied = j > 0
                            && (segment[j - 1].kind == TokenKind::Name
                                || segment[j - 1].is_op(text, ")")
                                || segment[j - 1].is_op(text, "]"));
                        hidden.push(applied || hidden.last().copied().unwrap_or(false));
                    }
                    ")" | "]" | "}" => {
                        hidden.pop();
                    }
                    _ => {}
                }
                continue;
            }
            let after_dot = j > 0 && segment[j - 1].is_op(text, ".");
            let subscripted = segment
                .get(j + 1)
                .is_some_and(|n| n.is_op(text, ".") || n.is_op(text, "[") || n.is_op(text, "("));
            let inside_call = hidden.last().copied().unwrap_or(false);
            if t.kind == TokenKind::Name
                && !after_dot
                && !subscripted
                && !inside_call
                && !is_keyword(word)
                && !names.iter().any(|n| n == word)
            {
                names.push(word.to_string());
            }
        }
        start = i + 1;
        if augmented {
            break;
        }
    }
    names
}

/// Splits a branch header's condition at top-level `and`/`or`, left to right.
pub fn split_conditions(header: &str) -> Vec<String> {
    let Ok(tokens) = lexer::code_tokens(header) else {
        return vec![header.trim().to_string()];
    };
    let mut body: &[Token] = &tokens;
    if body
        .first()
        .is_some_and(|t| t.is_name(header, "if") || t.is_name(header, "elif") || t.is_name(header, "while"))
    {
        body = &body[1..];
    }
    let depths = lexer::depths(header, body);
    let mut lambdas = 0usize;
    let mut end = body.len();
    for (i, t) in body.iter().enumerate() {
        if depths[i] != 0 {
            continue;
        }
        if t.is_name(header, "lambda") {
            lambdas += 1;
        } else if t.is_op(header, ":") {
            if lambdas == 0 {
                end = i;
                break;
            }
            lambdas -= 1;
        }
    }
    let condition = &body[..end];
    // Conditional expressions, lambdas and walrus bind looser than and/or.
    let loose = condition.iter().zip(&depths).any(|(t, &d)| {
        d == 0 && (t.is_name(header, "if") || t.is_name(header, "lambda") || t.is_op(header, ":="))
    });
    if loose {
        return vec![slice(header, condition).to_string()];
    }
    let mut operands = Vec::new();
    let mut start = 0;
    for i in 0..=condition.len() {
        let boundary = i == condition.len()
            || (depths[i] == 0
                && (condition[i].is_name(header, "and") || condition[i].is_name(header, "or")));
        if boundary {
            let piece = &condition[start..i];
            if !piece.is_empty() {
                operands.push(slice(header, piece).to_string());
            }
            start = i + 1;
        }
    }
    if operands.is_empty() {
        operands.push(slice(header, condition).to_string());
    }
    operands
}

/// Names an import statement binds, plus whether it is a star import.
/// `None` for imports that are never copied (`__future__`, the shim).
fn import_bindings(text: &str) -> Option<(Vec<String>, bool)> {
    let tokens = lexer::code_tokens(text).ok()?;
    let first = tokens.first()?;
    let mut names = Vec::new();
    if first.is_name(text, "import") {
        for piece in split_top_level(text, &tokens[1..], ",") {
            let root = piece.first()?.text(text);
            if root == SHIM_MODULE || root == "__future__" {
                return None;
            }
            match piece.iter().position(|t| t.is_name(text, "as")) {
                Some(i) => names.push(piece.get(i + 1)?.text(text).to_string()),
                None => names.push(root.to_string()),
            }
        }
        return Some((names, false));
    }
    if !first.is_name(text, "from") {
        return None;
    }
    let import_at = tokens.iter().position(|t| t.is_name(text, "import"))?;
    let module = slice(text, &tokens[1..import_at]);
    let root = module.trim_start_matches('.').split('.').next().unwrap_or_default();
    if module == "__future__" || (root == SHIM_MODULE && !module.starts_with('.')) {
        return None;
    }
    let mut rest = &tokens[import_at + 1..];
    if rest.first().is_some_and(|t| t.is_op(text, "*")) {
        return Some((names, true));
    }
    if rest.first().is_some_and(|t| t.is_op(text, "(")) && rest.len() >= 2 {
        rest = &rest[1..rest.len() - 1];
    }
    for piece in split_top_level(text, rest, ",") {
        match piece {
            [] => {}
            [name] => names.push(name.text(text).to_string()),
            [_, alias_kw, alias] if alias_kw.is_name(text, "as") => names.push(alias.text(text).to_string()),
            _ => return None,
        }
    }
    Some((names, false))
}

fn identifiers(text: &str, out: &mut HashSet<String>) {
    if let Ok(tokens) = lexer::code_tokens(text) {
        for (i, t) in tokens.iter().enumerate() {
            let attribute = i > 0 && tokens[i - 1].is_op(text, ".");
            if t.kind == TokenKind::Name && !attribute && !is_keyword(t.text(text)) {
                out.insert(t.text(text).to_string());
            }
        }
    }
}

/// Import statements of the file binding a name used by the target or the test.
pub fn collect_imports(unit: &SourceUnit, target: &TargetStatement, decl: &InlineTestDecl) -> Vec<String> {
    collect_imports_with(unit, target, decl, ExtractOptions::default())
}

pub fn collect_imports_with(
    unit: &SourceUnit,
    target: &TargetStatement,
    decl: &InlineTestDecl,
    options: ExtractOptions,
) -> Vec<String> {
    let mut used = HashSet::new();
    identifiers(&target.verbatim, &mut used);
    for given in &decl.givens {
        identifiers(&given.value, &mut used);
    }
    for oracle in &decl.oracles {
        identifiers(&oracle.lhs, &mut used);
        if let Some(rhs) = &oracle.rhs {
            identifiers(rhs, &mut used);
        }
    }
    used.remove("Group");
    used.remove("Here");

    unit.statements
        .iter()
        .filter(|s| s.kind == StatementKind::Import)
        .filter(|s| match import_bindings(&s.verbatim) {
            None => false,
            Some(_) if options.copy_all_imports => true,
            Some((names, _)) => names.iter().any(|n| used.contains(n)),
        })
        .map(|s| s.verbatim.clone())
        .collect()
}

/// Parses and resolves every inline test of `unit`, in file order.
pub fn extract_file(unit: &SourceUnit, options: ExtractOptions) -> Vec<Result<ExtractedTest, ExtractError>> {
    crate::scanner::find_inline_tests(unit)
        .into_iter()
        .map(|index| {
            let decl = parse_chain(&unit.path, &unit.statements[index])?;
            let target = resolve_target(unit, index)?;
            let imports = collect_imports_with(unit, &target, &decl, options);
            Ok(ExtractedTest { decl, target, imports })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scanner::scan_file;

    fn chain(text: &str) -> Result<InlineTestDecl, ExtractError> {
        let unit = scan_file("zip.py", text).unwrap();
        let stmt = unit.statements.iter().find(|s| s.kind == StatementKind::InlineTest).unwrap();
        parse_chain("zip.py", stmt)
    }

    #[test]
    fn parses_declare_assign_assert() {
        let text = "\n\n\n\n\ndosdate = 1\nHere().given(dt, (1980,1,25,17,13,14)).check_eq(dosdate, 57)\n";
        let decl = chain(text).unwrap();
        assert_eq!(decl.name, "zip_7");
        assert_eq!(decl.line, 7);
        assert_eq!(
            decl.givens,
            vec![Given { name: "dt".into(), value: "(1980,1,25,17,13,14)".into() }]
        );
        assert_eq!(
            decl.oracles,
            vec![Oracle { kind: OracleKind::Eq, lhs: "dosdate".into(), rhs: Some("57".into()) }]
        );
        assert_eq!(decl.repeated, 1);
        assert!(!decl.disabled && !decl.parameterized);
    }

    #[test]
    fn minimal_named_chain() {
        let decl = chain("Here(\"t\").check_true(x)\n").unwrap();
        assert_eq!(decl.name, "t");
        assert!(decl.givens.is_empty());
        assert_eq!(decl.oracles[0].kind, OracleKind::True);
        assert_eq!(decl.oracles[0].expected_expr(), "True");
    }

    #[test]
    fn chain_without_oracle() {
        assert!(matches!(chain("Here().given(a, 1)\n"), Err(ExtractError::NoOracle { line: 1, .. })));
    }

    #[test]
    fn options() {
        let decl = chain(
            "Here(test_name='p', parameterized=True, disabled=True, repeated=3, tag=['regex', \"fast\"])\
             .given(a, [1, 2]).given(b, ['x', 'y']).check_eq(f(a), b)\n",
        )
        .unwrap();
        assert_eq!(decl.name, "p");
        assert!(decl.parameterized && decl.disabled);
        assert_eq!(decl.repeated, 3);
        assert_eq!(decl.tags, BTreeSet::from(["regex".to_string(), "fast".to_string()]));
        let single = chain("Here(tag='one').check_true(x)\n").unwrap();
        assert_eq!(single.tags, BTreeSet::from(["one".to_string()]));
    }

    #[test]
    fn malformed_chains() {
        for text in [
            "Here(bogus=1).check_true(x)\n",
            "Here().given(a, 1).check_neq(a, 2)\n",
            "Here().check_eq(a)\n",
            "Here().given(1, 2).check_true(x)\n",
            "Here('a', 'b').check_true(x)\n",
            "Here(repeated=0).check_true(x)\n",
            "Here(test_name=name).check_true(x)\n",
            "Here().check_true(x) + 1\n",
            "Here().check_true(Group(i))\n",
        ] {
            assert!(matches!(chain(text), Err(ExtractError::MalformedChain { .. })), "{text}");
        }
    }

    #[test]
    fn parameterization_must_be_equal_length_lists() {
        assert!(matches!(
            chain("Here(parameterized=True).given(a, [1, 2]).given(b, [1]).check_eq(a, b)\n"),
            Err(ExtractError::BadParameterization { .. })
        ));
        assert!(matches!(
            chain("Here(parameterized=True).given(a, []).check_eq(a, a)\n"),
            Err(ExtractError::BadParameterization { .. })
        ));
        assert!(matches!(
            chain("Here(parameterized=True).given(a, (1, 2)).check_eq(a, a)\n"),
            Err(ExtractError::BadParameterization { .. })
        ));
    }

    #[test]
    fn group_refs_are_collected_from_oracles() {
        let decl = chain("Here().check_true(Group(1)).check_eq(Group(0), m.Group(7))\n").unwrap();
        assert_eq!(decl.group_refs, BTreeSet::from([0, 1]));
    }

    #[test]
    fn list_literal_elements() {
        assert_eq!(list_elements("[1, (2, 3), 'a,b']").unwrap(), vec!["1", "(2, 3)", "'a,b'"]);
        assert_eq!(list_elements("[1,]").unwrap(), vec!["1"]);
        assert_eq!(list_elements("[]").unwrap(), Vec::<String>::new());
        assert!(list_elements("[1] + [2]").is_none());
        assert!(list_elements("(1, 2)").is_none());
    }

    #[test]
    fn consecutive_tests_share_target() {
        let unit = scan_file("a.py", "s = 1\nHere().check_eq(s, 1)\nHere().check_true(s)\n").unwrap();
        let a = resolve_target(&unit, 1).unwrap();
        let b = resolve_target(&unit, 2).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.verbatim, "s = 1");
        assert_eq!(a.assigned_names, vec!["s"]);
    }

    #[test]
    fn first_statement_has_no_target() {
        let unit = scan_file("a.py", "Here().check_true(1)\n").unwrap();
        assert!(matches!(resolve_target(&unit, 0), Err(ExtractError::NoTarget { line: 1, .. })));
    }

    #[test]
    fn test_opening_an_if_body_targets_the_header() {
        let text = "def f(gen, orig):\n    if gen and re.match('^{0-9A-F-}{36}$', orig):\n        \
                    Here().given(orig, 'x').check_true(Group(1))\n        return 1\n";
        let unit = scan_file("a.py", text).unwrap();
        let target = resolve_target(&unit, 2).unwrap();
        assert_eq!(target.kind, TargetKind::IfHeader);
        assert_eq!(target.condition_operands[1], "re.match('^{0-9A-F-}{36}$', orig)");
    }

    #[test]
    fn enclosing_non_header_blocks_are_not_targets() {
        let unit = scan_file("a.py", "def f():\n    Here().check_true(1)\n").unwrap();
        assert!(resolve_target(&unit, 1).is_err());
        // Deeper statements are skipped, shallower ones stop the search.
        let unit = scan_file("a.py", "x = 1\nif c:\n    y = 2\nHere().check_eq(x, 1)\n").unwrap();
        assert_eq!(resolve_target(&unit, 3).unwrap().verbatim, "if c:");
        let unit = scan_file("a.py", "if c:\n    y = 2\n    z = 3\n        \nfor a in b:\n    Here().check_true(1)\n").unwrap();
        assert!(resolve_target(&unit, 4).is_err());
    }

    #[test]
    fn assigned_names_cover_common_forms() {
        assert_eq!(assigned_names("a, b = 1, 2"), vec!["a", "b"]);
        assert_eq!(assigned_names("a = b = f(x=1)"), vec!["a", "b"]);
        assert_eq!(assigned_names("x: int = 3"), vec!["x"]);
        assert_eq!(assigned_names("n += 1"), vec!["n"]);
        assert_eq!(assigned_names("self.x = 1"), Vec::<String>::new());
        assert_eq!(assigned_names("d[k] = v"), Vec::<String>::new());
    }

    #[test]
    fn split_conditions_examples() {
        assert_eq!(split_conditions("if a and b or c:"), vec!["a", "b", "c"]);
        assert_eq!(split_conditions("if (a and b):"), vec!["(a and b)"]);
        assert_eq!(split_conditions("while x:"), vec!["x"]);
        assert_eq!(split_conditions("if 'and' in s and not t:  # and"), vec!["'and' in s", "not t"]);
        assert_eq!(split_conditions("if f(lambda q: q and 1) or y: pass"), vec!["f(lambda q: q and 1)", "y"]);
        assert_eq!(split_conditions("while lambda: 1 and k:"), vec!["lambda: 1 and k"]);
    }

    #[test]
    fn import_collection() {
        let text = "import re\nimport os\nfrom collections import OrderedDict\nfrom inline import Here, Group\n\
                    import numpy as np, sys\nfrom __future__ import annotations\nfrom m import *\n\
                    x = re.match(p, s)\nHere().given(d, OrderedDict()).check_true(Group(0) or x)\n";
        let unit = scan_file("a.py", text).unwrap();
        let tests = extract_file(&unit, ExtractOptions::default());
        let test = tests[0].as_ref().unwrap();
        assert_eq!(test.imports, vec!["import re", "from collections import OrderedDict"]);

        let all = extract_file(&unit, ExtractOptions { copy_all_imports: true });
        assert_eq!(
            all[0].as_ref().unwrap().imports,
            vec![
                "import re",
                "import os",
                "from collections import OrderedDict",
                "import numpy as np, sys",
                "from m import *"
            ]
        );
    }

    #[test]
    fn aliased_and_parenthesized_imports() {
        assert_eq!(import_bindings("import a.b.c"), Some((vec!["a".to_string()], false)));
        assert_eq!(import_bindings("import a.b as c"), Some((vec!["c".to_string()], false)));
        assert_eq!(
            import_bindings("from x import (p,\n q as r,)"),
            Some((vec!["p".to_string(), "r".to_string()], false))
        );
        assert_eq!(import_bindings("from inline import Here"), None);
        assert_eq!(import_bindings("from .inline import thing"), Some((vec!["thing".to_string()], false)));
    }

    #[test]
    fn extraction_is_deterministic() {
        let text = "import re\nx = re.compile('a')\nHere().check_true(x)\nHere('b').given(y, 2).check_eq(x, y)\n";
        let unit = scan_file("a.py", text).unwrap();
        assert_eq!(extract_file(&unit, ExtractOptions::default()), extract_file(&unit, ExtractOptions::default()));
    }
}
