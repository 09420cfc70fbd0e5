//! Source rewrites over scanned files: removing inline tests and replicating
//! them for scaling measurements.

use crate::extractor;
use crate::lexer::{self, TokenKind};
use crate::scanner::{LogicalStatement, SourceUnit, StatementKind};

/// Returns the file text with every inline-test statement removed. Trivia
/// and every other byte are kept.
pub fn strip(unit: &SourceUnit) -> String {
    let text = &unit.text;
    let mut out = String::with_capacity(text.len());
    for stmt in &unit.statements {
        out.push_str(&text[stmt.trivia.clone()]);
        if stmt.kind != StatementKind::InlineTest {
            out.push_str(&text[stmt.span.clone()]);
        }
    }
    out.push_str(&text[unit.trailing.clone()]);
    out
}

/// Replaces each inline test with `k` copies at the same indentation. Copy
/// `j` is named `<name>_dup<j>` so report ids stay unique.
pub fn duplicate(unit: &SourceUnit, k: usize) -> String {
    assert!(k >= 1, "duplicate needs k >= 1");
    let text = &unit.text;
    let stem = unit.stem();
    let newline = unit.newline_style.as_str();
    let mut out = String::with_capacity(text.len() * if k > 1 { 2 } else { 1 });
    for stmt in &unit.statements {
        out.push_str(&text[stmt.trivia.clone()]);
        if stmt.kind != StatementKind::InlineTest {
            out.push_str(&text[stmt.span.clone()]);
            continue;
        }
        let verbatim_end = stmt.span.start + stmt.indent.len() + stmt.verbatim.len();
        let tail = &text[verbatim_end..stmt.span.end];
        let base = chain_name(stmt).unwrap_or_else(|| format!("{stem}_{}", stmt.start_line));
        for j in 0..k {
            out.push_str(&stmt.indent);
            out.push_str(&rename_chain(stmt, &format!("{base}_dup{j}")));
            if j + 1 < k && !tail.contains('\n') {
                out.push_str(newline);
            } else {
                out.push_str(tail);
            }
        }
    }
    out.push_str(&text[unit.trailing.clone()]);
    out
}

/// Location of the name argument of `Here(...)`: the token span of an
/// explicit name, or the offset just after `(` when there is none.
enum NameSlot {
    Literal(std::ops::Range<usize>),
    Insert { at: usize, has_args: bool },
}

fn name_slot(src: &str) -> Option<NameSlot> {
    let tokens = lexer::code_tokens(src).ok()?;
    if tokens.len() < 3 || !tokens[0].is_name(src, "Here") || !tokens[1].is_op(src, "(") {
        return None;
    }
    let depths = lexer::depths(src, &tokens);
    let close = (2..tokens.len()).find(|&i| depths[i] == 0 && tokens[i].is_op(src, ")"))?;
    let args = &tokens[2..close];
    if let Some(first) = args.first() {
        let ends_arg = args.get(1).is_none_or(|t| t.is_op(src, ","));
        if first.kind == TokenKind::Str && ends_arg {
            return Some(NameSlot::Literal(first.span.clone()));
        }
    }
    for (i, t) in args.iter().enumerate() {
        if depths[i + 2] == 1
            && t.is_name(src, "test_name")
            && args.get(i + 1).is_some_and(|n| n.is_op(src, "="))
            && (i == 0 || args[i - 1].is_op(src, ","))
        {
            let value = args.get(i + 2)?;
            return (value.kind == TokenKind::Str).then(|| NameSlot::Literal(value.span.clone()));
        }
    }
    Some(NameSlot::Insert {
        at: tokens[1].span.end,
        has_args: !args.is_empty(),
    })
}

fn chain_name(stmt: &LogicalStatement) -> Option<String> {
    let src = &stmt.verbatim;
    match name_slot(src)? {
        NameSlot::Literal(span) => extractor::unquote(&src[span]),
        NameSlot::Insert { .. } => None,
    }
}

fn rename_chain(stmt: &LogicalStatement, name: &str) -> String {
    let src = &stmt.verbatim;
    let literal = serde_json::to_string(name).expect("strings always serialize");
    match name_slot(src) {
        Some(NameSlot::Literal(span)) => format!("{}{literal}{}", &src[..span.start], &src[span.end..]),
        Some(NameSlot::Insert { at, has_args }) => {
            let sep = if has_args { ", " } else { "" };
            format!("{}test_name={literal}{sep}{}", &src[..at], &src[at..])
        }
        None => src.clone(),
    }
}
