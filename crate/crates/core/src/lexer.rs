//! A lexical-level tokenizer for Python source.
//!
//! This is not a full tokenizer: it knows enough about strings, comments,
//! brackets and line continuations to find logical-line boundaries and to
//! give the extractor a token stream with byte offsets into the original text.

use std::ops::Range;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Name,
    Number,
    Str,
    Op,
    Comment,
    /// End of a logical line. The span covers the newline characters
    /// (empty at end of input).
    Newline,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: Range<usize>,
    /// 1-based line of the first byte.
    pub line: usize,
}

impl Token {
    pub fn text<'a>(&self, src: &'a str) -> &'a str {
        &src[self.span.clone()]
    }

    pub fn is_op(&self, src: &str, op: &str) -> bool {
        self.kind == TokenKind::Op && self.text(src) == op
    }

    pub fn is_name(&self, src: &str, name: &str) -> bool {
        self.kind == TokenKind::Name && self.text(src) == name
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LexError {
    #[error("line {line}: unbalanced delimiter `{delimiter}`")]
    UnbalancedDelimiter { line: usize, delimiter: char },
}

impl LexError {
    pub fn line(&self) -> usize {
        match self {
            LexError::UnbalancedDelimiter { line, .. } => *line,
        }
    }
}

const OPERATORS: &[&str] = &[
    "**=", "//=", ">>=", "<<=", "...", "->", ":=", "==", "!=", "<=", ">=", "**", "//", "<<", ">>",
    "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "@=",
];

pub const KEYWORDS: &[&str] = &[
    "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class",
    "continue", "def", "del", "elif", "else", "except", "finally", "for", "from", "global", "if",
    "import", "in", "is", "lambda", "nonlocal", "not", "or", "pass", "raise", "return", "try",
    "while", "with", "yield",
];

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.contains(&word)
}

fn is_string_prefix(word: &str) -> bool {
    word.len() <= 2
        && word
            .chars()
            .all(|c| matches!(c.to_ascii_lowercase(), 'r' | 'b' | 'u' | 'f'))
}

fn is_name_start(c: char) -> bool {
    c == '_' || c.is_alphabetic()
}

fn is_name_continue(c: char) -> bool {
    c == '_' || c.is_alphanumeric()
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
    tokens: Vec<Token>,
    brackets: Vec<(char, usize)>,
    /// Whether the current logical line has produced a significant token.
    line_open: bool,
}

impl<'a> Lexer<'a> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek_at(&self, offset: usize) -> Option<char> {
        self.src[self.pos..].chars().nth(offset)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
        }
        Some(c)
    }

    fn push(&mut self, kind: TokenKind, start: usize, line: usize) {
        if kind != TokenKind::Comment && kind != TokenKind::Newline {
            self.line_open = true;
        }
        self.tokens.push(Token {
            kind,
            span: start..self.pos,
            line,
        });
    }

    fn run(mut self) -> Result<Vec<Token>, LexError> {
        while let Some(c) = self.peek() {
            let start = self.pos;
            let line = self.line;
            match c {
                ' ' | '\t' | '\x0c' => {
                    self.bump();
                }
                '\r' if self.peek_at(1) == Some('\n') => {
                    self.bump();
                    self.bump();
                    self.newline(start, line);
                }
                '\r' | '\n' => {
                    self.bump();
                    self.newline(start, line);
                }
                '\\' => {
                    self.bump();
                    match (self.peek(), self.peek_at(1)) {
                        (Some('\n'), _) => {
                            self.bump();
                        }
                        (Some('\r'), Some('\n')) => {
                            self.bump();
                            self.bump();
                        }
                        _ => self.push(TokenKind::Op, start, line),
                    }
                }
                '#' => {
                    while let Some(c) = self.peek() {
                        if c == '\n' || c == '\r' {
                            break;
                        }
                        self.bump();
                    }
                    self.push(TokenKind::Comment, start, line);
                }
                '\'' | '"' => {
                    self.string(start, line)?;
                }
                c if c.is_ascii_digit()
                    || (c == '.' && self.peek_at(1).is_some_and(|d| d.is_ascii_digit())) =>
                {
                    self.number(start, line);
                }
                c if is_name_start(c) => {
                    while self.peek().is_some_and(is_name_continue) {
                        self.bump();
                    }
                    let word = &self.src[start..self.pos];
                    if is_string_prefix(word) && matches!(self.peek(), Some('\'' | '"')) {
                        self.string(start, line)?;
                    } else {
                        self.push(TokenKind::Name, start, line);
                    }
                }
                '(' | '[' | '{' => {
                    self.bump();
                    self.brackets.push((c, line));
                    self.push(TokenKind::Op, start, line);
                }
                ')' | ']' | '}' => {
                    self.bump();
                    let expected = match c {
                        ')' => '(',
                        ']' => '[',
                        _ => '{',
                    };
                    match self.brackets.pop() {
                        Some((open, _)) if open == expected => {}
                        _ => {
                            return Err(LexError::UnbalancedDelimiter { line, delimiter: c });
                        }
                    }
                    self.push(TokenKind::Op, start, line);
                }
                _ => {
                    let rest = &self.src[self.pos..];
                    let len = OPERATORS
                        .iter()
                        .find(|op| rest.starts_with(*op))
                        .map_or(c.len_utf8(), |op| op.len());
                    for _ in 0..rest[..len].chars().count() {
                        self.bump();
                    }
                    self.push(TokenKind::Op, start, line);
                }
            }
        }
        if let Some(&(open, line)) = self.brackets.first() {
            return Err(LexError::UnbalancedDelimiter {
                line,
                delimiter: open,
            });
        }
        if self.line_open {
            let end = self.pos;
            self.tokens.push(Token {
                kind: TokenKind::Newline,
                span: end..end,
                line: self.line,
            });
        }
        Ok(self.tokens)
    }

    fn newline(&mut self, start: usize, line: usize) {
        if self.brackets.is_empty() && self.line_open {
            self.push(TokenKind::Newline, start, line);
            self.line_open = false;
        }
    }

    fn number(&mut self, start: usize, line: usize) {
        let hex = self.src[self.pos..].starts_with("0x") || self.src[self.pos..].starts_with("0X");
        while let Some(c) = self.peek() {
            if c.is_ascii_alphanumeric() || c == '_' || c == '.' {
                self.bump();
                if !hex
                    && matches!(c, 'e' | 'E')
                    && matches!(self.peek(), Some('+' | '-'))
                {
                    self.bump();
                }
            } else {
                break;
            }
        }
        self.push(TokenKind::Number, start, line);
    }

    /// Lexes a string literal whose opening quote is at the cursor.
    fn string(&mut self, start: usize, line: usize) -> Result<(), LexError> {
        let quote = self.bump().expect("caller saw a quote");
        let triple = self.peek() == Some(quote) && self.peek_at(1) == Some(quote);
        if triple {
            self.bump();
            self.bump();
        }
        loop {
            let Some(c) = self.bump() else {
                return Err(LexError::UnbalancedDelimiter {
                    line,
                    delimiter: quote,
                });
            };
            match c {
                '\\' => {
                    // An escaped CRLF is a single line continuation.
                    if self.peek() == Some('\r') && self.peek_at(1) == Some('\n') {
                        self.bump();
                    }
                    self.bump();
                }
                '\n' | '\r' if !triple => {
                    return Err(LexError::UnbalancedDelimiter {
                        line,
                        delimiter: quote,
                    });
                }
                c if c == quote => {
                    if !triple {
                        break;
                    }
                    if self.peek() == Some(quote) && self.peek_at(1) == Some(quote) {
                        self.bump();
                        self.bump();
                        break;
                    }
                }
                _ => {}
            }
        }
        self.push(TokenKind::Str, start, line);
        Ok(())
    }
}

/// Tokenizes `src`. Comments are returned as tokens; whitespace, blank lines
/// and line continuations are not.
pub fn tokenize(src: &str) -> Result<Vec<Token>, LexError> {
    Lexer {
        src,
        pos: 0,
        line: 1,
        tokens: Vec::new(),
        brackets: Vec::new(),
        line_open: false,
    }
    .run()
}

/// Significant tokens of a single-statement fragment: no comments, no newlines.
pub fn code_tokens(src: &str) -> Result<Vec<Token>, LexError> {
    Ok(tokenize(src)?
        .into_iter()
        .filter(|t| !matches!(t.kind, TokenKind::Comment | TokenKind::Newline))
        .collect())
}

/// Bracket depth before each token of `tokens`.
pub fn depths(src: &str, tokens: &[Token]) -> Vec<usize> {
    let mut depth = 0usize;
    tokens
        .iter()
        .map(|t| {
            let before = depth;
            if t.kind == TokenKind::Op {
                match t.text(src) {
                    "(" | "[" | "{" => depth += 1,
                    ")" | "]" | "}" => depth = depth.saturating_sub(1),
                    _ => {}
                }
            }
            if t.kind == TokenKind::Op && matches!(t.text(src), ")" | "]" | "}") {
                depth
            } else {
                before
            }
        })
        .collect()
}
