//! A small SMT-LIB2 s-expression reader that keeps source locations.

use std::fmt;

use crate::parser::SourceSpan;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AtomKind {
    Symbol,
    /// `|...|` symbol; text keeps the bars.
    QuotedSymbol,
    Keyword,
    Numeral,
    Decimal,
    Hexadecimal,
    Binary,
    String,
}

#[derive(Debug, Clone)]
pub enum SExpr {
    Atom {
        kind: AtomKind,
        text: String,
        span: SourceSpan,
    },
    List {
        items: Vec<SExpr>,
        span: SourceSpan,
    },
}

impl PartialEq for SExpr {
    // structural equality; spans are ignored
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (
                SExpr::Atom {
                    kind: k1, text: t1, ..
                },
                SExpr::Atom {
                    kind: k2, text: t2, ..
                },
            ) => k1 == k2 && t1 == t2,
            (SExpr::List { items: a, .. }, SExpr::List { items: b, .. }) => a == b,
            _ => false,
        }
    }
}

impl Eq for SExpr {}

impl SExpr {
    pub fn span(&self) -> SourceSpan {
        match self {
            SExpr::Atom { span, .. } | SExpr::List { span, .. } => *span,
        }
    }

    /// The symbol name, with bars stripped from quoted symbols.
    pub fn as_symbol(&self) -> Option<&str> {
        match self {
            SExpr::Atom {
                kind: AtomKind::Symbol,
                text,
                ..
            } => Some(text),
            SExpr::Atom {
                kind: AtomKind::QuotedSymbol,
                text,
                ..
            } => Some(&text[1..text.len() - 1]),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[SExpr]> {
        match self {
            SExpr::List { items, .. } => Some(items),
            SExpr::Atom { .. } => None,
        }
    }
}

impl fmt::Display for SExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SExpr::Atom { text, .. } => f.write_str(text),
            SExpr::List { items, .. } => {
                f.write_str("(")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{item}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SExprError {
    pub span: SourceSpan,
    pub message: String,
}

fn is_symbol_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || "~!@$%^&*_-+=<>.?/".contains(c)
}

struct Reader<'a> {
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    src: &'a str,
    line: u32,
    column: u32,
}

impl<'a> Reader<'a> {
    fn bump(&mut self) -> Option<char> {
        let (_, c) = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn peek(&mut self) -> Option<char> {
        self.chars.peek().map(|&(_, c)| c)
    }

    fn offset(&mut self) -> usize {
        self.chars.peek().map_or(self.src.len(), |&(i, _)| i)
    }

    fn skip_trivia(&mut self) {
        while let Some(c) = self.peek() {
            if c == ';' {
                while self.peek().is_some_and(|c| c != '\n') {
                    self.bump();
                }
            } else if c.is_whitespace() {
                self.bump();
            } else {
                break;
            }
        }
    }

    fn here(&self) -> SourceSpan {
        SourceSpan::new(self.line, self.column, 1)
    }

    fn error(&self, span: SourceSpan, message: impl Into<String>) -> SExprError {
        SExprError {
            span,
            message: message.into(),
        }
    }

    fn read(&mut self) -> Result<SExpr, SExprError> {
        self.skip_trivia();
        let start = self.here();
        match self.peek() {
            None => Err(self.error(start, "unexpected end of input")),
            Some('(') => {
                self.bump();
                let mut items = Vec::new();
                loop {
                    self.skip_trivia();
                    match self.peek() {
                        None => return Err(self.error(start, "unclosed `(`")),
                        Some(')') => {
                            self.bump();
                            return Ok(SExpr::List { items, span: start });
                        }
                        Some(_) => items.push(self.read()?),
                    }
                }
            }
            Some(')') => Err(self.error(start, "unexpected `)`")),
            Some(_) => self.read_atom(start),
        }
    }

    fn read_atom(&mut self, start: SourceSpan) -> Result<SExpr, SExprError> {
        let from = self.offset();
        let first = self.bump().expect("caller checked for input");
        let kind = match first {
            '|' => {
                loop {
                    match self.bump() {
                        None => return Err(self.error(start, "unterminated quoted symbol")),
                        Some('|') => break,
                        Some('\\') => {
                            return Err(self.error(self.here(), "backslash in quoted symbol"))
                        }
                        Some(_) => {}
                    }
                }
                AtomKind::QuotedSymbol
            }
            '"' => {
                loop {
                    match self.bump() {
                        None => return Err(self.error(start, "unterminated string literal")),
                        Some('"') if self.peek() == Some('"') => {
                            self.bump();
                        }
                        Some('"') => break,
                        Some(_) => {}
                    }
                }
                AtomKind::String
            }
            '#' => {
                let kind = match self.bump() {
                    Some('x') => AtomKind::Hexadecimal,
                    Some('b') => AtomKind::Binary,
                    _ => return Err(self.error(start, "expected `#x` or `#b` literal")),
                };
                let valid = |c: char| match kind {
                    AtomKind::Hexadecimal => c.is_ascii_hexdigit(),
                    _ => c == '0' || c == '1',
                };
                let mut digits = 0;
                while self.peek().is_some_and(valid) {
                    self.bump();
                    digits += 1;
                }
                if digits == 0 {
                    return Err(self.error(start, "empty numeric literal"));
                }
                kind
            }
            ':' => {
                while self.peek().is_some_and(is_symbol_char) {
                    self.bump();
                }
                AtomKind::Keyword
            }
            c if c.is_ascii_digit() => {
                let mut kind = AtomKind::Numeral;
                while let Some(c) = self.peek() {
                    if c.is_ascii_digit() {
                        self.bump();
                    } else if c == '.' && kind == AtomKind::Numeral {
                        self.bump();
                        kind = AtomKind::Decimal;
                    } else {
                        break;
                    }
                }
                let text = &self.src[from..self.offset()];
                if text.ends_with('.')
                    || (text.len() > 1 && text.starts_with('0') && !text.starts_with("0."))
                {
                    return Err(self.error(start, format!("malformed number `{text}`")));
                }
                if self.peek().is_some_and(is_symbol_char) {
                    return Err(self.error(self.here(), "symbol may not start with a digit"));
                }
                kind
            }
            c if is_symbol_char(c) => {
                while self.peek().is_some_and(is_symbol_char) {
                    self.bump();
                }
                AtomKind::Symbol
            }
            c => return Err(self.error(start, format!("unexpected character `{c}`"))),
        };
        let text = self.src[from..self.offset()].to_owned();
        let len = u32::try_from(text.chars().count()).unwrap_or(u32::MAX);
        Ok(SExpr::Atom {
            kind,
            text,
            span: SourceSpan::new(start.line, start.column, len),
        })
    }
}

/// Reads every top-level s-expression in `input`. Stops at the first error.
pub fn read_all(input: &str) -> Result<Vec<SExpr>, SExprError> {
    let mut reader = Reader {
        chars: input.char_indices().peekable(),
        src: input,
        line: 1,
        column: 1,
    };
    let mut out = Vec::new();
    loop {
        reader.skip_trivia();
        if reader.peek().is_none() {
            return Ok(out);
        }
        out.push(reader.read()?);
    }
}
