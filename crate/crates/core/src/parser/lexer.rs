use std::fmt;

use super::{ParseError, ParseErrorKind, SourceSpan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Keyword {
    Class,
    Sid,
    Role,
    Type,
    Attribute,
    RoleAttribute,
    TypeAttribute,
    Allow,
    NeverAllow,
    User,
    Roles,
    Types,
}

impl Keyword {
    fn from_word(word: &str) -> Option<Keyword> {
        Some(match word {
            "class" => Keyword::Class,
            "sid" => Keyword::Sid,
            "role" => Keyword::Role,
            "type" => Keyword::Type,
            "attribute" => Keyword::Attribute,
            "roleattribute" => Keyword::RoleAttribute,
            "typeattribute" => Keyword::TypeAttribute,
            "allow" => Keyword::Allow,
            "neverallow" => Keyword::NeverAllow,
            "user" => Keyword::User,
            "roles" => Keyword::Roles,
            "types" => Keyword::Types,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Keyword::Class => "class",
            Keyword::Sid => "sid",
            Keyword::Role => "role",
            Keyword::Type => "type",
            Keyword::Attribute => "attribute",
            Keyword::RoleAttribute => "roleattribute",
            Keyword::TypeAttribute => "typeattribute",
            Keyword::Allow => "allow",
            Keyword::NeverAllow => "neverallow",
            Keyword::User => "user",
            Keyword::Roles => "roles",
            Keyword::Types => "types",
        }
    }

    /// Keywords that begin a statement.
    pub fn starts_statement(self) -> bool {
        !matches!(self, Keyword::Roles | Keyword::Types)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Token {
    Keyword(Keyword),
    Ident(String),
    LBrace,
    RBrace,
    Colon,
    Semicolon,
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Keyword(k) => f.write_str(k.as_str()),
            Token::Ident(s) => f.write_str(s),
            Token::LBrace => f.write_str("{"),
            Token::RBrace => f.write_str("}"),
            Token::Colon => f.write_str(":"),
            Token::Semicolon => f.write_str(";"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpannedToken {
    pub token: Token,
    pub span: SourceSpan,
}

/// Splits policy text into tokens, stopping at the first illegal character.
pub fn tokenize(input: &str) -> Result<Vec<SpannedToken>, ParseError> {
    let (tokens, mut errors) = lex(input);
    if errors.is_empty() {
        Ok(tokens)
    } else {
        Err(errors.swap_remove(0))
    }
}

/// Lexes the whole input, collecting every illegal character as an error.
pub(crate) fn lex(input: &str) -> (Vec<SpannedToken>, Vec<ParseError>) {
    let mut tokens = Vec::new();
    let mut errors = Vec::new();
    let mut line = 1;
    let mut column = 1;
    let mut chars = input.char_indices().peekable();

    while let Some(&(start, c)) = chars.peek() {
        let span = SourceSpan::new(line, column, 1);
        match c {
            '\n' => {
                chars.next();
                line += 1;
                column = 1;
            }
            c if c.is_whitespace() => {
                chars.next();
                column += 1;
            }
            '#' => {
                while let Some(&(_, c)) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                    column += 1;
                }
            }
            '{' | '}' | ':' | ';' => {
                chars.next();
                column += 1;
                let token = match c {
                    '{' => Token::LBrace,
                    '}' => Token::RBrace,
                    ':' => Token::Colon,
                    _ => Token::Semicolon,
                };
                tokens.push(SpannedToken { token, span });
            }
            c if c.is_ascii_alphanumeric() || c == '_' => {
                let mut end = start;
                while let Some(&(i, c)) = chars.peek() {
                    if !(c.is_ascii_alphanumeric() || c == '_') {
                        break;
                    }
                    end = i + c.len_utf8();
                    chars.next();
                }
                let word = &input[start..end];
                let len = word.len() as u32;
                column += len;
                let span = SourceSpan::new(span.line, span.column, len);
                if word.starts_with(|c: char| c.is_ascii_digit()) {
                    errors.push(ParseError::new(
                        ParseErrorKind::Lex,
                        span,
                        format!("identifier `{word}` must not start with a digit"),
                    ));
                    continue;
                }
                let token = match Keyword::from_word(word) {
                    Some(k) => Token::Keyword(k),
                    None => Token::Ident(word.to_owned()),
                };
                tokens.push(SpannedToken { token, span });
            }
            other => {
                chars.next();
                column += 1;
                errors.push(ParseError::new(
                    ParseErrorKind::Lex,
                    span,
                    format!("unexpected character {other:?}"),
                ));
            }
        }
    }
    (tokens, errors)
}
