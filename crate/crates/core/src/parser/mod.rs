//! Parser for the supported SELinux kernel policy-language subset.
//!
//! Accepted statements:
//!
//! ```text
//! class NAME                                  (forward declaration)
//! class NAME { PERM+ }                        (permission block)
//! sid NAME
//! sid NAME USER:ROLE:TYPE
//! type NAME;
//! attribute NAME;
//! role NAME;
//! role NAME types TYPE;
//! roleattribute ROLE ATTRIBUTE_ROLE;
//! typeattribute TYPE ATTRIBUTE;
//! allow SRC TGT : CLASS PERM;                 (also with { PERM+ })
//! neverallow SRC TGT : CLASS PERM;            (also with { PERM+ })
//! user NAME roles { ROLE+ };
//! ```
//!
//! `class` and `sid` statements take no terminating semicolon; every other
//! statement requires one. Names are resolved in a second pass so statements
//! may appear in any order. Semantic errors are collected rather than
//! aborting at the first one.

mod lexer;
mod printer;

use std::fmt;

use crate::model::{AvRule, AvRuleKind, ElementKind, ModelError, PolicyDb, SecurityContext};

pub use lexer::{tokenize, Keyword, SpannedToken, Token};

/// 1-based position of a token in the policy text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SourceSpan {
    pub line: u32,
    pub column: u32,
    pub length: u32,
}

impl SourceSpan {
    pub fn new(line: u32, column: u32, length: u32) -> Self {
        SourceSpan {
            line,
            column,
            length: length.max(1),
        }
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParseErrorKind {
    Lex,
    Syntax,
    Semantic,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ParseErrorKind::Lex => "lex",
            ParseErrorKind::Syntax => "syntax",
            ParseErrorKind::Semantic => "semantic",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{span}: {kind} error: {message}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub span: SourceSpan,
    pub message: String,
}

impl ParseError {
    pub fn new(kind: ParseErrorKind, span: SourceSpan, message: impl Into<String>) -> Self {
        let mut message = message.into();
        if message.is_empty() {
            message = "invalid input".into();
        }
        ParseError {
            kind,
            span,
            message,
        }
    }

    fn semantic(span: SourceSpan, err: ModelError) -> Self {
        ParseError::new(ParseErrorKind::Semantic, span, err.to_string())
    }
}

/// A name together with where it appeared.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Name {
    pub text: String,
    pub span: SourceSpan,
}

/// One parsed statement, before name resolution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Statement {
    ClassDecl(Name),
    ClassPermissions {
        class: Name,
        permissions: Vec<Name>,
    },
    Sid(Name),
    SidContext {
        sid: Name,
        user: Name,
        role: Name,
        type_label: Name,
    },
    Type(Name),
    Attribute(Name),
    Role(Name),
    RoleTypes {
        role: Name,
        type_label: Name,
    },
    RoleAttribute {
        role: Name,
        attribute: Name,
    },
    TypeAttribute {
        type_label: Name,
        attribute: Name,
    },
    AvRule {
        kind: AvRuleKind,
        source: Name,
        target: Name,
        class: Name,
        permissions: Vec<Name>,
    },
    User {
        name: Name,
        roles: Vec<Name>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyStatement {
    pub statement: Statement,
    pub span: SourceSpan,
}

/// Parses policy text into a validated [`PolicyDb`].
pub fn parse_policy(input: &str) -> Result<PolicyDb, Vec<ParseError>> {
    let statements = parse_statements(input)?;
    build_policy(&statements)
}

/// Like [`parse_policy`] for raw bytes; invalid UTF-8 is reported as a lex error.
pub fn parse_policy_bytes(input: &[u8]) -> Result<PolicyDb, Vec<ParseError>> {
    match std::str::from_utf8(input) {
        Ok(text) => parse_policy(text),
        Err(e) => {
            let valid = &input[..e.valid_up_to()];
            let line = valid.iter().filter(|&&b| b == b'\n').count() as u32 + 1;
            let line_start = valid.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1);
            let column = String::from_utf8_lossy(&valid[line_start..])
                .chars()
                .count() as u32
                + 1;
            Err(vec![ParseError::new(
                ParseErrorKind::Lex,
                SourceSpan::new(line, column, 1),
                "input is not valid UTF-8",
            )])
        }
    }
}

/// Lexes and parses statements without resolving names.
pub fn parse_statements(input: &str) -> Result<Vec<PolicyStatement>, Vec<ParseError>> {
    let (tokens, lex_errors) = lexer::lex(input);
    if !lex_errors.is_empty() {
        return Err(lex_errors);
    }
    let mut parser = Parser {
        tokens,
        pos: 0,
        errors: Vec::new(),
        eof: eof_span(input),
    };
    let statements = parser.statements();
    if parser.errors.is_empty() {
        Ok(statements)
    } else {
        Err(parser.errors)
    }
}

fn eof_span(input: &str) -> SourceSpan {
    let line = input.matches('\n').count() as u32 + 1;
    let last = input.rsplit('\n').next().unwrap_or("");
    SourceSpan::new(line, last.chars().count() as u32 + 1, 1)
}

struct Parser {
    tokens: Vec<SpannedToken>,
    pos: usize,
    errors: Vec<ParseError>,
    eof: SourceSpan,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn peek(&self) -> Option<&SpannedToken> {
        self.tokens.get(self.pos)
    }

    fn peek_token(&self) -> Option<&Token> {
        self.peek().map(|t| &t.token)
    }

    fn here(&self) -> SourceSpan {
        self.peek().map_or(self.eof, |t| t.span)
    }

    fn advance(&mut self) -> Option<SpannedToken> {
        let tok = self.tokens.get(self.pos).cloned();
        if tok.is_some() {
            self.pos += 1;
        }
        tok
    }

    fn unexpected(&self, expected: &str) -> ParseError {
        let message = match self.peek() {
            Some(t) => format!("expected {expected}, found `{}`", t.token),
            None => format!("expected {expected}, found end of input"),
        };
        ParseError::new(ParseErrorKind::Syntax, self.here(), message)
    }

    fn expect(&mut self, token: Token, expected: &str) -> PResult<SourceSpan> {
        if self.peek_token() == Some(&token) {
            Ok(self.advance().unwrap().span)
        } else {
            Err(self.unexpected(expected))
        }
    }

    fn name(&mut self, what: &str) -> PResult<Name> {
        match self.peek_token() {
            Some(Token::Ident(_)) => {
                let tok = self.advance().unwrap();
                let Token::Ident(text) = tok.token else {
                    unreachable!()
                };
                Ok(Name {
                    text,
                    span: tok.span,
                })
            }
            _ => Err(self.unexpected(what)),
        }
    }

    fn statements(&mut self) -> Vec<PolicyStatement> {
        let mut out = Vec::new();
        while self.peek().is_some() {
            let start = self.pos;
            match self.statement() {
                Ok(stmt) => out.push(stmt),
                Err(err) => {
                    self.errors.push(err);
                    self.recover(start);
                }
            }
        }
        out
    }

    /// Skips past the next `;` or up to the next statement keyword.
    fn recover(&mut self, start: usize) {
        if self.pos == start {
            self.pos += 1;
        }
        while let Some(tok) = self.peek_token() {
            match tok {
                Token::Semicolon => {
                    self.pos += 1;
                    return;
                }
                Token::Keyword(k) if k.starts_statement() => return,
                _ => self.pos += 1,
            }
        }
    }

    fn statement(&mut self) -> PResult<PolicyStatement> {
        let span = self.here();
        let keyword = match self.peek_token() {
            Some(Token::Keyword(k)) if k.starts_statement() => *k,
            _ => return Err(self.unexpected("a statement keyword")),
        };
        self.advance();
        let statement = match keyword {
            Keyword::Class => self.class()?,
            Keyword::Sid => self.sid()?,
            Keyword::Type => Statement::Type(self.terminated_name("type name")?),
            Keyword::Attribute => Statement::Attribute(self.terminated_name("attribute name")?),
            Keyword::Role => self.role()?,
            Keyword::RoleAttribute => {
                let role = self.name("role name")?;
                let attribute = self.name("attribute role name")?;
                self.expect(Token::Semicolon, "`;`")?;
                Statement::RoleAttribute { role, attribute }
            }
            Keyword::TypeAttribute => {
                let type_label = self.name("type name")?;
                let attribute = self.name("attribute name")?;
                self.expect(Token::Semicolon, "`;`")?;
                Statement::TypeAttribute {
                    type_label,
                    attribute,
                }
            }
            Keyword::Allow => self.av_rule(AvRuleKind::Allow)?,
            Keyword::NeverAllow => self.av_rule(AvRuleKind::NeverAllow)?,
            Keyword::User => self.user()?,
            Keyword::Roles | Keyword::Types => unreachable!(),
        };
        Ok(PolicyStatement { statement, span })
    }

    fn terminated_name(&mut self, what: &str) -> PResult<Name> {
        let name = self.name(what)?;
        self.expect(Token::Semicolon, "`;`")?;
        Ok(name)
    }

    fn class(&mut self) -> PResult<Statement> {
        let class = self.name("class name")?;
        if self.peek_token() != Some(&Token::LBrace) {
            return Ok(Statement::ClassDecl(class));
        }
        let permissions = self.brace_names("permission name")?;
        Ok(Statement::ClassPermissions { class, permissions })
    }

    fn brace_names(&mut self, what: &str) -> PResult<Vec<Name>> {
        self.expect(Token::LBrace, "`{`")?;
        let mut names = vec![self.name(what)?];
        while self.peek_token() != Some(&Token::RBrace) {
            names.push(self.name(&format!("{what} or `}}`"))?);
        }
        self.advance();
        Ok(names)
    }

    fn sid(&mut self) -> PResult<Statement> {
        let sid = self.name("sid name")?;
        // a labelled sid continues with `user:role:type` on the same statement
        let labelled = matches!(
            (self.tokens.get(self.pos), self.tokens.get(self.pos + 1)),
            (
                Some(SpannedToken {
                    token: Token::Ident(_),
                    ..
                }),
                Some(SpannedToken {
                    token: Token::Colon,
                    ..
                })
            )
        );
        if !labelled {
            return Ok(Statement::Sid(sid));
        }
        let user = self.name("user name")?;
        self.expect(Token::Colon, "`:`")?;
        let role = self.name("role name")?;
        self.expect(Token::Colon, "`:`")?;
        let type_label = self.name("type name")?;
        Ok(Statement::SidContext {
            sid,
            user,
            role,
            type_label,
        })
    }

    fn role(&mut self) -> PResult<Statement> {
        let role = self.name("role name")?;
        match self.peek_token() {
            Some(Token::Semicolon) => {
                self.advance();
                Ok(Statement::Role(role))
            }
            Some(Token::Keyword(Keyword::Types)) => {
                self.advance();
                if self.peek_token() == Some(&Token::LBrace) {
                    return Err(ParseError::new(
                        ParseErrorKind::Syntax,
                        self.here(),
                        "`role ... types` takes a single type name",
                    ));
                }
                let type_label = self.name("type name")?;
                self.expect(Token::Semicolon, "`;`")?;
                Ok(Statement::RoleTypes { role, type_label })
            }
            _ => Err(self.unexpected("`;` or `types`")),
        }
    }

    fn av_rule(&mut self, kind: AvRuleKind) -> PResult<Statement> {
        if self.peek_token() == Some(&Token::LBrace) {
            return Err(ParseError::new(
                ParseErrorKind::Syntax,
                self.here(),
                "source must be a single type or attribute name",
            ));
        }
        let source = self.name("source type")?;
        if self.peek_token() == Some(&Token::LBrace) {
            return Err(ParseError::new(
                ParseErrorKind::Syntax,
                self.here(),
                "target must be a single type or attribute name",
            ));
        }
        let target = self.name("target type")?;
        self.expect(Token::Colon, "`:`")?;
        let class = self.name("class name")?;
        let permissions = if self.peek_token() == Some(&Token::LBrace) {
            self.brace_names("permission name")?
        } else {
            vec![self.name("permission name or `{`")?]
        };
        self.expect(Token::Semicolon, "`;`")?;
        Ok(Statement::AvRule {
            kind,
            source,
            target,
            class,
            permissions,
        })
    }

    fn user(&mut self) -> PResult<Statement> {
        let name = self.name("user name")?;
        self.expect(Token::Keyword(Keyword::Roles), "`roles`")?;
        let roles = self.brace_names("role name")?;
        self.expect(Token::Semicolon, "`;`")?;
        Ok(Statement::User { name, roles })
    }
}

/// Resolves parsed statements into a [`PolicyDb`].
pub fn build_policy(statements: &[PolicyStatement]) -> Result<PolicyDb, Vec<ParseError>> {
    let mut db = PolicyDb::new();
    let mut errors = Vec::new();
    let mut report = |span: SourceSpan, r: Result<(), ModelError>| {
        if let Err(e) = r {
            errors.push(ParseError::semantic(span, e));
        }
    };

    // pass 1: explicit declarations
    for stmt in statements {
        match &stmt.statement {
            Statement::ClassDecl(name) => {
                report(
                    name.span,
                    db.declare(ElementKind::Class, &name.text).map(drop),
                );
            }
            Statement::ClassPermissions { class, permissions } => {
                let perms: Vec<&str> = permissions.iter().map(|p| p.text.as_str()).collect();
                if let Err(e) = db.define_permission_block(&class.text, &[]) {
                    report(class.span, Err(e));
                    continue;
                }
                let class_id = db.lookup(ElementKind::Class, &class.text).unwrap().clone();
                for (perm, name) in perms.iter().zip(permissions) {
                    report(
                        name.span,
                        db.add_class_permission(&class_id, perm).map(drop),
                    );
                }
            }
            Statement::Sid(name) => report(name.span, db.declare_sid(&name.text)),
            Statement::Type(name) => {
                report(
                    name.span,
                    db.declare(ElementKind::TypeLabel, &name.text).map(drop),
                );
            }
            Statement::Attribute(name) => {
                report(
                    name.span,
                    db.declare(ElementKind::AttributeType, &name.text).map(drop),
                );
            }
            Statement::Role(name) => {
                report(
                    name.span,
                    db.declare(ElementKind::Role, &name.text).map(drop),
                );
            }
            Statement::User { name, .. } => {
                report(
                    name.span,
                    db.declare(ElementKind::User, &name.text).map(drop),
                );
            }
            _ => {}
        }
    }

    // pass 1b: names introduced by use. Attribute roles first so that a
    // `role A types T;` on an attribute role does not turn it into a role.
    for stmt in statements {
        if let Statement::RoleAttribute { attribute, .. } = &stmt.statement {
            let role_kinds = [ElementKind::Role, ElementKind::AttributeRole];
            if let Ok(None) = db.lookup_any(&role_kinds, &attribute.text) {
                report(
                    attribute.span,
                    db.declare(ElementKind::AttributeRole, &attribute.text)
                        .map(drop),
                );
            }
        }
    }
    for stmt in statements {
        if let Statement::RoleTypes { role, .. } = &stmt.statement {
            let role_kinds = [ElementKind::Role, ElementKind::AttributeRole];
            if let Ok(None) = db.lookup_any(&role_kinds, &role.text) {
                report(
                    role.span,
                    db.declare(ElementKind::Role, &role.text).map(drop),
                );
            }
        }
    }

    // pass 2: relationships and rules
    const ROLE: &[ElementKind] = &[ElementKind::Role];
    const ANY_ROLE: &[ElementKind] = &[ElementKind::Role, ElementKind::AttributeRole];
    const TYPE: &[ElementKind] = &[ElementKind::TypeLabel];
    const ANY_TYPE: &[ElementKind] = &[ElementKind::TypeLabel, ElementKind::AttributeType];
    let require = |db: &PolicyDb, kinds: &[ElementKind], name: &Name, what: &str| {
        db.require(kinds, &name.text, what)
            .map_err(|e| ParseError::semantic(name.span, e))
    };

    for stmt in statements {
        let result: Result<(), ParseError> = (|| {
            match &stmt.statement {
                Statement::RoleTypes { role, type_label } => {
                    let r = require(&db, ANY_ROLE, role, "role")?;
                    let t = require(&db, ANY_TYPE, type_label, "type or attribute")?;
                    db.add_role_type(&r, &t)
                        .map_err(|e| ParseError::semantic(stmt.span, e))
                }
                Statement::RoleAttribute { role, attribute } => {
                    let r = require(&db, ROLE, role, "role")?;
                    let a = require(
                        &db,
                        &[ElementKind::AttributeRole],
                        attribute,
                        "attribute role",
                    )?;
                    db.add_role_attribute(&r, &a)
                        .map_err(|e| ParseError::semantic(stmt.span, e))
                }
                Statement::TypeAttribute {
                    type_label,
                    attribute,
                } => {
                    let t = require(&db, TYPE, type_label, "type")?;
                    let a = require(&db, &[ElementKind::AttributeType], attribute, "attribute")?;
                    db.add_type_attribute(&t, &a)
                        .map_err(|e| ParseError::semantic(stmt.span, e))
                }
                Statement::User { name, roles } => {
                    let Some(user) = db.lookup(ElementKind::User, &name.text).cloned() else {
                        // declaration already failed and was reported
                        return Ok(());
                    };
                    let mut first_err = None;
                    for role in roles {
                        let r = require(&db, ROLE, role, "role").and_then(|r| {
                            db.add_user_role(&user, &r)
                                .map_err(|e| ParseError::semantic(role.span, e))
                        });
                        if let Err(e) = r {
                            first_err.get_or_insert(e);
                        }
                    }
                    first_err.map_or(Ok(()), Err)
                }
                Statement::AvRule {
                    kind,
                    source,
                    target,
                    class,
                    permissions,
                } => {
                    let source = require(&db, ANY_TYPE, source, "type or attribute")?;
                    let target = require(&db, ANY_TYPE, target, "type or attribute")?;
                    let class_id = require(&db, &[ElementKind::Class], class, "class")?;
                    let allowed = db.class_permissions(&class_id).cloned().unwrap_or_default();
                    let mut perms = indexmap::IndexSet::new();
                    for p in permissions {
                        let found = db
                            .lookup(ElementKind::Permission, &p.text)
                            .filter(|id| allowed.contains(*id))
                            .cloned();
                        match found {
                            Some(id) => {
                                perms.insert(id);
                            }
                            None => {
                                return Err(ParseError::semantic(
                                    p.span,
                                    ModelError::PermissionNotInClass {
                                        permission: p.text.clone(),
                                        class: class.text.clone(),
                                    },
                                ))
                            }
                        }
                    }
                    db.add_av_rule(AvRule {
                        kind: *kind,
                        source,
                        target,
                        class: class_id,
                        permissions: perms,
                    })
                    .map_err(|e| ParseError::semantic(stmt.span, e))
                }
                Statement::SidContext {
                    sid,
                    user,
                    role,
                    type_label,
                } => {
                    let context = SecurityContext {
                        user: require(&db, &[ElementKind::User], user, "user")?,
                        role: require(&db, ROLE, role, "role")?,
                        type_label: require(&db, TYPE, type_label, "type")?,
                    };
                    db.label_sid(&sid.text, context)
                        .map_err(|e| ParseError::semantic(sid.span, e))
                }
                _ => Ok(()),
            }
        })();
        if let Err(e) = result {
            errors.push(e);
        }
    }

    if errors.is_empty() {
        Ok(db)
    } else {
        errors.sort_by_key(|e| e.span);
        Err(errors)
    }
}
