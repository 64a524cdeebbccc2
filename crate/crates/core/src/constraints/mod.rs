//! Loading of user security constraints written as SMT-LIB2 fragments.
//!
//! A fragment may only declare constants (`declare-const`, or `declare-fun`
//! with no arguments) and make assertions. Every symbol an assertion uses must
//! be bound by a quantifier or `let`, declared by the fragment, part of the
//! prelude vocabulary, part of the policy's symbol mapping, or a core theory
//! symbol.

pub mod sexpr;

use std::collections::{BTreeSet, HashMap, HashSet};

use thiserror::Error;

use crate::encoder::{prelude, sort_of, SymbolMapping};
use crate::parser::SourceSpan;

pub use sexpr::{read_all, AtomKind, SExpr, SExprError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConstraintError {
    #[error("{span}: unknown symbol `{name}`")]
    UnknownSymbol { name: String, span: SourceSpan },
    #[error("{span}: `{form}` is not allowed in a constraint file")]
    ForbiddenCommand { form: String, span: SourceSpan },
    #[error("{span}: malformed s-expression: {message}")]
    MalformedSExpression { message: String, span: SourceSpan },
    #[error("{span}: `{name}` is already declared")]
    Redeclared { name: String, span: SourceSpan },
}

impl ConstraintError {
    pub fn span(&self) -> SourceSpan {
        match self {
            ConstraintError::UnknownSymbol { span, .. }
            | ConstraintError::ForbiddenCommand { span, .. }
            | ConstraintError::MalformedSExpression { span, .. }
            | ConstraintError::Redeclared { span, .. } => *span,
        }
    }
}

/// Core theory symbols a constraint may use without declaring them.
pub const CORE_SYMBOLS: &[&str] = &[
    "true", "false", "not", "and", "or", "xor", "=>", "=", "distinct", "ite", "+", "-", "*", "div",
    "mod", "abs", "/", "<=", "<", ">=", ">", "to_real", "to_int", "is_int",
];

const BUILTIN_SORTS: &[&str] = &["Bool", "Int", "Real"];

/// A constant declared by a fragment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstDecl {
    pub name: String,
    pub sort: String,
}

impl ConstDecl {
    pub fn render(&self) -> String {
        format!("(declare-const {} {})", self.name, self.sort)
    }
}

/// A validated constraint fragment: hoisted declarations followed by assertions.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConstraintFragment {
    pub declarations: Vec<ConstDecl>,
    /// Declarations dropped because the policy already declares the same
    /// symbol with the same sort.
    pub redundant: Vec<ConstDecl>,
    pub assertions: Vec<SExpr>,
    pub referenced_symbols: BTreeSet<String>,
}

impl ConstraintFragment {
    pub fn is_empty(&self) -> bool {
        self.declarations.is_empty() && self.assertions.is_empty()
    }

    /// Canonical commands, one per line.
    pub fn render_lines(&self) -> Vec<String> {
        self.declarations
            .iter()
            .map(ConstDecl::render)
            .chain(self.assertions.iter().map(|a| format!("(assert {a})")))
            .collect()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for line in self.render_lines() {
            out.push_str(&line);
            out.push('\n');
        }
        out
    }
}

/// Loads a single fragment against a policy's symbol mapping.
pub fn load_constraints(
    input: &str,
    mapping: &SymbolMapping,
) -> Result<ConstraintFragment, Vec<ConstraintError>> {
    ConstraintLoader::new(mapping).load(input)
}

/// Loads several fragments in order. Constants declared by an earlier
/// fragment are visible to later ones.
#[derive(Debug)]
pub struct ConstraintLoader<'m> {
    mapping: &'m SymbolMapping,
    declared: HashMap<String, String>,
}

impl<'m> ConstraintLoader<'m> {
    pub fn new(mapping: &'m SymbolMapping) -> Self {
        ConstraintLoader {
            mapping,
            declared: HashMap::new(),
        }
    }

    fn is_sort(&self, name: &str) -> bool {
        prelude::SORTS.contains(&name) || BUILTIN_SORTS.contains(&name)
    }

    fn is_global(&self, name: &str) -> bool {
        self.declared.contains_key(name)
            || self.mapping.contains_symbol(name)
            || prelude::FUNCTIONS.iter().any(|(f, _)| *f == name)
            || CORE_SYMBOLS.contains(&name)
    }

    fn mapped_sort(&self, name: &str) -> Option<&'static str> {
        self.mapping.element(name).map(|(kind, _)| sort_of(kind))
    }

    pub fn load(&mut self, input: &str) -> Result<ConstraintFragment, Vec<ConstraintError>> {
        let forms = read_all(input).map_err(|e| {
            vec![ConstraintError::MalformedSExpression {
                message: e.message,
                span: e.span,
            }]
        })?;
        let mut errors = Vec::new();
        let mut fragment = ConstraintFragment::default();
        let mut assertions = Vec::new();

        // declarations first so assertions may use constants declared below them
        for form in &forms {
            match self.classify(form) {
                Ok(Command::Declare(decl, span)) => {
                    self.add_declaration(decl, span, &mut fragment, &mut errors)
                }
                Ok(Command::Assert(term)) => assertions.push(term),
                Err(e) => errors.push(e),
            }
        }
        for term in assertions {
            let mut scope = Vec::new();
            let mut refs = BTreeSet::new();
            self.check_term(term, &mut scope, &mut refs, &mut errors);
            fragment.referenced_symbols.extend(refs);
            fragment.assertions.push(term.clone());
        }
        if errors.is_empty() {
            Ok(fragment)
        } else {
            errors.sort_by_key(ConstraintError::span);
            Err(errors)
        }
    }

    fn add_declaration(
        &mut self,
        decl: ConstDecl,
        span: SourceSpan,
        fragment: &mut ConstraintFragment,
        errors: &mut Vec<ConstraintError>,
    ) {
        if !self.is_sort(&decl.sort) {
            errors.push(ConstraintError::UnknownSymbol {
                name: decl.sort,
                span,
            });
            return;
        }
        if let Some(sort) = self.mapped_sort(&decl.name) {
            if sort == decl.sort {
                fragment.redundant.push(decl);
            } else {
                errors.push(ConstraintError::Redeclared {
                    name: decl.name,
                    span,
                });
            }
            return;
        }
        let clashes = self.declared.contains_key(&decl.name)
            || prelude::FUNCTIONS.iter().any(|(f, _)| *f == decl.name)
            || prelude::SORTS.contains(&decl.name.as_str())
            || CORE_SYMBOLS.contains(&decl.name.as_str())
            || crate::encoder::RESERVED_SYMBOLS.contains(&decl.name.as_str());
        if clashes {
            errors.push(ConstraintError::Redeclared {
                name: decl.name,
                span,
            });
            return;
        }
        self.declared.insert(decl.name.clone(), decl.sort.clone());
        fragment.declarations.push(decl);
    }

    fn classify<'f>(&self, form: &'f SExpr) -> Result<Command<'f>, ConstraintError> {
        let span = form.span();
        let malformed = |message: &str| ConstraintError::MalformedSExpression {
            message: message.to_owned(),
            span,
        };
        let items = form
            .as_list()
            .ok_or_else(|| malformed("expected a command"))?;
        let head = items
            .first()
            .and_then(SExpr::as_symbol)
            .ok_or_else(|| malformed("expected a command name"))?;
        let symbol = |e: &SExpr, what: &str| {
            e.as_symbol()
                .map(str::to_owned)
                .ok_or_else(|| malformed(&format!("expected {what}")))
        };
        match head {
            "assert" => match items {
                [_, term] => Ok(Command::Assert(term)),
                _ => Err(malformed("`assert` takes exactly one term")),
            },
            "declare-const" => match items {
                [_, name, sort] => Ok(Command::Declare(
                    ConstDecl {
                        name: symbol(name, "a constant name")?,
                        sort: symbol(sort, "a sort name")?,
                    },
                    span,
                )),
                _ => Err(malformed("`declare-const` takes a name and a sort")),
            },
            "declare-fun" => match items {
                [_, name, SExpr::List { items: args, .. }, sort] if args.is_empty() => {
                    Ok(Command::Declare(
                        ConstDecl {
                            name: symbol(name, "a constant name")?,
                            sort: symbol(sort, "a sort name")?,
                        },
                        span,
                    ))
                }
                _ => Err(ConstraintError::ForbiddenCommand {
                    form: "declare-fun with arguments".to_owned(),
                    span,
                }),
            },
            other => Err(ConstraintError::ForbiddenCommand {
                form: other.to_owned(),
                span,
            }),
        }
    }

    fn check_term(
        &self,
        term: &SExpr,
        scope: &mut Vec<String>,
        refs: &mut BTreeSet<String>,
        errors: &mut Vec<ConstraintError>,
    ) {
        let span = term.span();
        let malformed = |message: &str| ConstraintError::MalformedSExpression {
            message: message.to_owned(),
            span,
        };
        match term {
            SExpr::Atom {
                kind: AtomKind::Keyword,
                ..
            } => errors.push(malformed("keyword in term position")),
            SExpr::Atom { .. } => {
                if let Some(name) = term.as_symbol() {
                    self.check_symbol(name, span, scope, refs, errors);
                }
            }
            SExpr::List { items, .. } => {
                let Some(head) = items.first() else {
                    errors.push(malformed("empty application"));
                    return;
                };
                match head.as_symbol() {
                    Some("forall" | "exists") => match items.as_slice() {
                        [_, SExpr::List { items: vars, .. }, body] if !vars.is_empty() => {
                            let depth = scope.len();
                            for var in vars {
                                match var.as_list() {
                                    Some([name, sort]) if name.as_symbol().is_some() => {
                                        match sort.as_symbol() {
                                            Some(s) if self.is_sort(s) => {}
                                            Some(s) => {
                                                errors.push(ConstraintError::UnknownSymbol {
                                                    name: s.to_owned(),
                                                    span: sort.span(),
                                                })
                                            }
                                            None => {
                                                errors.push(ConstraintError::MalformedSExpression {
                                                    message: "expected a sort name".to_owned(),
                                                    span: sort.span(),
                                                })
                                            }
                                        }
                                        scope.push(name.as_symbol().unwrap_or_default().to_owned());
                                    }
                                    _ => errors.push(ConstraintError::MalformedSExpression {
                                        message: "expected `(name Sort)`".to_owned(),
                                        span: var.span(),
                                    }),
                                }
                            }
                            self.check_term(body, scope, refs, errors);
                            scope.truncate(depth);
                        }
                        _ => errors.push(malformed(
                            "quantifier needs a non-empty binder list and one body",
                        )),
                    },
                    Some("let") => match items.as_slice() {
                        [_, SExpr::List { items: binds, .. }, body] if !binds.is_empty() => {
                            let mut names = Vec::new();
                            for bind in binds {
                                match bind.as_list() {
                                    Some([name, value]) if name.as_symbol().is_some() => {
                                        // let bindings are parallel: values see the outer scope
                                        self.check_term(value, scope, refs, errors);
                                        names.push(name.as_symbol().unwrap_or_default().to_owned());
                                    }
                                    _ => errors.push(ConstraintError::MalformedSExpression {
                                        message: "expected `(name term)`".to_owned(),
                                        span: bind.span(),
                                    }),
                                }
                            }
                            let depth = scope.len();
                            scope.extend(names);
                            self.check_term(body, scope, refs, errors);
                            scope.truncate(depth);
                        }
                        _ => errors.push(malformed(
                            "`let` needs a non-empty binding list and one body",
                        )),
                    },
                    Some("!") => match items.as_slice() {
                        [_, inner, attrs @ ..] => {
                            self.check_term(inner, scope, refs, errors);
                            let mut rest = attrs.iter();
                            while let Some(attr) = rest.next() {
                                let key = match attr {
                                    SExpr::Atom {
                                        kind: AtomKind::Keyword,
                                        text,
                                        ..
                                    } => text.as_str(),
                                    _ => {
                                        errors.push(ConstraintError::MalformedSExpression {
                                            message: "expected an attribute keyword".to_owned(),
                                            span: attr.span(),
                                        });
                                        break;
                                    }
                                };
                                let Some(value) = rest.next() else { break };
                                if key == ":pattern" {
                                    for p in value.as_list().unwrap_or_default() {
                                        self.check_term(p, scope, refs, errors);
                                    }
                                }
                            }
                        }
                        _ => errors.push(malformed("`!` needs a term")),
                    },
                    Some("_" | "as") => {}
                    Some(_) => {
                        for item in items {
                            self.check_term(item, scope, refs, errors);
                        }
                    }
                    None => match head {
                        SExpr::List { .. } => {
                            for item in items {
                                self.check_term(item, scope, refs, errors);
                            }
                        }
                        _ => errors.push(ConstraintError::MalformedSExpression {
                            message: "expected a function symbol".to_owned(),
                            span: head.span(),
                        }),
                    },
                }
            }
        }
    }

    fn check_symbol(
        &self,
        name: &str,
        span: SourceSpan,
        scope: &[String],
        refs: &mut BTreeSet<String>,
        errors: &mut Vec<ConstraintError>,
    ) {
        if scope.iter().any(|s| s == name) {
            return;
        }
        if self.is_global(name) {
            refs.insert(name.to_owned());
        } else {
            errors.push(ConstraintError::UnknownSymbol {
                name: name.to_owned(),
                span,
            });
        }
    }

    /// Names declared by fragments loaded so far.
    pub fn declared_constants(&self) -> HashSet<&str> {
        self.declared.keys().map(String::as_str).collect()
    }
}

enum Command<'f> {
    Declare(ConstDecl, SourceSpan),
    Assert(&'f SExpr),
}
