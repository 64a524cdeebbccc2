//! Translation of a [`PolicyDb`] into an SMT-LIB2 script.
//!
//! Every element becomes a constant of its sort with an id assertion. User,
//! role and type relationships become positive ground assertions of the
//! prelude's relationship functions, and each access vector rule becomes one
//! assertion per permission. Predicates are left open: tuples the policy never
//! mentions are unconstrained, so user constraints decide what else must hold.
//!
//! A neverallow rule covers the tuples of its source and target together with
//! the member types of either side when that side is an attribute. For every
//! covered tuple the encoder asserts `av-neverallow` and withholds any
//! `av-allow` assertion that would derive it through the attribute
//! propagation axioms. An allow rule on an attribute that would reach a
//! forbidden member is split into per-member assertions for the members that
//! stay allowed. The policy segment alone is therefore always satisfiable.

pub mod prelude;
mod symbols;

use std::collections::HashMap;
use std::fmt::Write as _;

use indexmap::IndexSet;
use thiserror::Error;

use crate::constraints::ConstraintFragment;
use crate::model::{AvRuleKind, ElementKind, Identifier, ModelError, PolicyDb};

pub use prelude::emit_prelude;
pub use symbols::{base_symbol, sort_of, SymbolMapping, RESERVED_SYMBOLS};

/// An SMT-LIB2 script split into its segments. Each entry is one line: a
/// command or a `;` comment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmtScript {
    pub prelude: Vec<String>,
    pub policy: Vec<String>,
    pub constraints: Vec<String>,
    pub finale: Vec<String>,
}

pub const CHECK_SAT: &str = "(check-sat)";

impl SmtScript {
    /// A script holding only the prelude and the check command.
    pub fn prelude_only() -> Self {
        SmtScript {
            prelude: emit_prelude(),
            policy: Vec::new(),
            constraints: Vec::new(),
            finale: vec![CHECK_SAT.to_owned()],
        }
    }

    /// Appends a loaded constraint fragment to the constraints segment.
    pub fn add_constraints(&mut self, fragment: &ConstraintFragment) {
        self.constraints.extend(fragment.render_lines());
    }

    /// Renders the script as LF-terminated text.
    pub fn render(&self) -> String {
        render(self)
    }

    pub fn line_count(&self) -> usize {
        self.prelude.len() + self.policy.len() + self.constraints.len() + self.finale.len() + 3
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("policy failed validation: {}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
    ValidationFailed(Vec<ModelError>),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EncodeOptions {
    /// Assert that all class constants, and all permission constants, are
    /// pairwise distinct. Off by default: only users, roles and types carry
    /// identifiers.
    pub distinct_classes_and_permissions: bool,
}

/// Encodes the policy with default options.
pub fn encode_policy(db: &PolicyDb) -> Result<SmtScript, EncodeError> {
    encode_policy_with(db, &EncodeOptions::default()).map(|(script, _)| script)
}

/// Encodes the policy, returning the script and the symbol mapping used.
pub fn encode_policy_with(
    db: &PolicyDb,
    options: &EncodeOptions,
) -> Result<(SmtScript, SymbolMapping), EncodeError> {
    db.validate().map_err(EncodeError::ValidationFailed)?;
    let mapping = SymbolMapping::build(db);
    let mut policy = Vec::new();

    declare_elements(db, &mapping, options, &mut policy);
    relationships(db, &mapping, &mut policy);
    access_vectors(db, &mapping, &mut policy);

    let script = SmtScript {
        prelude: emit_prelude(),
        policy,
        constraints: Vec::new(),
        finale: vec![CHECK_SAT.to_owned()],
    };
    Ok((script, mapping))
}

/// The integer an element is identified by in its sort. Attribute kinds are
/// numbered after the plain kind sharing their sort so ids stay unique per sort.
pub fn smt_id(db: &PolicyDb, id: &Identifier) -> Option<u64> {
    let offset = match id.kind() {
        ElementKind::User | ElementKind::Role | ElementKind::TypeLabel => 0,
        ElementKind::AttributeRole => db.count(ElementKind::Role),
        ElementKind::AttributeType => db.count(ElementKind::TypeLabel),
        ElementKind::Class | ElementKind::Permission => return None,
    };
    Some(offset as u64 + u64::from(id.uid()))
}

fn id_function(kind: ElementKind) -> Option<&'static str> {
    match kind {
        ElementKind::User => Some(prelude::USER_ID),
        ElementKind::Role | ElementKind::AttributeRole => Some(prelude::ROLE_ID),
        ElementKind::TypeLabel | ElementKind::AttributeType => Some(prelude::TYPE_ID),
        _ => None,
    }
}

fn declare_elements(
    db: &PolicyDb,
    mapping: &SymbolMapping,
    options: &EncodeOptions,
    out: &mut Vec<String>,
) {
    let groups = [
        ("; Users", &[ElementKind::User][..]),
        (
            "; Roles",
            &[ElementKind::Role, ElementKind::AttributeRole][..],
        ),
        (
            "; Types",
            &[ElementKind::TypeLabel, ElementKind::AttributeType][..],
        ),
        ("; Classes", &[ElementKind::Class][..]),
        ("; Permissions", &[ElementKind::Permission][..]),
    ];
    for (banner, kinds) in groups {
        let ids: Vec<&Identifier> = kinds.iter().flat_map(|&k| db.identifiers(k)).collect();
        if ids.is_empty() {
            continue;
        }
        out.push(banner.to_owned());
        for id in &ids {
            let sym = mapping.symbol(id);
            out.push(format!("(declare-const {sym} {})", sort_of(id.kind())));
            if let (Some(func), Some(n)) = (id_function(id.kind()), smt_id(db, id)) {
                out.push(format!("(assert (= ({func} {sym}) {n}))"));
            }
        }
        let is_class_like = matches!(kinds[0], ElementKind::Class | ElementKind::Permission);
        if is_class_like && options.distinct_classes_and_permissions && ids.len() > 1 {
            let syms: Vec<&str> = ids.iter().map(|id| mapping.symbol(id)).collect();
            out.push(format!("(assert (distinct {}))", syms.join(" ")));
        }
    }
}

fn relationships(db: &PolicyDb, mapping: &SymbolMapping, out: &mut Vec<String>) {
    let sections = [
        ("; User roles", prelude::USER_HAS_ROLE, db.user_roles()),
        ("; Role types", prelude::ROLE_HAS_TYPE, db.role_types()),
        (
            "; Attribute role memberships",
            prelude::ROLE_HAS_ATTRIBUTE_ROLE,
            db.role_attributes(),
        ),
        (
            "; Type attribute memberships",
            prelude::TYPE_HAS_ATTRIBUTE,
            db.type_attributes(),
        ),
    ];
    for (banner, func, pairs) in sections {
        if pairs.is_empty() {
            continue;
        }
        out.push(banner.to_owned());
        for (a, b) in pairs {
            out.push(format!(
                "(assert ({func} {} {}))",
                mapping.symbol(a),
                mapping.symbol(b)
            ));
        }
    }
}

type Tuple<'a> = (
    &'a Identifier,
    &'a Identifier,
    &'a Identifier,
    &'a Identifier,
);

/// The type itself followed by its members when it is an attribute.
fn with_members<'a>(
    members: &'a HashMap<&'a Identifier, Vec<&'a Identifier>>,
    id: &'a Identifier,
) -> impl Iterator<Item = &'a Identifier> + 'a {
    std::iter::once(id).chain(members.get(id).into_iter().flatten().copied())
}

fn access_vectors(db: &PolicyDb, mapping: &SymbolMapping, out: &mut Vec<String>) {
    let mut members: HashMap<&Identifier, Vec<&Identifier>> = HashMap::new();
    for (ty, attr) in db.type_attributes() {
        members.entry(attr).or_default().push(ty);
    }

    let mut forbidden: IndexSet<Tuple> = IndexSet::new();
    for rule in db
        .av_rules()
        .iter()
        .filter(|r| r.kind == AvRuleKind::NeverAllow)
    {
        for perm in &rule.permissions {
            for s in with_members(&members, &rule.source) {
                for t in with_members(&members, &rule.target) {
                    forbidden.insert((s, t, &rule.class, perm));
                }
            }
        }
    }
    // a tuple is blocked when asserting it would derive a forbidden tuple
    let blocked = |s: &Identifier, t: &Identifier, c: &Identifier, p: &Identifier| {
        with_members(&members, s)
            .any(|s2| with_members(&members, t).any(|t2| forbidden.contains(&(s2, t2, c, p))))
    };

    let mut allowed: IndexSet<Tuple> = IndexSet::new();
    for rule in db.av_rules().iter().filter(|r| r.kind == AvRuleKind::Allow) {
        for perm in &rule.permissions {
            if !blocked(&rule.source, &rule.target, &rule.class, perm) {
                allowed.insert((&rule.source, &rule.target, &rule.class, perm));
                continue;
            }
            for s in with_members(&members, &rule.source) {
                for t in with_members(&members, &rule.target) {
                    if !blocked(s, t, &rule.class, perm) {
                        allowed.insert((s, t, &rule.class, perm));
                    }
                }
            }
        }
    }

    let mut emit = |banner: &str, pred: &str, tuples: &IndexSet<Tuple>| {
        if tuples.is_empty() {
            return;
        }
        out.push(banner.to_owned());
        for (s, t, c, p) in tuples {
            out.push(format!(
                "(assert ({pred} {} {} {} {}))",
                mapping.symbol(s),
                mapping.symbol(t),
                mapping.symbol(c),
                mapping.symbol(p)
            ));
        }
    };
    emit("; allow rules", prelude::AV_ALLOW, &allowed);
    emit("; neverallow rules", prelude::AV_NEVERALLOW, &forbidden);
}

pub const PRELUDE_BANNER: &str = ";; ---- prelude ----";
pub const POLICY_BANNER: &str = ";; ---- policy ----";
pub const CONSTRAINTS_BANNER: &str = ";; ---- constraints ----";

/// Renders a script as newline-delimited SMT-LIB2 with segment banners.
pub fn render(script: &SmtScript) -> String {
    let mut out = String::new();
    let segments = [
        (PRELUDE_BANNER, &script.prelude),
        (POLICY_BANNER, &script.policy),
        (CONSTRAINTS_BANNER, &script.constraints),
    ];
    for (banner, lines) in segments {
        let _ = writeln!(out, "{banner}");
        for line in lines {
            out.push_str(line);
            out.push('\n');
        }
    }
    for line in &script.finale {
        out.push_str(line);
        out.push('\n');
    }
    out
}
