//! In-memory policy database.
//!
//! A [`PolicyDb`] holds the declared context elements of a policy (users,
//! roles, types, classes, permissions and the two attribute kinds), the
//! relationships between them, the access vector rules and the initial SID
//! statements. Every element is registered in a symbol table that assigns it a
//! dense per-kind uid in declaration order.
//!
//! Names live in five namespaces: users; roles and attribute roles; types and
//! type attributes; classes; permissions. A role and a type may share a name,
//! in which case only kind-qualified lookups are unambiguous.

use std::collections::HashMap;
use std::fmt;

use indexmap::{IndexMap, IndexSet};
use thiserror::Error;

/// The role every policy implicitly declares for object contexts.
pub const OBJECT_ROLE: &str = "object_r";

/// Keywords of the policy language; they can never be element names.
pub const KEYWORDS: &[&str] = &[
    "class",
    "sid",
    "role",
    "type",
    "attribute",
    "roleattribute",
    "typeattribute",
    "allow",
    "neverallow",
    "user",
    "roles",
    "types",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ElementKind {
    User,
    Role,
    TypeLabel,
    Class,
    Permission,
    AttributeRole,
    AttributeType,
}

impl ElementKind {
    pub const ALL: [ElementKind; 7] = [
        ElementKind::User,
        ElementKind::Role,
        ElementKind::TypeLabel,
        ElementKind::Class,
        ElementKind::Permission,
        ElementKind::AttributeRole,
        ElementKind::AttributeType,
    ];

    fn index(self) -> usize {
        self as usize
    }

    /// Kinds whose names must not clash with names of this kind.
    fn namespace(self) -> &'static [ElementKind] {
        use ElementKind::*;
        match self {
            User => &[User],
            Role | AttributeRole => &[Role, AttributeRole],
            TypeLabel | AttributeType => &[TypeLabel, AttributeType],
            Class => &[Class],
            Permission => &[Permission],
        }
    }

    /// Conventional name suffix for the kind, if it has one.
    pub fn conventional_suffix(self) -> Option<&'static str> {
        match self {
            ElementKind::User => Some("_u"),
            ElementKind::Role => Some("_r"),
            ElementKind::TypeLabel => Some("_t"),
            _ => None,
        }
    }

    pub fn is_type_like(self) -> bool {
        matches!(self, ElementKind::TypeLabel | ElementKind::AttributeType)
    }

    pub fn is_role_like(self) -> bool {
        matches!(self, ElementKind::Role | ElementKind::AttributeRole)
    }
}

impl fmt::Display for ElementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ElementKind::User => "user",
            ElementKind::Role => "role",
            ElementKind::TypeLabel => "type",
            ElementKind::Class => "class",
            ElementKind::Permission => "permission",
            ElementKind::AttributeRole => "attribute role",
            ElementKind::AttributeType => "attribute",
        };
        f.write_str(s)
    }
}

/// A declared element: its name, kind and per-kind uid.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Identifier {
    kind: ElementKind,
    uid: u32,
    name: String,
}

impl Identifier {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> ElementKind {
        self.kind
    }

    pub fn uid(&self) -> u32 {
        self.uid
    }
}

impl fmt::Display for Identifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// Returns true if `name` is a legal element name.
pub fn is_valid_token(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_') && !KEYWORDS.contains(&name)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AvRuleKind {
    Allow,
    NeverAllow,
}

impl AvRuleKind {
    pub fn keyword(self) -> &'static str {
        match self {
            AvRuleKind::Allow => "allow",
            AvRuleKind::NeverAllow => "neverallow",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AvRule {
    pub kind: AvRuleKind,
    pub source: Identifier,
    pub target: Identifier,
    pub class: Identifier,
    pub permissions: IndexSet<Identifier>,
}

/// A `user:role:type` security context.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecurityContext {
    pub user: Identifier,
    pub role: Identifier,
    pub type_label: Identifier,
}

impl fmt::Display for SecurityContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.user, self.role, self.type_label)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InitialSid {
    pub name: String,
    pub context: Option<SecurityContext>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("invalid name `{0}`")]
    InvalidToken(String),
    #[error("duplicate declaration of {kind} `{name}`")]
    DuplicateDeclaration { kind: ElementKind, name: String },
    #[error("`{name}` is already declared as {existing}, cannot redeclare it as {kind}")]
    NamespaceClash {
        kind: ElementKind,
        existing: ElementKind,
        name: String,
    },
    #[error("unknown {expected} `{name}`")]
    UnknownIdentifier { expected: String, name: String },
    #[error("permission `{permission}` is not defined for class `{class}`")]
    PermissionNotInClass { permission: String, class: String },
    #[error("permission `{permission}` is already defined for class `{class}`")]
    DuplicatePermission { permission: String, class: String },
    #[error("class `{0}` already has a permission block")]
    DuplicatePermissionBlock(String),
    #[error("`{name}` is ambiguous: declared as {kinds}")]
    AmbiguousName { name: String, kinds: String },
    #[error("{kind} `{name}` cannot be used as {expected}")]
    WrongKind {
        name: String,
        kind: ElementKind,
        expected: String,
    },
    #[error("access vector rule for `{0}` has no permissions")]
    EmptyPermissionSet(String),
    #[error("duplicate declaration of sid `{0}`")]
    DuplicateSid(String),
    #[error("unknown sid `{0}`")]
    UnknownSid(String),
}

/// A name whose suffix contradicts its declared kind (e.g. a type named `foo_r`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NamingWarning {
    pub identifier: Identifier,
    pub suffix: &'static str,
}

impl fmt::Display for NamingWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} `{}` carries the `{}` suffix of another kind",
            self.identifier.kind, self.identifier.name, self.suffix
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct SymbolTable {
    by_kind: [Vec<Identifier>; 7],
    index: [HashMap<String, u32>; 7],
}

impl SymbolTable {
    fn get(&self, kind: ElementKind, name: &str) -> Option<&Identifier> {
        self.index[kind.index()]
            .get(name)
            .map(|&uid| &self.by_kind[kind.index()][uid as usize])
    }

    fn insert(&mut self, kind: ElementKind, name: &str) -> Identifier {
        let list = &mut self.by_kind[kind.index()];
        let id = Identifier {
            kind,
            uid: list.len() as u32,
            name: name.to_owned(),
        };
        list.push(id.clone());
        self.index[kind.index()].insert(name.to_owned(), id.uid);
        id
    }
}

/// The parsed policy. Construct with [`PolicyDb::new`] and the `declare`/`add_*`
/// methods, or with [`crate::parser::parse_policy`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyDb {
    symbols: SymbolTable,
    class_permissions: IndexMap<Identifier, IndexSet<Identifier>>,
    permission_blocks: Vec<Identifier>,
    user_roles: IndexSet<(Identifier, Identifier)>,
    role_types: IndexSet<(Identifier, Identifier)>,
    role_attributes: IndexSet<(Identifier, Identifier)>,
    type_attributes: IndexSet<(Identifier, Identifier)>,
    av_rules: Vec<AvRule>,
    sids: Vec<String>,
    sid_contexts: Vec<(String, SecurityContext)>,
}

impl Default for PolicyDb {
    fn default() -> Self {
        Self::new()
    }
}

impl PolicyDb {
    pub fn new() -> Self {
        let mut db = PolicyDb {
            symbols: SymbolTable::default(),
            class_permissions: IndexMap::new(),
            permission_blocks: Vec::new(),
            user_roles: IndexSet::new(),
            role_types: IndexSet::new(),
            role_attributes: IndexSet::new(),
            type_attributes: IndexSet::new(),
            av_rules: Vec::new(),
            sids: Vec::new(),
            sid_contexts: Vec::new(),
        };
        db.symbols.insert(ElementKind::Role, OBJECT_ROLE);
        db
    }

    /// Registers a new element. Re-declaring a class is a no-op returning the
    /// existing identifier; any other repeated name within a namespace fails.
    pub fn declare(&mut self, kind: ElementKind, name: &str) -> Result<Identifier, ModelError> {
        if !is_valid_token(name) {
            return Err(ModelError::InvalidToken(name.to_owned()));
        }
        for &other in kind.namespace() {
            if let Some(existing) = self.symbols.get(other, name) {
                if other != kind {
                    return Err(ModelError::NamespaceClash {
                        kind,
                        existing: other,
                        name: name.to_owned(),
                    });
                }
                if kind == ElementKind::Class {
                    return Ok(existing.clone());
                }
                return Err(ModelError::DuplicateDeclaration {
                    kind,
                    name: name.to_owned(),
                });
            }
        }
        let id = self.symbols.insert(kind, name);
        if kind == ElementKind::Class {
            self.class_permissions.insert(id.clone(), IndexSet::new());
        }
        Ok(id)
    }

    /// Kind-qualified lookup.
    pub fn lookup(&self, kind: ElementKind, name: &str) -> Option<&Identifier> {
        self.symbols.get(kind, name)
    }

    /// Looks `name` up among several acceptable kinds.
    pub fn lookup_any(
        &self,
        kinds: &[ElementKind],
        name: &str,
    ) -> Result<Option<&Identifier>, ModelError> {
        let found: Vec<&Identifier> = kinds
            .iter()
            .filter_map(|&k| self.symbols.get(k, name))
            .collect();
        match found.len() {
            0 => Ok(None),
            1 => Ok(Some(found[0])),
            _ => Err(ambiguous(name, &found)),
        }
    }

    /// Unqualified lookup across every kind.
    pub fn resolve(&self, name: &str) -> Result<Option<&Identifier>, ModelError> {
        self.lookup_any(&ElementKind::ALL, name)
    }

    /// Like [`PolicyDb::lookup_any`] but reports a missing name as
    /// `UnknownIdentifier` and a name of another kind as `WrongKind`.
    pub fn require(
        &self,
        kinds: &[ElementKind],
        name: &str,
        expected: &str,
    ) -> Result<Identifier, ModelError> {
        if let Some(id) = self.lookup_any(kinds, name)? {
            return Ok(id.clone());
        }
        match self.resolve(name) {
            Ok(Some(other)) => Err(ModelError::WrongKind {
                name: name.to_owned(),
                kind: other.kind,
                expected: expected.to_owned(),
            }),
            _ => Err(ModelError::UnknownIdentifier {
                expected: expected.to_owned(),
                name: name.to_owned(),
            }),
        }
    }

    /// Identifiers of one kind in uid order.
    pub fn identifiers(&self, kind: ElementKind) -> &[Identifier] {
        &self.symbols.by_kind[kind.index()]
    }

    pub fn count(&self, kind: ElementKind) -> usize {
        self.identifiers(kind).len()
    }

    /// Declares `permission` under `class`, reusing the permission identifier
    /// when another class already defines a permission of that name.
    pub fn add_class_permission(
        &mut self,
        class: &Identifier,
        permission: &str,
    ) -> Result<Identifier, ModelError> {
        let perm = match self.lookup(ElementKind::Permission, permission) {
            Some(p) => p.clone(),
            None => self.declare(ElementKind::Permission, permission)?,
        };
        let set =
            self.class_permissions
                .get_mut(class)
                .ok_or_else(|| ModelError::UnknownIdentifier {
                    expected: "class".into(),
                    name: class.name.clone(),
                })?;
        if !set.insert(perm.clone()) {
            return Err(ModelError::DuplicatePermission {
                permission: permission.to_owned(),
                class: class.name.clone(),
            });
        }
        Ok(perm)
    }

    /// Declares `class` with the permissions of a `class NAME { ... }` block.
    pub fn define_permission_block(
        &mut self,
        class: &str,
        permissions: &[&str],
    ) -> Result<Identifier, ModelError> {
        let class = self.declare(ElementKind::Class, class)?;
        if self.permission_blocks.contains(&class) {
            return Err(ModelError::DuplicatePermissionBlock(class.name.clone()));
        }
        self.permission_blocks.push(class.clone());
        for perm in permissions {
            self.add_class_permission(&class, perm)?;
        }
        Ok(class)
    }

    pub fn class_permissions(&self, class: &Identifier) -> Option<&IndexSet<Identifier>> {
        self.class_permissions.get(class)
    }

    pub fn classes(&self) -> impl Iterator<Item = (&Identifier, &IndexSet<Identifier>)> {
        self.class_permissions.iter()
    }

    /// Classes in the order their permission blocks were defined.
    pub fn permission_blocks(&self) -> &[Identifier] {
        &self.permission_blocks
    }

    pub fn add_av_rule(&mut self, rule: AvRule) -> Result<(), ModelError> {
        self.check_av_rule(&rule)?;
        self.av_rules.push(rule);
        Ok(())
    }

    pub fn add_user_role(
        &mut self,
        user: &Identifier,
        role: &Identifier,
    ) -> Result<(), ModelError> {
        self.check_member(user, &[ElementKind::User], "user")?;
        self.check_member(role, &[ElementKind::Role], "role")?;
        self.user_roles.insert((user.clone(), role.clone()));
        Ok(())
    }

    pub fn add_role_type(&mut self, role: &Identifier, ty: &Identifier) -> Result<(), ModelError> {
        self.check_member(
            role,
            &[ElementKind::Role, ElementKind::AttributeRole],
            "role",
        )?;
        self.check_member(
            ty,
            &[ElementKind::TypeLabel, ElementKind::AttributeType],
            "type",
        )?;
        self.role_types.insert((role.clone(), ty.clone()));
        Ok(())
    }

    pub fn add_role_attribute(
        &mut self,
        role: &Identifier,
        attribute: &Identifier,
    ) -> Result<(), ModelError> {
        self.check_member(role, &[ElementKind::Role], "role")?;
        self.check_member(attribute, &[ElementKind::AttributeRole], "attribute role")?;
        self.role_attributes
            .insert((role.clone(), attribute.clone()));
        Ok(())
    }

    pub fn add_type_attribute(
        &mut self,
        ty: &Identifier,
        attribute: &Identifier,
    ) -> Result<(), ModelError> {
        self.check_member(ty, &[ElementKind::TypeLabel], "type")?;
        self.check_member(attribute, &[ElementKind::AttributeType], "attribute")?;
        self.type_attributes.insert((ty.clone(), attribute.clone()));
        Ok(())
    }

    pub fn declare_sid(&mut self, name: &str) -> Result<(), ModelError> {
        if !is_valid_token(name) {
            return Err(ModelError::InvalidToken(name.to_owned()));
        }
        if self.sids.iter().any(|s| s == name) {
            return Err(ModelError::DuplicateSid(name.to_owned()));
        }
        self.sids.push(name.to_owned());
        Ok(())
    }

    pub fn label_sid(&mut self, name: &str, context: SecurityContext) -> Result<(), ModelError> {
        if !self.sids.iter().any(|s| s == name) {
            return Err(ModelError::UnknownSid(name.to_owned()));
        }
        self.check_member(&context.user, &[ElementKind::User], "user")?;
        self.check_member(&context.role, &[ElementKind::Role], "role")?;
        self.check_member(&context.type_label, &[ElementKind::TypeLabel], "type")?;
        self.sid_contexts.push((name.to_owned(), context));
        Ok(())
    }

    pub fn user_roles(&self) -> &IndexSet<(Identifier, Identifier)> {
        &self.user_roles
    }

    pub fn role_types(&self) -> &IndexSet<(Identifier, Identifier)> {
        &self.role_types
    }

    pub fn role_attributes(&self) -> &IndexSet<(Identifier, Identifier)> {
        &self.role_attributes
    }

    pub fn type_attributes(&self) -> &IndexSet<(Identifier, Identifier)> {
        &self.type_attributes
    }

    pub fn av_rules(&self) -> &[AvRule] {
        &self.av_rules
    }

    pub fn sid_names(&self) -> &[String] {
        &self.sids
    }

    pub fn sid_contexts(&self) -> &[(String, SecurityContext)] {
        &self.sid_contexts
    }

    /// Every initial SID statement: declarations first, then labelled ones.
    pub fn initial_sids(&self) -> Vec<InitialSid> {
        self.sids
            .iter()
            .map(|name| InitialSid {
                name: name.clone(),
                context: None,
            })
            .chain(self.sid_contexts.iter().map(|(name, ctx)| InitialSid {
                name: name.clone(),
                context: Some(ctx.clone()),
            }))
            .collect()
    }

    /// Re-checks referential integrity of everything stored in the database.
    pub fn validate(&self) -> Result<(), Vec<ModelError>> {
        let mut errors = Vec::new();
        for kind in ElementKind::ALL {
            for (uid, id) in self.identifiers(kind).iter().enumerate() {
                if id.uid as usize != uid || id.kind != kind {
                    errors.push(ModelError::UnknownIdentifier {
                        expected: kind.to_string(),
                        name: id.name.clone(),
                    });
                }
            }
        }
        let mut push = |r: Result<(), ModelError>| {
            if let Err(e) = r {
                errors.push(e);
            }
        };
        for (class, perms) in &self.class_permissions {
            push(self.check_member(class, &[ElementKind::Class], "class"));
            for p in perms {
                push(self.check_member(p, &[ElementKind::Permission], "permission"));
            }
        }
        for (u, r) in &self.user_roles {
            push(self.check_member(u, &[ElementKind::User], "user"));
            push(self.check_member(r, &[ElementKind::Role], "role"));
        }
        for (r, t) in &self.role_types {
            push(self.check_member(r, &[ElementKind::Role, ElementKind::AttributeRole], "role"));
            push(self.check_member(
                t,
                &[ElementKind::TypeLabel, ElementKind::AttributeType],
                "type",
            ));
        }
        for (r, a) in &self.role_attributes {
            push(self.check_member(r, &[ElementKind::Role], "role"));
            push(self.check_member(a, &[ElementKind::AttributeRole], "attribute role"));
        }
        for (t, a) in &self.type_attributes {
            push(self.check_member(t, &[ElementKind::TypeLabel], "type"));
            push(self.check_member(a, &[ElementKind::AttributeType], "attribute"));
        }
        for rule in &self.av_rules {
            push(self.check_av_rule(rule));
        }
        for (name, ctx) in &self.sid_contexts {
            if !self.sids.contains(name) {
                push(Err(ModelError::UnknownSid(name.clone())));
            }
            push(self.check_member(&ctx.user, &[ElementKind::User], "user"));
            push(self.check_member(&ctx.role, &[ElementKind::Role], "role"));
            push(self.check_member(&ctx.type_label, &[ElementKind::TypeLabel], "type"));
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }

    /// Names whose conventional suffix belongs to a different kind.
    pub fn naming_warnings(&self) -> Vec<NamingWarning> {
        let mut out = Vec::new();
        for kind in ElementKind::ALL {
            for id in self.identifiers(kind) {
                if id.name == OBJECT_ROLE {
                    continue;
                }
                for other in [ElementKind::User, ElementKind::Role, ElementKind::TypeLabel] {
                    let suffix = other.conventional_suffix().unwrap();
                    let compatible = match other {
                        ElementKind::Role => kind.is_role_like(),
                        ElementKind::TypeLabel => kind.is_type_like(),
                        _ => kind == other,
                    };
                    if !compatible && id.name.ends_with(suffix) && id.name.len() > suffix.len() {
                        out.push(NamingWarning {
                            identifier: id.clone(),
                            suffix,
                        });
                    }
                }
            }
        }
        out
    }

    fn check_member(
        &self,
        id: &Identifier,
        kinds: &[ElementKind],
        expected: &str,
    ) -> Result<(), ModelError> {
        if !kinds.contains(&id.kind) {
            return Err(ModelError::WrongKind {
                name: id.name.clone(),
                kind: id.kind,
                expected: expected.to_owned(),
            });
        }
        match self.identifiers(id.kind).get(id.uid as usize) {
            Some(known) if known == id => Ok(()),
            _ => Err(ModelError::UnknownIdentifier {
                expected: expected.to_owned(),
                name: id.name.clone(),
            }),
        }
    }

    fn check_av_rule(&self, rule: &AvRule) -> Result<(), ModelError> {
        let type_kinds = [ElementKind::TypeLabel, ElementKind::AttributeType];
        self.check_member(&rule.source, &type_kinds, "type")?;
        self.check_member(&rule.target, &type_kinds, "type")?;
        self.check_member(&rule.class, &[ElementKind::Class], "class")?;
        if rule.permissions.is_empty() {
            return Err(ModelError::EmptyPermissionSet(rule.class.name.clone()));
        }
        let allowed = self.class_permissions.get(&rule.class);
        for perm in &rule.permissions {
            self.check_member(perm, &[ElementKind::Permission], "permission")?;
            if !allowed.is_some_and(|set| set.contains(perm)) {
                return Err(ModelError::PermissionNotInClass {
                    permission: perm.name.clone(),
                    class: rule.class.name.clone(),
                });
            }
        }
        Ok(())
    }
}

fn ambiguous(name: &str, found: &[&Identifier]) -> ModelError {
    let kinds: Vec<String> = found.iter().map(|id| id.kind.to_string()).collect();
    ModelError::AmbiguousName {
        name: name.to_owned(),
        kinds: kinds.join(" and "),
    }
}
