use std::collections::{HashMap, HashSet};

use crate::model::{ElementKind, Identifier, PolicyDb};

use super::prelude;

/// Words that cannot be used as SMT constant names: SMT-LIB reserved words and
/// nullary or variadic core symbols that solvers refuse to overload.
pub const RESERVED_SYMBOLS: &[&str] = &[
    "_",
    "!",
    "as",
    "let",
    "exists",
    "forall",
    "match",
    "par",
    "true",
    "false",
    "not",
    "and",
    "or",
    "xor",
    "distinct",
    "ite",
    "BINARY",
    "DECIMAL",
    "HEXADECIMAL",
    "NUMERAL",
    "STRING",
];

/// Order in which kinds claim symbols; earlier kinds win collisions.
const CLAIM_ORDER: [ElementKind; 7] = [
    ElementKind::Class,
    ElementKind::Permission,
    ElementKind::User,
    ElementKind::Role,
    ElementKind::AttributeRole,
    ElementKind::TypeLabel,
    ElementKind::AttributeType,
];

/// The SMT sort a policy element lives in.
pub fn sort_of(kind: ElementKind) -> &'static str {
    match kind {
        ElementKind::User => prelude::SORT_USER,
        ElementKind::Role | ElementKind::AttributeRole => prelude::SORT_ROLE,
        ElementKind::TypeLabel | ElementKind::AttributeType => prelude::SORT_TYPE,
        ElementKind::Class => prelude::SORT_CLASS,
        ElementKind::Permission => prelude::SORT_PERMISSION,
    }
}

/// The conventional SMT name for an element before collision handling:
/// users, roles and types get a `_u`/`_r`/`_t` suffix unless they already end
/// in it; attributes, classes and permissions keep their policy name.
pub fn base_symbol(kind: ElementKind, name: &str) -> String {
    match kind.conventional_suffix() {
        Some(suffix) if !name.ends_with(suffix) => format!("{name}{suffix}"),
        _ => name.to_owned(),
    }
}

/// Injective map from policy identifiers to SMT constant names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolMapping {
    symbols: HashMap<(ElementKind, u32), String>,
    by_symbol: HashMap<String, (ElementKind, u32)>,
}

impl SymbolMapping {
    pub fn build(db: &PolicyDb) -> Self {
        let ids = CLAIM_ORDER
            .iter()
            .flat_map(|&kind| db.identifiers(kind).iter());
        Self::from_identifiers(ids)
    }

    pub fn from_identifiers<'a>(ids: impl IntoIterator<Item = &'a Identifier>) -> Self {
        let mut taken: HashSet<String> = RESERVED_SYMBOLS.iter().map(|s| s.to_string()).collect();
        let mut symbols = HashMap::new();
        let mut by_symbol = HashMap::new();
        for id in ids {
            let key = (id.kind(), id.uid());
            if symbols.contains_key(&key) {
                continue;
            }
            let mut symbol = base_symbol(id.kind(), id.name());
            while taken.contains(&symbol) {
                symbol = format!("{symbol}__{}", id.uid());
            }
            taken.insert(symbol.clone());
            by_symbol.insert(symbol.clone(), key);
            symbols.insert(key, symbol);
        }
        SymbolMapping { symbols, by_symbol }
    }

    /// SMT name of a registered identifier.
    ///
    /// Panics if `id` was not part of the mapping.
    pub fn symbol(&self, id: &Identifier) -> &str {
        self.get(id)
            .unwrap_or_else(|| panic!("{} `{}` has no SMT symbol", id.kind(), id.name()))
    }

    pub fn get(&self, id: &Identifier) -> Option<&str> {
        self.symbols.get(&(id.kind(), id.uid())).map(String::as_str)
    }

    /// Kind and uid of the element behind an SMT name.
    pub fn element(&self, symbol: &str) -> Option<(ElementKind, u32)> {
        self.by_symbol.get(symbol).copied()
    }

    pub fn contains_symbol(&self, symbol: &str) -> bool {
        self.by_symbol.contains_key(symbol)
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}
