//! Test support: random small policies and a brute-force reference for which
//! access vectors a policy grants.

use std::collections::{BTreeSet, HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::Rng;
use sepolicy_smt::{AvRuleKind, ElementKind, PolicyDb, SmtScript, SymbolMapping};

/// Upper bounds for [`random_policy`]. Every count is drawn from `1..=max`
/// (attributes, roles and rules from `0..=max`).
#[derive(Debug, Clone, Copy)]
pub struct Bounds {
    pub types: usize,
    pub attributes: usize,
    pub classes: usize,
    pub permissions: usize,
    pub roles: usize,
    pub attribute_roles: usize,
    pub users: usize,
    pub rules: usize,
}

impl Bounds {
    /// At most ten elements of every kind.
    pub const SMALL: Bounds = Bounds {
        types: 10,
        attributes: 10,
        classes: 10,
        permissions: 10,
        roles: 10,
        attribute_roles: 10,
        users: 10,
        rules: 10,
    };

    /// Small enough to probe every access vector tuple.
    pub const PROBE: Bounds = Bounds {
        types: 6,
        attributes: 3,
        classes: 2,
        permissions: 3,
        roles: 3,
        attribute_roles: 2,
        users: 3,
        rules: 8,
    };
}

fn pick<'a, R: Rng>(rng: &mut R, items: &'a [String]) -> &'a str {
    items.choose(rng).expect("non-empty pool")
}

fn subset<R: Rng>(rng: &mut R, items: &[String]) -> Vec<String> {
    let k = rng.gen_range(1..=items.len());
    let mut chosen: Vec<String> = items.choose_multiple(rng, k).cloned().collect();
    chosen.sort();
    chosen
}

/// A random policy that the parser accepts, statements in random order.
pub fn random_policy<R: Rng>(rng: &mut R, bounds: &Bounds) -> String {
    let n_types = rng.gen_range(1..=bounds.types);
    // occasionally name a type after its predecessor's SMT symbol to force a collision
    let types: Vec<String> = (0..n_types)
        .map(|i| {
            if i > 0 && rng.gen_bool(0.2) {
                format!("ty{}_t", i - 1)
            } else {
                format!("ty{i}")
            }
        })
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let attributes: Vec<String> = (0..rng.gen_range(0..=bounds.attributes))
        .map(|i| format!("at{i}"))
        .collect();
    let classes: Vec<String> = (0..rng.gen_range(1..=bounds.classes))
        .map(|i| format!("cl{i}"))
        .collect();
    let perm_pool: Vec<String> = (0..rng.gen_range(1..=bounds.permissions))
        .map(|i| format!("pm{i}"))
        .collect();
    let roles: Vec<String> = (0..rng.gen_range(0..=bounds.roles))
        .map(|i| format!("ro{i}"))
        .collect();
    let users: Vec<String> = (0..rng.gen_range(0..=bounds.users))
        .map(|i| format!("us{i}"))
        .collect();

    let mut lines = Vec::new();
    let mut class_perms: HashMap<&str, Vec<String>> = HashMap::new();
    for class in &classes {
        let perms = subset(rng, &perm_pool);
        if rng.gen_bool(0.3) {
            lines.push(format!("class {class}"));
        }
        lines.push(format!("class {class} {{ {} }}", perms.join(" ")));
        class_perms.insert(class, perms);
    }
    for ty in &types {
        lines.push(format!("type {ty};"));
    }
    for attr in &attributes {
        lines.push(format!("attribute {attr};"));
        for ty in &types {
            if rng.gen_bool(0.35) {
                lines.push(format!("typeattribute {ty} {attr};"));
            }
        }
    }
    for role in &roles {
        lines.push(format!("role {role};"));
        for ty in &types {
            if rng.gen_bool(0.3) {
                lines.push(format!("role {role} types {ty};"));
            }
        }
    }
    if !roles.is_empty() {
        for i in 0..rng.gen_range(0..=bounds.attribute_roles) {
            let attr_role = format!("ar{i}");
            let members = subset(rng, &roles);
            for member in &members {
                lines.push(format!("roleattribute {member} {attr_role};"));
            }
            if rng.gen_bool(0.5) {
                lines.push(format!("role {attr_role} types {};", pick(rng, &types)));
            }
        }
        for user in &users {
            lines.push(format!(
                "user {user} roles {{ {} }};",
                subset(rng, &roles).join(" ")
            ));
        }
    }
    let type_like: Vec<String> = types.iter().chain(&attributes).cloned().collect();
    for _ in 0..rng.gen_range(0..=bounds.rules) {
        let keyword = if rng.gen_bool(0.3) {
            "neverallow"
        } else {
            "allow"
        };
        let class = pick(rng, &classes);
        let perms = subset(rng, &class_perms[class]);
        let perms = if perms.len() == 1 && rng.gen_bool(0.5) {
            perms[0].clone()
        } else {
            format!("{{ {} }}", perms.join(" "))
        };
        lines.push(format!(
            "{keyword} {} {} : {class} {perms};",
            pick(rng, &type_like),
            pick(rng, &type_like)
        ));
    }
    if !roles.is_empty() && !users.is_empty() && rng.gen_bool(0.3) {
        lines.push("sid kernel".to_owned());
        lines.push(format!("sid kernel {}:object_r:{}", users[0], types[0]));
    }
    lines.shuffle(rng);
    let mut text = lines.join("\n");
    text.push('\n');
    text
}

/// (source, target, class, permission) by policy name.
pub type Tuple = (String, String, String, String);

/// Brute-force reference semantics of a policy's access vectors.
///
/// A tuple is derivable from a set of tuples when it is in it, or when it
/// replaces an attribute in a derivable tuple by one of the attribute's member
/// types, on either side. Forbidden tuples are the ones derivable from the
/// neverallow rules. A tuple is blocked when anything derivable from it is
/// forbidden, and granted when it is derivable from the allow rules and not
/// blocked.
#[derive(Debug, Clone)]
pub struct Oracle {
    members: HashMap<String, Vec<String>>,
    allowed: HashSet<Tuple>,
    forbidden: HashSet<Tuple>,
    type_like: Vec<String>,
    class_perms: Vec<(String, String)>,
}

impl Oracle {
    pub fn new(db: &PolicyDb) -> Self {
        let mut members: HashMap<String, Vec<String>> = HashMap::new();
        for (ty, attr) in db.type_attributes() {
            members
                .entry(attr.name().to_owned())
                .or_default()
                .push(ty.name().to_owned());
        }
        let mut allowed = HashSet::new();
        let mut forbidden = HashSet::new();
        for rule in db.av_rules() {
            let set = match rule.kind {
                AvRuleKind::Allow => &mut allowed,
                AvRuleKind::NeverAllow => &mut forbidden,
            };
            for p in &rule.permissions {
                set.insert((
                    rule.source.name().to_owned(),
                    rule.target.name().to_owned(),
                    rule.class.name().to_owned(),
                    p.name().to_owned(),
                ));
            }
        }
        let allowed = closure(&members, allowed);
        let forbidden = closure(&members, forbidden);
        let type_like = db
            .identifiers(ElementKind::TypeLabel)
            .iter()
            .chain(db.identifiers(ElementKind::AttributeType))
            .map(|id| id.name().to_owned())
            .collect();
        let class_perms = db
            .classes()
            .flat_map(|(c, perms)| {
                perms
                    .iter()
                    .map(move |p| (c.name().to_owned(), p.name().to_owned()))
            })
            .collect();
        Oracle {
            members,
            allowed,
            forbidden,
            type_like,
            class_perms,
        }
    }

    pub fn blocked(&self, tuple: &Tuple) -> bool {
        let derived = closure(&self.members, HashSet::from([tuple.clone()]));
        derived.iter().any(|t| self.forbidden.contains(t))
    }

    pub fn granted(&self, tuple: &Tuple) -> bool {
        self.allowed.contains(tuple) && !self.blocked(tuple)
    }

    /// Every tuple over declared types, attributes and class permissions.
    pub fn all_tuples(&self) -> Vec<Tuple> {
        let mut out = Vec::new();
        for s in &self.type_like {
            for t in &self.type_like {
                for (c, p) in &self.class_perms {
                    out.push((s.clone(), t.clone(), c.clone(), p.clone()));
                }
            }
        }
        out
    }
}

fn closure(members: &HashMap<String, Vec<String>>, mut set: HashSet<Tuple>) -> HashSet<Tuple> {
    loop {
        let mut next = Vec::new();
        for (s, t, c, p) in &set {
            for m in members.get(s).into_iter().flatten() {
                next.push((m.clone(), t.clone(), c.clone(), p.clone()));
            }
            for m in members.get(t).into_iter().flatten() {
                next.push((s.clone(), m.clone(), c.clone(), p.clone()));
            }
        }
        let before = set.len();
        set.extend(next);
        if set.len() == before {
            return set;
        }
    }
}

/// Which way a probe asks about a tuple.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Probe {
    /// Asserts the tuple is not allowed: unsat means the policy grants it.
    Grant,
    /// Asserts the tuple is allowed: sat means the policy does not forbid it.
    Permit,
}

fn smt_name<'a>(
    db: &PolicyDb,
    mapping: &'a SymbolMapping,
    kinds: &[ElementKind],
    name: &str,
) -> &'a str {
    let id = db
        .lookup_any(kinds, name)
        .ok()
        .flatten()
        .unwrap_or_else(|| panic!("`{name}` is not declared"));
    mapping.symbol(id)
}

/// Replaces the script's final check with one push/assert/check/pop block per
/// probe. The solver answers one verdict line per probe, in order.
pub fn probe_script(db: &PolicyDb, script: &SmtScript, probes: &[(Tuple, Probe)]) -> String {
    let mapping = SymbolMapping::build(db);
    let types = [ElementKind::TypeLabel, ElementKind::AttributeType];
    let mut s = script.clone();
    s.finale.clear();
    for ((src, tgt, class, perm), probe) in probes {
        let atom = format!(
            "(av-allow {} {} {} {})",
            smt_name(db, &mapping, &types, src),
            smt_name(db, &mapping, &types, tgt),
            smt_name(db, &mapping, &[ElementKind::Class], class),
            smt_name(db, &mapping, &[ElementKind::Permission], perm),
        );
        let assertion = match probe {
            Probe::Grant => format!("(assert (not {atom}))"),
            Probe::Permit => format!("(assert {atom})"),
        };
        s.finale.extend([
            "(push 1)".to_owned(),
            assertion,
            "(check-sat)".to_owned(),
            "(pop 1)".to_owned(),
        ]);
    }
    s.render()
}

/// The verdict lines of a multi-check solver run.
pub fn verdict_lines(stdout: &str) -> Vec<&str> {
    stdout
        .lines()
        .map(str::trim)
        .filter(|l| matches!(*l, "sat" | "unsat" | "unknown"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use sepolicy_smt::parse_policy;

    #[test]
    fn generated_policies_parse() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for _ in 0..300 {
            let text = random_policy(&mut rng, &Bounds::SMALL);
            if let Err(e) = parse_policy(&text) {
                panic!("{text}\n{e:?}");
            }
        }
    }

    fn t(s: &str, t: &str) -> Tuple {
        (s.into(), t.into(), "c".into(), "p".into())
    }

    #[test]
    fn oracle_semantics() {
        let db = parse_policy(
            "class c { p }\ntype a;\ntype b;\ntype d;\nattribute g;\ntypeattribute a g;\ntypeattribute b g;\n\
             allow g d : c p;\nneverallow a d : c p;\n",
        )
        .unwrap();
        let o = Oracle::new(&db);
        assert!(o.granted(&t("b", "d")));
        assert!(!o.granted(&t("a", "d")));
        assert!(!o.granted(&t("g", "d")));
        assert!(o.blocked(&t("g", "d")));
        assert!(!o.blocked(&t("d", "d")));
        assert!(!o.granted(&t("d", "d")));
        assert_eq!(o.all_tuples().len(), 16);
    }
}
