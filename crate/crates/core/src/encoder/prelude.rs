//! The fixed declarations and axioms every script starts with.

pub const SORT_USER: &str = "User";
pub const SORT_ROLE: &str = "Role";
pub const SORT_TYPE: &str = "Type";
pub const SORT_CLASS: &str = "Class";
pub const SORT_PERMISSION: &str = "Permission";

pub const SORTS: [&str; 5] = [SORT_USER, SORT_ROLE, SORT_TYPE, SORT_CLASS, SORT_PERMISSION];

pub const USER_ID: &str = "user-id";
pub const ROLE_ID: &str = "role-id";
pub const TYPE_ID: &str = "type-id";
pub const USER_HAS_ROLE: &str = "user-has-role";
pub const ROLE_HAS_TYPE: &str = "role-has-type";
pub const ROLE_HAS_ATTRIBUTE_ROLE: &str = "role-has-attribute-role";
pub const TYPE_HAS_ATTRIBUTE: &str = "type-has-attribute";
pub const AV_ALLOW: &str = "av-allow";
pub const AV_NEVERALLOW: &str = "av-neverallow";

/// Function and predicate names declared by the prelude with their arities.
pub const FUNCTIONS: [(&str, usize); 9] = [
    (USER_ID, 1),
    (ROLE_ID, 1),
    (TYPE_ID, 1),
    (USER_HAS_ROLE, 2),
    (ROLE_HAS_TYPE, 2),
    (ROLE_HAS_ATTRIBUTE_ROLE, 2),
    (TYPE_HAS_ATTRIBUTE, 2),
    (AV_ALLOW, 4),
    (AV_NEVERALLOW, 4),
];

const PRELUDE: &[&str] = &[
    "; Sorts of context elements",
    "(declare-sort User 0)",
    "(declare-sort Role 0)",
    "(declare-sort Type 0)",
    "(declare-sort Class 0)",
    "(declare-sort Permission 0)",
    "; Unique identifier functions",
    "(declare-fun user-id (User) Int)",
    "(declare-fun role-id (Role) Int)",
    "(declare-fun type-id (Type) Int)",
    "; Elements of one sort never share an identifier.",
    "; correction: stated as id(x1) = id(x2) => x1 = x2; the negated existential form also rules out x1 = x2 and is unsatisfiable",
    "(assert (forall ((u1 User) (u2 User)) (=> (= (user-id u1) (user-id u2)) (= u1 u2))))",
    "(assert (forall ((r1 Role) (r2 Role)) (=> (= (role-id r1) (role-id r2)) (= r1 r2))))",
    "(assert (forall ((t1 Type) (t2 Type)) (=> (= (type-id t1) (type-id t2)) (= t1 t2))))",
    "; Context relationships",
    "(declare-fun user-has-role (User Role) Bool)",
    "(declare-fun role-has-type (Role Type) Bool)",
    "(declare-fun role-has-attribute-role (Role Role) Bool)",
    "(declare-fun type-has-attribute (Type Type) Bool)",
    "; Access vector rules as predicates",
    "(declare-fun av-allow (Type Type Class Permission) Bool)",
    "(declare-fun av-neverallow (Type Type Class Permission) Bool)",
    "; correction: quantifier binders and applications below are well-formed SMT-LIB2 (binder lists closed before the body, no parenthesised argument tuples)",
    "; A role in an attribute role has every type of that attribute role",
    "(assert (forall ((r1 Role) (r2 Role) (t Type)) (=> (and (role-has-type r2 t) (role-has-attribute-role r1 r2)) (role-has-type r1 t))))",
    "; Allow rules on a type attribute apply to its member types, as source",
    "(assert (forall ((t1 Type) (t2 Type) (tt Type) (c Class) (p Permission)) (=> (and (type-has-attribute t1 t2) (av-allow t2 tt c p)) (av-allow t1 tt c p))))",
    "; and as target",
    "(assert (forall ((st Type) (t1 Type) (t2 Type) (c Class) (p Permission)) (=> (and (type-has-attribute t1 t2) (av-allow st t2 c p)) (av-allow st t1 c p))))",
    "; neverallow supersedes allow",
    "; correction: the antecedent is av-neverallow alone; with av-allow in the antecedent the axiom contradicts itself whenever both hold",
    "(assert (forall ((st Type) (tt Type) (c Class) (p Permission)) (=> (av-neverallow st tt c p) (not (av-allow st tt c p)))))",
];

/// Prelude commands, one per line, including the documenting comments.
pub fn emit_prelude() -> Vec<String> {
    PRELUDE.iter().map(|s| s.to_string()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contains_sort_declaration_with_arity() {
        assert!(emit_prelude().iter().any(|l| l == "(declare-sort User 0)"));
    }

    #[test]
    fn deterministic() {
        assert_eq!(emit_prelude(), emit_prelude());
    }

    #[test]
    fn order_of_sections() {
        let lines: Vec<String> = emit_prelude()
            .into_iter()
            .filter(|l| !l.starts_with(';'))
            .collect();
        assert_eq!(lines.len(), 5 + 3 + 3 + 4 + 2 + 1 + 2 + 1);
        assert!(lines[..5].iter().all(|l| l.starts_with("(declare-sort")));
        assert!(lines[5..8].iter().all(|l| l.starts_with("(declare-fun")));
        assert!(lines[8..11]
            .iter()
            .all(|l| l.starts_with("(assert (forall")));
        assert!(lines[11..17].iter().all(|l| l.starts_with("(declare-fun")));
        assert!(lines[17].contains("role-has-attribute-role r1 r2"));
        assert!(lines[20].contains("(av-neverallow st tt c p)"));
    }

    #[test]
    fn balanced_parentheses() {
        for line in emit_prelude().iter().filter(|l| !l.starts_with(';')) {
            let mut depth = 0i32;
            for c in line.chars() {
                match c {
                    '(' => depth += 1,
                    ')' => depth -= 1,
                    _ => {}
                }
                assert!(depth >= 0, "{line}");
            }
            assert_eq!(depth, 0, "{line}");
        }
    }
}
