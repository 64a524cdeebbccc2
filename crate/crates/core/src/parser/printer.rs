use std::fmt::{self, Write as _};

use crate::model::{ElementKind, Identifier, PolicyDb, OBJECT_ROLE};

fn names<'a>(ids: impl IntoIterator<Item = &'a Identifier>) -> String {
    let mut out = String::new();
    for (i, id) in ids.into_iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(id.name());
    }
    out
}

/// Prints the policy back as policy-language text. Re-parsing the output
/// yields an identical [`PolicyDb`] (same uids, same statement order).
impl fmt::Display for PolicyDb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        for class in self.identifiers(ElementKind::Class) {
            writeln!(out, "class {class}")?;
        }
        for sid in self.sid_names() {
            writeln!(out, "sid {sid}")?;
        }
        for class in self.permission_blocks() {
            let perms = self.class_permissions(class).into_iter().flatten();
            writeln!(out, "class {class} {{ {} }}", names(perms))?;
        }
        for attr in self.identifiers(ElementKind::AttributeType) {
            writeln!(out, "attribute {attr};")?;
        }
        for ty in self.identifiers(ElementKind::TypeLabel) {
            writeln!(out, "type {ty};")?;
        }
        for role in self.identifiers(ElementKind::Role) {
            if role.name() != OBJECT_ROLE {
                writeln!(out, "role {role};")?;
            }
        }
        for (role, attr) in self.role_attributes() {
            writeln!(out, "roleattribute {role} {attr};")?;
        }
        for (role, ty) in self.role_types() {
            writeln!(out, "role {role} types {ty};")?;
        }
        for (ty, attr) in self.type_attributes() {
            writeln!(out, "typeattribute {ty} {attr};")?;
        }
        for rule in self.av_rules() {
            let perms = if rule.permissions.len() == 1 {
                names(&rule.permissions)
            } else {
                format!("{{ {} }}", names(&rule.permissions))
            };
            writeln!(
                out,
                "{} {} {} : {} {};",
                rule.kind.keyword(),
                rule.source,
                rule.target,
                rule.class,
                perms
            )?;
        }
        for user in self.identifiers(ElementKind::User) {
            let roles = self
                .user_roles()
                .iter()
                .filter(|(u, _)| u == user)
                .map(|(_, r)| r);
            writeln!(out, "user {user} roles {{ {} }};", names(roles))?;
        }
        for (sid, ctx) in self.sid_contexts() {
            writeln!(out, "sid {sid} {ctx}")?;
        }
        f.write_str(&out)
    }
}

#[cfg(test)]
mod tests {
    use crate::parser::parse_policy;

    #[test]
    fn benchmark_listing_round_trips() {
        let src = include_str!("../../tests/data/benchmark_n2.te");
        let db = parse_policy(src).unwrap();
        let printed = db.to_string();
        assert_eq!(parse_policy(&printed).unwrap(), db);
    }

    #[test]
    fn attribute_roles_round_trip() {
        let src =
            "type t;\nrole r types t;\nroleattribute x_r staff;\nrole staff types t;\nrole x_r;\n";
        let db = parse_policy(src).unwrap();
        assert_eq!(parse_policy(&db.to_string()).unwrap(), db);
    }
}
