use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sepolicy_smt::{
    parse_policy, parse_policy_bytes, ElementKind, Identifier, PolicyDb, SymbolMapping,
};
use sepolicy_smt_testkit::{random_policy, Bounds};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn print_parse_round_trip(seed in any::<u64>()) {
        let text = random_policy(&mut ChaCha8Rng::seed_from_u64(seed), &Bounds::SMALL);
        let db = parse_policy(&text).unwrap();
        let printed = db.to_string();
        prop_assert_eq!(parse_policy(&printed).unwrap(), db.clone());
        prop_assert_eq!(parse_policy(&printed).unwrap().to_string(), printed);
    }

    #[test]
    fn uids_dense_per_kind(seed in any::<u64>()) {
        let text = random_policy(&mut ChaCha8Rng::seed_from_u64(seed), &Bounds::SMALL);
        let db = parse_policy(&text).unwrap();
        for kind in ElementKind::ALL {
            let uids: Vec<u32> = db.identifiers(kind).iter().map(Identifier::uid).collect();
            prop_assert_eq!(uids, (0..db.count(kind) as u32).collect::<Vec<_>>());
        }
    }

    #[test]
    fn dropping_a_type_declaration_breaks_rules(seed in any::<u64>()) {
        let text = random_policy(&mut ChaCha8Rng::seed_from_u64(seed), &Bounds::SMALL);
        let db = parse_policy(&text).unwrap();
        let Some(rule) = db.av_rules().first() else { return Ok(()) };
        let name = rule.source.name();
        let decl = if rule.source.kind() == ElementKind::TypeLabel {
            format!("type {name};")
        } else {
            format!("attribute {name};")
        };
        let pruned: String = text.lines().filter(|l| *l != decl).map(|l| format!("{l}\n")).collect();
        prop_assert!(parse_policy(&pruned).is_err());
    }

    #[test]
    fn arbitrary_bytes_never_panic(bytes in proptest::collection::vec(any::<u8>(), 0..200)) {
        if let Err(errors) = parse_policy_bytes(&bytes) {
            prop_assert!(!errors.is_empty());
        }
    }

    #[test]
    fn symbol_mapping_is_injective(names in proptest::collection::vec(
        (0usize..7, "[a-z]{1,2}(_[urt])?(__[0-9])?"), 0..40))
    {
        let mut db = PolicyDb::new();
        for (k, name) in &names {
            let kind = ElementKind::ALL[*k];
            if sepolicy_smt::model::is_valid_token(name) {
                // clashes across kinds of one group are rejected by the model; skip them
                let _ = db.declare(kind, name);
            }
        }
        let mapping = SymbolMapping::build(&db);
        let mut seen = std::collections::HashSet::new();
        for kind in ElementKind::ALL {
            for id in db.identifiers(kind) {
                let sym = mapping.symbol(id);
                prop_assert!(seen.insert(sym.to_owned()), "duplicate symbol {}", sym);
                prop_assert_eq!(mapping.element(sym), Some((kind, id.uid())));
                prop_assert!(!sepolicy_smt::encoder::RESERVED_SYMBOLS.contains(&sym));
            }
        }
    }
}

#[test]
fn benchmark_listing_element_counts() {
    let db = parse_policy(include_str!("data/benchmark_n2.te")).unwrap();
    assert_eq!(db.count(ElementKind::Class), 2);
    assert_eq!(db.count(ElementKind::Permission), 6);
    assert_eq!(db.count(ElementKind::User), 2);
    assert_eq!(db.count(ElementKind::Role), 3);
    assert_eq!(db.count(ElementKind::TypeLabel), 4);
    assert_eq!(db.av_rules().len(), 2);
}
