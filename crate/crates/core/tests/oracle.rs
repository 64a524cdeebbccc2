//! Solver answers on random policies compared with the testkit oracle.

use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sepolicy_smt::{check, encode_policy, parse_policy, SolverConfig, Verdict};
use sepolicy_smt_testkit::{probe_script, random_policy, verdict_lines, Bounds, Oracle, Probe};

fn config() -> SolverConfig {
    SolverConfig::default().with_timeout(Duration::from_secs(120))
}

#[test]
fn random_policies_encode_to_sat() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..25 {
        let text = random_policy(&mut rng, &Bounds::SMALL);
        let db = parse_policy(&text).unwrap();
        let result = check(&encode_policy(&db).unwrap().render(), &config()).unwrap();
        assert_eq!(result.verdict, Verdict::Sat, "{text}");
    }
}

#[test]
fn probes_agree_with_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0bac1e);
    for _ in 0..8 {
        let text = random_policy(&mut rng, &Bounds::PROBE);
        let db = parse_policy(&text).unwrap();
        let oracle = Oracle::new(&db);
        let probes: Vec<_> = oracle
            .all_tuples()
            .into_iter()
            .flat_map(|t| [(t.clone(), Probe::Grant), (t, Probe::Permit)])
            .collect();
        let script = probe_script(&db, &encode_policy(&db).unwrap(), &probes);
        let out = check(&script, &config()).unwrap().solver_stdout;
        let verdicts = verdict_lines(&out);
        assert_eq!(verdicts.len(), probes.len(), "{text}\n{out}");
        for ((tuple, probe), got) in probes.iter().zip(verdicts) {
            let expected = match probe {
                Probe::Grant if oracle.granted(tuple) => "unsat",
                Probe::Grant => "sat",
                Probe::Permit if oracle.blocked(tuple) => "unsat",
                Probe::Permit => "sat",
            };
            assert_eq!(got, expected, "{probe:?} {tuple:?}\n{text}");
        }
    }
}
