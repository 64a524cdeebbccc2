//! Synthetic policy family for scalability measurements.
//!
//! Instance `n` has `n` classes with three permissions each, `n` roles each
//! bound to its own `role_type_i`, `n` plain types `type_i`, one allow rule per
//! role type and `n` users each holding one role. The single constraint asks
//! that every type reachable from a holder of `role_0` may use
//! `class_0_perm_0` of `class_0` on `type_0`, which the policy satisfies.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use crate::constraints::load_constraints;
use crate::encoder::SymbolMapping;
use crate::encoder::{encode_policy, render};
use crate::parser::parse_policy;
use crate::solver::{check, SolverConfig, Verdict};

pub const PERMS_PER_CLASS: usize = 3;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid benchmark parameter: {0}")]
    InvalidParameter(String),
    #[error("cannot write benchmark artifacts: {0}")]
    Io(#[from] io::Error),
    #[error("cannot write CSV: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchmarkSpec {
    pub n: usize,
}

impl BenchmarkSpec {
    pub fn new(n: usize) -> Result<Self, BenchError> {
        if n == 0 {
            return Err(BenchError::InvalidParameter(
                "n must be at least 1".to_owned(),
            ));
        }
        Ok(BenchmarkSpec { n })
    }

    pub fn classes(&self) -> usize {
        self.n
    }
    pub fn permissions(&self) -> usize {
        self.n * PERMS_PER_CLASS
    }
    pub fn roles(&self) -> usize {
        self.n
    }
    pub fn users(&self) -> usize {
        self.n
    }
    pub fn rules(&self) -> usize {
        self.n
    }
    /// `type_i` plus `role_type_i` for every i.
    pub fn types(&self) -> usize {
        2 * self.n
    }
    pub fn constraints(&self) -> usize {
        1
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Benchmark {
    pub policy: String,
    pub constraints: String,
}

/// Policy and constraint text for one instance.
pub fn generate(spec: BenchmarkSpec) -> Benchmark {
    let n = spec.n;
    let mut p = String::new();
    for i in 0..n {
        let _ = writeln!(p, "class class_{i}");
    }
    p.push_str("\nsid unlabeled\n\n");
    for i in 0..n {
        let _ = writeln!(p, "class class_{i}\n{{");
        for j in 0..PERMS_PER_CLASS {
            let _ = writeln!(p, "    class_{i}_perm_{j}");
        }
        p.push_str("}\n");
    }
    p.push('\n');
    for i in 0..n {
        let _ = writeln!(
            p,
            "role role_{i};\ntype role_type_{i};\nrole role_{i} types role_type_{i};"
        );
    }
    p.push('\n');
    for i in 0..n {
        let _ = writeln!(p, "type type_{i};");
    }
    p.push('\n');
    for i in 0..n {
        let perms: Vec<String> = (0..PERMS_PER_CLASS)
            .map(|j| format!("class_{i}_perm_{j}"))
            .collect();
        let _ = writeln!(
            p,
            "allow role_type_{i} type_{i} : class_{i} {{ {} }};",
            perms.join(" ")
        );
    }
    p.push('\n');
    for i in 0..n {
        let _ = writeln!(p, "user user_{i} roles {{ role_{i} }};");
    }
    p.push_str("\nsid unlabeled user_0:object_r:type_0\n");

    let constraints =
        "; every type of every role held by a user of role_0 may use class_0_perm_0 on type_0\n\
        (assert (forall ((constraint_0_u User))\n  \
        (=> (user-has-role constraint_0_u role_0_r)\n    \
        (forall ((constraint_0_r Role))\n      \
        (=> (user-has-role constraint_0_u constraint_0_r)\n        \
        (forall ((constraint_0_t Type))\n          \
        (=> (role-has-type constraint_0_r constraint_0_t)\n            \
        (= (av-allow constraint_0_t type_0_t class_0 class_0_perm_0) true))))))))\n"
            .to_owned();
    Benchmark {
        policy: p,
        constraints,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkRecord {
    pub n: usize,
    pub parse_s: f64,
    pub encode_s: f64,
    pub solve_s: f64,
    pub verdict: String,
}

#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    /// Runs per instance; the minimum of each phase is reported.
    pub repeat: usize,
    /// Run instances concurrently, one solver process each.
    pub parallel: bool,
    /// Directory receiving `bench_<n>.te`, `bench_<n>_constraints.smt2` and
    /// `bench_<n>.smt2`.
    pub keep_artifacts: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct Sweep {
    pub records: Vec<BenchmarkRecord>,
    pub csv: String,
}

struct Measured {
    parse: Duration,
    encode: Duration,
    solve: Duration,
    verdict: Verdict,
}

fn measure_once(bench: &Benchmark, config: &SolverConfig) -> Measured {
    let failed = |reason: String, parse, encode| Measured {
        parse,
        encode,
        solve: Duration::ZERO,
        verdict: Verdict::Unknown(reason),
    };
    let t = Instant::now();
    let db = match parse_policy(&bench.policy) {
        Ok(db) => db,
        Err(e) => {
            return failed(
                format!("parse failed: {}", e[0]),
                t.elapsed(),
                Duration::ZERO,
            )
        }
    };
    let parse = t.elapsed();

    let t = Instant::now();
    let mut script = match encode_policy(&db) {
        Ok(s) => s,
        Err(e) => return failed(e.to_string(), parse, t.elapsed()),
    };
    let mapping = SymbolMapping::build(&db);
    match load_constraints(&bench.constraints, &mapping) {
        Ok(fragment) => script.add_constraints(&fragment),
        Err(e) => {
            return failed(
                format!("constraints rejected: {}", e[0]),
                parse,
                t.elapsed(),
            )
        }
    }
    let text = render(&script);
    let encode = t.elapsed();

    match check(&text, config) {
        Ok(result) => Measured {
            parse,
            encode,
            solve: result.wall_time,
            verdict: result.verdict,
        },
        Err(e) => failed(e.to_string(), parse, encode),
    }
}

fn run_one(
    n: usize,
    config: &SolverConfig,
    options: &SweepOptions,
) -> Result<BenchmarkRecord, BenchError> {
    let bench = generate(BenchmarkSpec::new(n)?);
    if let Some(dir) = &options.keep_artifacts {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(format!("bench_{n}.te")), &bench.policy)?;
        fs::write(
            dir.join(format!("bench_{n}_constraints.smt2")),
            &bench.constraints,
        )?;
        let db = parse_policy(&bench.policy).expect("generated policy parses");
        let mut script = encode_policy(&db).expect("generated policy encodes");
        let fragment = load_constraints(&bench.constraints, &SymbolMapping::build(&db))
            .expect("generated constraint loads");
        script.add_constraints(&fragment);
        fs::write(dir.join(format!("bench_{n}.smt2")), render(&script))?;
    }
    let mut best: Option<Measured> = None;
    for _ in 0..options.repeat.max(1) {
        let m = measure_once(&bench, config);
        best = Some(match best {
            None => m,
            Some(b) => Measured {
                parse: b.parse.min(m.parse),
                encode: b.encode.min(m.encode),
                solve: b.solve.min(m.solve),
                // a run that failed to decide wins over a decided one
                verdict: if matches!(b.verdict, Verdict::Unknown(_)) {
                    b.verdict
                } else {
                    m.verdict
                },
            },
        });
    }
    let m = best.expect("at least one run");
    if let Verdict::Unknown(reason) = &m.verdict {
        log::warn!("n={n}: {reason}");
    }
    Ok(BenchmarkRecord {
        n,
        parse_s: m.parse.as_secs_f64(),
        encode_s: m.encode.as_secs_f64(),
        solve_s: m.solve.as_secs_f64(),
        verdict: m.verdict.label().to_owned(),
    })
}

/// Generates, encodes and solves every instance in `ns`. Solver failures are
/// recorded as `unknown` rows rather than aborting the sweep.
pub fn run_sweep(
    ns: &[usize],
    config: &SolverConfig,
    options: &SweepOptions,
) -> Result<Sweep, BenchError> {
    if ns.is_empty() {
        return Err(BenchError::InvalidParameter(
            "no instance sizes given".to_owned(),
        ));
    }
    if ns.contains(&0) {
        return Err(BenchError::InvalidParameter(
            "n must be at least 1".to_owned(),
        ));
    }
    let records = if options.parallel {
        std::thread::scope(|s| {
            let handles: Vec<_> = ns
                .iter()
                .map(|&n| s.spawn(move || run_one(n, config, options)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("benchmark thread panicked"))
                .collect::<Result<Vec<_>, _>>()
        })?
    } else {
        ns.iter()
            .map(|&n| run_one(n, config, options))
            .collect::<Result<Vec<_>, _>>()?
    };
    let csv = to_csv(&records)?;
    Ok(Sweep { records, csv })
}

/// CSV with header `n,parse_s,encode_s,solve_s,verdict`.
pub fn to_csv(records: &[BenchmarkRecord]) -> Result<String, BenchError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    if records.is_empty() {
        writer.write_record(["n", "parse_s", "encode_s", "solve_s", "verdict"])?;
    }
    for r in records {
        writer.serialize(r)?;
    }
    let bytes = writer.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}
