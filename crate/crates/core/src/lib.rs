//! Verification of SELinux type-enforcement and RBAC policies with an SMT solver.
//!
//! A policy is parsed into a [`PolicyDb`], translated to an SMT-LIB2
//! [`SmtScript`] together with a fixed prelude of axioms, extended with the
//! administrator's constraints and handed to an external solver. `sat` means
//! the policy is consistent with the constraints; `unsat` means some
//! constraint is violated.
//!
//! ```
//! use sepolicy_smt::{encode_policy, parse_policy};
//!
//! let db = parse_policy("class file { read }\ntype a;\ntype b;\nallow a b : file read;\n").unwrap();
//! let text = encode_policy(&db).unwrap().render();
//! assert!(text.contains("(assert (av-allow a_t b_t file read))"));
//! ```

pub mod bench;
pub mod constraints;
pub mod encoder;
pub mod model;
pub mod parser;
pub mod pipeline;
pub mod solver;

pub use bench::{
    generate, run_sweep, BenchError, Benchmark, BenchmarkRecord, BenchmarkSpec, Sweep, SweepOptions,
};
pub use constraints::{load_constraints, ConstraintError, ConstraintFragment, ConstraintLoader};
pub use encoder::{
    emit_prelude, encode_policy, encode_policy_with, render, EncodeError, EncodeOptions, SmtScript,
    SymbolMapping,
};
pub use model::{
    AvRule, AvRuleKind, ElementKind, Identifier, InitialSid, ModelError, NamingWarning, PolicyDb,
    SecurityContext,
};
pub use parser::{
    parse_policy, parse_policy_bytes, tokenize, ParseError, ParseErrorKind, SourceSpan,
};
pub use pipeline::{prepare, verify, PhaseTimings, PipelineError, Prepared, Source, Verification};
pub use solver::{
    check, classify, InputMode, SolverConfig, SolverError, Verdict, VerificationResult,
};
