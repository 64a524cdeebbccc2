//! Parse, encode and constrain in one call, timing each phase.

use std::time::{Duration, Instant};

use thiserror::Error;

use crate::constraints::{ConstraintError, ConstraintLoader};
use crate::encoder::{encode_policy_with, EncodeError, EncodeOptions, SmtScript, SymbolMapping};
use crate::model::{NamingWarning, PolicyDb};
use crate::parser::{parse_policy, ParseError};
use crate::solver::{check, SolverConfig, SolverError, VerificationResult};

/// A named piece of input, used in diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct Source<'a> {
    pub name: &'a str,
    pub text: &'a str,
}

impl<'a> Source<'a> {
    pub fn new(name: &'a str, text: &'a str) -> Self {
        Source { name, text }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{source_name}: {} parse error(s)", errors.len())]
    Parse {
        source_name: String,
        errors: Vec<ParseError>,
    },
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error("{source_name}: {} constraint error(s)", errors.len())]
    Constraints {
        source_name: String,
        errors: Vec<ConstraintError>,
    },
    #[error(transparent)]
    Solver(#[from] SolverError),
}

impl PipelineError {
    /// One line per underlying problem, prefixed with the input name.
    pub fn diagnostics(&self) -> Vec<String> {
        match self {
            PipelineError::Parse {
                source_name,
                errors,
            } => errors
                .iter()
                .map(|e| format!("{source_name}:{e}"))
                .collect(),
            PipelineError::Constraints {
                source_name,
                errors,
            } => errors
                .iter()
                .map(|e| format!("{source_name}:{e}"))
                .collect(),
            PipelineError::Encode(EncodeError::ValidationFailed(errors)) => {
                errors.iter().map(|e| e.to_string()).collect()
            }
            other => vec![other.to_string()],
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PhaseTimings {
    pub parse: Duration,
    pub encode: Duration,
    pub constraints: Duration,
    pub solve: Duration,
}

#[derive(Debug, Clone)]
pub struct Prepared {
    pub policy: PolicyDb,
    pub mapping: SymbolMapping,
    pub script: SmtScript,
    pub warnings: Vec<NamingWarning>,
    pub timings: PhaseTimings,
}

/// Parses the policy, encodes it and splices the constraint fragments in order.
pub fn prepare(
    policy: Source<'_>,
    constraints: &[Source<'_>],
    options: &EncodeOptions,
) -> Result<Prepared, PipelineError> {
    let mut timings = PhaseTimings::default();

    let t = Instant::now();
    let db = parse_policy(policy.text).map_err(|errors| PipelineError::Parse {
        source_name: policy.name.to_owned(),
        errors,
    })?;
    timings.parse = t.elapsed();

    let t = Instant::now();
    let (mut script, mapping) = encode_policy_with(&db, options)?;
    timings.encode = t.elapsed();

    let t = Instant::now();
    let mut loader = ConstraintLoader::new(&mapping);
    for source in constraints {
        let fragment = loader
            .load(source.text)
            .map_err(|errors| PipelineError::Constraints {
                source_name: source.name.to_owned(),
                errors,
            })?;
        for decl in &fragment.redundant {
            log::info!(
                "{}: `{}` is declared by the policy; declaration dropped",
                source.name,
                decl.name
            );
        }
        script.add_constraints(&fragment);
    }
    timings.constraints = t.elapsed();

    let warnings = db.naming_warnings();
    Ok(Prepared {
        policy: db,
        mapping,
        script,
        warnings,
        timings,
    })
}

#[derive(Debug, Clone)]
pub struct Verification {
    pub prepared: Prepared,
    pub result: VerificationResult,
}

/// [`prepare`] followed by a solver run on the rendered script.
pub fn verify(
    policy: Source<'_>,
    constraints: &[Source<'_>],
    options: &EncodeOptions,
    config: &SolverConfig,
) -> Result<Verification, PipelineError> {
    let mut prepared = prepare(policy, constraints, options)?;
    let result = check(&prepared.script.render(), config)?;
    prepared.timings.solve = result.wall_time;
    Ok(Verification { prepared, result })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_errors_carry_source_name() {
        let err = prepare(
            Source::new("p.te", "type ;"),
            &[],
            &EncodeOptions::default(),
        )
        .unwrap_err();
        let diags = err.diagnostics();
        assert!(diags[0].starts_with("p.te:1:6"), "{diags:?}");
    }

    #[test]
    fn constraint_errors_name_the_fragment() {
        let err = prepare(
            Source::new("p.te", "type a;"),
            &[
                Source::new("ok.smt2", ""),
                Source::new("bad.smt2", "(assert b_t)"),
            ],
            &EncodeOptions::default(),
        )
        .unwrap_err();
        assert!(
            matches!(&err, PipelineError::Constraints { source_name, .. } if source_name == "bad.smt2")
        );
    }

    #[test]
    fn fragments_concatenate_in_order() {
        let prepared = prepare(
            Source::new("p.te", "type a;"),
            &[
                Source::new("1", "(declare-const x Type)"),
                Source::new("2", "(assert (= x a_t))"),
            ],
            &EncodeOptions::default(),
        )
        .unwrap();
        assert_eq!(
            prepared.script.constraints,
            ["(declare-const x Type)", "(assert (= x a_t))"]
        );
    }
}
