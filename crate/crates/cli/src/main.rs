use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use sepolicy_smt::bench::{run_sweep, SweepOptions};
use sepolicy_smt::pipeline::{prepare, PhaseTimings, PipelineError, Prepared, Source};
use sepolicy_smt::solver::{check, SolverConfig, Verdict, SOLVER_ENV};
use sepolicy_smt::EncodeOptions;

const EXIT_SAT: u8 = 0;
const EXIT_UNSAT: u8 = 1;
const EXIT_UNKNOWN: u8 = 2;
const EXIT_ERROR: u8 = 3;

/// Check an SELinux policy against security constraints with an SMT solver.
///
/// Exit status: 0 sat (policy consistent with the constraints), 1 unsat
/// (a constraint is violated), 2 unknown, 3 parse, validation or I/O error.
#[derive(Debug, Parser)]
#[command(name = "sepolicy-smt", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Encode the policy, add the constraints and run the solver.
    Verify(VerifyArgs),
    /// Write the SMT-LIB2 script without solving it.
    EmitSmt(EmitArgs),
    /// Generate synthetic policies and time their verification.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
struct InputArgs {
    /// Policy source in the kernel policy language.
    #[arg(long, value_name = "PATH")]
    policy: PathBuf,
    /// SMT-LIB2 constraint fragment; repeatable, fragments are added in order.
    #[arg(long = "constraints", value_name = "PATH")]
    constraints: Vec<PathBuf>,
    /// Also assert that all classes, and all permissions, are pairwise distinct.
    #[arg(long)]
    distinct_constants: bool,
}

#[derive(Debug, Args)]
struct SolverArgs {
    /// Solver executable.
    #[arg(long, value_name = "PATH", env = SOLVER_ENV, default_value = "z3")]
    solver: PathBuf,
    /// Extra argument passed to the solver; repeatable.
    #[arg(long = "solver-arg", value_name = "ARG", allow_hyphen_values = true)]
    solver_args: Vec<String>,
    /// Solver time limit in seconds.
    #[arg(long, value_name = "SECONDS", default_value_t = 300.0, value_parser = parse_timeout)]
    timeout: f64,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        SolverConfig::for_executable(&self.solver)
            .with_args(self.solver_args.iter().cloned())
            .with_timeout(Duration::from_secs_f64(self.timeout))
    }
}

fn parse_timeout(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err("timeout must be a positive number of seconds".to_owned())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Human,
    Json,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Also write the script sent to the solver to PATH.
    #[arg(long, value_name = "PATH")]
    emit_smt: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Human)]
    format: Format,
}

#[derive(Debug, Args)]
struct EmitArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Output file; standard output when omitted.
    #[arg(long, short = 'o', visible_alias = "output", value_name = "PATH")]
    emit_smt: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Human)]
    format: Format,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Instance sizes, comma separated.
    #[arg(long, value_delimiter = ',', required = true, value_name = "N,...")]
    ns: Vec<usize>,
    /// Write the CSV here instead of standard output.
    #[arg(long, value_name = "PATH")]
    csv: Option<PathBuf>,
    /// Keep generated policies, constraints and scripts in DIR.
    #[arg(long, value_name = "DIR")]
    keep_artifacts: Option<PathBuf>,
    /// Runs per instance; the fastest time of each phase is reported.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    repeat: u32,
    /// Solve instances concurrently.
    #[arg(long)]
    parallel: bool,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Debug, Default, Serialize)]
struct Timings {
    parse_s: f64,
    encode_s: f64,
    constraints_s: f64,
    solve_s: f64,
}

impl From<PhaseTimings> for Timings {
    fn from(t: PhaseTimings) -> Self {
        Timings {
            parse_s: t.parse.as_secs_f64(),
            encode_s: t.encode.as_secs_f64(),
            constraints_s: t.constraints.as_secs_f64(),
            solve_s: t.solve.as_secs_f64(),
        }
    }
}

#[derive(Debug, Serialize)]
struct ErrorEntry {
    #[serde(skip_serializing_if = "Option::is_none")]
    file: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    line: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    column: Option<u32>,
    kind: String,
    message: String,
}

impl ErrorEntry {
    fn plain(kind: &str, message: impl Into<String>) -> Self {
        ErrorEntry {
            file: None,
            line: None,
            column: None,
            kind: kind.to_owned(),
            message: message.into(),
        }
    }

    fn render(&self) -> String {
        let mut prefix = String::new();
        if let Some(f) = &self.file {
            prefix.push_str(f);
            prefix.push(':');
        }
        if let (Some(l), Some(c)) = (self.line, self.column) {
            prefix.push_str(&format!("{l}:{c}:"));
        }
        if prefix.is_empty() {
            format!("{} error: {}", self.kind, self.message)
        } else {
            format!("{prefix} {} error: {}", self.kind, self.message)
        }
    }
}

fn pipeline_errors(err: &PipelineError) -> Vec<ErrorEntry> {
    match err {
        PipelineError::Parse {
            source_name,
            errors,
        } => errors
            .iter()
            .map(|e| ErrorEntry {
                file: Some(source_name.clone()),
                line: Some(e.span.line),
                column: Some(e.span.column),
                kind: e.kind.to_string(),
                message: e.message.clone(),
            })
            .collect(),
        PipelineError::Constraints {
            source_name,
            errors,
        } => errors
            .iter()
            .map(|e| {
                let span = e.span();
                let text = e.to_string();
                let message = text
                    .split_once(": ")
                    .map_or(text.as_str(), |(_, m)| m)
                    .to_owned();
                ErrorEntry {
                    file: Some(source_name.clone()),
                    line: Some(span.line),
                    column: Some(span.column),
                    kind: "constraint".to_owned(),
                    message,
                }
            })
            .collect(),
        PipelineError::Encode(_) => err
            .diagnostics()
            .into_iter()
            .map(|m| ErrorEntry::plain("validation", m))
            .collect(),
        PipelineError::Solver(e) => vec![ErrorEntry::plain("solver", e.to_string())],
    }
}

/// The single document printed in JSON mode.
#[derive(Debug, Serialize)]
struct Report {
    command: &'static str,
    verdict: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reason: Option<String>,
    exit_code: u8,
    timings: Timings,
    errors: Vec<ErrorEntry>,
    warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    script: Option<String>,
}

impl Report {
    fn new(command: &'static str) -> Self {
        Report {
            command,
            verdict: None,
            reason: None,
            exit_code: EXIT_ERROR,
            timings: Timings::default(),
            errors: Vec::new(),
            warnings: Vec::new(),
            script: None,
        }
    }

    fn fail(mut self, errors: Vec<ErrorEntry>) -> Self {
        self.exit_code = EXIT_ERROR;
        self.verdict = None;
        self.errors = errors;
        self
    }

    fn print(&self, format: Format) {
        match format {
            Format::Json => out(&format!(
                "{}\n",
                serde_json::to_string_pretty(self).expect("report serialises")
            )),
            Format::Human => {
                for w in &self.warnings {
                    eprintln!("warning: {w}");
                }
                for e in &self.errors {
                    eprintln!("{}", e.render());
                }
                if let Some(verdict) = self.verdict {
                    let meaning = match self.exit_code {
                        EXIT_SAT => "policy consistent with specification",
                        EXIT_UNSAT => "specification violated",
                        _ => "solver could not decide",
                    };
                    match &self.reason {
                        Some(r) => out(&format!("{verdict}: {meaning} ({r})\n")),
                        None => out(&format!("{verdict}: {meaning}\n")),
                    }
                    let t = &self.timings;
                    out(&format!(
                        "parse {:.3}s, encode {:.3}s, constraints {:.3}s, solve {:.3}s\n",
                        t.parse_s, t.encode_s, t.constraints_s, t.solve_s
                    ));
                }
            }
        }
    }
}

/// Writes to stdout, ignoring a closed pipe.
fn out(text: &str) {
    let mut stdout = std::io::stdout().lock();
    let _ = stdout
        .write_all(text.as_bytes())
        .and_then(|()| stdout.flush());
}

fn read_file(path: &Path) -> Result<String, ErrorEntry> {
    let bytes = fs::read(path).map_err(|e| ErrorEntry {
        file: Some(path.display().to_string()),
        line: None,
        column: None,
        kind: "io".to_owned(),
        message: e.to_string(),
    })?;
    String::from_utf8(bytes).map_err(|e| {
        let valid = &e.as_bytes()[..e.utf8_error().valid_up_to()];
        let prefix = String::from_utf8_lossy(valid);
        let line = prefix.matches('\n').count() as u32 + 1;
        let column = prefix.rsplit('\n').next().map_or(0, |l| l.chars().count()) as u32 + 1;
        ErrorEntry {
            file: Some(path.display().to_string()),
            line: Some(line),
            column: Some(column),
            kind: "lex".to_owned(),
            message: "input is not valid UTF-8".to_owned(),
        }
    })
}

fn load_and_prepare(input: &InputArgs) -> Result<Prepared, Vec<ErrorEntry>> {
    let policy_text = read_file(&input.policy).map_err(|e| vec![e])?;
    let mut constraint_texts = Vec::new();
    for path in &input.constraints {
        constraint_texts.push((
            path.display().to_string(),
            read_file(path).map_err(|e| vec![e])?,
        ));
    }
    let policy_name = input.policy.display().to_string();
    let sources: Vec<Source> = constraint_texts
        .iter()
        .map(|(n, t)| Source::new(n, t))
        .collect();
    let options = EncodeOptions {
        distinct_classes_and_permissions: input.distinct_constants,
    };
    prepare(Source::new(&policy_name, &policy_text), &sources, &options)
        .map_err(|e| pipeline_errors(&e))
}

fn write_script(path: &Path, text: &str) -> Result<(), ErrorEntry> {
    fs::write(path, text).map_err(|e| ErrorEntry {
        file: Some(path.display().to_string()),
        line: None,
        column: None,
        kind: "io".to_owned(),
        message: e.to_string(),
    })
}

fn run_verify(args: &VerifyArgs) -> Report {
    let report = Report::new("verify");
    let prepared = match load_and_prepare(&args.input) {
        Ok(p) => p,
        Err(errors) => return report.fail(errors),
    };
    let mut report = report;
    report.warnings = prepared.warnings.iter().map(|w| w.to_string()).collect();
    let text = prepared.script.render();
    if let Some(path) = &args.emit_smt {
        if let Err(e) = write_script(path, &text) {
            return report.fail(vec![e]);
        }
    }
    let mut timings = prepared.timings;
    let result = match check(&text, &args.solver.config()) {
        Ok(r) => r,
        Err(e) => {
            report.timings = timings.into();
            return report.fail(pipeline_errors(&PipelineError::Solver(e)));
        }
    };
    timings.solve = result.wall_time;
    report.timings = timings.into();
    report.verdict = Some(result.verdict.label());
    report.exit_code = match result.verdict {
        Verdict::Sat => EXIT_SAT,
        Verdict::Unsat => EXIT_UNSAT,
        Verdict::Unknown(reason) => {
            report.reason = Some(reason);
            EXIT_UNKNOWN
        }
    };
    report
}

fn run_emit(args: &EmitArgs) -> Report {
    let report = Report::new("emit-smt");
    let prepared = match load_and_prepare(&args.input) {
        Ok(p) => p,
        Err(errors) => return report.fail(errors),
    };
    let mut report = report;
    report.warnings = prepared.warnings.iter().map(|w| w.to_string()).collect();
    report.timings = prepared.timings.into();
    let text = prepared.script.render();
    match &args.emit_smt {
        Some(path) => {
            if let Err(e) = write_script(path, &text) {
                return report.fail(vec![e]);
            }
        }
        None if args.format == Format::Json => report.script = Some(text),
        None => out(&text),
    }
    report.exit_code = EXIT_SAT;
    report
}

fn run_bench(args: &BenchArgs) -> u8 {
    let options = SweepOptions {
        repeat: args.repeat as usize,
        parallel: args.parallel,
        keep_artifacts: args.keep_artifacts.clone(),
    };
    let sweep = match run_sweep(&args.ns, &args.solver.config(), &options) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_ERROR;
        }
    };
    match &args.csv {
        Some(path) => {
            if let Err(e) = fs::write(path, &sweep.csv) {
                eprintln!("{}: io error: {e}", path.display());
                return EXIT_ERROR;
            }
        }
        None => out(&sweep.csv),
    }
    if sweep.records.iter().all(|r| r.verdict == "sat") {
        EXIT_SAT
    } else {
        EXIT_UNKNOWN
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_ERROR } else { EXIT_SAT });
        }
    };
    let code = match &cli.command {
        Command::Verify(args) => {
            let report = run_verify(args);
            report.print(args.format);
            report.exit_code
        }
        Command::EmitSmt(args) => {
            let report = run_emit(args);
            // in human mode the script itself is the output; only diagnostics go to stderr
            if args.format == Format::Json || report.exit_code != EXIT_SAT {
                report.print(args.format);
            } else {
                for w in &report.warnings {
                    eprintln!("warning: {w}");
                }
            }
            report.exit_code
        }
        Command::Bench(args) => run_bench(args),
    };
    log::debug!("exit code {code}");
    ExitCode::from(code)
}
