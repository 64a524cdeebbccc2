//! Running a rendered script through an external SMT-LIB2 solver.

use std::ffi::OsString;
use std::fmt;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitStatus, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

/// Environment variable that overrides the default solver executable.
pub const SOLVER_ENV: &str = "SEPOLICY_SMT_SOLVER";

pub const DEFAULT_SOLVER: &str = "z3";
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(300);

const POLL_INTERVAL: Duration = Duration::from_millis(5);

/// How the script reaches the solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputMode {
    Stdin,
    /// The script is written to a temporary `.smt2` file whose path is passed
    /// as the last argument.
    TempFile,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolverConfig {
    pub executable: PathBuf,
    pub extra_args: Vec<String>,
    pub timeout: Duration,
    pub input: InputMode,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let executable = std::env::var_os(SOLVER_ENV)
            .filter(|v| !v.is_empty())
            .unwrap_or_else(|| OsString::from(DEFAULT_SOLVER));
        SolverConfig::for_executable(executable)
    }
}

impl SolverConfig {
    /// A configuration with the flavour defaults of the named solver.
    pub fn for_executable(executable: impl Into<PathBuf>) -> Self {
        let executable = executable.into();
        let input = match flavor(&executable) {
            Flavor::Unknown => InputMode::TempFile,
            _ => InputMode::Stdin,
        };
        SolverConfig {
            executable,
            extra_args: Vec::new(),
            timeout: DEFAULT_TIMEOUT,
            input,
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn with_args(mut self, args: impl IntoIterator<Item = impl Into<String>>) -> Self {
        self.extra_args.extend(args.into_iter().map(Into::into));
        self
    }

    /// The full argument list for a run; `script_path` is set in temp-file mode.
    fn arguments(&self, script_path: Option<&Path>) -> Vec<OsString> {
        let mut args: Vec<OsString> = match (flavor(&self.executable), self.input) {
            (Flavor::Z3, InputMode::Stdin) => vec!["-in".into(), "-smt2".into()],
            (Flavor::Z3, InputMode::TempFile) => vec!["-smt2".into()],
            (Flavor::Cvc5, _) => vec!["--lang".into(), "smt2".into()],
            _ => Vec::new(),
        };
        args.extend(self.extra_args.iter().map(OsString::from));
        if let Some(path) = script_path {
            args.push(path.as_os_str().to_owned());
        }
        args
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Flavor {
    Z3,
    Cvc5,
    Yices,
    Unknown,
}

fn flavor(executable: &Path) -> Flavor {
    let stem = executable
        .file_stem()
        .map(|s| s.to_string_lossy().to_ascii_lowercase())
        .unwrap_or_default();
    if stem.starts_with("z3") {
        Flavor::Z3
    } else if stem.starts_with("cvc5") || stem.starts_with("cvc4") {
        Flavor::Cvc5
    } else if stem.starts_with("yices") {
        Flavor::Yices
    } else {
        Flavor::Unknown
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", content = "reason", rename_all = "lowercase")]
pub enum Verdict {
    Sat,
    Unsat,
    Unknown(String),
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Sat => "sat",
            Verdict::Unsat => "unsat",
            Verdict::Unknown(_) => "unknown",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Unknown(reason) => write!(f, "unknown ({reason})"),
            other => f.write_str(other.label()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerificationResult {
    pub verdict: Verdict,
    pub wall_time: Duration,
    pub solver_stdout: String,
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("solver `{}` not found", .0.display())]
    NotFound(PathBuf),
    #[error("solver exited with {status}: {stderr}")]
    Crashed { status: ExitStatus, stderr: String },
    #[error("solver i/o failed: {0}")]
    Io(#[from] io::Error),
}

/// Verdict for a complete solver output. The first `sat`/`unsat`/`unknown`
/// line decides; an `(error ...)` line before it makes the result unknown.
pub fn classify(stdout: &str) -> Verdict {
    for line in stdout.lines().map(str::trim) {
        match line {
            "sat" => return Verdict::Sat,
            "unsat" => return Verdict::Unsat,
            "unknown" => return Verdict::Unknown("solver returned unknown".to_owned()),
            l if l.starts_with("(error") => return Verdict::Unknown(format!("solver error: {l}")),
            _ => {}
        }
    }
    Verdict::Unknown("no verdict in solver output".to_owned())
}

fn read_to_string_lossy(mut r: impl Read) -> String {
    let mut buf = Vec::new();
    let _ = r.read_to_end(&mut buf);
    String::from_utf8_lossy(&buf).into_owned()
}

/// Runs `script` through the configured solver.
pub fn check(script: &str, config: &SolverConfig) -> Result<VerificationResult, SolverError> {
    let script_file = match config.input {
        InputMode::TempFile => {
            let mut file = tempfile::Builder::new().suffix(".smt2").tempfile()?;
            file.write_all(script.as_bytes())?;
            file.flush()?;
            Some(file)
        }
        InputMode::Stdin => None,
    };
    let args = config.arguments(script_file.as_ref().map(|f| f.path()));
    log::debug!("running {} {:?}", config.executable.display(), args);

    let start = Instant::now();
    let mut child = Command::new(&config.executable)
        .args(&args)
        .stdin(if script_file.is_some() {
            Stdio::null()
        } else {
            Stdio::piped()
        })
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| match e.kind() {
            io::ErrorKind::NotFound | io::ErrorKind::PermissionDenied => {
                SolverError::NotFound(config.executable.clone())
            }
            _ => SolverError::Io(e),
        })?;

    let writer = child.stdin.take().map(|mut stdin| {
        let text = script.to_owned();
        // the solver may exit early; a broken pipe then is not our error
        thread::spawn(move || {
            let _ = stdin.write_all(text.as_bytes());
        })
    });
    let stdout = child.stdout.take().expect("stdout is piped");
    let stderr = child.stderr.take().expect("stderr is piped");
    let out_reader = thread::spawn(move || read_to_string_lossy(stdout));
    let err_reader = thread::spawn(move || read_to_string_lossy(stderr));

    let mut timed_out = false;
    let status = loop {
        if let Some(status) = child.try_wait()? {
            break status;
        }
        if start.elapsed() >= config.timeout {
            timed_out = true;
            let _ = child.kill();
            break child.wait()?;
        }
        thread::sleep(POLL_INTERVAL);
    };
    let wall_time = start.elapsed();

    if let Some(w) = writer {
        let _ = w.join();
    }
    let solver_stdout = out_reader.join().unwrap_or_default();
    let stderr = err_reader.join().unwrap_or_default();
    drop(script_file);

    let verdict = if timed_out {
        Verdict::Unknown("timeout".to_owned())
    } else {
        let verdict = classify(&solver_stdout);
        // z3 exits non-zero after reporting errors, which classify already covers
        if !status.success()
            && matches!(verdict, Verdict::Unknown(_))
            && !solver_stdout.contains("(error")
        {
            return Err(SolverError::Crashed {
                status,
                stderr: stderr.trim().to_owned(),
            });
        }
        verdict
    };
    Ok(VerificationResult {
        verdict,
        wall_time,
        solver_stdout,
    })
}
