//! The `linctl` command-line front end.
//!
//! Every subcommand reads a JSON system file, runs one analysis or design and
//! writes either a JSON verdict (`command`, `inputs`, `results`, `errors`) or
//! a trajectory CSV. Exit codes: 0 success, 2 malformed input, 3 failed
//! precondition, 4 numerical failure.

mod commands;
mod io;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

use crate::{ControlError, ErrorClass};

pub use io::{CliConfig, SystemFile};

#[derive(Debug, Parser)]
#[command(name = "linctl", version, about = "Analysis and design for linear control systems")]
pub struct Cli {
    /// JSON file overriding tolerance fields and defining polynomial vector fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Primary output file (stdout when absent).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Write a run manifest listing parameters, emitted files and verdicts.
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Controllability, observability and stability report.
    Analyze(AnalyzeArgs),
    /// Controllability Gramian on [t0, t1].
    Gramian(GramianArgs),
    /// Minimum-energy steering; emits the simulated trajectory as CSV.
    Steer(SteerArgs),
    /// State feedback F with prescribed characteristic polynomial of A + BF.
    Place(PlaceArgs),
    /// Output injection L with prescribed characteristic polynomial of A + LC.
    Observer(PlaceArgs),
    /// Finite-horizon LQR: Riccati solution and optimal trajectory.
    Lqr(LqrArgs),
    /// Stabilizing solution of the algebraic Riccati equation.
    Are(SystemArg),
    /// Feedback with guaranteed decay rate lambda from the weighted Gramian.
    GramianStab(GramianStabArgs),
    /// Open-loop simulation under a constant input; emits CSV.
    Simulate(SimulateArgs),
    /// Nonlinear steering near an equilibrium; emits CSV.
    SteerNl(SteerNlArgs),
}

#[derive(Debug, Args)]
pub struct SystemArg {
    pub system: PathBuf,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(required_unless_present = "dir", conflicts_with = "dir")]
    pub system: Option<PathBuf>,
    /// Analyze every `*.json` file of a directory.
    #[arg(long)]
    pub dir: Option<PathBuf>,
    /// Horizon of the observability Gramian.
    #[arg(long, default_value_t = 1.0)]
    pub horizon: f64,
}

#[derive(Debug, Args)]
pub struct GramianArgs {
    pub system: PathBuf,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub t0: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub t1: f64,
}

#[derive(Debug, Args)]
pub struct SteerArgs {
    pub system: PathBuf,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub t0: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub t1: f64,
    /// Comma-separated initial state.
    #[arg(long, allow_hyphen_values = true)]
    pub x0: String,
    /// Comma-separated target state.
    #[arg(long, allow_hyphen_values = true)]
    pub x1: String,
    /// JSON summary (cost, endpoint error) written alongside the CSV.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlaceArgs {
    pub system: PathBuf,
    /// Coefficients a1,...,an of s^n - an s^(n-1) - ... - a1.
    #[arg(long, allow_hyphen_values = true, required_unless_present = "roots", conflicts_with = "roots")]
    pub poly: Option<String>,
    /// Target roots, each `re` or `re:im`.
    #[arg(long, allow_hyphen_values = true)]
    pub roots: Option<String>,
}

#[derive(Debug, Args)]
pub struct LqrArgs {
    pub system: PathBuf,
    #[arg(long)]
    pub horizon: f64,
    /// Initial state of the optimal trajectory (zero when absent).
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Option<String>,
    /// Terminal weight as a JSON nested array (zero when absent).
    #[arg(long)]
    pub p0: Option<String>,
    /// Optimal trajectory CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GramianStabArgs {
    pub system: PathBuf,
    #[arg(long)]
    pub lambda: f64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub system: PathBuf,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub t0: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub t1: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub x0: String,
    /// Constant input (zero when absent).
    #[arg(long, allow_hyphen_values = true)]
    pub u: Option<String>,
    /// Number of reporting intervals.
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
}

#[derive(Debug, Args)]
pub struct SteerNlArgs {
    /// `pendulum`, `double-integrator`, or a field defined in the config file.
    #[arg(long)]
    pub field: String,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub t0: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub t1: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub x0: String,
    #[arg(long, allow_hyphen_values = true)]
    pub x1: String,
    /// Equilibrium state (zero when absent).
    #[arg(long, allow_hyphen_values = true)]
    pub xe: Option<String>,
    /// Equilibrium input (zero when absent).
    #[arg(long, allow_hyphen_values = true)]
    pub ue: Option<String>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Analyze(_) => "analyze",
            Command::Gramian(_) => "gramian",
            Command::Steer(_) => "steer",
            Command::Place(_) => "place",
            Command::Observer(_) => "observer",
            Command::Lqr(_) => "lqr",
            Command::Are(_) => "are",
            Command::GramianStab(_) => "gramian-stab",
            Command::Simulate(_) => "simulate",
            Command::SteerNl(_) => "steer-nl",
        }
    }
}

pub fn exit_code(class: ErrorClass) -> i32 {
    match class {
        ErrorClass::Input => 2,
        ErrorClass::Precondition => 3,
        ErrorClass::Numerical => 4,
    }
}

pub(crate) fn error_json(e: &ControlError) -> Value {
    let class = match e.class() {
        ErrorClass::Input => "input",
        ErrorClass::Precondition => "precondition",
        ErrorClass::Numerical => "numerical",
    };
    json!({ "name": e.name(), "class": class, "message": e.to_string() })
}

/// What a command produced before anything is written.
pub(crate) struct Outcome {
    pub inputs: Map<String, Value>,
    pub results: Value,
    pub errors: Vec<ControlError>,
    /// Primary CSV output; JSON verdict is primary when absent.
    pub csv: Option<String>,
    /// Secondary files (path, contents).
    pub extra: Vec<(PathBuf, String)>,
    pub verdicts: Map<String, Value>,
}

impl Outcome {
    pub fn new(inputs: Map<String, Value>) -> Self {
        Self { inputs, results: Value::Null, errors: Vec::new(), csv: None, extra: Vec::new(), verdicts: Map::new() }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), ControlError> {
    fs::write(path, contents).map_err(|e| ControlError::InvalidInput(format!("cannot write {}: {e}", path.display())))
}

fn verdict_document(command: &str, outcome: &Outcome) -> Value {
    json!({
        "command": command,
        "inputs": Value::Object(outcome.inputs.clone()),
        "results": outcome.results,
        "errors": outcome.errors.iter().map(error_json).collect::<Vec<_>>(),
    })
}

/// Runs one invocation; `argv[0]` is the program name.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let config = match &cli.config {
        Some(path) => match CliConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error[{}]: {e}", e.name());
                return exit_code(e.class());
            }
        },
        None => CliConfig::default(),
    };

    let name = cli.command.name();
    let outcome = commands::dispatch(&cli.command, &config);
    let code = outcome.errors.first().map_or(0, |e| exit_code(e.class()));
    for e in &outcome.errors {
        eprintln!("error[{}]: {e}", e.name());
    }

    let mut outputs = Vec::new();
    let mut emit = |path: Option<&Path>, contents: &str| -> Result<(), ControlError> {
        match path {
            Some(p) => {
                write_file(p, contents)?;
                outputs.push(p.display().to_string());
            }
            None => {
                let mut out = std::io::stdout().lock();
                match out.write_all(contents.as_bytes()).and_then(|()| out.flush()) {
                    Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                        return Err(ControlError::InvalidInput(format!("cannot write to stdout: {e}")));
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    };
    let primary = match &outcome.csv {
        Some(csv) => csv.clone(),
        None => io::to_json_string(&verdict_document(name, &outcome)),
    };
    let mut write_error = emit(cli.out.as_deref(), &primary).err();
    for (path, contents) in &outcome.extra {
        if let Err(e) = emit(Some(path), contents) {
            write_error = Some(e);
        }
    }

    let code = match write_error {
        Some(e) => {
            eprintln!("error[{}]: {e}", e.name());
            if code == 0 { exit_code(e.class()) } else { code }
        }
        None => code,
    };

    if let Some(path) = &cli.manifest {
        let manifest = json!({
            "command": name,
            "parameters": Value::Object(outcome.inputs.clone()),
            "outputs": outputs,
            "verdicts": Value::Object(outcome.verdicts.clone()),
            "errors": outcome.errors.iter().map(error_json).collect::<Vec<_>>(),
            "exit_code": code,
        });
        if let Err(e) = write_file(path, &io::to_json_string(&manifest)) {
            eprintln!("error[{}]: {e}", e.name());
            return if code == 0 { exit_code(e.class()) } else { code };
        }
    }
    code
}
