use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use cohrank::{Circuit, CoherentSuperposition, Error, InputSpec};
use serde::Serialize;

pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_RESOURCE: u8 = 3;
pub const EXIT_PARSE: u8 = 4;

/// Photon cap for runs that compare against the exact Fock-space oracle.
pub const ORACLE_PHOTON_CAP: usize = 12;
/// Photon cap for coherent-rank-only runs.
pub const COHERENT_PHOTON_CAP: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Amplitudes,
    Sample,
    Norm,
    Wigner,
    Resource,
    OracleCheck,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Conditional,
    Metropolis,
    /// Conditional sampling with Monte-Carlo norms; Monte-Carlo for `norm`.
    Mc,
    /// Conditional sampling with the orthogonal-terms shortcut.
    Orthogonal,
    Exact,
}

/// Simulate linear-optical circuits on coherent-state decompositions.
#[derive(Debug, Clone, Parser, Serialize)]
#[command(name = "cohrank", version)]
pub struct Cli {
    /// Input-state JSON file.
    #[arg(long)]
    pub state: Option<PathBuf>,
    /// Circuit JSON file; omitted means the identity.
    #[arg(long)]
    pub circuit: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub command: Command,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Decomposition parameter; overrides the state file.
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    /// Metropolis steps or Monte-Carlo draws.
    #[arg(long, default_value_t = 2000)]
    pub steps: usize,
    /// Monte-Carlo polydisk radius, or Wigner grid half-width.
    #[arg(long)]
    pub radius: Option<f64>,
    /// Per-mode photon cutoff when photon number is not conserved.
    #[arg(long)]
    pub cutoff: Option<usize>,
    /// Number of samples for `sample`.
    #[arg(long, default_value_t = 1000)]
    pub draws: usize,
    /// Grid points per axis for `wigner`.
    #[arg(long, default_value_t = 101)]
    pub points: usize,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn validation(message: impl Into<String>) -> Self {
        Self { code: EXIT_VALIDATION, message: message.into() }
    }

    pub fn resource(message: impl Into<String>) -> Self {
        Self { code: EXIT_RESOURCE, message: message.into() }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Json(_) | Error::Io(_) => EXIT_PARSE,
        Error::ResourceCap(_) => EXIT_RESOURCE,
        Error::Element { source, .. } => exit_code(source),
        _ => EXIT_VALIDATION,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure { code: exit_code(&e), message: e.to_string() }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure { code: EXIT_VALIDATION, message: format!("writing output: {e}") }
    }
}

/// A state file: per-mode input specification, or an explicit list of
/// coherent-state terms (`{"modes": m, "terms": [...]}`).
#[derive(Debug, Clone)]
pub enum StateFile {
    Spec(InputSpec),
    Raw(CoherentSuperposition),
}

pub type CliResult<T> = std::result::Result<T, Failure>;

fn read(path: &Path, what: &str) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| Failure {
        code: EXIT_PARSE,
        message: format!("cannot read {what} file {}: {e}", path.display()),
    })
}

impl Cli {
    pub fn load_state(&self) -> CliResult<StateFile> {
        let path = self
            .state
            .as_ref()
            .ok_or_else(|| Failure::validation("--state is required for this command"))?;
        let text = read(path, "state")?;
        let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Failure {
            code: EXIT_PARSE,
            message: format!("{}: {e}", path.display()),
        })?;
        let parsed = if value.get("terms").is_some() {
            CoherentSuperposition::from_json(&text).map(StateFile::Raw)
        } else {
            InputSpec::from_json(&text).map(StateFile::Spec)
        };
        parsed.map_err(|e| Failure {
            code: exit_code(&e),
            message: format!("{}: {e}", path.display()),
        })
    }

    /// The state file, which must be a per-mode input specification.
    pub fn load_spec(&self) -> CliResult<InputSpec> {
        match self.load_state()? {
            StateFile::Spec(spec) => Ok(spec),
            StateFile::Raw(_) => Err(Failure::validation(
                "this command needs a per-mode input specification, not a coherent-state list",
            )),
        }
    }

    /// The circuit file, or an empty circuit on `modes` modes.
    pub fn load_circuit(&self, modes: usize) -> CliResult<Circuit> {
        let Some(path) = &self.circuit else {
            return Ok(Circuit { modes, elements: Vec::new() });
        };
        let text = read(path, "circuit")?;
        let circuit = Circuit::from_json(&text).map_err(|e| Failure {
            code: EXIT_PARSE,
            message: format!("{}: {e}", path.display()),
        })?;
        if circuit.modes != modes {
            return Err(Failure::validation(format!(
                "circuit acts on {} modes but the state has {modes}",
                circuit.modes
            )));
        }
        Ok(circuit)
    }

    pub fn runspec_json(&self) -> String {
        serde_json::to_string(self).expect("run spec serializes")
    }

    /// Opens the output sink.
    pub fn sink(&self) -> CliResult<Box<dyn Write>> {
        Ok(match &self.out {
            Some(path) => Box::new(io::BufWriter::new(fs::File::create(path).map_err(|e| Failure {
                code: EXIT_VALIDATION,
                message: format!("cannot create {}: {e}", path.display()),
            })?)),
            None => Box::new(io::BufWriter::new(io::stdout())),
        })
    }
}
