//! `tweezer` command-line front-end.
//!
//! Each subcommand computes the data behind one figure and writes CSV/JSON
//! (PGM for images) into the output directory, followed by a manifest that
//! records the seed and every resolved parameter. Exit codes: 0 success,
//! 2 configuration error, 3 numerical or I/O failure. Errors are reported
//! on stderr as one JSON object.

mod commands;
pub mod params;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::atomdyn::DynamicsError;
use crate::detection::DetectionError;
use crate::diffraction::DiffractionError;
use crate::fit::FitError;
use crate::tweezer::TrapError;
use params::*;

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Parser)]
#[command(
    name = "tweezer",
    version,
    about = "Single-atom optical tweezer simulations"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON file with optional "seed" and "parameters" keys
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Seed for every random stream of the run
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Focal-plane PSF: radial profile, Airy reference and metrics
    FigPsf {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        flags: PsfFlags,
    },
    /// On-axis intensity against defocus
    FigAxial {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        flags: AxialFlags,
    },
    /// MTF from the sampled PSF against the circular-aperture reference
    FigMtf {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        flags: MtfFlags,
    },
    /// Release-recapture survival curve and damped-sine fit
    FigRecapture {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        flags: RecaptureFlags,
    },
    /// Telegraph trace, photon counts and count histogram
    FigHistogram {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        flags: HistogramFlags,
    },
    /// Synthetic two-atom CCD frame and two-Gaussian fit
    FigImage {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        flags: ImageFlags,
    },
    /// Trap depth, waist and frequencies as JSON
    TrapReport {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        flags: TrapFlags,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::FigPsf { .. } => "fig-psf",
            Command::FigAxial { .. } => "fig-axial",
            Command::FigMtf { .. } => "fig-mtf",
            Command::FigRecapture { .. } => "fig-recapture",
            Command::FigHistogram { .. } => "fig-histogram",
            Command::FigImage { .. } => "fig-image",
            Command::TrapReport { .. } => "trap-report",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::FigPsf { common, .. }
            | Command::FigAxial { common, .. }
            | Command::FigMtf { common, .. }
            | Command::FigRecapture { common, .. }
            | Command::FigHistogram { common, .. }
            | Command::FigImage { common, .. }
            | Command::TrapReport { common, .. } => common,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Config(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) | CliError::Io(_) => 3,
        }
    }

    pub fn to_json(&self) -> Value {
        let (kind, message) = match self {
            CliError::Config(m) => ("config", m),
            CliError::Numerical(m) => ("numerical", m),
            CliError::Io(m) => ("io", m),
        };
        json!({"error": {"kind": kind, "message": message, "exit_code": self.exit_code()}})
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<DiffractionError> for CliError {
    fn from(e: DiffractionError) -> Self {
        use DiffractionError::*;
        match e {
            InvalidPupil(_) | NotApplicable(_) | InvalidGrid(_) | UnderResolved { .. } => {
                CliError::Config(e.to_string())
            }
            GridMismatch | Truncated { .. } | NoConvergence(_) => {
                CliError::Numerical(e.to_string())
            }
        }
    }
}

impl From<TrapError> for CliError {
    fn from(e: TrapError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<FitError> for CliError {
    fn from(e: FitError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<DynamicsError> for CliError {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::Fit(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<DetectionError> for CliError {
    fn from(e: DetectionError) -> Self {
        match e {
            DetectionError::InvalidParameter(_) | DetectionError::OutsideSensor { .. } => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    command: Option<String>,
    seed: Option<u64>,
    #[serde(default)]
    parameters: Map<String, Value>,
}

fn read_config(path: Option<&Path>) -> Result<ConfigFile, CliError> {
    let Some(path) = path else {
        return Ok(ConfigFile::default());
    };
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Config-file parameters overlaid with the flags the user set.
fn resolve<P: DeserializeOwned, F: Serialize>(
    mut base: Map<String, Value>,
    flags: &F,
) -> Result<P, CliError> {
    let Value::Object(set) =
        serde_json::to_value(flags).map_err(|e| CliError::Config(e.to_string()))?
    else {
        unreachable!("flag structs serialise to objects");
    };
    base.extend(set);
    serde_json::from_value(Value::Object(base))
        .map_err(|e| CliError::Config(format!("parameters: {e}")))
}

/// Record of one run, written as `manifest.json`.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub tool_version: &'static str,
    pub command: &'static str,
    pub seed: u64,
    pub parameters: Value,
    pub outputs: Vec<String>,
}

/// Collects output files in a directory.
pub(crate) struct Outputs {
    dir: PathBuf,
    names: Vec<String>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            names: Vec::new(),
        })
    }

    pub(crate) fn write_with(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
    ) -> Result<(), CliError> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        fs::write(self.dir.join(name), buf)?;
        self.names.push(name.to_string());
        Ok(())
    }

    pub(crate) fn write_json(
        &mut self,
        name: &str,
        value: &impl Serialize,
    ) -> Result<(), CliError> {
        self.write_with(name, |buf| {
            serde_json::to_writer_pretty(&mut *buf, value)?;
            buf.push(b'\n');
            Ok(())
        })
    }
}

fn execute<P, F>(
    command: &Command,
    flags: &F,
    body: impl FnOnce(&P, u64, &mut Outputs) -> Result<(), CliError>,
) -> Result<Manifest, CliError>
where
    P: DeserializeOwned + Serialize,
    F: Serialize,
{
    let common = command.common();
    let file = read_config(common.config.as_deref())?;
    if let Some(c) = &file.command {
        if c != command.name() {
            return Err(CliError::Config(format!(
                "config file is for '{c}', not '{}'",
                command.name()
            )));
        }
    }
    let seed = common.seed.or(file.seed).unwrap_or(DEFAULT_SEED);
    let params: P = resolve(file.parameters, flags)?;
    let mut out = Outputs::new(&common.out)?;
    body(&params, seed, &mut out)?;
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION"),
        command: command.name(),
        seed,
        parameters: serde_json::to_value(&params).map_err(|e| CliError::Io(e.to_string()))?,
        outputs: out.names.clone(),
    };
    out.write_json("manifest.json", &manifest)?;
    Ok(manifest)
}

pub fn run(cli: &Cli) -> Result<Manifest, CliError> {
    let c = &cli.command;
    match c {
        Command::FigPsf { flags, .. } => execute(c, flags, commands::fig_psf),
        Command::FigAxial { flags, .. } => execute(c, flags, commands::fig_axial),
        Command::FigMtf { flags, .. } => execute(c, flags, commands::fig_mtf),
        Command::FigRecapture { flags, .. } => execute(c, flags, commands::fig_recapture),
        Command::FigHistogram { flags, .. } => execute(c, flags, commands::fig_histogram),
        Command::FigImage { flags, .. } => execute(c, flags, commands::fig_image),
        Command::TrapReport { flags, .. } => execute(c, flags, commands::trap_report),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(_) => 0,
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}
