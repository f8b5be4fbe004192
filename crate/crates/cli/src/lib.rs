//! `bilayer` command-line front end.
//!
//! Each subcommand resolves its settings (defaults, then `--config`, then
//! flags), runs one computation and writes a CSV table plus a JSON sidecar
//! next to it. Exit codes: 0 success, 1 invalid input, 2 numerical failure.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod checks;
mod jobs;
pub mod output;
pub mod range;
pub mod settings;

pub use settings::Settings;

/// Schema version written into every sidecar.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid input: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

/// Library field names mapped to the settings that feed them.
fn field_path(field: &str) -> &str {
    match field {
        "spacing" => "geometry.a",
        "kind" => "geometry.kind",
        "interlayer_spacing" => "bilayer.az",
        "lateral_shift" => "bilayer.shift",
        "gamma_s" => "bilayer.gamma_s",
        "q" => "bilayer.q",
        "N" | "atoms_per_layer" => "sweep.N",
        "resolution" => "sweep.resolution",
        "window" => "sweep.a_window",
        "schedule" => "memory.schedule",
        "tau" => "memory.tau",
        other => other,
    }
}

impl From<bilayer_core::Error> for CliError {
    fn from(e: bilayer_core::Error) -> Self {
        match &e {
            bilayer_core::Error::Invalid { field, reason } => {
                CliError::Validation(format!("{}: {reason}", field_path(field)))
            }
            _ if e.is_validation() => CliError::Validation(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Validation(format!("output: {e}"))
    }
}

#[derive(Parser, Debug)]
#[command(name = "bilayer", version, about = "Bilayer atomic-array interface design")]
pub struct Cli {
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// TOML file with [geometry] [bilayer] [beam] [sweep] [memory] [output]
    /// [check] sections; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Efficiency map r_q over an (a_z, a) grid.
    Map(Flags),
    /// Sample the one-shell resonant curves a(a_z).
    Curves(Flags),
    /// Search for two-shell resonant sets in a window.
    Sets(Flags),
    /// Finite-array scattering for one or more N.
    Scatter(Flags),
    /// Finite-size sweep of 1 - r_q with a power-law fit.
    Scaling(Flags),
    /// Storage inefficiency 1 - r_f against tau.
    Memory(Flags),
    /// Light-shift storage protocol.
    Lightshift(Flags),
    /// Run the invariant suite.
    Check(Flags),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Map(_) => "map",
            Command::Curves(_) => "curves",
            Command::Sets(_) => "sets",
            Command::Scatter(_) => "scatter",
            Command::Scaling(_) => "scaling",
            Command::Memory(_) => "memory",
            Command::Lightshift(_) => "lightshift",
            Command::Check(_) => "check",
        }
    }

    fn flags(&self) -> &Flags {
        match self {
            Command::Map(f)
            | Command::Curves(f)
            | Command::Sets(f)
            | Command::Scatter(f)
            | Command::Scaling(f)
            | Command::Memory(f)
            | Command::Lightshift(f)
            | Command::Check(f) => f,
        }
    }
}

/// Flags shared by all subcommands. Each one overrides the config key of the
/// same name; values are validated when the subcommand reads them.
#[derive(Args, Debug, Default, Clone)]
pub struct Flags {
    /// Lattice kind: square or triangular.
    #[arg(long, allow_hyphen_values = true)]
    pub kind: Option<String>,
    /// Lattice spacing a/λ (value, list or range).
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<String>,
    /// Interlayer spacing a_z/λ (value, list or range).
    #[arg(long, allow_hyphen_values = true)]
    pub az: Option<String>,
    /// Lateral shift of layer 2 in units of a, `d1,d2`.
    #[arg(long, allow_hyphen_values = true)]
    pub shift: Option<String>,
    /// Individual loss rate γ_s/γ.
    #[arg(long = "gamma-s", allow_hyphen_values = true)]
    pub gamma_s: Option<String>,
    /// Collective mode: 0 or pi.
    #[arg(long, allow_hyphen_values = true)]
    pub q: Option<String>,
    /// Gauge origin z_c/λ.
    #[arg(long, allow_hyphen_values = true)]
    pub zc: Option<String>,
    /// Beam waist over patch side, w/L.
    #[arg(long, allow_hyphen_values = true)]
    pub wl: Option<String>,
    /// Atoms per layer, comma-separated.
    #[arg(long = "N", allow_hyphen_values = true)]
    pub n: Option<String>,
    /// Curve branches n_c, comma-separated.
    #[arg(long, allow_hyphen_values = true)]
    pub nc: Option<String>,
    /// Set search window in a, `lo,hi`.
    #[arg(long = "a-window", allow_hyphen_values = true)]
    pub a_window: Option<String>,
    /// Set search window in a_z, `lo,hi`.
    #[arg(long = "az-window", allow_hyphen_values = true)]
    pub az_window: Option<String>,
    /// Coarse scan points per axis.
    #[arg(long, allow_hyphen_values = true)]
    pub resolution: Option<String>,
    /// Fixed detuning δ/γ; `auto` searches for the resonance.
    #[arg(long, allow_hyphen_values = true)]
    pub delta: Option<String>,
    /// Spacing schedule: exp, linear or abrupt.
    #[arg(long, allow_hyphen_values = true)]
    pub schedule: Option<String>,
    /// Switch time τ in units of 1/Γ₁D (value, list or range).
    #[arg(long, allow_hyphen_values = true)]
    pub tau: Option<String>,
    /// Storage window T in units of 1/Γ₁D.
    #[arg(long = "T", allow_hyphen_values = true)]
    pub t: Option<String>,
    /// γ_s/(2Γ₁D).
    #[arg(long = "gs-ratio", allow_hyphen_values = true)]
    pub gs_ratio: Option<String>,
    /// τ at which to export the optimal mode function f(t).
    #[arg(long = "mode-tau", allow_hyphen_values = true)]
    pub mode_tau: Option<String>,
    /// Samples in the f(t) export.
    #[arg(long = "mode-samples", allow_hyphen_values = true)]
    pub mode_samples: Option<String>,
    /// Output path of the f(t) export.
    #[arg(long = "mode-out", allow_hyphen_values = true)]
    pub mode_out: Option<String>,
    /// Random seed of the invariant suite.
    #[arg(long, allow_hyphen_values = true)]
    pub seed: Option<String>,
    /// Random draws per invariant.
    #[arg(long, allow_hyphen_values = true)]
    pub samples: Option<String>,
    /// Output CSV path; the sidecar goes next to it with a .json extension.
    #[arg(long, short = 'o')]
    pub out: Option<String>,
}

impl Flags {
    fn entries(&self) -> [(&'static str, &Option<String>); 24] {
        [
            ("kind", &self.kind),
            ("a", &self.a),
            ("az", &self.az),
            ("shift", &self.shift),
            ("gamma_s", &self.gamma_s),
            ("q", &self.q),
            ("zc", &self.zc),
            ("wl", &self.wl),
            ("N", &self.n),
            ("nc", &self.nc),
            ("a_window", &self.a_window),
            ("az_window", &self.az_window),
            ("resolution", &self.resolution),
            ("delta", &self.delta),
            ("schedule", &self.schedule),
            ("tau", &self.tau),
            ("T", &self.t),
            ("gs_ratio", &self.gs_ratio),
            ("mode_tau", &self.mode_tau),
            ("mode_samples", &self.mode_samples),
            ("mode_out", &self.mode_out),
            ("seed", &self.seed),
            ("samples", &self.samples),
            ("out", &self.out),
        ]
    }
}

/// Resolve settings for a parsed command line.
pub fn resolve(cli: &Cli) -> Result<Settings, CliError> {
    let cmd = cli.command.name();
    let mut s = Settings::new(&jobs::defaults(cmd));
    s.default_to("output.out", format!("{cmd}.csv"));
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))?;
        s.merge_toml(&text)?;
    }
    for (key, value) in cli.command.flags().entries() {
        if let Some(v) = value {
            s.set(key, v);
        }
    }
    Ok(s)
}

/// Entry point; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(summary) => {
            eprintln!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Run a parsed command; returns a one-line summary.
pub fn execute(cli: &Cli) -> Result<String, CliError> {
    let settings = resolve(cli)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Validation("threads: must be >= 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Numerical(format!("thread pool: {e}")))?;
    let threads = pool.current_num_threads();
    let command = &cli.command;
    pool.install(move || jobs::dispatch(command, &settings, threads))
}
