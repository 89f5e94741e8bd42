mod commands;
mod config;
mod output;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::Config;
use output::{write_csv, write_json, Format, Table};

pub const TOOL: &str = concat!("deepgeom ", env!("CARGO_PKG_VERSION"));

/// A configuration problem; maps to exit code 1.
#[derive(Debug, Clone, PartialEq)]
pub struct UsageError(pub String);

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numerical(String),
    Io(String),
    Acceptance(usize),
}

impl From<UsageError> for CliError {
    fn from(e: UsageError) -> Self {
        CliError::Usage(e.0)
    }
}

impl From<deepgeom::Error> for CliError {
    fn from(e: deepgeom::Error) -> Self {
        use deepgeom::Error as E;
        match e {
            E::InvalidArgument { .. } | E::UnknownNonlinearity { .. } | E::UnsupportedActivation { .. } => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "deepgeom",
    version,
    about = "Mean-field theory and finite-width simulation of signal propagation in random deep networks",
    after_help = "Grid flags take ranges as lo:hi:count (inclusive, evenly spaced). \
Settings resolve as defaults < --config file < flags. Any output file of this tool \
can be passed back with --config to reproduce it.\n\n\
Exit codes: 0 success, 1 usage error, 2 numerical failure, 3 acceptance failure."
)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "DEEPGEOM_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Io {
    /// Config file: TOML, JSON, or an earlier CSV/JSON output of this tool.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output file (default: stdout).
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Output format (default: from the file extension, else csv).
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Ensemble {
    #[arg(long, allow_hyphen_values = true)]
    pub sigma_w: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub sigma_b: Option<f64>,
    /// tanh, linear, hard_tanh or relu.
    #[arg(long)]
    pub nonlinearity: Option<String>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Quad {
    /// `resolved` (default) or `hermite:<order>`.
    #[arg(long)]
    pub quadrature: Option<String>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Sim {
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Layerwise squared length q^l from the length map.
    LengthMap {
        #[command(flatten)]
        ens: Ensemble,
        #[command(flatten)]
        quad: Quad,
        #[arg(long)]
        depth: Option<usize>,
        /// Squared input length per neuron.
        #[arg(long, allow_hyphen_values = true)]
        q0: Option<f64>,
        #[command(flatten)]
        io: Io,
    },
    /// Layerwise correlation c^l from the C-map, with c*, chi1 and chi2.
    CMap {
        #[command(flatten)]
        ens: Ensemble,
        #[command(flatten)]
        quad: Quad,
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long, allow_hyphen_values = true)]
        c0: Option<f64>,
        #[command(flatten)]
        io: Io,
    },
    /// q*, c* and chi1 over a (sigma_w, sigma_b) grid, plus the chi1 = 1 curve.
    PhaseGrid {
        /// sigma_w range lo:hi:count.
        #[arg(long)]
        sw: Option<String>,
        /// sigma_b range lo:hi:count.
        #[arg(long)]
        sb: Option<String>,
        #[arg(long)]
        nonlinearity: Option<String>,
        #[command(flatten)]
        quad: Quad,
        /// Boundary curve file (default: next to --out with a `.boundary` suffix).
        #[arg(long)]
        boundary_out: Option<PathBuf>,
        #[command(flatten)]
        io: Io,
    },
    /// Metric, curvature and lengths of a circle: theory and simulation.
    Curvature {
        #[command(flatten)]
        ens: Ensemble,
        #[command(flatten)]
        quad: Quad,
        #[command(flatten)]
        sim: Sim,
        #[arg(long)]
        n_theta: Option<usize>,
        /// Networks to average (0 for theory only).
        #[arg(long)]
        seeds: Option<u64>,
        #[command(flatten)]
        io: Io,
    },
    /// Per-layer statistics of a circle input pushed through one network.
    Simulate {
        #[command(flatten)]
        ens: Ensemble,
        #[command(flatten)]
        quad: Quad,
        #[command(flatten)]
        sim: Sim,
        #[arg(long, allow_hyphen_values = true)]
        q0: Option<f64>,
        #[arg(long)]
        n_theta: Option<usize>,
        /// Also write the sampled network in binary form.
        #[arg(long)]
        save_network: Option<PathBuf>,
        #[command(flatten)]
        io: Io,
    },
    /// Angular autocorrelation of a circle at q* across layers.
    Autocorr {
        #[command(flatten)]
        ens: Ensemble,
        #[command(flatten)]
        quad: Quad,
        #[command(flatten)]
        sim: Sim,
        #[arg(long)]
        n_theta: Option<usize>,
        #[command(flatten)]
        io: Io,
    },
    /// Singular value spectrum of a circle at q* across layers.
    Spectrum {
        #[command(flatten)]
        ens: Ensemble,
        #[command(flatten)]
        quad: Quad,
        #[command(flatten)]
        sim: Sim,
        #[arg(long)]
        n_theta: Option<usize>,
        #[command(flatten)]
        io: Io,
    },
    /// Principal curvatures of the decision boundary at each layer.
    Boundary {
        #[command(flatten)]
        ens: Ensemble,
        #[command(flatten)]
        sim: Sim,
        /// Boundary points per layer.
        #[arg(long)]
        points: Option<usize>,
        #[arg(long)]
        max_iters: Option<usize>,
        #[command(flatten)]
        io: Io,
    },
    /// Lengths of circle images under random one-layer networks versus the hard bound.
    ShallowBound {
        #[command(flatten)]
        ens: Ensemble,
        /// Hidden width N1.
        #[arg(long)]
        width: Option<usize>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, allow_hyphen_values = true)]
        q0: Option<f64>,
        #[arg(long)]
        n_theta: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        io: Io,
    },
    /// Per-frequency error of regressing Fourier modes onto output activations.
    Fourier {
        #[command(flatten)]
        ens: Ensemble,
        #[command(flatten)]
        quad: Quad,
        /// Comma-separated depths.
        #[arg(long)]
        depths: Option<String>,
        #[arg(long)]
        width: Option<usize>,
        #[arg(long)]
        omega_max: Option<usize>,
        #[arg(long)]
        n_theta: Option<usize>,
        /// Ridge parameter (default: 1e-6 of the mean activation energy).
        #[arg(long, allow_hyphen_values = true)]
        ridge: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        seeds: Option<u64>,
        #[command(flatten)]
        io: Io,
    },
    /// Output correlation across networks whose layer-2 weights are interpolated.
    WeightChaos {
        #[command(flatten)]
        ens: Ensemble,
        #[command(flatten)]
        quad: Quad,
        #[command(flatten)]
        sim: Sim,
        /// Delta range lo:hi:count.
        #[arg(long)]
        deltas: Option<String>,
        #[arg(long)]
        n_theta: Option<usize>,
        #[arg(long)]
        seeds: Option<u64>,
        #[command(flatten)]
        io: Io,
    },
    /// Run the acceptance suite; exits 3 if any criterion fails.
    ValidateAll {
        /// Comma-separated criterion ids (default: all).
        #[arg(long)]
        criteria: Option<String>,
        #[command(flatten)]
        io: Io,
    },
}

/// A finished command: its resolved config and one or more tables. Extra
/// tables carry the suffix used to name their file.
pub struct Outcome {
    pub config: Config,
    pub primary: Table,
    pub extra: Vec<(&'static str, Option<PathBuf>, Table)>,
    pub exit: Option<CliError>,
}

fn resolve_format(io: &Io, path: Option<&Path>) -> Format {
    io.format.unwrap_or_else(|| match path.and_then(|p| p.extension()).and_then(|e| e.to_str()) {
        Some("json") => Format::Json,
        _ => Format::Csv,
    })
}

fn emit(path: Option<&Path>, format: Format, config: &Config, table: &Table) -> Result<(), CliError> {
    let write = |w: &mut dyn Write| -> std::io::Result<()> {
        let mut w = BufWriter::new(w);
        match format {
            Format::Csv => write_csv(&mut w, config, table)?,
            Format::Json => write_json(&mut w, config, table)?,
        }
        w.flush()
    };
    match path {
        Some(p) => {
            let mut f = File::create(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
            write(&mut f)?;
        }
        None => write(&mut std::io::stdout().lock())?,
    }
    Ok(())
}

/// `out.csv` becomes `out.<suffix>.csv`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    let name = match path.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}.{suffix}.{ext}"),
        None => format!("{stem}.{suffix}"),
    };
    path.with_file_name(name)
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("`threads` must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot set thread count: {e}")))?;
    }
    let io = commands::io_of(&cli.command).clone();
    let outcome = commands::execute(&cli.command)?;
    let path = io.out.as_deref();
    let format = resolve_format(&io, path);
    emit(path, format, &outcome.config, &outcome.primary)?;
    for (suffix, explicit, table) in &outcome.extra {
        let target = explicit.clone().or_else(|| path.map(|p| sibling(p, suffix)));
        emit(target.as_deref(), format, &outcome.config, table)?;
    }
    match outcome.exit {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("usage error: {m}");
            ExitCode::from(1)
        }
        Err(CliError::Numerical(m)) => {
            eprintln!("numerical failure: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Io(m)) => {
            eprintln!("i/o failure: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Acceptance(n)) => {
            eprintln!("{n} acceptance criteria failed");
            ExitCode::from(3)
        }
    }
}
