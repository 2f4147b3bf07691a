//! `qval`: generate fields, minimize, and run frequency and decay analyses.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 numerical or
//! diagnostic failure.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Index loops mirror the array formulas in the numerics.
#![allow(clippy::needless_range_loop)]

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod selftest;

use config::{ConfigFile, RunConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERIC: i32 = 2;

/// An error with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn usage(error: impl Into<anyhow::Error>) -> Self {
        Failure { code: EXIT_USAGE, error: error.into() }
    }
    pub fn numeric(error: impl Into<anyhow::Error>) -> Self {
        Failure { code: EXIT_NUMERIC, error: error.into() }
    }
}

impl From<qvalued::Error> for Failure {
    fn from(e: qvalued::Error) -> Self {
        use qvalued::Error as E;
        let numeric = matches!(
            e,
            E::ZeroBoundaryTrace { .. }
                | E::ZeroNorm
                | E::NonFiniteEnergy
                | E::NonConvergent { .. }
                | E::AmbiguousAssignment { .. }
                | E::NoTiltSignal
                | E::NoAdmissibleStructure { .. }
        );
        if numeric {
            Failure::numeric(e)
        } else {
            Failure::usage(e)
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::usage(e)
    }
}

pub type CmdResult = std::result::Result<(), Failure>;

#[derive(Parser, Debug)]
#[command(name = "qval", version, about = "Numerical laboratory for q-valued Dirichlet minimizers")]
struct Cli {
    /// Worker threads; falls back to QVAL_THREADS. Never changes results.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// TOML file with defaults for the flags of the subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct GridArgs {
    /// Cells per side of the box [-half, half]^dim.
    #[arg(long)]
    cells: Option<usize>,
    #[arg(long)]
    half: Option<f64>,
    #[arg(long)]
    dim: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample an analytic generator record into a QFLD1 file.
    Generate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Frequency profile D, H, N, W over a list of radii as CSV.
    Frequency {
        #[arg(long)]
        field: PathBuf,
        /// Comma-separated coordinates.
        #[arg(long)]
        center: Option<String>,
        /// `a,b,c` or `lo:hi:count`.
        #[arg(long)]
        radii: Option<String>,
        /// Degree used in the Weiss quantity; defaults to N at the smallest radius.
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Minimize the discrete energy with boundary data from a spec file.
    Minimize {
        #[arg(long)]
        boundary: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Iteration log CSV.
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Excess decay of blow-ups at scales rho0 theta^j, j = 0..=scales.
    Decay {
        #[arg(long)]
        field: PathBuf,
        #[arg(long)]
        center: Option<String>,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        scales: Option<usize>,
        #[arg(long)]
        rho0: Option<f64>,
        /// Tangent degree k0/q0.
        #[arg(long)]
        k0: Option<usize>,
        #[arg(long)]
        q0: Option<usize>,
        /// Structured-text report.
        #[arg(long)]
        out: Option<PathBuf>,
        /// CSV `scale,excess,mu_running`.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Run the built-in invariant checks.
    Selftest {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn apply_grid(cfg: &mut RunConfig, g: &GridArgs) {
    if let Some(c) = g.cells {
        cfg.cells = c;
    }
    if let Some(h) = g.half {
        cfg.half = h;
    }
    if let Some(d) = g.dim {
        cfg.dim = d;
    }
}

fn resolve(cli: &Cli) -> anyhow::Result<(RunConfig, Option<PathBuf>, Option<PathBuf>)> {
    let file = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let mut extra = (None, None);
    let mut cfg;
    match &cli.command {
        Command::Generate { spec, out, grid } => {
            cfg = RunConfig::new("generate", &file)?;
            cfg.field = Some(spec.clone());
            cfg.out = Some(out.clone());
            apply_grid(&mut cfg, grid);
        }
        Command::Frequency { field, center, radii, alpha, out } => {
            cfg = RunConfig::new("frequency", &file)?;
            cfg.field = Some(field.clone());
            cfg.out = out.clone();
            if let Some(c) = center {
                cfg.center = Some(config::parse_list(c)?);
            }
            if let Some(r) = radii {
                cfg.radii = Some(config::parse_radii(r)?);
            }
            cfg.alpha = alpha.or(cfg.alpha);
        }
        Command::Minimize { boundary, out, log, seed, grid } => {
            cfg = RunConfig::new("minimize", &file)?;
            cfg.field = Some(boundary.clone());
            cfg.out = Some(out.clone());
            extra.0 = log.clone();
            cfg.seed = seed.or(cfg.seed);
            apply_grid(&mut cfg, grid);
        }
        Command::Decay { field, center, theta, scales, rho0, k0, q0, out, csv } => {
            cfg = RunConfig::new("decay", &file)?;
            cfg.field = Some(field.clone());
            cfg.out = out.clone();
            extra.1 = csv.clone();
            if let Some(c) = center {
                cfg.center = Some(config::parse_list(c)?);
            }
            cfg.theta = theta.unwrap_or(cfg.theta);
            cfg.scales = scales.unwrap_or(cfg.scales);
            cfg.rho0 = rho0.unwrap_or(cfg.rho0);
            cfg.k0 = k0.or(cfg.k0);
            cfg.q0 = q0.or(cfg.q0);
        }
        Command::Selftest { seed, out } => {
            cfg = RunConfig::new("selftest", &file)?;
            cfg.out = out.clone();
            cfg.seed = seed.or(cfg.seed);
        }
    }
    cfg.threads = config::resolve_threads(cli.threads, std::env::var("QVAL_THREADS").ok(), file.threads)?;
    Ok((cfg, extra.0, extra.1))
}

/// Parse `args` (including the program name) and run the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(err, "{text}") } else { write!(out, "{text}") };
            return code;
        }
    };
    let result = resolve(&cli).map_err(Failure::usage).and_then(|(cfg, log, csv)| {
        let mut pool = rayon::ThreadPoolBuilder::new();
        if let Some(t) = cfg.threads {
            pool = pool.num_threads(t);
        }
        let pool = pool.build().map_err(Failure::usage)?;
        // commands buffer their output so the pool closure stays Send
        let mut buf: Vec<u8> = Vec::new();
        let r = pool.install(|| match cfg.command {
            "generate" => commands::generate(&cfg, &mut buf),
            "frequency" => commands::frequency(&cfg, &mut buf),
            "minimize" => commands::minimize(&cfg, log.as_deref(), &mut buf),
            "decay" => commands::decay(&cfg, csv.as_deref(), &mut buf),
            _ => selftest::cmd_selftest(&cfg, &mut buf),
        });
        out.write_all(&buf).map_err(Failure::usage)?;
        r
    });
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error: {:#}", f.error);
            f.code
        }
    }
}
