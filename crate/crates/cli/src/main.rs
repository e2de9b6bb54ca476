//! `kite`: batch front end for the kite transport pipeline.
//!
//! Exit codes: 0 success, 1 a selected check failed, 2 the solver did not
//! converge, 3 I/O failure, 4 missing plan, 5 unusable radius range,
//! 64 invalid arguments or configuration.

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::RunConfig;
use kite_core::ot_semidiscrete::SiteSymmetry;

#[derive(Debug)]
pub enum CliError {
    CheckFailed(Vec<String>),
    NonConvergence(String),
    Io(String),
    MissingPlan(PathBuf),
    Radii(String),
    Usage(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::CheckFailed(_) => 1,
            CliError::NonConvergence(_) => 2,
            CliError::Io(_) => 3,
            CliError::MissingPlan(_) => 4,
            CliError::Radii(_) => 5,
            CliError::Usage(_) => 64,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::CheckFailed(names) => write!(f, "checks failed: {}", names.join(", ")),
            CliError::NonConvergence(m) => write!(f, "solver did not converge: {m}"),
            CliError::Io(m) => write!(f, "I/O failure: {m}"),
            CliError::MissingPlan(p) => write!(f, "no plan at {}; run `kite solve` first", p.display()),
            CliError::Radii(m) => write!(f, "radius range unusable: {m}"),
            CliError::Usage(m) => write!(f, "invalid configuration: {m}"),
        }
    }
}

#[derive(Parser)]
#[command(name = "kite", version, about = "Semi-discrete transport on the kite and checks on its Monge-Ampère metric")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the semi-discrete problem; writes plan.json, cells.svg, solve.json.
    Solve(Flags),
    /// Run the potential checks on a plan; writes verify.json.
    Verify(Flags),
    /// Conformal analysis of a plan; writes profile.csv, logfit.json, conformal.json.
    Conformal {
        #[command(flatten)]
        flags: Flags,
        /// Analyse a synthetic field instead of a plan.
        #[arg(long, value_enum)]
        fixture: Option<Fixture>,
    },
    /// Exact chart algebra, plus the reduction checks when a plan exists; writes simplex.json.
    Simplex(Flags),
    /// Domain data, and with a plan, point clouds and figures.
    Export(Flags),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Fixture {
    /// `ρ⁻¹ = -3 log|z| + 7`.
    Log3,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SymmetryArg {
    Symmetrized,
    Unsymmetrized,
}

/// Flags override values from `--config`, which override defaults.
#[derive(Args, Debug, Default)]
struct Flags {
    /// JSON file with any subset of the run settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Plan file; defaults to plan.json in the output directory.
    #[arg(long)]
    plan: Option<PathBuf>,
    #[arg(long)]
    n_sites: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    symmetry: Option<SymmetryArg>,
    #[arg(long)]
    lloyd_iters: Option<usize>,
    #[arg(long)]
    tol_mass: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Regression radius in site spacings.
    #[arg(long)]
    r_loc_mult: Option<f64>,
    #[arg(long)]
    r_min: Option<f64>,
    #[arg(long)]
    r_max: Option<f64>,
    #[arg(long)]
    n_radii: Option<usize>,
    #[arg(long)]
    grid_n: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    sample_seed: Option<u64>,
    /// Must already exist.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Comma-separated subset of the subcommand's checks.
    #[arg(long, value_delimiter = ',')]
    checks: Option<Vec<String>>,
    /// Worker cap; the KITE_THREADS environment variable takes precedence.
    #[arg(long)]
    threads: Option<usize>,
}

impl Flags {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut c = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = &self.$f { c.$f = v.clone(); } )* };
        }
        set!(n_sites, seed, lloyd_iters, tol_mass, max_iters, r_loc_mult, n_radii, grid_n, samples, sample_seed, out_dir, checks);
        if let Some(v) = self.r_min {
            c.r_min = Some(v);
        }
        if let Some(v) = self.r_max {
            c.r_max = Some(v);
        }
        if let Some(s) = self.symmetry {
            c.symmetry = match s {
                SymmetryArg::Symmetrized => SiteSymmetry::Symmetrized,
                SymmetryArg::Unsymmetrized => SiteSymmetry::Unsymmetrized,
            };
        }
        if let Some(t) = self.threads {
            c.threads = Some(t);
        }
        if let Ok(t) = std::env::var("KITE_THREADS") {
            c.threads = Some(t.parse().map_err(|_| CliError::Usage(format!("KITE_THREADS={t} is not a count")))?);
        }
        c.validate()?;
        Ok(c)
    }

    fn plan_path(&self, c: &RunConfig) -> (PathBuf, bool) {
        match &self.plan {
            Some(p) => (p.clone(), true),
            None => (c.out("plan.json"), false),
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (flags, fixture) = match &cli.command {
        Command::Solve(f) | Command::Verify(f) | Command::Simplex(f) | Command::Export(f) => (f, None),
        Command::Conformal { flags, fixture } => (flags, *fixture),
    };
    let config = flags.resolve()?;
    if let Some(t) = config.threads {
        // Fails only if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    if !config.out_dir.is_dir() {
        return Err(CliError::Io(format!("output directory {} does not exist", config.out_dir.display())));
    }
    let (plan, explicit) = flags.plan_path(&config);
    match cli.command {
        Command::Solve(_) => commands::solve(&config),
        Command::Verify(_) => commands::verify(&config, &plan),
        Command::Conformal { .. } => commands::conformal(&config, &plan, fixture),
        Command::Simplex(_) => commands::simplex(&config, &plan, explicit),
        Command::Export(_) => commands::export(&config, &plan, explicit),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 64 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kite: {e}");
            ExitCode::from(e.code())
        }
    }
}
