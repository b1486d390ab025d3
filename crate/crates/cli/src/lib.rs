//! Command-line front end: simulate trajectories, certify a JSR bound from
//! data, run the white-box reference solve, and sweep over sample sizes.

pub mod plot;
pub mod sweep;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use jsrcert::bounds::budget_for;
use jsrcert::oracles::{jsr_lower_bound, whitebox_gamma};
use jsrcert::sampling::{load_observations, save_observations, simulate};
use jsrcert::{certify, CertificateReport, Error, ModeSet, ObservationSet, SolveOptions};

pub use sweep::{run_sweep, SweepConfig, SweepOutput, SweepRow};

/// Exit status for bad arguments or unusable input.
pub const EXIT_USAGE: i32 = 2;
/// Exit status when a numerical solver fails.
pub const EXIT_SOLVER: i32 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = if e.is_solver_failure() { EXIT_SOLVER } else { EXIT_USAGE };
        let message = match &e {
            Error::InsufficientSamples { got, required } => {
                format!("N = {got} is too small for this degree: at least {required} trajectories are required")
            }
            _ => e.to_string(),
        };
        Self { code, message }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "jsrcert", version, about = "Probabilistic JSR bounds for black-box switched linear systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate trajectories of a known mode set and write them as CSV.
    Simulate(SimulateArgs),
    /// Certify a JSR upper bound from trajectories.
    Certify(CertifyArgs),
    /// Solve the Lyapunov program over every product on a dense sphere grid.
    Whitebox(WhiteboxArgs),
    /// Bound versus number of samples, averaged over runs, as CSV and SVG.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Upper bound on λmax(P) once λmin(P) = 1.
    #[arg(long = "C-bound", default_value_t = SolveOptions::default().c_bound)]
    pub c_bound: f64,
    /// Relative tolerance of the γ bisection.
    #[arg(long = "bisect-tol", default_value_t = SolveOptions::default().bisection_rel_tol)]
    pub bisect_tol: f64,
}

impl SolverArgs {
    pub fn options(&self) -> CliResult<SolveOptions> {
        let opts = SolveOptions {
            c_bound: self.c_bound,
            bisection_rel_tol: self.bisect_tol,
            ..SolveOptions::default()
        };
        opts.validate().map_err(|e| CliError::usage(format!("--C-bound/--bisect-tol: {e}")))?;
        Ok(opts)
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Mode-set JSON file.
    #[arg(long)]
    pub modes: PathBuf,
    #[arg(long = "n-traj")]
    pub n_traj: usize,
    /// Trajectory length l.
    #[arg(long = "len", default_value_t = 1)]
    pub len: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct CertifyArgs {
    /// Trajectory CSV file.
    #[arg(long, conflicts_with = "modes", required_unless_present = "modes")]
    pub traj: Option<PathBuf>,
    /// Mode-set JSON to simulate from instead of reading trajectories.
    #[arg(long, requires = "n_traj")]
    pub modes: Option<PathBuf>,
    #[arg(long = "n-traj")]
    pub n_traj: Option<usize>,
    #[arg(long = "len", default_value_t = 1)]
    pub len: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Half-degree d of the Lyapunov function (1 = quadratic).
    #[arg(long, default_value_t = 1)]
    pub degree: usize,
    #[arg(long, default_value_t = 0.95)]
    pub beta: f64,
    #[arg(long, default_value_t = 0.95)]
    pub beta1: f64,
    /// Upper bound m on the number of modes.
    #[arg(long = "modes-upper", required = true)]
    pub modes_upper: usize,
    /// Report JSON path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Clone, Args)]
pub struct WhiteboxArgs {
    #[arg(long)]
    pub modes: PathBuf,
    #[arg(long = "len", default_value_t = 1)]
    pub len: usize,
    #[arg(long, default_value_t = 1)]
    pub degree: usize,
    /// Points on the circle (n = 2); larger n uses a fixed random surrogate.
    #[arg(long, default_value_t = 720)]
    pub grid: usize,
    /// Longest product used for the spectral-radius lower bound.
    #[arg(long = "k-max", default_value_t = 8)]
    pub k_max: usize,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub modes: PathBuf,
    /// Comma-separated, strictly increasing sample sizes.
    #[arg(long = "n-list", value_delimiter = ',', default_values_t = [100usize, 1000, 10000])]
    pub n_list: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    pub runs: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [1usize, 2])]
    pub degrees: Vec<usize>,
    #[arg(long, default_value_t = 0.95)]
    pub beta: f64,
    #[arg(long, default_value_t = 0.95)]
    pub beta1: f64,
    #[arg(long = "len", default_value_t = 1)]
    pub len: usize,
    /// Upper bound m on the number of modes; defaults to the size of the mode set.
    #[arg(long = "modes-upper")]
    pub modes_upper: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV output path.
    #[arg(long)]
    pub out: PathBuf,
    /// SVG output path.
    #[arg(long)]
    pub plot: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

fn load_modes(path: &Path) -> CliResult<ModeSet> {
    ModeSet::load(path).map_err(|e| CliError::usage(format!("--modes {}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))
}

fn check_probability(flag: &str, v: f64) -> CliResult<()> {
    if (0.0..1.0).contains(&v) {
        Ok(())
    } else {
        Err(CliError::usage(format!("{flag} must lie in [0, 1), got {v}")))
    }
}

pub fn cmd_simulate(args: &SimulateArgs) -> CliResult<ObservationSet> {
    let modes = load_modes(&args.modes)?;
    if args.n_traj == 0 || args.len == 0 {
        return Err(CliError::usage("--n-traj and --len must be at least 1"));
    }
    let obs = simulate(&modes, args.n_traj, args.len, args.seed)?;
    save_observations(&obs, &args.out)?;
    Ok(obs)
}

pub fn cmd_certify(args: &CertifyArgs) -> CliResult<CertificateReport> {
    check_probability("--beta", args.beta)?;
    check_probability("--beta1", args.beta1)?;
    if args.modes_upper == 0 {
        return Err(CliError::usage("--modes-upper must be at least 1"));
    }
    if args.degree == 0 {
        return Err(CliError::usage("--degree must be at least 1"));
    }
    let opts = args.solver.options()?;
    let obs = match (&args.traj, &args.modes) {
        (Some(path), _) => load_observations(path).map_err(|e| {
            let mut err = CliError::from(e);
            err.message = format!("--traj {}: {}", path.display(), err.message);
            err
        })?,
        (None, Some(path)) => {
            let modes = load_modes(path)?;
            let n = args.n_traj.ok_or_else(|| CliError::usage("--modes requires --n-traj"))?;
            if n == 0 || args.len == 0 {
                return Err(CliError::usage("--n-traj and --len must be at least 1"));
            }
            simulate(&modes, n, args.len, args.seed)?
        }
        (None, None) => return Err(CliError::usage("one of --traj or --modes is required")),
    };
    if obs.dim() < 2 {
        return Err(CliError::usage("state dimension must be at least 2"));
    }
    let endpoints = obs.endpoints();
    let budget = budget_for(&endpoints, args.degree, args.modes_upper, args.beta, args.beta1);
    let report = certify(&endpoints, &budget, &opts, obs.provenance().clone())?;
    if let Some(out) = &args.out {
        write_file(out, &report_json(&report)?)?;
    }
    Ok(report)
}

pub fn report_json(report: &CertificateReport) -> CliResult<String> {
    serde_json::to_string_pretty(report).map_err(|e| CliError {
        code: EXIT_SOLVER,
        message: format!("cannot serialize report: {e}"),
    })
}

pub fn summary(report: &CertificateReport) -> String {
    let bound = if report.finite {
        format!("{}", report.jsr_upper_bound)
    } else {
        "+inf".to_string()
    };
    let mut s = format!(
        "jsr upper bound: {bound}\nconfidence: {}\nfinite: {}\ngamma_star: {}\nkappa: {}\nlambda_star: {}\n",
        report.confidence, report.finite, report.gamma_star, report.kappa, report.lambda_star
    );
    if report.regimes.c_bound_active {
        s.push_str("warning: the C bound on λmax(P) was active\n");
    }
    if report.regimes.confidence_vacuous {
        s.push_str("warning: beta + beta1 < 1, the confidence is vacuous\n");
    }
    s
}

pub struct WhiteboxOutput {
    pub gamma: f64,
    pub points: usize,
    pub constraints: usize,
    pub surrogate: bool,
    pub lower_bound: f64,
}

pub fn cmd_whitebox(args: &WhiteboxArgs) -> CliResult<WhiteboxOutput> {
    let modes = load_modes(&args.modes)?;
    let opts = args.solver.options()?;
    if args.degree == 0 || args.len == 0 || args.k_max == 0 {
        return Err(CliError::usage("--degree, --len and --k-max must be at least 1"));
    }
    let wb = whitebox_gamma(&modes, args.len, args.degree, args.grid, &opts)?;
    let lower_bound = jsr_lower_bound(&modes, args.k_max)?;
    Ok(WhiteboxOutput {
        gamma: wb.gamma,
        points: wb.points,
        constraints: wb.constraints,
        surrogate: wb.surrogate,
        lower_bound,
    })
}

pub fn cmd_sweep(args: &SweepArgs) -> CliResult<SweepOutput> {
    let modes = load_modes(&args.modes)?;
    let config = SweepConfig {
        modes_file: args.modes.display().to_string(),
        n_list: args.n_list.clone(),
        runs: args.runs,
        degrees: args.degrees.clone(),
        beta: args.beta,
        beta1: args.beta1,
        l: args.len,
        modes_upper: args.modes_upper.unwrap_or(modes.len()),
        seed: args.seed,
        options: args.solver.options()?,
    };
    let out = run_sweep(&modes, &config)?;
    write_file(&args.out, &out.csv())?;
    if let Some(plot) = &args.plot {
        write_file(plot, &out.svg())?;
    }
    Ok(out)
}

/// Runs one parsed command, printing its human-readable output.
pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate(args) => {
            let obs = cmd_simulate(&args)?;
            println!("wrote {} trajectories of length {} to {}", obs.len(), obs.trace_len(), args.out.display());
        }
        Command::Certify(args) => {
            let report = cmd_certify(&args)?;
            print!("{}", summary(&report));
            if args.out.is_none() {
                println!("{}", report_json(&report)?);
            }
        }
        Command::Whitebox(args) => {
            let wb = cmd_whitebox(&args)?;
            let label = if wb.surrogate { " (random surrogate, not a grid)" } else { "" };
            println!("gamma: {}", wb.gamma);
            println!("points: {}{label}", wb.points);
            println!("constraints: {}", wb.constraints);
            println!("jsr lower bound (k ≤ {}): {}", args.k_max, wb.lower_bound);
        }
        Command::Sweep(args) => {
            let out = cmd_sweep(&args)?;
            for (d, n, mean) in out.means() {
                println!("d={d} N={n} mean bound {mean}");
            }
        }
    }
    Ok(())
}
