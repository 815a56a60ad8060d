//! `nlse` command-line driver.
//!
//! Exit codes: 0 success, 1 usage/config/input error, 2 numerical divergence.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use nlse_core::analysis::rco_diagnostics;
use nlse_core::harness::cache::{cache_dir, compute_reference, recompute_reference};
use nlse_core::harness::selftest::run_selftest;
use nlse_core::harness::study::{reference_request, write_records, write_records_file};
use nlse_core::harness::{
    group_series, run_convergence_study, write_plot, ExperimentConfig, PlotSpec, ReferenceSpec,
};
use nlse_core::integrators::{evolve, Scheme, SchemeRun};
use nlse_core::physics::{InitialData, Nonlinearity, Potential};
use nlse_core::spectral::{sobolev_norm, Grid};
use nlse_core::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DIVERGENCE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "nlse", version, about = "Time-splitting Fourier spectral solver for the 1D NLSE")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scheme and print the final norms.
    Run(RunArgs),
    /// Compute (or load from cache) the reference solutions of a config.
    Reference(ReferenceArgs),
    /// Run a convergence study and write its CSV table and SVG plot.
    Converge(ConvergeArgs),
    /// Tabulate the per-mode phase-cancellation quantities as CSV.
    Rco(RcoArgs),
    /// Run the randomized invariant checks.
    Selftest(SelftestArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long, default_value = "stfs")]
    scheme: String,
    #[arg(long, default_value = "box4")]
    potential: String,
    #[arg(long, default_value = "gaussian")]
    initial: String,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    beta: f64,
    #[arg(long = "N", default_value_t = 512)]
    n: usize,
    #[arg(long)]
    tau: f64,
    #[arg(long = "T", default_value_t = 1.0)]
    final_time: f64,
    #[arg(long, default_value_t = -16.0, allow_hyphen_values = true)]
    a: f64,
    #[arg(long, default_value_t = 16.0, allow_hyphen_values = true)]
    b: f64,
    /// Oversampling factor of the nonlinear phase (default depends on the potential).
    #[arg(long)]
    q: Option<usize>,
}

#[derive(Debug, Args)]
struct ReferenceArgs {
    #[arg(long)]
    config: PathBuf,
    /// Use h_e = 2^-9, tau_e = 1e-6 instead of the config's reference.
    #[arg(long)]
    paper_scale: bool,
    /// Recompute and overwrite existing cache files.
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Args)]
struct ConvergeArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    paper_scale: bool,
    /// Write wall_seconds = 0 for byte-reproducible tables.
    #[arg(long)]
    zero_wall_time: bool,
    /// Overrides the config's CSV path; without either the table goes to stdout.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RcoArgs {
    #[arg(long = "N")]
    n_modes: usize,
    /// tau as a multiple of h^2/pi.
    #[arg(long)]
    tau_over_cfl: f64,
    /// Number of steps in the geometric sums.
    #[arg(long)]
    n: u64,
    #[arg(long, default_value_t = -16.0, allow_hyphen_values = true)]
    a: f64,
    #[arg(long, default_value_t = 16.0, allow_hyphen_values = true)]
    b: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SelftestArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    trials: usize,
}

enum Failure {
    Core(Error),
    Checks(usize),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Core(Error::Io(e))
    }
}

type CliResult = std::result::Result<(), Failure>;

/// Parse `argv` (including the program name) and run the command.
pub fn dispatch<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    let result = match cli.command {
        Command::Run(args) => run(args, out),
        Command::Reference(args) => reference(args, out),
        Command::Converge(args) => converge(args, out, err),
        Command::Rco(args) => rco(args, out),
        Command::Selftest(args) => selftest(args, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Checks(n)) => {
            let _ = writeln!(err, "error: {n} self-test check(s) failed");
            EXIT_USAGE
        }
        Err(Failure::Core(e)) => {
            let _ = writeln!(err, "error: {e}");
            match e {
                Error::Divergence { .. } => EXIT_DIVERGENCE,
                _ => EXIT_USAGE,
            }
        }
    }
}

fn run(args: RunArgs, out: &mut dyn Write) -> CliResult {
    let scheme: Scheme = args.scheme.parse()?;
    let potential = Potential::from_key(&args.potential)?;
    let q = args.q.unwrap_or_else(|| potential.default_oversample());
    let run = SchemeRun {
        scheme,
        tau: args.tau,
        final_time: args.final_time,
        grid: Grid::new(args.a, args.b, args.n)?,
        potential,
        nonlinearity: Nonlinearity::new(args.beta, args.sigma)?,
        initial: InitialData::from_key(&args.initial)?,
        oversample_q: q,
    };
    let steps = run.n_steps()?;
    let traj = evolve(&run, &[])?;
    let first = &traj.snapshots[0].1;
    let last = traj.final_field();
    let m0 = sobolev_norm(first, 0).powi(2);
    let m1 = sobolev_norm(last, 0).powi(2);
    writeln!(out, "scheme: {}", scheme.key())?;
    writeln!(out, "steps: {steps}")?;
    writeln!(out, "final time: {}", args.final_time)?;
    writeln!(out, "L2 norm: {:.15e}", sobolev_norm(last, 0))?;
    writeln!(out, "H1 norm: {:.15e}", sobolev_norm(last, 1))?;
    writeln!(out, "mass drift: {:.3e}", ((m1 - m0) / m0).abs())?;
    writeln!(out, "wall seconds: {:.3}", traj.wall_time)?;
    Ok(())
}

fn load_config(path: &std::path::Path, paper_scale: bool) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::load(path)?;
    if paper_scale {
        cfg.reference = ReferenceSpec::PAPER;
        cfg.validate()?;
    }
    Ok(cfg)
}

fn reference(args: ReferenceArgs, out: &mut dyn Write) -> CliResult {
    let cfg = load_config(&args.config, args.paper_scale)?;
    let dir = cache_dir();
    for &sigma in &cfg.sigmas {
        let req = reference_request(&cfg, sigma)?;
        let cached = if args.force {
            recompute_reference(&req, &dir)?
        } else {
            compute_reference(&req, &dir)?
        };
        writeln!(out, "sigma={sigma} {}", cached.path.display())?;
    }
    Ok(())
}

fn converge(args: ConvergeArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult {
    let mut cfg = load_config(&args.config, args.paper_scale)?;
    cfg.output.zero_wall_time |= args.zero_wall_time;
    let records = run_convergence_study(&cfg, &cache_dir())?;
    let csv_path = args.csv.or(cfg.output.csv.clone());
    let svg_path = args.svg.or(cfg.output.svg.clone());
    // slopes go to stderr when the table itself is on stdout
    let report: &mut dyn Write = match &csv_path {
        Some(path) => {
            write_records_file(&records, path)?;
            &mut *out
        }
        None => {
            write_records(&records, &mut *out)?;
            &mut *err
        }
    };
    if let Some(path) = &svg_path {
        let title = format!("{} potential, beta = {}", cfg.potential.key(), cfg.beta);
        write_plot(&records, &PlotSpec { title, ..PlotSpec::default() }, path)?;
    }
    for series in group_series(&records) {
        match series.slope(cfg.drop_coarsest) {
            Ok(slope) => writeln!(report, "slope {}: {slope:.4}", series.label())?,
            Err(e) => writeln!(report, "slope {}: n/a ({e})", series.label())?,
        }
    }
    Ok(())
}

fn rco(args: RcoArgs, out: &mut dyn Write) -> CliResult {
    let grid = Grid::new(args.a, args.b, args.n_modes)?;
    if !(args.tau_over_cfl > 0.0 && args.tau_over_cfl.is_finite()) {
        return Err(Error::Config("--tau-over-cfl must be positive".into()).into());
    }
    let tau = args.tau_over_cfl * grid.h().powi(2) / std::f64::consts::PI;
    let table = rco_diagnostics(&grid, tau, args.n);
    match &args.out {
        Some(path) => {
            table.write_csv(std::fs::File::create(path)?)?;
            writeln!(
                out,
                "tau = {tau:e}, max product = {:e}, bound pi*tau/2 = {:e}",
                table.max_product,
                table.product_bound()
            )?;
        }
        None => table.write_csv(&mut *out)?,
    }
    Ok(())
}

fn selftest(args: SelftestArgs, out: &mut dyn Write) -> CliResult {
    let outcomes = run_selftest(args.seed, args.trials);
    for o in &outcomes {
        writeln!(out, "{o}")?;
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    if failed > 0 {
        return Err(Failure::Checks(failed));
    }
    Ok(())
}
