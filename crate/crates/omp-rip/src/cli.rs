use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use omp_rip_core::{omp_run, OmpConfig, SupportSet};

use crate::certify::{certify, CertifyMode};
use crate::error::{AppError, AppResult};
use crate::formats::{emit, load_problem, read_matrix_csv, to_sorted_json, vector_to_csv, Trace};
use crate::harness::{phase_sweep, K0Rule, Sensing, SignalProfile, SweepConfig};
use crate::parallel::{enumeration_budget, with_jobs};
use crate::suites::{run_suite, Suite};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(
    name = "omp-rip",
    version,
    about = "Greedy sparse recovery with certified restricted constants"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Base seed; required by randomized commands.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads (0 = one per core). Output does not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,

    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Restricted eigen-extremes for s = 1..=s_max.
    Certify(CertifyArgs),
    /// Run the greedy solver on a problem file.
    Recover(RecoverArgs),
    /// Randomized oracle suites; exit 5 on any violation.
    Verify(VerifyArgs),
    /// Phase-transition sweep over (kbar, n).
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    #[arg(long, alias = "matrix_path")]
    pub matrix_path: PathBuf,
    #[arg(long, alias = "s_max")]
    pub s_max: usize,
    #[arg(long, value_enum, default_value = "exact")]
    pub mode: CertifyMode,
    /// Supports drawn per level in sampled mode.
    #[arg(long, default_value_t = 2000)]
    pub trials: usize,
}

#[derive(Debug, Args)]
pub struct RecoverArgs {
    #[arg(long, alias = "problem_path")]
    pub problem_path: PathBuf,
    #[arg(long)]
    pub k0: usize,
    /// Comma-separated initial support.
    #[arg(long, alias = "f0_indices", value_delimiter = ',')]
    pub f0_indices: Vec<usize>,
    /// Where to write the per-iteration trace JSON.
    #[arg(long, alias = "trace_path")]
    pub trace_path: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum)]
    pub suite: Suite,
    #[arg(long, default_value_t = 100)]
    pub instances: usize,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub d: usize,
    /// Comma-separated sparsity levels.
    #[arg(long, value_delimiter = ',', required = true)]
    pub kbars: Vec<usize>,
    /// Comma-separated measurement counts, or `start:stop:step` (inclusive).
    #[arg(long, alias = "n_grid", value_parser = parse_grid)]
    pub n_grid: Grid,
    #[arg(long, alias = "trials_per_cell", default_value_t = 100)]
    pub trials_per_cell: usize,
    #[arg(long, alias = "k0_rule", value_enum, default_value = "30k")]
    pub k0_rule: K0Rule,
    /// `flat` or `decay:RATE`.
    #[arg(long, default_value = "flat")]
    pub profile: SignalProfile,
    #[arg(long, alias = "noise_level", default_value_t = 0.0)]
    pub noise_level: f64,
    #[arg(long, alias = "normalize_columns")]
    pub normalize_columns: bool,
    #[arg(long, value_enum, default_value = "gaussian")]
    pub sensing: Sensing,
    /// Where to write the summary JSON with n50 per kbar.
    #[arg(long, alias = "summary_path")]
    pub summary_path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grid(pub Vec<usize>);

fn parse_grid(s: &str) -> Result<Grid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |t: &str| {
        t.trim()
            .parse::<usize>()
            .map_err(|_| format!("bad grid entry {t:?}"))
    };
    match parts.as_slice() {
        [start, stop, step] => {
            let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
            if step == 0 || start > stop {
                return Err(format!("empty range {s:?}"));
            }
            Ok(Grid((start..=stop).step_by(step).collect()))
        }
        [list] => list.split(',').map(num).collect::<Result<_, _>>().map(Grid),
        _ => Err(format!("grid must be a list or start:stop:step, got {s:?}")),
    }
}

fn require_seed(seed: Option<u64>, cmd: &str) -> AppResult<u64> {
    seed.ok_or_else(|| AppError::input(format!("{cmd} requires --seed")))
}

fn check_format(format: Option<Format>, allowed: &[Format], cmd: &str) -> AppResult<Format> {
    match format {
        None => Ok(allowed[0]),
        Some(f) if allowed.contains(&f) => Ok(f),
        Some(f) => Err(AppError::input(format!(
            "{cmd} does not support --format {f:?}"
        ))),
    }
}

pub fn run(cli: Cli) -> AppResult<()> {
    let out = cli.output.as_deref();
    match cli.command {
        Command::Certify(args) => {
            let format = check_format(cli.format, &[Format::Json, Format::Csv], "certify")?;
            let seed = match args.mode {
                CertifyMode::Sampled => Some(require_seed(cli.seed, "certify --mode sampled")?),
                CertifyMode::Exact => cli.seed,
            };
            let a = read_matrix_csv(&args.matrix_path)?;
            let budget = enumeration_budget()?;
            let report = with_jobs(cli.jobs, || {
                certify(&a, args.s_max, args.mode, args.trials, seed, budget)
            })??;
            match format {
                Format::Json => emit(out, &to_sorted_json(&report)),
                Format::Csv => emit(out, &report.to_csv()),
            }
        }
        Command::Recover(args) => {
            check_format(cli.format, &[Format::Csv], "recover")?;
            recover(&args, out)
        }
        Command::Verify(args) => {
            check_format(cli.format, &[Format::Json], "verify")?;
            let seed = require_seed(cli.seed, "verify")?;
            if args.instances == 0 {
                return Err(AppError::input("instances must be at least 1"));
            }
            let report = with_jobs(cli.jobs, || run_suite(args.suite, args.instances, seed))??;
            emit(out, &to_sorted_json(&report))?;
            let a = &report.aggregate;
            eprintln!(
                "{} instances, {} failures, max violation {:e}",
                a.instances, a.failures, a.max_violation
            );
            report.into_result().map(|_| ())
        }
        Command::Sweep(args) => {
            check_format(cli.format, &[Format::Csv], "sweep")?;
            let cfg = SweepConfig {
                d: args.d,
                kbars: args.kbars,
                n_grid: args.n_grid.0,
                trials_per_cell: args.trials_per_cell,
                k0_rule: args.k0_rule,
                signal_profile: args.profile,
                noise_level: args.noise_level,
                seed: require_seed(cli.seed, "sweep")?,
                normalize_columns: args.normalize_columns,
                sensing: args.sensing,
            };
            let table = with_jobs(cli.jobs, || phase_sweep(&cfg))??;
            emit(out, &table.to_csv())?;
            if let Some(p) = &args.summary_path {
                emit(Some(p), &to_sorted_json(&table.summary(&cfg)))?;
            }
            Ok(())
        }
    }
}

fn recover(args: &RecoverArgs, out: Option<&Path>) -> AppResult<()> {
    let problem = load_problem(&args.problem_path)?;
    let obj = problem.objective();
    let f0 = SupportSet::new(args.f0_indices.iter().copied(), obj.dimension())?;
    let cfg = OmpConfig::new(args.k0).with_initial_support(f0);
    let result = omp_run(obj, &cfg).map_err(|e| match e {
        omp_rip_core::Error::IndexOutOfRange { .. } => AppError::input(e.to_string()),
        e => AppError::Solver(e),
    })?;
    emit(out, &vector_to_csv(result.final_iterate()))?;
    if let Some(p) = &args.trace_path {
        emit(Some(p), &to_sorted_json(&Trace::from(&result)))?;
    }
    Ok(())
}
