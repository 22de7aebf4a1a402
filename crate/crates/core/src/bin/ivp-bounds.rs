//! Command-line front end for the verification suites, rate experiments,
//! adversary pipeline and bound calculators.
//!
//! Exit codes: 0 success, 1 invariant violation, 2 invalid parameters,
//! 3 I/O error.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ivp_bounds::harness::{
    emit, emit_string, run, AdversarySpec, BoundsSpec, Experiment, ExperimentSpec, Fault,
    OutputFormat, RateSpec, ToleranceProfile, VerifyReductionSpec, VerifySplineSpec,
};
use ivp_bounds::reduction::Setting;
use ivp_bounds::solvers::SolverMode;
use ivp_bounds::Error;

#[derive(Parser, Debug)]
#[command(
    name = "ivp-bounds",
    version,
    about = "Lower-bound constructions and rate experiments for k-th order IVPs"
)]
struct Cli {
    /// Write results here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,

    #[arg(long, global = true, value_enum, default_value_t = ProfileArg::Default)]
    tolerance_profile: ProfileArg,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the perfect B-spline, scaled bumps and closed-form integrals.
    VerifySpline {
        #[arg(long)]
        r: usize,
        /// Corrupt the sign pattern (negative control).
        #[arg(long, value_enum)]
        inject_fault: Option<FaultArg>,
    },
    /// Check the weight identities and the exact mean-recovery roundtrip.
    VerifyReduction {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        r: usize,
        #[arg(long, default_value_t = 100)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Corrupt the weights (negative control).
        #[arg(long, value_enum)]
        inject_fault: Option<FaultArg>,
    },
    /// Measure endpoint error against cost and fit the decay exponent.
    Rates(RatesArgs),
    /// Run the end-to-end mean-estimation pipeline through the solver.
    Adversary(AdversaryArgs),
    /// Evaluate the query lower bound for mean estimation.
    BoundsCalc {
        #[arg(long, value_parser = parse_setting)]
        setting: Setting,
        #[arg(long)]
        kn: u64,
        #[arg(long)]
        eps1: f64,
    },
}

#[derive(Args, Debug)]
struct RatesArgs {
    #[arg(long, value_enum)]
    mode: ModeArg,
    #[arg(long)]
    r: usize,
    #[arg(long)]
    k: usize,
    /// Cost targets 2^LO..=2^HI.
    #[arg(long, value_parser = parse_grid, default_value = "4:12")]
    grid: (u32, u32),
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Monte Carlo samples per cell (randomized mode).
    #[arg(long, default_value_t = 4)]
    samples: usize,
    /// Include per-trial errors in JSON output.
    #[arg(long)]
    dump_trials: bool,
}

#[derive(Args, Debug)]
struct AdversaryArgs {
    #[arg(long, value_parser = parse_setting)]
    setting: Setting,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    r: usize,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 4)]
    samples: usize,
    /// Solves per integral; the median is used.
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    /// Use exact integrals in place of the solver.
    #[arg(long)]
    oracle: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ProfileArg {
    Strict,
    Default,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ModeArg {
    Det,
    Rand,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum FaultArg {
    SignPattern,
    Weights,
}

impl From<FaultArg> for Fault {
    fn from(f: FaultArg) -> Self {
        match f {
            FaultArg::SignPattern => Fault::SignPattern,
            FaultArg::Weights => Fault::Weights,
        }
    }
}

fn parse_setting(s: &str) -> Result<Setting, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_grid(s: &str) -> Result<(u32, u32), String> {
    let (lo, hi) = s.split_once(':').ok_or("expected LO:HI")?;
    let lo = lo.trim().parse::<u32>().map_err(|e| format!("LO: {e}"))?;
    let hi = hi.trim().parse::<u32>().map_err(|e| format!("HI: {e}"))?;
    Ok((lo, hi))
}

fn build_spec(cli: Cli) -> ExperimentSpec {
    let experiment = match cli.command {
        Command::VerifySpline { r, inject_fault } => Experiment::VerifySpline(VerifySplineSpec {
            r,
            fault: inject_fault.map(Into::into),
        }),
        Command::VerifyReduction {
            k,
            n,
            r,
            instances,
            seed,
            inject_fault,
        } => Experiment::VerifyReduction(VerifyReductionSpec {
            k,
            n,
            r,
            instances,
            seed,
            fault: inject_fault.map(Into::into),
        }),
        Command::Rates(a) => {
            let mode = match a.mode {
                ModeArg::Det => SolverMode::Deterministic,
                ModeArg::Rand => SolverMode::Randomized,
            };
            let mut spec = RateSpec::new(mode, a.r, a.k, a.grid, a.trials, a.seed);
            spec.samples_per_cell = a.samples;
            spec.dump_trials = a.dump_trials;
            Experiment::Rates(spec)
        }
        Command::Adversary(a) => {
            let mut spec = AdversarySpec::new(a.setting, a.k, a.r, a.n, a.trials, a.seed);
            spec.samples_per_cell = a.samples;
            spec.repeats = a.repeats;
            spec.oracle = a.oracle;
            Experiment::Adversary(spec)
        }
        Command::BoundsCalc { setting, kn, eps1 } => {
            Experiment::BoundsCalc(BoundsSpec { setting, kn, eps1 })
        }
    };
    ExperimentSpec {
        experiment,
        format: match cli.format {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Json => OutputFormat::Json,
        },
        tolerance_profile: match cli.tolerance_profile {
            ProfileArg::Strict => ToleranceProfile::Strict,
            ProfileArg::Default => ToleranceProfile::Default,
        },
        out: cli.out,
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidParameter(_) => 2,
        Error::Io { .. } => 3,
        Error::Trial { source, .. } => exit_code(source),
        _ => 1,
    }
}

fn execute(spec: &ExperimentSpec) -> Result<bool, Error> {
    let outcome = run(spec)?;
    match &spec.out {
        Some(path) => emit(&outcome, Some(spec), path, spec.format)?,
        None => {
            let text = emit_string(&outcome, Some(spec), spec.format)?;
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .map_err(|source| Error::Io {
                    path: PathBuf::from("<stdout>"),
                    source,
                })?;
        }
    }
    if let ivp_bounds::harness::Outcome::Verification(report) = &outcome {
        for row in report.failures() {
            eprintln!(
                "FAILED {}: {:e} > {:e}",
                row.check, row.value, row.tolerance
            );
        }
    }
    eprintln!("{}", outcome.summary());
    Ok(outcome.passed())
}

fn main() -> ExitCode {
    let spec = build_spec(Cli::parse());
    match execute(&spec) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
