use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use randmoll::config::{ExperimentConfig, ExperimentKind, FamilyConfig, PathConfig, ProfileConfig};
use randmoll::experiments::{self, check_experiment};
use randmoll::suite::{init_suite, run_suite};
use randmoll::{CliError, Result};
use randmoll_core::report::fmt_num;
use randmoll_core::{AveragedKernel, Strategy, Verdict};

/// Averaged-kernel mollifier experiments.
///
/// Exit status: 0 when everything passes, 1 when any check or experiment
/// fails, 2 on a configuration error.
#[derive(Parser)]
#[command(name = "randmoll", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment configuration.
    Run {
        config: PathBuf,
        /// Report directory; defaults to the config's `output`, else `out/<name>`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write SVG plots even when the config does not ask for them.
        #[arg(long)]
        plots: bool,
    },
    /// Check a family and a profile against the convergence hypotheses.
    ///
    /// FAMILY and PROFILE are `kind:key=value,...`, for example
    /// `uniform-variance:s_max=1` and `power-tail:delta=1`.
    Check {
        family: String,
        profile: String,
        #[arg(long, default_value_t = 1)]
        dimension: usize,
        #[arg(long, default_value_t = 8)]
        horizon: u32,
        /// Checks to run; all applicable ones by default.
        #[arg(long, value_delimiter = ',')]
        only: Vec<String>,
        /// Use the profile as given instead of rescaling it to unit mass.
        #[arg(long)]
        raw_profile: bool,
    },
    /// Evaluate the averaged kernel `K_j` at points.
    Kernel {
        #[arg(long)]
        profile: String,
        #[arg(long)]
        family: String,
        #[arg(long, default_value_t = 1)]
        dimension: usize,
        #[arg(long, default_value_t = 1)]
        j: u32,
        #[arg(long, value_enum)]
        strategy: Option<StrategyArg>,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        raw_profile: bool,
        /// Points, comma-separated coordinates each.
        #[arg(long, num_args = 1.., required = true, allow_hyphen_values = true)]
        eval: Vec<String>,
    },
    /// Run every `*.toml` configuration in a directory.
    Suite {
        dir: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Write the default suite of configurations into a directory.
    InitSuite { dir: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Atoms,
    Quadrature,
    MonteCarlo,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("randmoll: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Run { config, out, plots } => run(&config, out, plots),
        Command::Check {
            family,
            profile,
            dimension,
            horizon,
            only,
            raw_profile,
        } => check(&family, &profile, dimension, horizon, &only, !raw_profile),
        Command::Kernel {
            profile,
            family,
            dimension,
            j,
            strategy,
            samples,
            seed,
            raw_profile,
            eval,
        } => kernel(&profile, &family, dimension, j, strategy, samples, seed, !raw_profile, &eval),
        Command::Suite { dir, out } => {
            let outcome = run_suite(&dir, &out)?;
            for e in &outcome.entries {
                match &e.outcome {
                    Ok((status, verdict)) => println!("{:<28} {status:<5} {verdict}", e.name),
                    Err(msg) => println!("{:<28} error {msg}", e.name),
                }
            }
            Ok(outcome.exit_code())
        }
        Command::InitSuite { dir } => {
            for p in init_suite(&dir)? {
                println!("{}", p.display());
            }
            Ok(0)
        }
    }
}

fn run(path: &Path, out: Option<PathBuf>, plots: bool) -> Result<i32> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let cfg = ExperimentConfig::parse(&text)?;
    let rep = experiments::run(&cfg)?;
    let dir = out
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| Path::new("out").join(&cfg.name));
    rep.write(&dir, plots || cfg.plots)?;
    print!("{}", rep.to_text());
    println!("report={}", dir.display());
    Ok(i32::from(rep.failed()))
}

fn check(family: &str, profile: &str, n: usize, horizon: u32, only: &[String], normalize: bool) -> Result<i32> {
    let family: FamilyConfig = family.parse()?;
    let profile: ProfileConfig = profile.parse()?;
    let explicit = !only.is_empty();
    let names: Vec<String> = if explicit {
        only.to_vec()
    } else {
        ["vague", "density", "zo", "gradient", "moment", "declared"].map(String::from).to_vec()
    };
    let mut failed = false;
    for name in names {
        let cfg = ExperimentConfig {
            name: format!("check-{name}"),
            experiment: ExperimentKind::Check,
            seed: 0,
            dimension: n,
            horizon,
            function: None,
            check: Some(name.clone()),
            path: PathConfig::Fft,
            samples: 100_000,
            normalize_profile: normalize,
            plots: false,
            tolerance: 1e-2,
            horizons: None,
            resolutions: None,
            hypothesis_horizon: None,
            control_exponent: None,
            output: None,
            profile: profile.clone(),
            family: family.clone(),
            grid: None,
        };
        cfg.validate()?;
        let rep = check_experiment(&cfg)?;
        if rep.verdict == "unsupported" && !explicit {
            println!("# {name}: not applicable ({})", rep.summary_value("reason").unwrap_or("-"));
            continue;
        }
        for c in &rep.conditions {
            print!("{}", c.to_lines());
        }
        if rep.status == Verdict::Fail {
            failed = true;
            println!("# {name}: {}", rep.verdict);
        }
    }
    Ok(i32::from(failed))
}

#[allow(clippy::too_many_arguments)]
fn kernel(
    profile: &str,
    family: &str,
    n: usize,
    j: u32,
    strategy: Option<StrategyArg>,
    samples: usize,
    seed: u64,
    normalize: bool,
    eval: &[String],
) -> Result<i32> {
    let profile = profile.parse::<ProfileConfig>()?.build(n, normalize)?;
    let family = family.parse::<FamilyConfig>()?.build(n, j.max(1))?;
    let spec = family.member(j)?;
    let k = match strategy {
        None => AveragedKernel::auto(profile, spec)?,
        Some(s) => {
            let s = match s {
                StrategyArg::Atoms => Strategy::AtomsExact,
                StrategyArg::Quadrature => Strategy::default(),
                StrategyArg::MonteCarlo => Strategy::MonteCarlo { samples, seed },
            };
            AveragedKernel::new(profile, spec, s)?
        }
    };
    for point in eval {
        let x: Vec<f64> = point
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| CliError::Config(format!("bad point {point:?}")))?;
        if x.len() != n {
            return Err(CliError::Config(format!("point {point:?} has {} coordinates, dimension is {n}", x.len())));
        }
        let e = k.eval_estimate(&x)?;
        println!("x={point} value={} std_error={}", fmt_num(e.value), fmt_num(e.std_error));
    }
    let m = k.mass_estimate()?;
    println!("mass={} std_error={}", fmt_num(m.value), fmt_num(m.std_error));
    Ok(0)
}
