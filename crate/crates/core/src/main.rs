use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use silo_incentive::exp::{
    cmd_nash, cmd_run, cmd_sweep_alpha, cmd_verify, load_config, ExperimentConfig, Level,
};
use silo_incentive::exp::nash::within_budget;
use silo_incentive::exp::run::{DEFAULT_SWEEP_ALPHAS, DEFAULT_SWEEP_SEEDS};
use silo_incentive::game::GridSpec;
use silo_incentive::marl::Mode;
use silo_incentive::Error;

const EXIT_USAGE: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_VERIFY: u8 = 3;
const EXIT_RUNTIME: u8 = 4;

/// Payoff-redistribution incentives for cross-silo federated learning.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the requested modes and write metrics, events, checkpoints and a chart.
    Run {
        #[command(flatten)]
        common: Common,
        /// Comma-separated modes: mpgd, a2c, greedy, wpr.
        #[arg(long, value_delimiter = ',', value_parser = parse_mode)]
        mode: Vec<Mode>,
    },
    /// Sweep the initial redistribution intensity over several seeds.
    SweepAlpha {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        alphas: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        /// Mode trained in every cell (defaults to the first configured mode).
        #[arg(long, value_parser = parse_mode)]
        mode: Option<Mode>,
    },
    /// Run the property and oracle checks.
    Verify {
        #[arg(long, value_enum, default_value_t = LevelArg::Fast)]
        level: LevelArg,
    },
    /// Enumerate grid equilibria of one slot game.
    Nash {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Grid points per organization (defaults to 11).
        #[arg(long)]
        grid: Option<usize>,
        /// Number of organizations (overrides the config).
        #[arg(long)]
        orgs: Option<usize>,
        /// Redistribution intensity (overrides alpha0 of the config).
        #[arg(long)]
        alpha: Option<f64>,
        /// Print JSON instead of text.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, env = "SILO_OUT_DIR", default_value = "runs")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum LevelArg {
    Fast,
    Full,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    Mode::parse(s).ok_or_else(|| format!("unknown mode `{s}` (expected mpgd, a2c, greedy or wpr)"))
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::ConfigParse { .. }
        | Error::InvalidParameter { .. }
        | Error::InvalidProfile(_)
        | Error::BudgetExceeded { .. }
        | Error::DimensionMismatch { .. } => EXIT_VALIDATION,
        _ => EXIT_RUNTIME,
    }
}

fn load(path: &Option<PathBuf>, seed: Option<u64>) -> silo_incentive::Result<ExperimentConfig> {
    let mut cfg = match path {
        Some(p) => load_config(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cmd: Command) -> silo_incentive::Result<u8> {
    match cmd {
        Command::Run { common, mode } => {
            let cfg = load(&common.config, common.seed)?;
            let modes = (!mode.is_empty()).then_some(mode);
            let run = cmd_run(&cfg, &common.out, modes.as_deref())?;
            println!("run {} -> {}", run.run_id, run.dir.display());
            for s in &run.summaries {
                println!(
                    "{:<22} final-quartile overall payoff {:>12.3}  contributions {:?}",
                    s.label, s.final_quartile_overall, s.final_contribution
                );
            }
            Ok(0)
        }
        Command::SweepAlpha {
            common,
            alphas,
            seeds,
            mode,
        } => {
            let mut cfg = load(&common.config, common.seed)?;
            if let Some(m) = mode {
                cfg.trainer.modes = vec![m];
            }
            let alphas = if alphas.is_empty() { DEFAULT_SWEEP_ALPHAS.to_vec() } else { alphas };
            let seeds = if seeds.is_empty() { DEFAULT_SWEEP_SEEDS.to_vec() } else { seeds };
            let sweep = cmd_sweep_alpha(&cfg, &alphas, &seeds, &common.out)?;
            let s = &sweep.summary;
            println!("sweep -> {}", sweep.dir.display());
            for (i, a) in s.alphas.iter().enumerate() {
                println!(
                    "alpha0 {:>6}  mean {:>12.3}  range [{:.3}, {:.3}]",
                    a, s.mean[i], s.min[i], s.max[i]
                );
            }
            println!("per-seed argmax alpha0: {:?}", s.per_seed_argmax);
            println!(
                "mean argmax alpha0: {} ({})",
                s.argmax_mean,
                if s.interior_max {
                    "interior maximum"
                } else if s.monotone {
                    "monotone in alpha0"
                } else {
                    "not monotone, maximum at an endpoint"
                }
            );
            Ok(0)
        }
        Command::Verify { level } => {
            let level = match level {
                LevelArg::Fast => Level::Fast,
                LevelArg::Full => Level::Full,
            };
            let report = cmd_verify(level)?;
            print!("{}", report.render());
            Ok(if report.passed() { 0 } else { EXIT_VERIFY })
        }
        Command::Nash {
            config,
            seed,
            grid,
            orgs,
            alpha,
            json,
        } => {
            let mut cfg = load(&config, seed)?;
            if let Some(n) = orgs {
                cfg.num_orgs = n;
            }
            if let Some(a) = alpha {
                cfg.alpha.alpha0 = a;
                cfg.alpha.alpha_max = None;
            }
            cfg.validate()?;
            let grid = GridSpec::new(grid.unwrap_or(11))?;
            if !within_budget(grid, cfg.num_orgs) {
                eprintln!(
                    "warning: {} grid points for {} organizations exceeds the enumeration budget",
                    grid.points(),
                    cfg.num_orgs
                );
            }
            let report = cmd_nash(&cfg, grid)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                print!("{}", report.render());
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
