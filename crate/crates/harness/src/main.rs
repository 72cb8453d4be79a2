use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use clarity_harness::{run_experiment, selftest, ConfigError, Experiment, ScenarioConfig};

/// Runs the clarity experiments and writes CSV/JSON artefacts.
#[derive(Parser)]
#[command(name = "clarity", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Only report warnings and errors.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Clarity per unit energy versus sensing time (E1).
    Energy(RunArgs),
    /// Greedy and ergodic coverage of a clarity map (E2).
    Coverage(RunArgs),
    /// Perceivability value functions and optimal rollouts (E3).
    Perceivability(RunArgs),
    /// Quadrotor landing with and without the safety filter (E4).
    Landing(RunArgs),
    /// Runs the built-in property suite.
    Selftest {
        /// Seed for the randomised checks.
        #[arg(long, default_value_t = selftest::DEFAULT_SEED)]
        seed: u64,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, overriding `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// `key=value` override; keys may be shortened to a unique suffix.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn load(experiment: Experiment, args: &RunArgs) -> Result<ScenarioConfig, ConfigError> {
    let mut cfg = match &args.config {
        Some(path) => ScenarioConfig::load(path)?,
        None => ScenarioConfig::defaults(experiment),
    };
    if cfg.experiment() != experiment {
        return Err(ConfigError {
            source_name: args.config.as_ref().map(|p| p.display().to_string()),
            line: None,
            message: format!(
                "config is for experiment {} (`{}`), not `{}`",
                cfg.experiment(),
                cfg.experiment().subcommand(),
                experiment.subcommand()
            ),
        });
    }
    for o in &args.overrides {
        cfg.apply_override(o)?;
    }
    if let Some(dir) = &args.out {
        cfg.set_output_dir(dir)?;
    }
    Ok(cfg)
}

fn run(experiment: Experiment, args: &RunArgs, quiet: bool) -> ExitCode {
    let cfg = match load(experiment, args) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run_experiment(&cfg) {
        Ok(out) => {
            if !quiet {
                println!("{}", serde_json::to_string_pretty(&out.results).unwrap_or_default());
            }
            println!("wrote {}", out.summary_path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match &cli.command {
        Command::Energy(a) => run(Experiment::E1, a, cli.quiet),
        Command::Coverage(a) => run(Experiment::E2, a, cli.quiet),
        Command::Perceivability(a) => run(Experiment::E3, a, cli.quiet),
        Command::Landing(a) => run(Experiment::E4, a, cli.quiet),
        Command::Selftest { seed } => {
            let outcomes = selftest::run(*seed);
            for o in &outcomes {
                let verdict = if o.passed { "PASS" } else { "FAIL" };
                println!("{verdict} {} ({:.2} s): {}", o.name, o.seconds, o.detail);
            }
            let failed = outcomes.iter().filter(|o| !o.passed).count();
            println!("{} of {} checks passed", outcomes.len() - failed, outcomes.len());
            if failed == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
    }
}
