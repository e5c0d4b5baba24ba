use std::path::PathBuf;

use anyhow::Context;
use clap::{Parser, Subcommand};

use cdma_jic::sim::{run_experiment, write_outputs, ExperimentConfig, ExperimentKind};

#[derive(Parser)]
#[command(name = "cdma-jic", version, about = "Adaptive joint interference cancellation for DS-CDMA")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo experiment described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `master_seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides `trials`; takes precedence over --full-scale.
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, default_value = "results")]
        out: PathBuf,
        /// Overrides `experiment`.
        #[arg(long)]
        experiment: Option<ExperimentKind>,
        /// Use the full-scale trial count.
        #[arg(long)]
        full_scale: bool,
        /// Run trials on a single thread.
        #[arg(long)]
        sequential: bool,
    },
    /// Print the default configuration.
    DefaultConfig,
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Run {
            config,
            seed,
            trials,
            out,
            experiment,
            full_scale,
            sequential,
        } => {
            let text = std::fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let mut cfg = ExperimentConfig::parse(&text).with_context(|| format!("parsing {}", config.display()))?;
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            if let Some(e) = experiment {
                cfg.experiment = e;
            }
            if full_scale {
                cfg.trials = ExperimentConfig::FULL_SCALE_TRIALS;
            }
            if let Some(t) = trials {
                cfg.trials = t;
            }
            if sequential {
                cfg.parallel = false;
            }
            let result = run_experiment(&cfg)?;
            for path in write_outputs(&result, &out)? {
                println!("wrote {}", path.display());
            }
        }
        Command::DefaultConfig => print!("{}", ExperimentConfig::default().to_text()),
    }
    Ok(())
}
