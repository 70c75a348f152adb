use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use fr3coex_cli::commands::{self, ControllerSpec};
use fr3coex_cli::config::{self, RunConfig};
use fr3coex_core::interference::InrMode;
use fr3coex_core::ppo::AdvantageMode;

/// TN/NTN coexistence simulator with a PPO interference controller.
#[derive(Parser)]
#[command(name = "fr3coex", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep the satellite pass under one controller and write metrics.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// none, ascent or ckpt:PATH
        #[arg(long, default_value = "none")]
        controller: ControllerSpec,
    },
    /// Train PPO policies (one per seed) and write checkpoints and curves.
    Train {
        #[command(flatten)]
        common: Common,
        /// Number of training seeds.
        #[arg(long)]
        seeds: Option<usize>,
        /// PPO updates per seed.
        #[arg(long)]
        updates: Option<usize>,
    },
    /// Evaluate one checkpoint over the pass.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Tabulate `simulate` runs side by side.
    Compare {
        /// LABEL=DIR of a `simulate` output directory; repeat per scheme.
        #[arg(long = "run", required = true)]
        runs: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// NTN density in terminals/m², or a comma-separated sweep.
    #[arg(long, value_delimiter = ',')]
    density: Option<Vec<f64>>,
    /// Terminal mix T1:T2.
    #[arg(long)]
    mix: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report INR as 10log ΣI_DL + 10log ΣI_UL - N instead of the linear sum.
    #[arg(long)]
    paper_literal_inr: bool,
    #[arg(long, value_enum)]
    advantage: Option<Advantage>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Advantage {
    Gae,
    Paper,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = config::load(self.config.as_deref(), std::env::vars())?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(d) = &self.density {
            cfg.scenario.ntn_densities = d.clone();
        }
        if let Some(m) = &self.mix {
            cfg.scenario.mix = m.clone();
        }
        if let Some(o) = &self.out {
            cfg.out = Some(o.clone());
        }
        if self.paper_literal_inr {
            cfg.env.inr_mode = InrMode::PaperLiteral;
        }
        if let Some(a) = self.advantage {
            cfg.ppo.advantage_mode = match a {
                Advantage::Gae => AdvantageMode::Gae,
                Advantage::Paper => AdvantageMode::Paper,
            };
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_run(s: &str) -> Result<(String, PathBuf)> {
    let (label, dir) = s
        .split_once('=')
        .with_context(|| format!("--run expects LABEL=DIR, got {s:?}"))?;
    if label.is_empty() || dir.is_empty() {
        bail!("--run expects LABEL=DIR, got {s:?}");
    }
    Ok((label.to_string(), PathBuf::from(dir)))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { common, controller } => {
            commands::simulate(&common.resolve()?, &controller)?;
        }
        Command::Train {
            common,
            seeds,
            updates,
        } => {
            let mut cfg = common.resolve()?;
            if let Some(k) = seeds {
                cfg.train.seeds = k;
            }
            if let Some(u) = updates {
                cfg.ppo.updates = u;
            }
            cfg.validate()?;
            commands::train_cmd(&cfg)?;
        }
        Command::Evaluate { common, checkpoint } => {
            commands::simulate(&common.resolve()?, &ControllerSpec::Checkpoint(checkpoint))?;
        }
        Command::Compare { runs, out } => {
            let runs = runs
                .iter()
                .map(|r| parse_run(r))
                .collect::<Result<Vec<_>>>()?;
            commands::compare(&runs, &out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FR3COEX_LOG", "info"))
        .format_timestamp(None)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
