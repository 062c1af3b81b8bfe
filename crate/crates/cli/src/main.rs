use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use semsat_core::experiment::{
    append_rows, cmd_eval, cmd_oracle, cmd_sweep, cmd_train, write_oracle_trace, ExperimentConfig, PolicyChoice,
};

#[derive(Parser)]
#[command(name = "semsat", version, about = "LEO semantic transmission experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment configuration; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configuration's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configuration's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train a policy and write its checkpoint and learning curve.
    Train(Common),
    /// Evaluate a trained policy or a baseline and append a row to results.csv.
    Eval {
        #[command(flatten)]
        common: Common,
        /// random, greedy-oracle, decision-assisted, fixed-weight, no-mask or checkpoint.
        #[arg(long, default_value = "decision-assisted")]
        policy: String,
        /// Checkpoint file for `--policy checkpoint`; the configuration's own checkpoint otherwise.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Overrides the number of evaluation episodes.
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Run the configuration's [sweep] section and append rows to sweep.csv.
    Sweep(Common),
    /// Per-slot optimum trace on a small instance, written to oracle_trace.csv.
    Oracle {
        #[command(flatten)]
        common: Common,
        /// Largest joint action space that is fully enumerated as a cross-check.
        #[arg(long, default_value_t = 1_000_000)]
        limit: u64,
    },
    /// Parse and validate a configuration, then print its fingerprint.
    ValidateConfig(Common),
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Train(common) => {
            let cfg = common.load()?;
            let report = cmd_train(&cfg)?;
            if let Some(last) = report.curve.last() {
                println!("final mean reward {:.4} after {} iterations", last.mean_reward, report.curve.len());
            }
            println!("checkpoint {} (sha256 {})", report.checkpoint_path.display(), report.checkpoint_hash);
            println!("curve {}", report.curve_path.display());
        }
        Command::Eval { common, policy, checkpoint, episodes } => {
            let mut cfg = common.load()?;
            if let Some(e) = episodes {
                cfg.eval.episodes = e;
                cfg.validate()?;
            }
            let choice = PolicyChoice::parse(&policy)?;
            let row = cmd_eval(&cfg, choice, checkpoint.as_deref())?;
            let path = cfg.out_dir.join("results.csv");
            append_rows(&path, std::slice::from_ref(&row))?;
            println!(
                "{} seed {}: mean slot reward {:.4}, objective {:.4}, per-task efficiency {:.4}, success rate {:.3}",
                row.policy, row.seed, row.mean_slot_reward, row.objective, row.mean_task_efficiency, row.success_rate
            );
            println!("appended to {}", path.display());
        }
        Command::Sweep(common) => {
            let cfg = common.load()?;
            let rows = cmd_sweep(&cfg)?;
            let path = cfg.out_dir.join("sweep.csv");
            append_rows(&path, &rows)?;
            let failed = rows.iter().filter(|r| r.error.is_some()).count();
            println!("{} rows ({failed} failed) appended to {}", rows.len(), path.display());
        }
        Command::Oracle { common, limit } => {
            let cfg = common.load()?;
            let rows = cmd_oracle(&cfg, limit)?;
            let path = cfg.out_dir.join("oracle_trace.csv");
            write_oracle_trace(&path, &rows)?;
            let mean = rows.iter().map(|r| r.reward).sum::<f64>() / rows.len().max(1) as f64;
            println!("{} slots, mean optimal slot reward {mean:.4}, written to {}", rows.len(), path.display());
        }
        Command::ValidateConfig(common) => {
            let cfg = common.load()?;
            println!("ok {}", cfg.fingerprint());
        }
    }
    Ok(())
}
