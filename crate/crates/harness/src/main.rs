use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use marketgym_harness::logs::{read_episode, write_logs};
use marketgym_harness::runner::run_episodes;
use marketgym_harness::stats::{mean, std_err};
use marketgym_harness::{HarnessError, PolicySpec, RunConfig, SeedRun};

#[derive(Parser)]
#[command(name = "marketgym", version, about = "Run, train and replay market environment episodes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured policy and write episode logs.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Run this single seed instead of the configured list.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        episodes: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        overwrite: bool,
    },
    /// Train the configured Q-learning policy; writes logs, the learning
    /// curve and the greedy policy tables.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        overwrite: bool,
    },
    /// Print an episode log as a step table and check its return.
    Replay {
        #[arg(long)]
        log: PathBuf,
    },
}

fn report(runs: &[SeedRun]) {
    for run in runs {
        let r = run.returns();
        let tail = &r[r.len().saturating_sub(50)..];
        println!(
            "seed {:>6}  episodes {:>4}  mean return {:>14.3}  last {} mean {:>14.3} (se {:.3})",
            run.seed,
            r.len(),
            mean(&r),
            tail.len(),
            mean(tail),
            std_err(tail)
        );
    }
}

fn execute(cfg: RunConfig, out: Option<PathBuf>, overwrite: bool) -> Result<(), HarnessError> {
    if let Some(dir) = &out {
        if dir.join(marketgym_harness::logs::MANIFEST).exists() && !overwrite {
            return Err(HarnessError::OutputExists(dir.clone()));
        }
    }
    let runs = run_episodes(&cfg)?;
    report(&runs);
    if let Some(dir) = out {
        let manifest = write_logs(&dir, &cfg, &runs, overwrite)?;
        println!(
            "wrote {} files to {} (config {})",
            manifest.files.len() + 1,
            dir.display(),
            &manifest.config_sha256[..12]
        );
    }
    Ok(())
}

fn replay(path: &std::path::Path) -> Result<bool, HarnessError> {
    let log = read_episode(path)?;
    println!("{:>5}  {:<18}  {:>6}  {:>14}  {:>14}", "step", "time", "action", "reward", "return");
    let mut total = 0.0;
    for s in &log.steps {
        total += s.reward;
        println!("{:>5}  {:<18}  {:>6}  {:>14.3}  {:>14.3}", s.step, s.time, s.action, s.reward, total);
    }
    let ok = total == log.summary.total_reward;
    println!(
        "seed {} episode {}: return {} {} logged {}",
        log.summary.seed,
        log.summary.episode,
        total,
        if ok { "==" } else { "!=" },
        log.summary.total_reward
    );
    Ok(ok)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let result = match Cli::parse().command {
        Command::Run {
            config,
            seed,
            episodes,
            out,
            overwrite,
        } => RunConfig::load(&config).and_then(|mut cfg| {
            if let Some(seed) = seed {
                cfg.seeds = vec![seed];
            }
            if let Some(n) = episodes {
                cfg.episodes = n;
            }
            let out = out.or(cfg.output.clone());
            execute(cfg, out, overwrite)
        }),
        Command::Train { config, out, overwrite } => RunConfig::load(&config).and_then(|cfg| {
            if !matches!(cfg.policy, PolicySpec::QLearning(_)) {
                return Err(HarnessError::Invalid {
                    field: "policy.kind".into(),
                    message: "train needs a q_learning policy".into(),
                });
            }
            execute(cfg, Some(out), overwrite)
        }),
        Command::Replay { log } => match replay(&log) {
            Ok(true) => Ok(()),
            Ok(false) => {
                eprintln!("error: step rewards do not sum to the logged return");
                return ExitCode::FAILURE;
            }
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
