//! The reset/step loop over seeds and episodes.

use std::ops::Range;

use marketgym_core::exchange::trade_tape;
use marketgym_core::seeding::hash64;
use marketgym_gym::registry::make;
use marketgym_gym::Environment;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{PolicySpec, RunConfig};
use crate::error::HarnessError;
use crate::logs::sha256_hex;
use crate::policy::{build_policy, Policy, Transition};
use crate::qlearn::PolicyTable;

const POLICY_STREAM: u64 = 0x504f_4c49_4359;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    /// Simulated time of the state the action was taken in.
    pub time: String,
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub done: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub seed: u64,
    pub episode: u64,
    pub kernel_seed: u64,
    pub steps: u64,
    pub total_reward: f64,
    pub exploration: f64,
    pub trades: usize,
    /// SHA-256 of the episode's trade tape as JSON rows.
    pub tape_sha256: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeLog {
    pub summary: EpisodeSummary,
    pub steps: Vec<StepRecord>,
}

impl EpisodeLog {
    /// Sum of the step rewards in order.
    pub fn recomputed_return(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeedRun {
    pub seed: u64,
    pub episodes: Vec<EpisodeLog>,
    pub table: Option<PolicyTable>,
}

impl SeedRun {
    pub fn returns(&self) -> Vec<f64> {
        self.episodes.iter().map(|e| e.summary.total_reward).collect()
    }
}

fn time_of(env: &dyn Environment) -> Result<String, HarnessError> {
    Ok(env.info()?.get("time").and_then(|t| t.as_str()).unwrap_or_default().to_owned())
}

/// Runs one episode to completion, letting the policy learn from every
/// transition.
pub fn run_episode(
    env: &mut dyn Environment,
    policy: &mut dyn Policy,
    seed: u64,
) -> Result<EpisodeLog, HarnessError> {
    let episode = env.episode_index();
    let mut state = env.reset()?;
    let mut time = time_of(env)?;
    let exploration = policy.exploration();
    let mut steps = Vec::new();
    loop {
        let action = policy.act(&state);
        let r = env.step(action)?;
        policy.learn(&Transition {
            state: &state,
            action,
            reward: r.reward,
            next_state: &r.state,
            done: r.done,
        });
        let next_time = r.info.get("time").and_then(|t| t.as_str()).unwrap_or_default().to_owned();
        steps.push(StepRecord {
            step: steps.len() as u64,
            time: std::mem::replace(&mut time, next_time),
            state: std::mem::replace(&mut state, r.state),
            action,
            reward: r.reward,
            done: r.done,
        });
        if r.done {
            break;
        }
    }
    let tape = env.take_run_log().map(|log| trade_tape(&log)).unwrap_or_default();
    let total_reward = steps.iter().map(|s| s.reward).sum();
    Ok(EpisodeLog {
        summary: EpisodeSummary {
            seed,
            episode,
            kernel_seed: env.kernel_seed().unwrap_or_default(),
            steps: steps.len() as u64,
            total_reward,
            exploration,
            trades: tape.len(),
            tape_sha256: sha256_hex(&serde_json::to_vec(&tape).expect("tape serializes")),
        },
        steps,
    })
}

/// Runs the episodes with the given indices for one seed, building the
/// policy from `spec`. Schedules run over the length of the range.
pub fn run_seed_range(
    cfg: &RunConfig,
    spec: &PolicySpec,
    seed: u64,
    episodes: Range<u64>,
) -> Result<SeedRun, HarnessError> {
    let mut env = make(&cfg.env, &cfg.env_config, &cfg.population)?;
    let mut policy = build_policy(spec, &cfg.env, env.action_count(), hash64(seed, POLICY_STREAM))?;
    env.seed(seed);
    env.set_episode_index(episodes.start);
    let total = episodes.end - episodes.start;
    let mut logs = Vec::with_capacity(total as usize);
    for (i, _) in episodes.enumerate() {
        policy.begin_episode(i as u64, total);
        let log = run_episode(env.as_mut(), policy.as_mut(), seed)?;
        log::info!(
            "seed {seed} episode {} return {:.3} exploration {:.3}",
            log.summary.episode,
            log.summary.total_reward,
            log.summary.exploration
        );
        logs.push(log);
    }
    Ok(SeedRun {
        seed,
        episodes: logs,
        table: policy.table(),
    })
}

pub fn run_seed(cfg: &RunConfig, seed: u64) -> Result<SeedRun, HarnessError> {
    run_seed_range(cfg, &cfg.policy, seed, 0..cfg.episodes)
}

/// Every configured seed, concurrently; results follow the order of
/// `cfg.seeds`.
pub fn run_episodes(cfg: &RunConfig) -> Result<Vec<SeedRun>, HarnessError> {
    cfg.validate()?;
    cfg.seeds.par_iter().map(|&seed| run_seed(cfg, seed)).collect()
}
