//! Reset/step episode mechanics over an interruptible kernel.
//!
//! A concrete environment supplies an [`MdpLayer`]: how to build a kernel,
//! and how to turn the raw states its experimental agent emits into
//! observations, rewards and a done flag. [`GymEnv`] owns the episode
//! lifecycle and seeding.

use std::collections::BTreeMap;

use marketgym_core::kernel::{Kernel, KernelConfig, KernelError, RunLog, RunStatus};
use marketgym_core::raw_state::{RawState, RawStateError};
use marketgym_core::seeding::hash64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Seed used until [`GymEnv::seed`] is called.
pub const DEFAULT_SEED: u64 = 0;

pub type Info = BTreeMap<String, serde_json::Value>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("step called before reset")]
    NotReset,
    #[error("episode is over; call reset before stepping again")]
    EpisodeDone,
    #[error("action {action} is outside the action space {{0..{count}}}")]
    InvalidAction { action: usize, count: usize },
    #[error("simulation finished before the experimental agent's first wakeup")]
    EpisodeSetup,
    #[error("invalid environment configuration: {0}")]
    Config(String),
    #[error("unknown environment `{0}`")]
    UnknownEnv(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    RawState(#[from] RawStateError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub state: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    pub info: Info,
}

pub trait MdpLayer: Send {
    type Message: Send + 'static;
    type Action: Send + 'static;

    fn action_count(&self) -> usize;
    fn observation_len(&self) -> usize;

    /// A fresh kernel configuration with exactly one gym agent designated.
    fn build_kernel(&self, seed: u64) -> Result<KernelConfig<Self::Message, Self::Action>, EnvError>;

    /// Called with the first raw state of an episode.
    fn on_reset(&mut self, raw: &RawState) -> Result<(), EnvError>;

    /// Maps a discrete action to what the gym agent receives. `raw` is the
    /// state the action is taken in.
    fn translate(&self, action: usize, raw: &RawState) -> Result<Self::Action, EnvError>;

    /// Reward between two consecutive interruptions. Runs before
    /// [`MdpLayer::state`] for the new raw state.
    fn step_reward(&mut self, prev: &RawState, now: &RawState) -> Result<f64, EnvError>;

    fn state(&self, raw: &RawState) -> Result<Vec<f64>, EnvError>;

    fn is_done(&self, raw: &RawState) -> Result<bool, EnvError>;

    /// Added to the last step's reward.
    fn final_reward_update(&mut self, raw: &RawState) -> Result<f64, EnvError>;

    fn info(&self, raw: &RawState) -> Result<Info, EnvError>;
}

/// Object-safe environment surface, used by the registry and runners.
pub trait Environment: Send {
    fn reset(&mut self) -> Result<Vec<f64>, EnvError>;
    fn step(&mut self, action: usize) -> Result<StepResult, EnvError>;
    fn seed(&mut self, n: u64);
    fn action_count(&self) -> usize;
    fn observation_len(&self) -> usize;
    /// Index of the next episode `reset` will start.
    fn episode_index(&self) -> u64;
    fn set_episode_index(&mut self, index: u64);
    /// Kernel seed of the current (or last) episode.
    fn kernel_seed(&self) -> Option<u64>;
    /// Simulation logs of the last finished episode.
    fn take_run_log(&mut self) -> Option<RunLog>;
    /// Diagnostics for the current raw state, as in [`StepResult::info`].
    fn info(&self) -> Result<Info, EnvError>;
}

struct Episode<M, A> {
    kernel: Kernel<M, A>,
    raw: RawState,
    done: bool,
}

pub struct GymEnv<L: MdpLayer> {
    layer: L,
    seed: u64,
    next_episode: u64,
    kernel_seed: Option<u64>,
    episode: Option<Episode<L::Message, L::Action>>,
    run_log: Option<RunLog>,
}

impl<L: MdpLayer> GymEnv<L> {
    pub fn new(layer: L) -> Self {
        GymEnv {
            layer,
            seed: DEFAULT_SEED,
            next_episode: 0,
            kernel_seed: None,
            episode: None,
            run_log: None,
        }
    }

    pub fn layer(&self) -> &L {
        &self.layer
    }

    /// Raw state behind the latest observation.
    pub fn raw_state(&self) -> Option<&RawState> {
        self.episode.as_ref().map(|e| &e.raw)
    }
}

impl<L: MdpLayer> Environment for GymEnv<L> {
    /// Discards any episode in flight, builds a fresh kernel and runs it to
    /// the first interruption.
    fn reset(&mut self) -> Result<Vec<f64>, EnvError> {
        self.episode = None;
        let kernel_seed = hash64(self.seed, self.next_episode);
        self.next_episode += 1;
        self.kernel_seed = Some(kernel_seed);

        let mut kernel = Kernel::build(self.layer.build_kernel(kernel_seed)?)?;
        let first = kernel.run_until_interrupt(None)?;
        let raw = match (first.status, first.raw_state) {
            (RunStatus::Interrupted, Some(raw)) => raw,
            _ => return Err(EnvError::EpisodeSetup),
        };
        self.layer.on_reset(&raw)?;
        let state = self.layer.state(&raw)?;
        self.episode = Some(Episode { kernel, raw, done: false });
        Ok(state)
    }

    fn step(&mut self, action: usize) -> Result<StepResult, EnvError> {
        let count = self.layer.action_count();
        let episode = self.episode.as_mut().ok_or(EnvError::NotReset)?;
        if episode.done {
            return Err(EnvError::EpisodeDone);
        }
        if action >= count {
            return Err(EnvError::InvalidAction { action, count });
        }
        let command = self.layer.translate(action, &episode.raw)?;
        let result = episode.kernel.run_until_interrupt(Some(command))?;
        let kernel_done = result.status == RunStatus::Done;
        let raw = match result.raw_state {
            Some(raw) if !kernel_done => raw,
            // The kernel ran out of events without another interruption:
            // nothing new was observed.
            _ => episode.raw.clone(),
        };

        let mut reward = self.layer.step_reward(&episode.raw, &raw)?;
        let done = kernel_done || self.layer.is_done(&raw)?;
        if done {
            reward += self.layer.final_reward_update(&raw)?;
            self.run_log = Some(episode.kernel.terminate()?);
        }
        let state = self.layer.state(&raw)?;
        let mut info = self.layer.info(&raw)?;
        info.insert("episode".into(), (self.next_episode - 1).into());
        episode.raw = raw;
        episode.done = done;
        Ok(StepResult { state, reward, done, info })
    }

    /// Later episodes derive their kernel seeds from `n` and an episode
    /// counter, which restarts at zero.
    fn seed(&mut self, n: u64) {
        self.seed = n;
        self.next_episode = 0;
    }

    fn action_count(&self) -> usize {
        self.layer.action_count()
    }

    fn observation_len(&self) -> usize {
        self.layer.observation_len()
    }

    fn episode_index(&self) -> u64 {
        self.next_episode
    }

    fn set_episode_index(&mut self, index: u64) {
        self.next_episode = index;
    }

    fn kernel_seed(&self) -> Option<u64> {
        self.kernel_seed
    }

    fn take_run_log(&mut self) -> Option<RunLog> {
        self.run_log.take()
    }

    fn info(&self) -> Result<Info, EnvError> {
        let episode = self.episode.as_ref().ok_or(EnvError::NotReset)?;
        self.layer.info(&episode.raw)
    }
}
