use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::PolicySpec;
use crate::error::HarnessError;
use crate::qlearn::{PolicyTable, QLearner};

pub struct Transition<'a> {
    pub state: &'a [f64],
    pub action: usize,
    pub reward: f64,
    pub next_state: &'a [f64],
    pub done: bool,
}

pub trait Policy: Send {
    fn begin_episode(&mut self, _episode: u64, _total: u64) {}
    fn act(&mut self, state: &[f64]) -> usize;
    fn learn(&mut self, _t: &Transition<'_>) {}
    fn table(&self) -> Option<PolicyTable> {
        None
    }
    /// Probability of a uniformly random action right now.
    fn exploration(&self) -> f64 {
        0.0
    }
}

pub struct RandomPolicy {
    actions: usize,
    rng: ChaCha8Rng,
}

impl RandomPolicy {
    pub fn new(actions: usize, seed: u64) -> Self {
        RandomPolicy {
            actions,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Policy for RandomPolicy {
    fn act(&mut self, _state: &[f64]) -> usize {
        self.rng.random_range(0..self.actions)
    }

    fn exploration(&self) -> f64 {
        1.0
    }
}

pub struct FixedPolicy(pub usize);

impl Policy for FixedPolicy {
    fn act(&mut self, _state: &[f64]) -> usize {
        self.0
    }
}

pub fn build_policy(spec: &PolicySpec, env: &str, actions: usize, seed: u64) -> Result<Box<dyn Policy>, HarnessError> {
    Ok(match spec {
        PolicySpec::Random => Box::new(RandomPolicy::new(actions, seed)),
        PolicySpec::Fixed { action } => Box::new(FixedPolicy(*action)),
        PolicySpec::QLearning(q) => Box::new(QLearner::new(q.clone(), env, actions, seed)?),
    })
}
