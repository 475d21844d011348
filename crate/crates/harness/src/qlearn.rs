//! Tabular Q-learning over uniformly binned observations.

use marketgym_gym::registry::{DAILY_INVESTOR, EXECUTION};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;
use crate::policy::{Policy, Transition};

pub const MAX_STATES: u128 = 1_000_000;

/// Uniform bins over `[low, high]` for one observation component. Values
/// outside the range land in the end bins.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinSpec {
    pub component: usize,
    pub low: f64,
    pub high: f64,
    pub count: u32,
}

impl BinSpec {
    fn new(component: usize, low: f64, high: f64, count: u32) -> Self {
        BinSpec { component, low, high, count }
    }

    pub fn bucket(&self, value: f64) -> usize {
        let top = self.count as usize - 1;
        if value.is_nan() || value <= self.low {
            return 0;
        }
        let at = ((value - self.low) / (self.high - self.low) * self.count as f64).floor();
        (at as usize).min(top)
    }
}

/// Moves linearly from `start` to `end` over the first `decay_fraction`
/// of a run's episodes, then stays at `end`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schedule {
    pub start: f64,
    pub end: f64,
    #[serde(default = "Schedule::default_fraction")]
    pub decay_fraction: f64,
}

impl Schedule {
    fn default_fraction() -> f64 {
        0.8
    }

    pub fn constant(v: f64) -> Self {
        Schedule {
            start: v,
            end: v,
            decay_fraction: 1.0,
        }
    }

    pub fn value(&self, episode: u64, total: u64) -> f64 {
        let span = (total as f64 * self.decay_fraction).max(1.0);
        let progress = (episode as f64 / span).min(1.0);
        self.start + (self.end - self.start) * progress
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QLearnerSpec {
    /// Binned components; `None` uses the environment's default layout.
    pub bins: Option<Vec<BinSpec>>,
    pub learning_rate: Schedule,
    pub epsilon: Schedule,
    pub discount: f64,
    /// Daily investor only: BUY is unavailable at holdings of at least
    /// this many shares and SELL at holdings of at most minus this many.
    pub holdings_limit: Option<f64>,
}

impl Default for QLearnerSpec {
    fn default() -> Self {
        QLearnerSpec {
            bins: None,
            learning_rate: Schedule::constant(0.1),
            epsilon: Schedule {
                start: 1.0,
                end: 0.02,
                decay_fraction: 0.8,
            },
            discount: 1.0,
            holdings_limit: None,
        }
    }
}

/// Holdings sign and size 5, imbalance 4, spread 3, direction 3, each
/// return 3.
pub fn daily_default_bins() -> Vec<BinSpec> {
    vec![
        BinSpec::new(0, -250.0, 250.0, 5),
        BinSpec::new(1, 0.0, 1.0, 4),
        BinSpec::new(2, 0.5, 3.5, 3),
        BinSpec::new(3, -0.75, 0.75, 3),
        BinSpec::new(4, -15.0, 15.0, 3),
        BinSpec::new(5, -15.0, 15.0, 3),
        BinSpec::new(6, -15.0, 15.0, 3),
    ]
}

/// Time elapsed 4, schedule lead/lag 6, near imbalance 3, spread 3.
pub fn execution_default_bins() -> Vec<BinSpec> {
    vec![
        BinSpec::new(1, 0.0, 1.0, 4),
        BinSpec::new(2, -0.3, 0.3, 6),
        BinSpec::new(3, 0.0, 1.0, 3),
        BinSpec::new(6, 0.5, 3.5, 3),
    ]
}

fn observation_len(env: &str) -> Option<usize> {
    match env {
        DAILY_INVESTOR => Some(7),
        EXECUTION => Some(11),
        _ => None,
    }
}

impl QLearnerSpec {
    pub fn resolved_bins(&self, env: &str) -> Vec<BinSpec> {
        match (&self.bins, env) {
            (Some(b), _) => b.clone(),
            (None, EXECUTION) => execution_default_bins(),
            (None, _) => daily_default_bins(),
        }
    }

    pub fn validate(&self, env: &str) -> Result<(), HarnessError> {
        let invalid = |field: &str, message: &str| {
            Err(HarnessError::Invalid {
                field: format!("policy.{field}"),
                message: message.to_owned(),
            })
        };
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.epsilon.start) || !unit(self.epsilon.end) {
            return invalid("epsilon", "must lie in [0, 1]");
        }
        if !unit(self.learning_rate.start) || !unit(self.learning_rate.end) {
            return invalid("learning_rate", "must lie in [0, 1]");
        }
        for (name, s) in [("epsilon", &self.epsilon), ("learning_rate", &self.learning_rate)] {
            if !(s.decay_fraction > 0.0 && s.decay_fraction <= 1.0) {
                return invalid(name, "decay_fraction must lie in (0, 1]");
            }
        }
        if !unit(self.discount) {
            return invalid("discount", "must lie in [0, 1]");
        }
        if let Some(limit) = self.holdings_limit {
            if env != DAILY_INVESTOR {
                return invalid("holdings_limit", "only applies to the daily investor");
            }
            if !(limit > 0.0) {
                return invalid("holdings_limit", "must be positive");
            }
        }
        let obs = observation_len(env).unwrap_or(usize::MAX);
        let bins = self.resolved_bins(env);
        for b in &bins {
            if b.count == 0 {
                return invalid("bins", "every component needs at least one bin");
            }
            if !(b.low < b.high) {
                return invalid("bins", "low must be below high");
            }
            if b.component >= obs {
                return invalid("bins", "component index is outside the observation");
            }
        }
        let states = state_count(&bins);
        if states > MAX_STATES {
            return Err(HarnessError::TooManyStates(states));
        }
        Ok(())
    }
}

pub fn state_count(bins: &[BinSpec]) -> u128 {
    bins.iter()
        .fold(1u128, |n, b| n.saturating_mul(b.count as u128))
}

/// Learned values and the greedy action per discretized state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyTable {
    pub bins: Vec<BinSpec>,
    pub actions: usize,
    pub q: Vec<f64>,
    pub greedy: Vec<usize>,
}

pub struct QLearner {
    spec: QLearnerSpec,
    bins: Vec<BinSpec>,
    actions: usize,
    q: Vec<f64>,
    rng: ChaCha8Rng,
    epsilon: f64,
    alpha: f64,
}

impl QLearner {
    pub fn new(spec: QLearnerSpec, env: &str, actions: usize, seed: u64) -> Result<Self, HarnessError> {
        spec.validate(env)?;
        let bins = spec.resolved_bins(env);
        let states = state_count(&bins) as usize;
        Ok(QLearner {
            epsilon: spec.epsilon.start,
            alpha: spec.learning_rate.start,
            spec,
            bins,
            actions,
            q: vec![0.0; states * actions],
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn state_index(&self, state: &[f64]) -> usize {
        self.bins
            .iter()
            .fold(0, |idx, b| idx * b.count as usize + b.bucket(state[b.component]))
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    fn row(&self, s: usize) -> &[f64] {
        &self.q[s * self.actions..(s + 1) * self.actions]
    }

    /// Lowest-numbered action among the best.
    pub fn greedy(&self, s: usize) -> usize {
        self.best_allowed(s, |_| true)
    }

    fn best_allowed(&self, s: usize, allowed: impl Fn(usize) -> bool) -> usize {
        let row = self.row(s);
        let mut best = None;
        for (a, v) in row.iter().enumerate() {
            if allowed(a) && best.is_none_or(|b: usize| *v > row[b]) {
                best = Some(a);
            }
        }
        best.unwrap_or(0)
    }

    /// Whether `action` is available in `state` under the holdings limit.
    pub fn allowed(&self, state: &[f64], action: usize) -> bool {
        match self.spec.holdings_limit {
            Some(limit) => !(action == 0 && state[0] >= limit || action == 2 && state[0] <= -limit),
            None => true,
        }
    }

    pub fn table(&self) -> PolicyTable {
        let states = self.q.len() / self.actions;
        PolicyTable {
            bins: self.bins.clone(),
            actions: self.actions,
            q: self.q.clone(),
            greedy: (0..states).map(|s| self.greedy(s)).collect(),
        }
    }
}

impl Policy for QLearner {
    fn begin_episode(&mut self, episode: u64, total: u64) {
        self.epsilon = self.spec.epsilon.value(episode, total);
        self.alpha = self.spec.learning_rate.value(episode, total);
    }

    fn act(&mut self, state: &[f64]) -> usize {
        if self.rng.random::<f64>() < self.epsilon {
            let choices: Vec<usize> = (0..self.actions).filter(|&a| self.allowed(state, a)).collect();
            choices[self.rng.random_range(0..choices.len())]
        } else {
            self.best_allowed(self.state_index(state), |a| self.allowed(state, a))
        }
    }

    fn learn(&mut self, t: &Transition<'_>) {
        let s = self.state_index(t.state);
        let future = if t.done {
            0.0
        } else {
            let next = self.state_index(t.next_state);
            self.row(next)[self.best_allowed(next, |a| self.allowed(t.next_state, a))]
        };
        let cell = &mut self.q[s * self.actions + t.action];
        *cell += self.alpha * (t.reward + self.spec.discount * future - *cell);
    }

    fn table(&self) -> Option<PolicyTable> {
        Some(QLearner::table(self))
    }

    fn exploration(&self) -> f64 {
        self.epsilon
    }
}
