use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::book::Price;
use crate::time::{duration_nanos, SimTime};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FundamentalConfig {
    /// Long-run mean, cents.
    pub mean: Price,
    /// Mean-reversion fraction per step, in `(0, 1]`.
    pub kappa: f64,
    /// Shock standard deviation per step, cents.
    pub sigma: f64,
    #[serde(with = "crate::serde_duration")]
    pub step: Duration,
    /// Value at the origin; defaults to `mean`.
    pub initial: Option<f64>,
}

impl Default for FundamentalConfig {
    fn default() -> Self {
        FundamentalConfig {
            mean: 10_000,
            kappa: 1.67e-4,
            sigma: 5.0,
            step: Duration::from_secs(1),
            initial: None,
        }
    }
}

/// Discrete mean-reverting (Ornstein-Uhlenbeck) fundamental value,
/// sampled on a fixed grid and extended lazily as later times are asked for.
///
/// `r_j = r_{j-1} + kappa * (mean - r_{j-1}) + sigma * N(0, 1)`, floored at
/// one cent.
#[derive(Clone, Debug)]
pub struct FundamentalProcess {
    config: FundamentalConfig,
    origin: SimTime,
    step_nanos: u64,
    path: Vec<f64>,
    rng: ChaCha8Rng,
}

impl FundamentalProcess {
    pub fn new(config: FundamentalConfig, origin: SimTime, seed: u64) -> Self {
        let start = config.initial.unwrap_or(config.mean as f64).max(1.0);
        FundamentalProcess {
            step_nanos: duration_nanos(config.step).max(1),
            config,
            origin,
            path: vec![start],
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn config(&self) -> &FundamentalConfig {
        &self.config
    }

    /// Unrounded value on the grid point at or before `t`.
    pub fn raw_at(&mut self, t: SimTime) -> f64 {
        let j = (t.nanos().saturating_sub(self.origin.nanos()) / self.step_nanos) as usize;
        while self.path.len() <= j {
            let prev = *self.path.last().expect("path starts non-empty");
            let shock: f64 = StandardNormal.sample(&mut self.rng);
            let next = prev + self.config.kappa * (self.config.mean as f64 - prev) + self.config.sigma * shock;
            self.path.push(next.max(1.0));
        }
        self.path[j]
    }

    /// Value at `t` in whole cents, never below one cent.
    pub fn value_at(&mut self, t: SimTime) -> Price {
        (self.raw_at(t).round() as Price).max(1)
    }
}
