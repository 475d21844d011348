//! Non-learning market participants and the population builder that places
//! them, together with the exchange, into a kernel configuration.

pub mod fundamental;
pub mod momentum;
pub mod noise;
pub mod value;

use std::time::Duration;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use fundamental::{FundamentalConfig, FundamentalProcess};
pub use momentum::{momentum_policy, MomentumAgent, MomentumAgentCfg};
pub use noise::{noise_policy, NoiseAgent, NoiseAgentCfg};
pub use value::{value_policy, ValueAgent, ValueAgentCfg};

use crate::book::{Price, Qty};
use crate::exchange::{BookSeed, ExchangeAgent, ExchangeConfig, MarketHours, MarketMessage};
use crate::kernel::{AgentId, KernelConfig, LatencyModel};
use crate::seeding::hash64;
use crate::time::SimTime;

/// Stream index for the fundamental path shared by every value agent.
const FUNDAMENTAL_STREAM: u64 = 0xF00D;

/// Exponential inter-arrival draw, at least one nanosecond.
pub fn exponential_delay<R: Rng + ?Sized>(rng: &mut R, mean: Duration) -> Duration {
    let mean_nanos = mean.as_nanos() as f64;
    if mean_nanos <= 0.0 {
        return Duration::from_nanos(1);
    }
    let exp = Exp::new(1.0 / mean_nanos).expect("positive rate");
    let nanos: f64 = exp.sample(rng);
    Duration::from_nanos((nanos.round() as u64).max(1))
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PopulationError {
    #[error("{0} order size bounds must satisfy 0 < min <= max")]
    SizeBounds(&'static str),
    #[error("momentum windows must satisfy 0 < short < long")]
    Windows,
    #[error("fundamental kappa must lie in (0, 1], got {0}")]
    Kappa(f64),
    #[error("{0} must be finite and non-negative")]
    NonNegative(&'static str),
}

/// Pre-open liquidity ladder posted by the exchange.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BookSeedSpec {
    pub half_spread: Price,
    pub levels: usize,
    pub qty: Qty,
}

impl Default for BookSeedSpec {
    fn default() -> Self {
        BookSeedSpec {
            half_spread: 1,
            levels: 10,
            qty: 100,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LatencySpec {
    pub base_nanos: u64,
    pub jitter_nanos: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PopulationSpec {
    pub noise_agents: usize,
    pub value_agents: usize,
    pub momentum_agents: usize,
    pub noise: NoiseAgentCfg,
    pub value: ValueAgentCfg,
    pub momentum: MomentumAgentCfg,
    pub fundamental: FundamentalConfig,
    /// `None` opens the session on an empty book.
    pub book_seed: Option<BookSeedSpec>,
    pub latency: LatencySpec,
    /// Have the exchange track book invariants (costly, for tests).
    pub audit: bool,
}

impl Default for PopulationSpec {
    fn default() -> Self {
        PopulationSpec {
            noise_agents: 100,
            value_agents: 10,
            momentum_agents: 5,
            noise: NoiseAgentCfg::default(),
            value: ValueAgentCfg::default(),
            momentum: MomentumAgentCfg::default(),
            fundamental: FundamentalConfig::default(),
            book_seed: Some(BookSeedSpec::default()),
            latency: LatencySpec {
                base_nanos: 1_000_000,
                jitter_nanos: 100_000,
            },
            audit: false,
        }
    }
}

impl PopulationSpec {
    /// Exchange only, nobody else.
    pub fn empty() -> Self {
        PopulationSpec {
            noise_agents: 0,
            value_agents: 0,
            momentum_agents: 0,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), PopulationError> {
        let bounds_ok = |lo: Qty, hi: Qty| lo > 0 && lo <= hi;
        if !bounds_ok(self.noise.min_qty, self.noise.max_qty) {
            return Err(PopulationError::SizeBounds("noise"));
        }
        if !bounds_ok(self.value.min_qty, self.value.max_qty) {
            return Err(PopulationError::SizeBounds("value"));
        }
        if self.momentum.order_size == 0 {
            return Err(PopulationError::SizeBounds("momentum"));
        }
        if self.momentum.short_window == 0 || self.momentum.short_window >= self.momentum.long_window {
            return Err(PopulationError::Windows);
        }
        let kappa = self.fundamental.kappa;
        if !(kappa > 0.0 && kappa <= 1.0) {
            return Err(PopulationError::Kappa(kappa));
        }
        if !(self.fundamental.sigma.is_finite() && self.fundamental.sigma >= 0.0) {
            return Err(PopulationError::NonNegative("fundamental sigma"));
        }
        if !(self.value.obs_noise.is_finite() && self.value.obs_noise >= 0.0) {
            return Err(PopulationError::NonNegative("value observation noise"));
        }
        if let Some(seed) = &self.book_seed {
            if seed.qty == 0 || seed.half_spread < 1 || seed.half_spread + seed.levels as Price >= self.fundamental.mean {
                return Err(PopulationError::SizeBounds("book seed"));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.noise_agents + self.value_agents + self.momentum_agents
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A kernel configuration holding the exchange and the background
/// population, ready for an experimental agent to be appended.
pub struct Market<A> {
    pub config: KernelConfig<MarketMessage, A>,
    pub exchange: AgentId,
    pub hours: MarketHours,
}

/// Roster order: exchange, noise, value, momentum. Anything appended later
/// leaves these agents' random streams untouched.
pub fn build_market<A: 'static>(
    spec: &PopulationSpec,
    seed: u64,
    start: SimTime,
    end: SimTime,
    hours: MarketHours,
) -> Result<Market<A>, PopulationError> {
    spec.validate()?;
    let latency = LatencyModel::uniform(spec.latency.base_nanos, spec.latency.jitter_nanos);
    let mut config = KernelConfig::new(start, end, seed).with_latency(latency);

    let book_seed = spec
        .book_seed
        .as_ref()
        .map(|s| BookSeed::ladder(spec.fundamental.mean, s.half_spread, s.levels, s.qty));
    let exchange = config.add_agent(Box::new(ExchangeAgent::new(ExchangeConfig {
        hours,
        book_seed,
        audit: spec.audit,
    })));

    for _ in 0..spec.noise_agents {
        config.add_agent(Box::new(NoiseAgent::new(spec.noise.clone(), exchange, hours)));
    }
    let fundamental = FundamentalProcess::new(spec.fundamental.clone(), start, hash64(seed, FUNDAMENTAL_STREAM));
    for _ in 0..spec.value_agents {
        config.add_agent(Box::new(ValueAgent::new(spec.value.clone(), exchange, hours, fundamental.clone())));
    }
    for _ in 0..spec.momentum_agents {
        config.add_agent(Box::new(MomentumAgent::new(spec.momentum.clone(), exchange, hours)));
    }
    Ok(Market { config, exchange, hours })
}
