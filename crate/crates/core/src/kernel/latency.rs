use std::collections::BTreeMap;

use rand::Rng;

use super::AgentId;

/// Message latency: a deterministic per-pair base plus uniform jitter drawn
/// from the kernel generator. Wakeups never pass through here.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LatencyModel {
    default_base_nanos: u64,
    pair_base_nanos: BTreeMap<(AgentId, AgentId), u64>,
    jitter_nanos_max: u64,
}

impl LatencyModel {
    /// Zero base, zero jitter.
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn uniform(base_nanos: u64, jitter_nanos_max: u64) -> Self {
        LatencyModel {
            default_base_nanos: base_nanos,
            pair_base_nanos: BTreeMap::new(),
            jitter_nanos_max,
        }
    }

    pub fn with_pair(mut self, sender: AgentId, recipient: AgentId, base_nanos: u64) -> Self {
        self.pair_base_nanos.insert((sender, recipient), base_nanos);
        self
    }

    pub fn base_nanos(&self, sender: AgentId, recipient: AgentId) -> u64 {
        self.pair_base_nanos
            .get(&(sender, recipient))
            .copied()
            .unwrap_or(self.default_base_nanos)
    }

    pub fn jitter_nanos_max(&self) -> u64 {
        self.jitter_nanos_max
    }

    /// Base plus a jitter draw in `[0, jitter_nanos_max]`. The generator is
    /// untouched when jitter is disabled.
    pub fn sample<R: Rng + ?Sized>(&self, sender: AgentId, recipient: AgentId, rng: &mut R) -> u64 {
        let base = self.base_nanos(sender, recipient);
        let jitter = if self.jitter_nanos_max == 0 {
            0
        } else {
            rng.random_range(0..=self.jitter_nanos_max)
        };
        base.saturating_add(jitter)
    }
}
