use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::time::SimTime;

/// Dense index into a kernel's agent roster.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub u32);

impl AgentId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "agent#{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Payload<M> {
    /// Self-addressed; delivered at the requested time with no latency.
    Wakeup,
    Body(M),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Message<M> {
    pub sender: AgentId,
    pub recipient: AgentId,
    pub sent_at: SimTime,
    pub deliver_at: SimTime,
    pub payload: Payload<M>,
}

impl<M> Message<M> {
    pub fn wakeup(agent: AgentId, now: SimTime, at: SimTime) -> Self {
        Message {
            sender: agent,
            recipient: agent,
            sent_at: now,
            deliver_at: at,
            payload: Payload::Wakeup,
        }
    }

    pub fn body(sender: AgentId, recipient: AgentId, sent_at: SimTime, body: M) -> Self {
        Message {
            sender,
            recipient,
            sent_at,
            deliver_at: sent_at,
            payload: Payload::Body(body),
        }
    }

    pub fn is_wakeup(&self) -> bool {
        matches!(self.payload, Payload::Wakeup)
    }
}

/// Queue key, ordered by `(deliver_at, seq)`. The message itself sits in
/// the kernel's slab at `slot` so heap moves stay small.
#[derive(Clone, Copy, Debug)]
pub(crate) struct QueueEntry {
    pub deliver_at: SimTime,
    pub seq: u64,
    pub slot: usize,
}

impl QueueEntry {
    fn key(&self) -> (SimTime, u64) {
        (self.deliver_at, self.seq)
    }
}

impl PartialEq for QueueEntry {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for QueueEntry {}

impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// Reversed so `BinaryHeap` pops the earliest entry first.
impl Ord for QueueEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.key().cmp(&self.key())
    }
}
