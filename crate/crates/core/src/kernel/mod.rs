//! Discrete-event kernel with interruptible run phases.
//!
//! A [`Kernel`] owns the simulated clock and a priority queue of messages.
//! Agents only ever interact through messages routed by the kernel. Instead
//! of running the whole simulation in one call, the run is split into three
//! phases:
//!
//! - [`Kernel::build`] calls `kernel_initializing` then `kernel_starting` on
//!   every agent in roster order.
//! - [`Kernel::run_until_interrupt`] processes the queue until an agent calls
//!   [`Context::interrupt`] or the simulation ends. An optional action is
//!   handed to the designated gym agent before any queued message.
//! - [`Kernel::terminate`] calls `kernel_stopping` then `kernel_terminating`
//!   and returns the collected logs.
//!
//! Running build, run and terminate back to back with no interrupting agent
//! reproduces a classic uninterrupted simulation.

mod latency;
mod message;

use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use latency::LatencyModel;
pub use message::{AgentId, Message, Payload};
use message::QueueEntry;

use crate::raw_state::RawState;
use crate::time::SimTime;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("cannot route message to unknown agent {0}")]
    UnknownAgent(AgentId),
    #[error("wakeup requested at {at} but the clock is already at {now}")]
    WakeupInPast { at: SimTime, now: SimTime },
    #[error("kernel state error: {0}")]
    State(&'static str),
    #[error("{agent} failed: {reason}")]
    Agent { agent: AgentId, reason: String },
}

pub type Result<T, E = KernelError> = std::result::Result<T, E>;

/// A participant in the simulation. Every hook gets a [`Context`] scoped to
/// the agent, through which it reads the clock and sends messages.
///
/// `A` is the type of action that can be injected into the gym agent between
/// run phases; agents that never act as gym agent ignore it.
pub trait Agent<M, A = ()>: Send {
    fn name(&self) -> &str;

    fn kernel_initializing(&mut self, _ctx: &mut Context<'_, M>) -> Result<()> {
        Ok(())
    }

    /// Runs once every agent has been initialized.
    fn kernel_starting(&mut self, _ctx: &mut Context<'_, M>) -> Result<()> {
        Ok(())
    }

    fn receive_message(&mut self, ctx: &mut Context<'_, M>, sender: AgentId, body: M) -> Result<()>;

    fn wakeup(&mut self, _ctx: &mut Context<'_, M>) -> Result<()> {
        Ok(())
    }

    /// Executes an action injected from outside the simulation.
    fn apply_action(&mut self, ctx: &mut Context<'_, M>, _action: A) -> Result<()> {
        Err(KernelError::Agent {
            agent: ctx.id(),
            reason: "agent does not accept injected actions".into(),
        })
    }

    fn kernel_stopping(&mut self, _ctx: &mut Context<'_, M>) -> Result<()> {
        Ok(())
    }

    fn kernel_terminating(&mut self, _ctx: &mut Context<'_, M>) -> Result<()> {
        Ok(())
    }
}

pub type BoxedAgent<M, A> = Box<dyn Agent<M, A>>;

struct RosterEntry<M, A> {
    agent: BoxedAgent<M, A>,
    computation_delay_nanos: u64,
}

/// Inputs to [`Kernel::build`].
pub struct KernelConfig<M, A = ()> {
    pub start_time: SimTime,
    pub end_time: SimTime,
    pub seed: u64,
    pub latency: LatencyModel,
    gym_agent: Option<AgentId>,
    roster: Vec<RosterEntry<M, A>>,
}

impl<M, A> KernelConfig<M, A> {
    pub fn new(start_time: SimTime, end_time: SimTime, seed: u64) -> Self {
        KernelConfig {
            start_time,
            end_time,
            seed,
            latency: LatencyModel::zero(),
            gym_agent: None,
            roster: Vec::new(),
        }
    }

    pub fn with_latency(mut self, latency: LatencyModel) -> Self {
        self.latency = latency;
        self
    }

    /// Id the next added agent will receive.
    pub fn next_id(&self) -> AgentId {
        AgentId(self.roster.len() as u32)
    }

    pub fn add_agent(&mut self, agent: BoxedAgent<M, A>) -> AgentId {
        self.add_agent_with_delay(agent, 0)
    }

    /// Messages sent by this agent are stamped `now + delay`.
    pub fn add_agent_with_delay(&mut self, agent: BoxedAgent<M, A>, computation_delay_nanos: u64) -> AgentId {
        let id = self.next_id();
        self.roster.push(RosterEntry {
            agent,
            computation_delay_nanos,
        });
        id
    }

    /// Designates the agent that receives injected actions.
    pub fn set_gym_agent(&mut self, id: AgentId) {
        self.gym_agent = Some(id);
    }

    pub fn gym_agent(&self) -> Option<AgentId> {
        self.gym_agent
    }

    pub fn roster_len(&self) -> usize {
        self.roster.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunStatus {
    Interrupted,
    Done,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub status: RunStatus,
    pub now: SimTime,
    /// The interrupting agent's state; on `Done`, the last state any agent
    /// interrupted with, if there was one.
    pub raw_state: Option<RawState>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub at: SimTime,
    pub kind: String,
    pub data: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentLog {
    pub agent: AgentId,
    pub name: String,
    pub records: Vec<LogRecord>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelStats {
    pub routed: u64,
    pub delivered: u64,
    pub wakeups_delivered: u64,
    pub still_queued: u64,
}

/// Everything the kernel collected over a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub agents: Vec<AgentLog>,
    pub interruptions: Vec<SimTime>,
    pub stats: KernelStats,
}

impl RunLog {
    pub fn agent(&self, id: AgentId) -> Option<&AgentLog> {
        self.agents.get(id.index())
    }

    pub fn records_of_kind<'a>(&'a self, kind: &'a str) -> impl Iterator<Item = (&'a AgentLog, &'a LogRecord)> + 'a {
        self.agents
            .iter()
            .flat_map(move |log| log.records.iter().filter(move |r| r.kind == kind).map(move |r| (log, r)))
    }

    /// One JSON document per line; identical runs give identical bytes.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for log in &self.agents {
            for record in &log.records {
                let line = serde_json::json!({
                    "agent": log.agent,
                    "at": record.at,
                    "kind": record.kind,
                    "data": record.data,
                });
                out.push_str(&line.to_string());
                out.push('\n');
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Phase {
    Running,
    Done,
    Terminated,
}

struct KernelCore<M> {
    clock: SimTime,
    start_time: SimTime,
    end_time: SimTime,
    queue: BinaryHeap<QueueEntry>,
    slab: Vec<Option<Message<M>>>,
    free_slots: Vec<usize>,
    next_seq: u64,
    rng: ChaCha8Rng,
    latency: LatencyModel,
    /// Latest delivery time per (sender, recipient), row-major by sender,
    /// so jitter never reorders what an agent sends on one channel.
    channels: Vec<SimTime>,
    agent_seeds: Vec<u64>,
    computation_delays: Vec<u64>,
    interrupt: Option<RawState>,
    logs: Vec<Vec<LogRecord>>,
    stats: KernelStats,
}

impl<M> KernelCore<M> {
    fn agent_count(&self) -> usize {
        self.agent_seeds.len()
    }

    fn check_agent(&self, id: AgentId) -> Result<()> {
        if id.index() < self.agent_count() {
            Ok(())
        } else {
            Err(KernelError::UnknownAgent(id))
        }
    }

    fn enqueue(&mut self, message: Message<M>) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.stats.routed += 1;
        let deliver_at = message.deliver_at;
        let slot = match self.free_slots.pop() {
            Some(slot) => {
                self.slab[slot] = Some(message);
                slot
            }
            None => {
                self.slab.push(Some(message));
                self.slab.len() - 1
            }
        };
        self.queue.push(QueueEntry { deliver_at, seq, slot });
    }

    fn route(&mut self, mut message: Message<M>, fifo: bool) -> Result<()> {
        self.check_agent(message.sender)?;
        self.check_agent(message.recipient)?;
        if !message.is_wakeup() {
            let latency = self.latency.sample(message.sender, message.recipient, &mut self.rng);
            message.deliver_at = SimTime::from_nanos(message.sent_at.nanos().saturating_add(latency));
            if fifo {
                let n = self.agent_count();
                let last = &mut self.channels[message.sender.0 as usize * n + message.recipient.0 as usize];
                message.deliver_at = message.deliver_at.max(*last);
                *last = message.deliver_at;
            }
        }
        if message.deliver_at < self.clock {
            message.deliver_at = self.clock;
        }
        self.enqueue(message);
        Ok(())
    }
}

/// An agent's window onto the kernel during one of its hooks.
pub struct Context<'k, M> {
    core: &'k mut KernelCore<M>,
    me: AgentId,
}

impl<M> Context<'_, M> {
    pub fn now(&self) -> SimTime {
        self.core.clock
    }

    pub fn id(&self) -> AgentId {
        self.me
    }

    /// Seed reserved for this agent, drawn from the kernel seed at build time.
    pub fn agent_seed(&self) -> u64 {
        self.core.agent_seeds[self.me.index()]
    }

    pub fn start_time(&self) -> SimTime {
        self.core.start_time
    }

    pub fn end_time(&self) -> SimTime {
        self.core.end_time
    }

    pub fn send(&mut self, recipient: AgentId, body: M) -> Result<()> {
        let delay = self.core.computation_delays[self.me.index()];
        let sent_at = SimTime::from_nanos(self.now().nanos().saturating_add(delay));
        self.core.route(Message::body(self.me, recipient, sent_at, body), true)
    }

    pub fn schedule_wakeup(&mut self, at: SimTime) -> Result<()> {
        let now = self.now();
        if at < now {
            return Err(KernelError::WakeupInPast { at, now });
        }
        self.core.enqueue(Message::wakeup(self.me, now, at));
        Ok(())
    }

    /// Asks the kernel to pause once the current hook returns.
    pub fn interrupt(&mut self, raw_state: RawState) {
        self.core.interrupt = Some(raw_state);
    }

    pub fn log(&mut self, kind: impl Into<String>, data: serde_json::Value) {
        let at = self.now();
        self.core.logs[self.me.index()].push(LogRecord {
            at,
            kind: kind.into(),
            data,
        });
    }
}

pub struct Kernel<M, A = ()> {
    agents: Vec<BoxedAgent<M, A>>,
    core: KernelCore<M>,
    gym_agent: Option<AgentId>,
    phase: Phase,
    last_raw_state: Option<RawState>,
    interruptions: Vec<SimTime>,
}

impl<M, A> Kernel<M, A> {
    /// Sets the clock to the start time and runs the initializing and
    /// starting hooks of every agent in roster order.
    pub fn build(config: KernelConfig<M, A>) -> Result<Self> {
        if config.roster.is_empty() {
            return Err(KernelError::Config("agent roster is empty".into()));
        }
        if config.start_time >= config.end_time {
            return Err(KernelError::Config(format!(
                "start time {} is not before end time {}",
                config.start_time, config.end_time
            )));
        }
        if let Some(gym) = config.gym_agent {
            if gym.index() >= config.roster.len() {
                return Err(KernelError::UnknownAgent(gym));
            }
        }

        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let agent_seeds: Vec<u64> = config.roster.iter().map(|_| rng.random()).collect();
        let n = config.roster.len();
        let (agents, computation_delays) = config
            .roster
            .into_iter()
            .map(|e| (e.agent, e.computation_delay_nanos))
            .unzip();

        let mut kernel = Kernel {
            agents,
            core: KernelCore {
                clock: config.start_time,
                start_time: config.start_time,
                end_time: config.end_time,
                queue: BinaryHeap::new(),
                slab: Vec::new(),
                free_slots: Vec::new(),
                next_seq: 0,
                rng,
                latency: config.latency,
                channels: vec![SimTime::ZERO; n * n],
                agent_seeds,
                computation_delays,
                interrupt: None,
                logs: vec![Vec::new(); n],
                stats: KernelStats::default(),
            },
            gym_agent: config.gym_agent,
            phase: Phase::Running,
            last_raw_state: None,
            interruptions: Vec::new(),
        };
        for i in 0..n {
            let mut ctx = Context { core: &mut kernel.core, me: AgentId(i as u32) };
            kernel.agents[i].kernel_initializing(&mut ctx)?;
        }
        for i in 0..n {
            let mut ctx = Context { core: &mut kernel.core, me: AgentId(i as u32) };
            kernel.agents[i].kernel_starting(&mut ctx)?;
        }
        Ok(kernel)
    }

    pub fn now(&self) -> SimTime {
        self.core.clock
    }

    pub fn queue_len(&self) -> usize {
        self.core.queue.len()
    }

    pub fn is_done(&self) -> bool {
        self.phase != Phase::Running
    }

    pub fn stats(&self) -> KernelStats {
        self.core.stats
    }

    /// Queued `(deliver_at, sender, recipient)` triples in delivery order.
    pub fn pending(&self) -> Vec<(SimTime, AgentId, AgentId)> {
        let mut entries: Vec<_> = self.core.queue.iter().collect();
        entries.sort_by_key(|e| (e.deliver_at, e.seq));
        entries
            .into_iter()
            .map(|e| {
                let m = self.core.slab[e.slot].as_ref().expect("queued message");
                (e.deliver_at, m.sender, m.recipient)
            })
            .collect()
    }

    /// Routes a message as if sent by `message.sender` at `message.sent_at`.
    pub fn route_message(&mut self, message: Message<M>) -> Result<()> {
        if self.phase == Phase::Terminated {
            return Err(KernelError::State("kernel has been terminated"));
        }
        self.core.route(message, false)
    }

    pub fn schedule_wakeup(&mut self, agent: AgentId, at: SimTime) -> Result<()> {
        if self.phase == Phase::Terminated {
            return Err(KernelError::State("kernel has been terminated"));
        }
        self.core.check_agent(agent)?;
        Context { core: &mut self.core, me: agent }.schedule_wakeup(at)
    }

    /// Processes messages until an agent interrupts or the queue is exhausted
    /// up to the end time.
    pub fn run_until_interrupt(&mut self, injected_action: Option<A>) -> Result<RunResult> {
        match self.phase {
            Phase::Running => {}
            Phase::Done => return Err(KernelError::State("simulation already finished")),
            Phase::Terminated => return Err(KernelError::State("kernel has been terminated")),
        }

        if let Some(action) = injected_action {
            let gym = self
                .gym_agent
                .ok_or(KernelError::State("no gym agent configured to receive the action"))?;
            let mut ctx = Context { core: &mut self.core, me: gym };
            self.agents[gym.index()].apply_action(&mut ctx, action)?;
            if let Some(result) = self.take_interrupt() {
                return Ok(result);
            }
        } else if let Some(result) = self.take_interrupt() {
            // Raised during the starting hooks.
            return Ok(result);
        }

        while let Some(top) = self.core.queue.peek() {
            if top.deliver_at > self.core.end_time {
                break;
            }
            let entry = self.core.queue.pop().expect("peeked entry");
            debug_assert!(entry.deliver_at >= self.core.clock);
            self.core.clock = entry.deliver_at;
            self.core.stats.delivered += 1;
            let message = self.core.slab[entry.slot].take().expect("queued message");
            self.core.free_slots.push(entry.slot);
            let recipient = message.recipient;
            let mut ctx = Context { core: &mut self.core, me: recipient };
            let agent = &mut self.agents[recipient.index()];
            match message.payload {
                Payload::Wakeup => {
                    ctx.core.stats.wakeups_delivered += 1;
                    agent.wakeup(&mut ctx)?;
                }
                Payload::Body(body) => agent.receive_message(&mut ctx, message.sender, body)?,
            }
            if let Some(result) = self.take_interrupt() {
                return Ok(result);
            }
        }

        self.phase = Phase::Done;
        Ok(RunResult {
            status: RunStatus::Done,
            now: self.core.clock,
            raw_state: self.last_raw_state.clone(),
        })
    }

    fn take_interrupt(&mut self) -> Option<RunResult> {
        let raw = self.core.interrupt.take()?;
        self.last_raw_state = Some(raw.clone());
        self.interruptions.push(self.core.clock);
        Some(RunResult {
            status: RunStatus::Interrupted,
            now: self.core.clock,
            raw_state: Some(raw),
        })
    }

    /// Calls the stopping then terminating hooks and hands back the logs.
    pub fn terminate(&mut self) -> Result<RunLog> {
        if self.phase == Phase::Terminated {
            return Err(KernelError::State("kernel already terminated"));
        }
        let n = self.agents.len();
        for i in 0..n {
            let mut ctx = Context { core: &mut self.core, me: AgentId(i as u32) };
            self.agents[i].kernel_stopping(&mut ctx)?;
        }
        for i in 0..n {
            let mut ctx = Context { core: &mut self.core, me: AgentId(i as u32) };
            self.agents[i].kernel_terminating(&mut ctx)?;
        }
        self.phase = Phase::Terminated;
        self.core.stats.still_queued = self.core.queue.len() as u64;

        let logs = std::mem::take(&mut self.core.logs);
        let agents = logs
            .into_iter()
            .enumerate()
            .map(|(i, records)| AgentLog {
                agent: AgentId(i as u32),
                name: self.agents[i].name().to_owned(),
                records,
            })
            .collect();
        Ok(RunLog {
            agents,
            interruptions: std::mem::take(&mut self.interruptions),
            stats: self.core.stats,
        })
    }
}
