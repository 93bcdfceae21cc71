//! The adapter layer between behaviors and an agent platform, plus the
//! shipped deterministic simulator and a minimal mock used to show that
//! behaviors do not depend on a concrete platform.

mod latency;
mod mock;
mod sim;

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use latency::{LatencyModel, LinkLatency};
pub use mock::MockPlatform;
pub use sim::SimPlatform;

use crate::model::{
    AgentContext, AgentId, AgentShell, Behavior, BehaviorError, ContextParts, Effect, LocationId,
    Message, StateStore, StepOutcome, VirtualTime, WakeView,
};
use crate::registry::Registry;
use crate::trace::TraceLog;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PlatformError {
    #[error("location name `{0}` already in use")]
    DuplicateLocationName(String),
    #[error("unknown location {0}")]
    UnknownLocation(LocationId),
    #[error("unknown or terminated agent {0}")]
    UnknownAgent(AgentId),
    #[error("agent {0} is already migrating")]
    AlreadyMigrating(AgentId),
    #[error("tick budget of {max_ticks} exhausted (next event at {next})")]
    TickBudgetExceeded {
        max_ticks: VirtualTime,
        next: VirtualTime,
    },
    #[error("unsupported by this platform: {0}")]
    Unsupported(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    pub message_latency: LatencyModel,
    pub migration_latency: LatencyModel,
    pub max_ticks: VirtualTime,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            seed: 0,
            message_latency: LatencyModel::Fixed(1),
            migration_latency: LatencyModel::Fixed(1),
            max_ticks: VirtualTime(100_000),
        }
    }
}

impl SimConfig {
    pub fn fixed(message: u64, migration: u64) -> Self {
        SimConfig {
            message_latency: LatencyModel::Fixed(message),
            migration_latency: LatencyModel::Fixed(migration),
            ..SimConfig::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_max_ticks(mut self, max_ticks: u64) -> Self {
        self.max_ticks = VirtualTime(max_ticks);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunUntil {
    Tick(VirtualTime),
    Quiescent,
}

/// A record handed to the platform's data layer by an agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistedRecord {
    pub tick: VirtualTime,
    pub agent: AgentId,
    pub collection: String,
    pub record: Value,
}

/// What the framework needs from an agent platform. Behaviors never see this
/// trait; they only see [`AgentContext`].
pub trait PlatformAdapter {
    fn create_location(&mut self, name: &str) -> Result<LocationId, PlatformError>;
    fn location_id(&self, name: &str) -> Option<LocationId>;
    fn location_name(&self, id: LocationId) -> Option<&str>;

    fn spawn_agent(
        &mut self,
        at: LocationId,
        behaviors: Vec<Box<dyn Behavior>>,
    ) -> Result<AgentId, PlatformError> {
        self.spawn_agent_with_state(at, behaviors, StateStore::new())
    }

    fn spawn_agent_with_state(
        &mut self,
        at: LocationId,
        behaviors: Vec<Box<dyn Behavior>>,
        state: StateStore,
    ) -> Result<AgentId, PlatformError>;

    /// Injects a message. The sender must be live.
    fn send(&mut self, msg: Message) -> Result<(), PlatformError>;
    fn migrate(&mut self, agent: AgentId, dest: LocationId) -> Result<(), PlatformError>;
    fn attach_behavior(
        &mut self,
        target: AgentId,
        behavior: Box<dyn Behavior>,
    ) -> Result<(), PlatformError>;

    fn now(&self) -> VirtualTime;
    fn run(&mut self, until: RunUntil) -> Result<&TraceLog, PlatformError>;

    fn trace(&self) -> &TraceLog;
    fn registry(&self) -> &Registry;
    /// A resident agent; `None` when terminated or in transit.
    fn agent(&self, id: AgentId) -> Option<&AgentShell>;
    /// Live includes agents in transit.
    fn is_live(&self, id: AgentId) -> bool;
    fn live_agents(&self) -> Vec<AgentId>;
    fn persisted(&self) -> &[PersistedRecord];
}

/// Outcome of stepping one behavior slot of a resident agent.
pub(crate) struct CellStep {
    pub result: Result<StepOutcome, BehaviorError>,
    pub effects: Vec<Effect>,
    pub kind: String,
}

/// Steps behavior `index` of `shell` if it is runnable at `now`.
pub(crate) fn step_cell(
    shell: &mut AgentShell,
    index: usize,
    now: VirtualTime,
    delivery_mark: u64,
    next_agent_id: &mut u64,
    registry: &Registry,
) -> Option<CellStep> {
    let AgentShell {
        id,
        home,
        current,
        behaviors,
        state,
        inbox,
        conversations,
        arrived_at,
    } = shell;
    let cell = behaviors.get_mut(index)?;
    let view = WakeView {
        now,
        location: *current,
        migrating: false,
        inbox,
    };
    if !cell.is_runnable(&view) {
        return None;
    }
    let mut ctx = AgentContext::new(ContextParts {
        agent: *id,
        home: *home,
        location: *current,
        arrived_at: *arrived_at,
        now,
        delivery_mark,
        inbox,
        state,
        conversations,
        next_agent_id,
        registry,
    });
    let result = cell.step(&mut ctx);
    Some(CellStep {
        result,
        effects: ctx.into_effects(),
        kind: cell.kind().to_string(),
    })
}

/// Earliest tick at or after `from` at which some behavior of `shell` could
/// run, ignoring messages not yet delivered.
pub(crate) fn next_runnable_tick(shell: &AgentShell, from: VirtualTime) -> Option<VirtualTime> {
    let view = WakeView {
        now: from,
        location: shell.current,
        migrating: false,
        inbox: &shell.inbox,
    };
    shell
        .behaviors
        .iter()
        .filter(|c| !c.is_done())
        .filter_map(|c| {
            if c.is_runnable(&view) {
                Some(from)
            } else {
                c.next_timer().map(|t| t.max(from))
            }
        })
        .min()
}

/// Latencies below one tick are rounded up: an effect never lands in the
/// tick that produced it.
pub(crate) fn effective_latency(ticks: u64) -> u64 {
    ticks.max(1)
}
