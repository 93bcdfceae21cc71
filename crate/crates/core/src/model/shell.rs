use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{
    AgentId, BehaviorCell, BehaviorError, InboxEntry, LocationId, StateStore, VirtualTime,
};
use crate::registry::Registry;

/// Identity, placement, behaviors, state and inbox of one agent. The whole
/// shell serializes to bytes, which is how agents migrate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentShell {
    pub id: AgentId,
    pub home: LocationId,
    pub current: LocationId,
    pub behaviors: Vec<BehaviorCell>,
    pub state: StateStore,
    pub inbox: VecDeque<InboxEntry>,
    /// Next conversation counter value.
    pub conversations: u64,
    pub arrived_at: VirtualTime,
}

impl AgentShell {
    pub fn new(id: AgentId, at: LocationId, now: VirtualTime) -> Self {
        AgentShell {
            id,
            home: at,
            current: at,
            behaviors: Vec::new(),
            state: StateStore::new(),
            inbox: VecDeque::new(),
            conversations: 0,
            arrived_at: now,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("agent shells serialize to JSON")
    }

    /// Decodes a shell. Behaviors come back as images; call
    /// [`AgentShell::resolve`] to bind them eagerly.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, serde_json::Error> {
        serde_json::from_slice(bytes)
    }

    pub fn resolve(&mut self, registry: &Registry) -> Result<(), BehaviorError> {
        for cell in &mut self.behaviors {
            cell.resolve(registry)?;
        }
        Ok(())
    }

    pub fn all_done(&self) -> bool {
        self.behaviors.iter().all(BehaviorCell::is_done)
    }

    pub fn live_behaviors(&self) -> usize {
        self.behaviors.iter().filter(|c| !c.is_done()).count()
    }
}
