//! Identities, time, messages and the behavior lifecycle contract.

mod behavior;
mod context;
mod ids;
mod message;
mod shell;
mod wake;

pub use behavior::{
    decode_as, snapshot_of, Behavior, BehaviorCell, BehaviorClone, BehaviorError, CellStatus,
};
pub use context::{AgentContext, ContextParts, Effect, StateStore};
pub use ids::{AgentId, LocationId, VirtualTime};
pub use message::{type_matches, InboxEntry, Message, ANY_TYPE};
pub use shell::AgentShell;
pub use wake::{StepOutcome, WakeCondition, WakeView};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("message type tag must not be empty")]
    EmptyTypeTag,
}
