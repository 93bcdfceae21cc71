use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::model::{snapshot_of, AgentContext, Behavior, BehaviorError, StepOutcome};
use crate::registry::ActionDescriptor;

/// One-shot behavior: runs its action on the first step and is done.
/// A failing action is traced, and the task still finishes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub action: ActionDescriptor,
}

impl Task {
    pub const KIND: &'static str = "task";

    pub fn new(action: ActionDescriptor) -> Self {
        Task { action }
    }

    pub fn boxed(action: ActionDescriptor) -> Box<dyn Behavior> {
        Box::new(Task::new(action))
    }
}

impl Behavior for Task {
    fn kind(&self) -> &str {
        Self::KIND
    }

    fn step(&mut self, ctx: &mut AgentContext<'_>) -> Result<StepOutcome, BehaviorError> {
        ctx.run_action_traced(&self.action, None);
        Ok(StepOutcome::Done)
    }

    fn snapshot(&self) -> Value {
        snapshot_of(self)
    }
}
