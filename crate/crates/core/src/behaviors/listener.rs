use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::Mode;
use crate::model::{
    snapshot_of, AgentContext, Behavior, BehaviorError, StepOutcome, WakeCondition,
};
use crate::registry::ActionDescriptor;

/// Waits for messages matching a type filter and fires every registered
/// callback, in registration order, for each one. Matched messages are
/// consumed; others stay in the inbox.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Listener {
    filter: String,
    callbacks: Vec<ActionDescriptor>,
    mode: Mode,
    #[serde(default)]
    handled: u64,
}

impl Listener {
    pub const KIND: &'static str = "listener";

    pub fn new(
        filter: impl Into<String>,
        callbacks: Vec<ActionDescriptor>,
        mode: Mode,
    ) -> Result<Self, BehaviorError> {
        if callbacks.is_empty() {
            return Err(BehaviorError::Invalid(
                "listener needs at least one callback".into(),
            ));
        }
        Ok(Listener {
            filter: filter.into(),
            callbacks,
            mode,
            handled: 0,
        })
    }

    pub fn filter(&self) -> &str {
        &self.filter
    }

    pub fn handled(&self) -> u64 {
        self.handled
    }
}

impl Behavior for Listener {
    fn kind(&self) -> &str {
        Self::KIND
    }

    fn step(&mut self, ctx: &mut AgentContext<'_>) -> Result<StepOutcome, BehaviorError> {
        let filter = self.filter.clone();
        let messages = match self.mode {
            Mode::OneShot => ctx
                .take_message(|m| m.matches(&filter))
                .into_iter()
                .collect(),
            Mode::Cyclic => ctx.take_messages(|m| m.matches(&filter)),
        };
        for msg in &messages {
            self.handled += 1;
            for callback in &self.callbacks {
                ctx.run_action_traced(callback, Some(msg));
            }
        }
        if self.mode == Mode::OneShot && !messages.is_empty() {
            return Ok(StepOutcome::Done);
        }
        Ok(StepOutcome::Blocked(WakeCondition::OnMessage(
            self.filter.clone(),
        )))
    }

    fn snapshot(&self) -> Value {
        snapshot_of(self)
    }
}
