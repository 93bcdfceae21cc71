use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{step_child, wait_on};
use crate::model::{snapshot_of, AgentContext, Behavior, BehaviorCell, BehaviorError, StepOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Completion {
    #[default]
    All,
    Any,
}

/// Interleaves its children: every step gives each runnable child exactly
/// one step, in list order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parallel {
    children: Vec<BehaviorCell>,
    #[serde(default)]
    completion: Completion,
}

impl Parallel {
    pub const KIND: &'static str = "parallel";

    pub fn new(children: Vec<Box<dyn Behavior>>, completion: Completion) -> Self {
        Parallel {
            children: children.into_iter().map(BehaviorCell::new).collect(),
            completion,
        }
    }

    pub fn all(children: Vec<Box<dyn Behavior>>) -> Self {
        Parallel::new(children, Completion::All)
    }

    pub fn children(&self) -> &[BehaviorCell] {
        &self.children
    }

    pub fn completion(&self) -> Completion {
        self.completion
    }
}

impl Behavior for Parallel {
    fn kind(&self) -> &str {
        Self::KIND
    }

    fn step(&mut self, ctx: &mut AgentContext<'_>) -> Result<StepOutcome, BehaviorError> {
        for (i, cell) in self.children.iter_mut().enumerate() {
            step_child(ctx, i, cell);
        }
        let finished = match self.completion {
            Completion::All => self.children.iter().all(BehaviorCell::is_done),
            Completion::Any => {
                self.children.is_empty() || self.children.iter().any(BehaviorCell::is_done)
            }
        };
        if finished {
            return Ok(StepOutcome::Done);
        }
        Ok(wait_on(
            self.children
                .iter()
                .filter_map(BehaviorCell::pending_wake)
                .collect(),
        ))
    }

    fn snapshot(&self) -> Value {
        snapshot_of(self)
    }
}
