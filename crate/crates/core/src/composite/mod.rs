//! Behaviors built from other behaviors. Children live in [`BehaviorCell`]s
//! so each keeps its own scheduling status inside the composite.

mod fsm;
mod parallel;
mod sequential;

pub use fsm::{Fsm, FsmDefinition, Transition, FSM_EVENT};
pub use parallel::{Completion, Parallel};
pub use sequential::Sequential;

use serde_json::Value;

use crate::model::{AgentContext, BehaviorCell, BehaviorError, StepOutcome, WakeCondition};
use crate::trace::detail;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CompositeError {
    #[error("child {0} has already started and cannot be moved")]
    ReorderStartedChild(usize),
    #[error("new order is not a permutation of 0..{0}")]
    NotAPermutation(usize),
    #[error("invalid FSM: {0}")]
    InvalidFsm(String),
}

impl From<CompositeError> for BehaviorError {
    fn from(e: CompositeError) -> Self {
        BehaviorError::Invalid(e.to_string())
    }
}

/// Steps `cell` if it is runnable. A child that fails is retired and the
/// failure traced, so one broken child does not take down its siblings.
pub(crate) fn step_child(
    ctx: &mut AgentContext<'_>,
    index: usize,
    cell: &mut BehaviorCell,
) -> bool {
    if cell.is_done() || !cell.is_runnable(&ctx.wake_view()) {
        return false;
    }
    if let Err(e) = cell.step(ctx) {
        ctx.trace_custom(
            "child_error",
            detail([
                ("index", Value::from(index)),
                ("behavior", Value::from(cell.kind())),
                ("error", Value::from(e.to_string())),
            ]),
        );
    }
    true
}

/// The outcome a composite reports while waiting on several children.
pub(crate) fn wait_on(mut wakes: Vec<WakeCondition>) -> StepOutcome {
    if wakes.len() == 1 {
        StepOutcome::Blocked(wakes.pop().expect("one element"))
    } else {
        StepOutcome::Blocked(WakeCondition::AnyOf(wakes))
    }
}
