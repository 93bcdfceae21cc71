use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::model::{
    snapshot_of, AgentContext, Behavior, BehaviorError, StepOutcome, VirtualTime, WakeCondition,
};
use crate::registry::{ActionDescriptor, PredicateDescriptor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    OneShot,
    Cyclic,
}

/// Periodically evaluates a trigger and runs a handler when it holds.
///
/// Checks happen on the grid `start + k * period` for k >= 1, where `start`
/// is the tick of the first step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observer {
    period: u64,
    trigger: PredicateDescriptor,
    handler: ActionDescriptor,
    mode: Mode,
    /// Message type that cancels a cyclic observer.
    #[serde(default)]
    cancel_on: Option<String>,
    #[serde(default)]
    next_check: Option<VirtualTime>,
    #[serde(default)]
    fired: u64,
}

impl Observer {
    pub const KIND: &'static str = "observer";

    pub fn new(
        period: u64,
        trigger: PredicateDescriptor,
        handler: ActionDescriptor,
        mode: Mode,
    ) -> Result<Self, BehaviorError> {
        if period == 0 {
            return Err(BehaviorError::Invalid(
                "observer period must be at least 1".into(),
            ));
        }
        Ok(Observer {
            period,
            trigger,
            handler,
            mode,
            cancel_on: None,
            next_check: None,
            fired: 0,
        })
    }

    pub fn cancel_on(mut self, type_tag: impl Into<String>) -> Self {
        self.cancel_on = Some(type_tag.into());
        self
    }

    pub fn period(&self) -> u64 {
        self.period
    }

    pub fn next_check(&self) -> Option<VirtualTime> {
        self.next_check
    }

    pub fn fired(&self) -> u64 {
        self.fired
    }

    fn wait(&self, next: VirtualTime) -> StepOutcome {
        let timer = WakeCondition::AtTime(next);
        match &self.cancel_on {
            Some(tag) => StepOutcome::Blocked(WakeCondition::AnyOf(vec![
                timer,
                WakeCondition::OnMessage(tag.clone()),
            ])),
            None => StepOutcome::Blocked(timer),
        }
    }
}

impl Behavior for Observer {
    fn kind(&self) -> &str {
        Self::KIND
    }

    fn step(&mut self, ctx: &mut AgentContext<'_>) -> Result<StepOutcome, BehaviorError> {
        let now = ctx.now();
        let Some(mut next) = self.next_check else {
            let first = now + self.period;
            self.next_check = Some(first);
            return Ok(self.wait(first));
        };
        if let Some(tag) = &self.cancel_on {
            if ctx.take_message(|m| m.matches(tag)).is_some() {
                return Ok(StepOutcome::Done);
            }
        }
        if now >= next {
            let registry = ctx.registry();
            if registry.eval_predicate(ctx, &self.trigger)? {
                self.fired += 1;
                ctx.run_action_traced(&self.handler, None);
                if self.mode == Mode::OneShot {
                    return Ok(StepOutcome::Done);
                }
            }
            while next <= now {
                next = next + self.period;
            }
            self.next_check = Some(next);
        }
        Ok(self.wait(next))
    }

    fn snapshot(&self) -> Value {
        snapshot_of(self)
    }
}
