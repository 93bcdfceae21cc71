use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::CompositeError;
use crate::model::{
    snapshot_of, AgentContext, Behavior, BehaviorError, StepOutcome, WakeCondition,
};
use crate::registry::ActionDescriptor;
use crate::trace::detail;

/// Type tag of messages carrying an FSM event label as their payload.
pub const FSM_EVENT: &str = "FSM_EVENT";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transition {
    pub from: String,
    pub event: String,
    pub to: String,
}

/// States with their entry activity, labelled transitions, a start state and
/// terminal states.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FsmDefinition {
    pub states: BTreeMap<String, ActionDescriptor>,
    pub transitions: Vec<Transition>,
    pub start: String,
    pub terminals: BTreeSet<String>,
}

impl FsmDefinition {
    pub fn validate(&self) -> Result<(), CompositeError> {
        let bad = |msg: String| Err(CompositeError::InvalidFsm(msg));
        if !self.states.contains_key(&self.start) {
            return bad(format!("start state `{}` is not defined", self.start));
        }
        if let Some(t) = self
            .terminals
            .iter()
            .find(|t| !self.states.contains_key(*t))
        {
            return bad(format!("terminal state `{t}` is not defined"));
        }
        let mut seen = BTreeSet::new();
        for (i, t) in self.transitions.iter().enumerate() {
            if t.event.is_empty() {
                return bad(format!("transition {i} has an empty event label"));
            }
            for end in [&t.from, &t.to] {
                if !self.states.contains_key(end) {
                    return bad(format!("transition {i} refers to unknown state `{end}`"));
                }
            }
            if !seen.insert((&t.from, &t.event)) {
                return bad(format!(
                    "more than one transition from `{}` on `{}`",
                    t.from, t.event
                ));
            }
        }
        Ok(())
    }

    pub fn target(&self, state: &str, event: &str) -> Option<&str> {
        self.transitions
            .iter()
            .find(|t| t.from == state && t.event == event)
            .map(|t| t.to.as_str())
    }

    pub fn is_terminal(&self, state: &str) -> bool {
        self.terminals.contains(state)
    }
}

/// Finite state machine. Entering a state runs its activity once; a
/// non-empty UTF-8 output of the activity is taken as the next event label.
/// Otherwise events arrive as [`FSM_EVENT`] messages. Events without a
/// transition are traced and dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fsm {
    definition: FsmDefinition,
    #[serde(default)]
    current: Option<String>,
    #[serde(default)]
    pending: Option<String>,
    #[serde(default)]
    path: Vec<String>,
}

impl Fsm {
    pub const KIND: &'static str = "fsm";

    pub fn new(definition: FsmDefinition) -> Result<Self, CompositeError> {
        definition.validate()?;
        Ok(Fsm {
            definition,
            current: None,
            pending: None,
            path: Vec::new(),
        })
    }

    pub fn definition(&self) -> &FsmDefinition {
        &self.definition
    }

    pub fn current(&self) -> Option<&str> {
        self.current.as_deref()
    }

    /// States entered so far, in order.
    pub fn path(&self) -> &[String] {
        &self.path
    }

    fn enter(&mut self, ctx: &mut AgentContext<'_>, state: String) {
        ctx.trace_custom(
            "fsm_enter",
            detail([("state", Value::from(state.as_str()))]),
        );
        let activity = self.definition.states[&state].clone();
        self.path.push(state.clone());
        self.current = Some(state);
        let label = ctx
            .run_action_traced(&activity, None)
            .and_then(|out| String::from_utf8(out).ok())
            .filter(|l| !l.is_empty());
        self.pending = label;
    }

    fn finished(&self) -> bool {
        self.current
            .as_deref()
            .is_some_and(|s| self.definition.is_terminal(s))
    }

    fn handle(&mut self, ctx: &mut AgentContext<'_>, event: String) {
        let state = self.current.clone().expect("started");
        match self.definition.target(&state, &event) {
            Some(next) => {
                let next = next.to_string();
                self.enter(ctx, next);
            }
            None => ctx.trace_custom(
                "fsm_undefined_transition",
                detail([
                    ("state", Value::from(state.as_str())),
                    ("label", Value::from(event.as_str())),
                    (
                        "error",
                        Value::from(format!("no transition from `{state}` on `{event}`")),
                    ),
                ]),
            ),
        }
    }
}

impl Behavior for Fsm {
    fn kind(&self) -> &str {
        Self::KIND
    }

    fn step(&mut self, ctx: &mut AgentContext<'_>) -> Result<StepOutcome, BehaviorError> {
        if self.current.is_none() {
            let start = self.definition.start.clone();
            self.enter(ctx, start);
        } else if let Some(label) = self.pending.take() {
            self.handle(ctx, label);
        }
        loop {
            if self.finished() {
                return Ok(StepOutcome::Done);
            }
            if self.pending.is_some() {
                return Ok(StepOutcome::Running);
            }
            let Some(msg) = ctx.take_message(|m| m.type_tag == FSM_EVENT) else {
                break;
            };
            let label = String::from_utf8_lossy(&msg.payload).into_owned();
            self.handle(ctx, label);
        }
        Ok(StepOutcome::Blocked(WakeCondition::OnMessage(
            FSM_EVENT.into(),
        )))
    }

    fn snapshot(&self) -> Value {
        snapshot_of(self)
    }
}
