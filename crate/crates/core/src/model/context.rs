use std::collections::{BTreeMap, VecDeque};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use super::{
    AgentId, Behavior, InboxEntry, LocationId, Message, ModelError, VirtualTime, WakeView,
};
use crate::registry::{ActionDescriptor, ActionError, ActionInput, Registry};
use crate::trace::{Detail, TraceKind};

/// Per-agent key/value store; travels with the agent.
pub type StateStore = BTreeMap<String, Value>;

/// A side effect requested during a step. The platform applies the list in
/// order once the step returns.
#[derive(Debug)]
pub enum Effect {
    Send(Message),
    Spawn {
        id: AgentId,
        at: LocationId,
        behaviors: Vec<Box<dyn Behavior>>,
        state: StateStore,
    },
    Attach {
        target: AgentId,
        behavior: Box<dyn Behavior>,
    },
    Trace {
        kind: TraceKind,
        detail: Detail,
    },
    Persist {
        collection: String,
        record: Value,
    },
    Migrate(LocationId),
    /// Terminate the owning agent after this step.
    Stop,
}

/// Everything a platform lends to a behavior for one step.
pub struct ContextParts<'a> {
    pub agent: AgentId,
    pub home: LocationId,
    pub location: LocationId,
    pub arrived_at: VirtualTime,
    pub now: VirtualTime,
    pub delivery_mark: u64,
    pub inbox: &'a mut VecDeque<InboxEntry>,
    pub state: &'a mut StateStore,
    pub conversations: &'a mut u64,
    pub next_agent_id: &'a mut u64,
    pub registry: &'a Registry,
}

/// The view a behavior has of its agent and the world during one step.
pub struct AgentContext<'a> {
    parts: ContextParts<'a>,
    effects: Vec<Effect>,
}

impl<'a> AgentContext<'a> {
    pub fn new(parts: ContextParts<'a>) -> Self {
        AgentContext {
            parts,
            effects: Vec::new(),
        }
    }

    pub fn agent(&self) -> AgentId {
        self.parts.agent
    }

    pub fn home(&self) -> LocationId {
        self.parts.home
    }

    pub fn location(&self) -> LocationId {
        self.parts.location
    }

    /// Tick at which the agent last arrived at its current location.
    pub fn arrived_at(&self) -> VirtualTime {
        self.parts.arrived_at
    }

    pub fn now(&self) -> VirtualTime {
        self.parts.now
    }

    pub fn delivery_mark(&self) -> u64 {
        self.parts.delivery_mark
    }

    pub fn registry(&self) -> &'a Registry {
        self.parts.registry
    }

    pub fn wake_view(&self) -> WakeView<'_> {
        WakeView {
            now: self.parts.now,
            location: self.parts.location,
            migrating: false,
            inbox: self.parts.inbox,
        }
    }

    pub fn inbox(&self) -> &VecDeque<InboxEntry> {
        self.parts.inbox
    }

    pub fn has_message(&self, pred: impl Fn(&Message) -> bool) -> bool {
        self.parts.inbox.iter().any(|e| pred(&e.message))
    }

    /// Removes and returns the first message satisfying `pred`.
    pub fn take_message(&mut self, pred: impl Fn(&Message) -> bool) -> Option<Message> {
        let pos = self.parts.inbox.iter().position(|e| pred(&e.message))?;
        self.parts.inbox.remove(pos).map(|e| e.message)
    }

    /// Removes every message satisfying `pred`, preserving delivery order.
    pub fn take_messages(&mut self, pred: impl Fn(&Message) -> bool) -> Vec<Message> {
        let mut taken = Vec::new();
        let mut kept = VecDeque::with_capacity(self.parts.inbox.len());
        for entry in self.parts.inbox.drain(..) {
            if pred(&entry.message) {
                taken.push(entry.message);
            } else {
                kept.push_back(entry);
            }
        }
        *self.parts.inbox = kept;
        taken
    }

    pub fn state(&self) -> &StateStore {
        self.parts.state
    }

    pub fn state_mut(&mut self) -> &mut StateStore {
        self.parts.state
    }

    pub fn get_state<T: DeserializeOwned>(&self, key: &str) -> Option<T> {
        self.parts
            .state
            .get(key)
            .and_then(|v| serde_json::from_value(v.clone()).ok())
    }

    pub fn set_state<T: Serialize>(&mut self, key: &str, value: &T) {
        let value = serde_json::to_value(value).expect("state values serialize to JSON");
        self.parts.state.insert(key.to_string(), value);
    }

    /// Appends to a JSON array stored under `key`.
    pub fn push_state<T: Serialize>(&mut self, key: &str, value: &T) {
        let value = serde_json::to_value(value).expect("state values serialize to JSON");
        let slot = self
            .parts
            .state
            .entry(key.to_string())
            .or_insert_with(|| Value::Array(Vec::new()));
        match slot {
            Value::Array(items) => items.push(value),
            other => *other = Value::Array(vec![value]),
        }
    }

    /// Fresh conversation id, unique per agent and stable across migration.
    pub fn new_conversation_id(&mut self) -> String {
        let n = *self.parts.conversations;
        *self.parts.conversations += 1;
        format!("c{}-{}", self.parts.agent.0, n)
    }

    pub fn send(
        &mut self,
        receiver: AgentId,
        type_tag: &str,
        conversation_id: &str,
        payload: Vec<u8>,
    ) -> Result<(), ModelError> {
        let msg = Message::new(
            self.parts.agent,
            receiver,
            type_tag,
            conversation_id,
            payload,
            self.parts.now,
        )?;
        self.effects.push(Effect::Send(msg));
        Ok(())
    }

    /// Reserves an id for a new agent at `at`. The agent exists once the step
    /// ends and is first stepped on the next tick.
    pub fn spawn(
        &mut self,
        at: LocationId,
        behaviors: Vec<Box<dyn Behavior>>,
        state: StateStore,
    ) -> AgentId {
        let id = AgentId(*self.parts.next_agent_id);
        *self.parts.next_agent_id += 1;
        self.effects.push(Effect::Spawn {
            id,
            at,
            behaviors,
            state,
        });
        id
    }

    pub fn attach(&mut self, target: AgentId, behavior: Box<dyn Behavior>) {
        self.effects.push(Effect::Attach { target, behavior });
    }

    pub fn request_migration(&mut self, dest: LocationId) {
        self.effects.push(Effect::Migrate(dest));
    }

    pub fn stop_agent(&mut self) {
        self.effects.push(Effect::Stop);
    }

    pub fn persist(&mut self, collection: &str, record: Value) {
        self.effects.push(Effect::Persist {
            collection: collection.to_string(),
            record,
        });
    }

    pub fn trace(&mut self, kind: TraceKind, detail: Detail) {
        self.effects.push(Effect::Trace { kind, detail });
    }

    pub fn trace_custom(&mut self, event: &str, mut detail: Detail) {
        detail.insert("event".into(), Value::from(event));
        self.trace(TraceKind::Custom, detail);
    }

    /// Runs a registered action with this context.
    pub fn run_action(
        &mut self,
        action: &ActionDescriptor,
        message: Option<&Message>,
    ) -> Result<Option<Vec<u8>>, ActionError> {
        let registry = self.registry();
        let f = registry
            .action(&action.name)
            .ok_or_else(|| ActionError::Unknown(action.name.clone()))?;
        let input = ActionInput {
            params: &action.params,
            message,
        };
        f(self, &input).map_err(ActionError::Failed)
    }

    /// Like [`AgentContext::run_action`], but failures become a Custom
    /// `action_error` trace event instead of an error.
    pub fn run_action_traced(
        &mut self,
        action: &ActionDescriptor,
        message: Option<&Message>,
    ) -> Option<Vec<u8>> {
        match self.run_action(action, message) {
            Ok(out) => out,
            Err(err) => {
                let mut d = Detail::new();
                d.insert("action".into(), Value::from(action.name.as_str()));
                d.insert("error".into(), Value::from(err.to_string()));
                self.trace_custom("action_error", d);
                None
            }
        }
    }

    pub fn effects(&self) -> &[Effect] {
        &self.effects
    }

    pub fn into_effects(self) -> Vec<Effect> {
        self.effects
    }
}
