//! Name-resolved actions, predicates, behavior decoders and roles.
//!
//! Behaviors never hold closures directly: they carry descriptors (a name
//! plus parameter bytes) and resolve them here at step time. That keeps
//! behavior state plain data, so agents can migrate mid-behavior, while
//! every location shares the same code.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::model::{
    decode_as, AgentContext, AgentId, Behavior, BehaviorError, Message, VirtualTime,
};
use crate::trace::Detail;

/// A registered action invoked by name, with parameter bytes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionDescriptor {
    pub name: String,
    #[serde(with = "crate::codec::b64", default)]
    pub params: Vec<u8>,
}

impl ActionDescriptor {
    pub fn new(name: impl Into<String>) -> Self {
        ActionDescriptor {
            name: name.into(),
            params: Vec::new(),
        }
    }

    pub fn with_params(name: impl Into<String>, params: Vec<u8>) -> Self {
        ActionDescriptor {
            name: name.into(),
            params,
        }
    }

    /// Parameters encoded as JSON.
    pub fn with_json<T: Serialize>(name: impl Into<String>, params: &T) -> Self {
        let params = serde_json::to_vec(params).expect("action params serialize to JSON");
        ActionDescriptor::with_params(name, params)
    }

    pub fn noop() -> Self {
        ActionDescriptor::new("noop")
    }
}

/// Predicates share the descriptor shape with actions.
pub type PredicateDescriptor = ActionDescriptor;

pub struct ActionInput<'m> {
    pub params: &'m [u8],
    /// The message that triggered the action, when there is one.
    pub message: Option<&'m Message>,
}

impl ActionInput<'_> {
    pub fn json<T: serde::de::DeserializeOwned>(&self) -> Result<T, String> {
        serde_json::from_slice(self.params).map_err(|e| format!("bad params: {e}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ActionError {
    #[error("unknown action `{0}`")]
    Unknown(String),
    #[error("{0}")]
    Failed(String),
}

pub type ActionResult = Result<Option<Vec<u8>>, String>;
pub type ActionFn =
    Arc<dyn Fn(&mut AgentContext<'_>, &ActionInput<'_>) -> ActionResult + Send + Sync>;
pub type PredicateFn = Arc<dyn Fn(&AgentContext<'_>, &[u8]) -> bool + Send + Sync>;
pub type DecodeFn = fn(Value) -> Result<Box<dyn Behavior>, BehaviorError>;
pub type RoleConstructor = fn(&[u8]) -> Result<Box<dyn Behavior>, String>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RegistryError {
    #[error("role `{0}` is already registered with a different constructor")]
    ConflictingRole(String),
}

/// Role name to behavior constructor. The agent that receives a role never
/// names the concrete behavior type.
#[derive(Clone, Default)]
pub struct RoleRegistry {
    entries: BTreeMap<String, RoleConstructor>,
}

impl RoleRegistry {
    /// Re-registering the same constructor is a no-op; a different one errors.
    pub fn register(&mut self, role: &str, ctor: RoleConstructor) -> Result<(), RegistryError> {
        match self.entries.get(role) {
            Some(existing) if std::ptr::fn_addr_eq(*existing, ctor) => Ok(()),
            Some(_) => Err(RegistryError::ConflictingRole(role.to_string())),
            None => {
                self.entries.insert(role.to_string(), ctor);
                Ok(())
            }
        }
    }

    pub fn contains(&self, role: &str) -> bool {
        self.entries.contains_key(role)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn construct(&self, role: &str, params: &[u8]) -> Result<Box<dyn Behavior>, BehaviorError> {
        let ctor = self
            .entries
            .get(role)
            .ok_or_else(|| BehaviorError::UnknownRole(role.to_string()))?;
        ctor(params).map_err(BehaviorError::Invalid)
    }
}

#[derive(Clone)]
pub struct Registry {
    actions: BTreeMap<String, ActionFn>,
    predicates: BTreeMap<String, PredicateFn>,
    decoders: BTreeMap<String, DecodeFn>,
    roles: RoleRegistry,
}

impl fmt::Debug for Registry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Registry")
            .field("actions", &self.actions.keys().collect::<Vec<_>>())
            .field("predicates", &self.predicates.keys().collect::<Vec<_>>())
            .field("behaviors", &self.decoders.keys().collect::<Vec<_>>())
            .field("roles", &self.roles.names().collect::<Vec<_>>())
            .finish()
    }
}

impl Default for Registry {
    fn default() -> Self {
        Registry::new()
    }
}

impl Registry {
    /// A registry with no entries at all.
    pub fn empty() -> Self {
        Registry {
            actions: BTreeMap::new(),
            predicates: BTreeMap::new(),
            decoders: BTreeMap::new(),
            roles: RoleRegistry::default(),
        }
    }

    /// A registry preloaded with the built-in behaviors, actions and
    /// predicates.
    pub fn new() -> Self {
        let mut reg = Registry::empty();
        register_builtin_behaviors(&mut reg);
        register_builtin_actions(&mut reg);
        register_builtin_predicates(&mut reg);
        reg
    }

    pub fn register_action<F>(&mut self, name: &str, f: F)
    where
        F: Fn(&mut AgentContext<'_>, &ActionInput<'_>) -> ActionResult + Send + Sync + 'static,
    {
        self.actions.insert(name.to_string(), Arc::new(f));
    }

    pub fn register_predicate<F>(&mut self, name: &str, f: F)
    where
        F: Fn(&AgentContext<'_>, &[u8]) -> bool + Send + Sync + 'static,
    {
        self.predicates.insert(name.to_string(), Arc::new(f));
    }

    pub fn register_behavior(&mut self, kind: &str, decode: DecodeFn) {
        self.decoders.insert(kind.to_string(), decode);
    }

    pub fn register_role(
        &mut self,
        role: &str,
        ctor: RoleConstructor,
    ) -> Result<(), RegistryError> {
        self.roles.register(role, ctor)
    }

    pub fn roles(&self) -> &RoleRegistry {
        &self.roles
    }

    pub fn action(&self, name: &str) -> Option<&ActionFn> {
        self.actions.get(name)
    }

    pub fn has_action(&self, name: &str) -> bool {
        self.actions.contains_key(name)
    }

    pub fn action_names(&self) -> impl Iterator<Item = &str> {
        self.actions.keys().map(String::as_str)
    }

    pub fn predicate(&self, name: &str) -> Option<&PredicateFn> {
        self.predicates.get(name)
    }

    pub fn has_predicate(&self, name: &str) -> bool {
        self.predicates.contains_key(name)
    }

    pub fn predicate_names(&self) -> impl Iterator<Item = &str> {
        self.predicates.keys().map(String::as_str)
    }

    pub fn has_behavior(&self, kind: &str) -> bool {
        self.decoders.contains_key(kind)
    }

    pub fn decode_behavior(
        &self,
        kind: &str,
        state: Value,
    ) -> Result<Box<dyn Behavior>, BehaviorError> {
        let decode = self
            .decoders
            .get(kind)
            .ok_or_else(|| BehaviorError::UnknownKind(kind.to_string()))?;
        decode(state)
    }

    pub fn eval_predicate(
        &self,
        ctx: &AgentContext<'_>,
        predicate: &PredicateDescriptor,
    ) -> Result<bool, BehaviorError> {
        let f = self
            .predicate(&predicate.name)
            .ok_or_else(|| BehaviorError::UnknownPredicate(predicate.name.clone()))?;
        Ok(f(ctx, &predicate.params))
    }
}

fn register_builtin_behaviors(reg: &mut Registry) {
    use crate::behaviors::{Client, Listener, Observer, Server, ServerWorker, Task};
    use crate::composite::{Fsm, Parallel, Sequential};
    use crate::itinerary::Itinerary;

    reg.register_behavior(Task::KIND, decode_as::<Task>);
    reg.register_behavior(Observer::KIND, decode_as::<Observer>);
    reg.register_behavior(Listener::KIND, decode_as::<Listener>);
    reg.register_behavior(Client::KIND, decode_as::<Client>);
    reg.register_behavior(Server::KIND, decode_as::<Server>);
    reg.register_behavior(ServerWorker::KIND, decode_as::<ServerWorker>);
    reg.register_behavior(Sequential::KIND, decode_as::<Sequential>);
    reg.register_behavior(Parallel::KIND, decode_as::<Parallel>);
    reg.register_behavior(Fsm::KIND, decode_as::<Fsm>);
    reg.register_behavior(Itinerary::KIND, decode_as::<Itinerary>);
}

#[derive(Deserialize)]
struct SendParams {
    to: AgentId,
    #[serde(rename = "type")]
    type_tag: String,
    #[serde(default)]
    payload: String,
    #[serde(default)]
    conversation: Option<String>,
}

#[derive(Deserialize)]
struct ReplyParams {
    #[serde(rename = "type")]
    type_tag: String,
    #[serde(default)]
    payload: String,
}

#[derive(Deserialize)]
struct SetStateParams {
    key: String,
    value: Value,
}

#[derive(Deserialize)]
struct AssignRoleParams {
    target: AgentId,
    role: String,
    #[serde(default)]
    params: Value,
}

fn text_param(input: &ActionInput<'_>) -> String {
    String::from_utf8_lossy(input.params).into_owned()
}

fn register_builtin_actions(reg: &mut Registry) {
    reg.register_action("noop", |_, _| Ok(None));
    reg.register_action("fail", |_, input| {
        let reason = text_param(input);
        Err(if reason.is_empty() {
            "action failed".into()
        } else {
            reason
        })
    });
    // Returns its params unchanged; FSM states use it to emit event labels.
    reg.register_action("emit", |_, input| Ok(Some(input.params.to_vec())));
    reg.register_action("log", |ctx, input| {
        let mut d = Detail::new();
        d.insert("text".into(), Value::from(text_param(input)));
        ctx.trace_custom("log", d);
        Ok(None)
    });
    reg.register_action("send", |ctx, input| {
        let p: SendParams = input.json()?;
        let conv = match p.conversation {
            Some(c) => c,
            None => ctx.new_conversation_id(),
        };
        ctx.send(p.to, &p.type_tag, &conv, p.payload.into_bytes())
            .map_err(|e| e.to_string())?;
        Ok(None)
    });
    reg.register_action("reply", |ctx, input| {
        let p: ReplyParams = input.json()?;
        let msg = input.message.ok_or("reply needs a triggering message")?;
        let (to, conv) = (msg.sender, msg.conversation_id.clone());
        ctx.send(to, &p.type_tag, &conv, p.payload.into_bytes())
            .map_err(|e| e.to_string())?;
        Ok(None)
    });
    reg.register_action("set_state", |ctx, input| {
        let p: SetStateParams = input.json()?;
        ctx.state_mut().insert(p.key, p.value);
        Ok(None)
    });
    // Increments the integer counter named by the params.
    reg.register_action("count", |ctx, input| {
        let key = text_param(input);
        let n = ctx.get_state::<u64>(&key).unwrap_or(0) + 1;
        ctx.set_state(&key, &n);
        Ok(None)
    });
    reg.register_action("stop", |ctx, _| {
        ctx.stop_agent();
        Ok(None)
    });
    reg.register_action("assign_role", |ctx, input| {
        let p: AssignRoleParams = input.json()?;
        let params = serde_json::to_vec(&p.params).map_err(|e| e.to_string())?;
        let behavior = ctx
            .registry()
            .roles()
            .construct(&p.role, &params)
            .map_err(|e| e.to_string())?;
        ctx.attach(p.target, behavior);
        Ok(None)
    });
}

fn register_builtin_predicates(reg: &mut Registry) {
    reg.register_predicate("always", |_, _| true);
    reg.register_predicate("never", |_, _| false);
    reg.register_predicate("clock_at_least", |ctx, params| {
        serde_json::from_slice::<u64>(params)
            .map(|t| ctx.now() >= VirtualTime(t))
            .unwrap_or(false)
    });
    // True when the state key holds a truthy value.
    reg.register_predicate("state_flag", |ctx, params| {
        let key = String::from_utf8_lossy(params);
        match ctx.state().get(key.as_ref()) {
            None | Some(Value::Null) | Some(Value::Bool(false)) => false,
            Some(Value::Number(n)) => n.as_f64() != Some(0.0),
            Some(_) => true,
        }
    });
}
