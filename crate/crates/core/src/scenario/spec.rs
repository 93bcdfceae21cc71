//! Behavior-spec trees in scenario files and their translation into
//! behaviors.

use std::collections::{BTreeMap, BTreeSet};

use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::Value;

use super::Diagnostic;
use crate::behaviors::protocol::{DEFAULT_ACK_TIMEOUT, DEFAULT_RESULT_TIMEOUT};
use crate::behaviors::{Client, Listener, Mode, Observer, Server, ServerRef, Task};
use crate::composite::{Completion, Fsm, FsmDefinition, Parallel, Sequential, Transition};
use crate::itinerary::{
    Alpha, DelayEstimator, DeparturePolicy, Itinerary, ItineraryConfig, Objective, Route,
};
use crate::model::{AgentId, Behavior, LocationId, VirtualTime};
use crate::registry::{ActionDescriptor, Registry};

pub const BEHAVIOR_KINDS: &[&str] = &[
    "task",
    "observer",
    "listener",
    "client",
    "server",
    "sequential",
    "parallel",
    "fsm",
    "itinerary",
    "role",
];

/// An action reference: JSON `params` are encoded as JSON bytes, `text` is
/// passed through as raw UTF-8.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionSpec {
    pub name: String,
    #[serde(default)]
    pub params: Option<Value>,
    #[serde(default)]
    pub text: Option<String>,
}

impl ActionSpec {
    fn descriptor(&self) -> ActionDescriptor {
        match (&self.params, &self.text) {
            (_, Some(text)) => ActionDescriptor::with_params(&self.name, text.clone().into_bytes()),
            (Some(params), None) => ActionDescriptor::with_json(&self.name, params),
            (None, None) => ActionDescriptor::new(&self.name),
        }
    }
}

fn one_shot() -> Mode {
    Mode::OneShot
}

fn cyclic() -> Mode {
    Mode::Cyclic
}

fn any_type() -> String {
    "*".into()
}

fn ack_timeout() -> u64 {
    DEFAULT_ACK_TIMEOUT
}

fn result_timeout() -> u64 {
    DEFAULT_RESULT_TIMEOUT
}

fn one() -> u64 {
    1
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TaskSpec {
    action: ActionSpec,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ObserverSpec {
    period: u64,
    trigger: ActionSpec,
    handler: ActionSpec,
    #[serde(default = "one_shot")]
    mode: Mode,
    #[serde(default)]
    cancel_on: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ListenerSpec {
    #[serde(default = "any_type")]
    filter: String,
    callbacks: Vec<ActionSpec>,
    #[serde(default = "cyclic")]
    mode: Mode,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ClientSpec {
    /// Index of the server agent in the scenario's agent list.
    server: usize,
    task: ActionSpec,
    #[serde(default = "ack_timeout")]
    ack_timeout: u64,
    #[serde(default = "result_timeout")]
    result_timeout: u64,
    #[serde(default)]
    on_result: Option<ActionSpec>,
    #[serde(default)]
    on_failure: Option<ActionSpec>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ServerSpec {
    #[serde(default = "one")]
    work_ticks: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SequentialSpec {
    children: Vec<Value>,
    #[serde(default)]
    control: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ParallelSpec {
    children: Vec<Value>,
    #[serde(default)]
    completion: Completion,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FsmSpec {
    states: BTreeMap<String, ActionSpec>,
    #[serde(default)]
    transitions: Vec<Transition>,
    start: String,
    #[serde(default)]
    terminals: BTreeSet<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectiveSpec {
    location: String,
    #[serde(default)]
    earliest: u64,
    /// Omitted means open-ended.
    #[serde(default)]
    latest: Option<u64>,
    #[serde(default)]
    tasks: Vec<ActionSpec>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ItinerarySpec {
    #[serde(default)]
    base_time: u64,
    objectives: Vec<ObjectiveSpec>,
    #[serde(default)]
    listeners: Vec<ActionSpec>,
    #[serde(default)]
    missed: Option<Value>,
    #[serde(default)]
    policy: DeparturePolicy,
    #[serde(default)]
    default_estimate: u64,
    #[serde(default)]
    alpha: Option<[u64; 2]>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RoleSpec {
    role: String,
    #[serde(default)]
    params: Value,
}

/// Closest candidate by Jaro-Winkler similarity, if reasonably close.
pub fn suggest<'a>(name: &str, candidates: impl IntoIterator<Item = &'a str>) -> Option<&'a str> {
    let lower = name.to_lowercase();
    candidates
        .into_iter()
        .map(|c| (strsim::jaro_winkler(&lower, &c.to_lowercase()), c))
        .filter(|(score, _)| *score >= 0.8)
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, c)| c)
}

fn with_suggestion(message: String, suggestion: Option<&str>) -> String {
    match suggestion {
        Some(s) => format!("{message} (did you mean `{s}`?)"),
        None => message,
    }
}

/// Builds behaviors from spec trees, collecting diagnostics instead of
/// stopping at the first problem.
pub struct Builder<'a> {
    pub registry: &'a Registry,
    pub locations: &'a BTreeMap<String, LocationId>,
    pub agent_count: usize,
    pub diagnostics: Vec<Diagnostic>,
}

impl<'a> Builder<'a> {
    pub fn new(
        registry: &'a Registry,
        locations: &'a BTreeMap<String, LocationId>,
        agent_count: usize,
    ) -> Self {
        Builder {
            registry,
            locations,
            agent_count,
            diagnostics: Vec::new(),
        }
    }

    pub fn error(&mut self, pointer: impl Into<String>, message: impl Into<String>) {
        self.diagnostics.push(Diagnostic {
            pointer: pointer.into(),
            message: message.into(),
        });
    }

    fn parse<T: DeserializeOwned>(&mut self, value: &Value, ptr: &str) -> Option<T> {
        match serde_path_to_error::deserialize::<_, T>(value) {
            Ok(v) => Some(v),
            Err(e) => {
                let path = e.path().to_string();
                let at = if path == "." {
                    ptr.to_string()
                } else {
                    format!("{ptr}/{}", path.replace('.', "/").trim_start_matches('/'))
                };
                self.error(at, e.into_inner().to_string());
                None
            }
        }
    }

    pub fn location(&mut self, name: &str, ptr: &str) -> Option<LocationId> {
        if let Some(id) = self.locations.get(name) {
            return Some(*id);
        }
        let hint = suggest(name, self.locations.keys().map(String::as_str));
        self.error(
            ptr,
            with_suggestion(format!("unknown location `{name}`"), hint),
        );
        None
    }

    pub fn action(&mut self, spec: &ActionSpec, ptr: &str) -> ActionDescriptor {
        if !self.registry.has_action(&spec.name) {
            let hint = suggest(&spec.name, self.registry.action_names());
            self.error(
                format!("{ptr}/name"),
                with_suggestion(format!("unknown action `{}`", spec.name), hint),
            );
        }
        if spec.params.is_some() && spec.text.is_some() {
            self.error(ptr, "give either `params` or `text`, not both");
        }
        spec.descriptor()
    }

    fn predicate(&mut self, spec: &ActionSpec, ptr: &str) -> ActionDescriptor {
        if !self.registry.has_predicate(&spec.name) {
            let hint = suggest(&spec.name, self.registry.predicate_names());
            self.error(
                format!("{ptr}/name"),
                with_suggestion(format!("unknown predicate `{}`", spec.name), hint),
            );
        }
        spec.descriptor()
    }

    fn actions(&mut self, specs: &[ActionSpec], ptr: &str) -> Vec<ActionDescriptor> {
        specs
            .iter()
            .enumerate()
            .map(|(i, s)| self.action(s, &format!("{ptr}/{i}")))
            .collect()
    }

    fn children(&mut self, values: &[Value], ptr: &str) -> Option<Vec<Box<dyn Behavior>>> {
        let built: Vec<_> = values
            .iter()
            .enumerate()
            .map(|(i, v)| self.behavior(v, &format!("{ptr}/{i}")))
            .collect();
        built.into_iter().collect()
    }

    /// Builds one behavior. `None` means at least one diagnostic was added.
    pub fn behavior(&mut self, value: &Value, ptr: &str) -> Option<Box<dyn Behavior>> {
        let Some(kind) = value.get("kind").and_then(Value::as_str) else {
            self.error(ptr, "behavior needs a string `kind`");
            return None;
        };
        let mut body = value.clone();
        if let Some(map) = body.as_object_mut() {
            map.remove("kind");
        }
        let invalid = |b: &mut Self, e: &dyn std::fmt::Display| {
            b.error(ptr, e.to_string());
            None
        };
        match kind {
            "task" => {
                let s: TaskSpec = self.parse(&body, ptr)?;
                let action = self.action(&s.action, &format!("{ptr}/action"));
                Some(Task::boxed(action))
            }
            "observer" => {
                let s: ObserverSpec = self.parse(&body, ptr)?;
                let trigger = self.predicate(&s.trigger, &format!("{ptr}/trigger"));
                let handler = self.action(&s.handler, &format!("{ptr}/handler"));
                match Observer::new(s.period, trigger, handler, s.mode) {
                    Ok(o) => Some(Box::new(match s.cancel_on {
                        Some(tag) => o.cancel_on(tag),
                        None => o,
                    })),
                    Err(e) => invalid(self, &e),
                }
            }
            "listener" => {
                let s: ListenerSpec = self.parse(&body, ptr)?;
                let callbacks = self.actions(&s.callbacks, &format!("{ptr}/callbacks"));
                match Listener::new(s.filter, callbacks, s.mode) {
                    Ok(l) => Some(Box::new(l)),
                    Err(e) => invalid(self, &e),
                }
            }
            "client" => {
                let s: ClientSpec = self.parse(&body, ptr)?;
                if s.server >= self.agent_count {
                    self.error(
                        format!("{ptr}/server"),
                        format!(
                            "agent index {} out of range ({} agents)",
                            s.server, self.agent_count
                        ),
                    );
                }
                let task = self.action(&s.task, &format!("{ptr}/task"));
                let on_result = match &s.on_result {
                    Some(a) => self.action(a, &format!("{ptr}/on_result")),
                    None => ActionDescriptor::noop(),
                };
                let on_failure = match &s.on_failure {
                    Some(a) => self.action(a, &format!("{ptr}/on_failure")),
                    None => ActionDescriptor::noop(),
                };
                let server = ServerRef::Agent(AgentId(s.server as u64));
                match Client::new(
                    server,
                    task,
                    s.ack_timeout,
                    s.result_timeout,
                    on_result,
                    on_failure,
                ) {
                    Ok(c) => Some(Box::new(c)),
                    Err(e) => invalid(self, &e),
                }
            }
            "server" => {
                let s: ServerSpec = self.parse(&body, ptr)?;
                Some(Box::new(Server::new(s.work_ticks)))
            }
            "sequential" => {
                let s: SequentialSpec = self.parse(&body, ptr)?;
                let children = self.children(&s.children, &format!("{ptr}/children"))?;
                let seq = Sequential::new(children);
                Some(Box::new(match s.control {
                    Some(tag) => seq.with_control(tag),
                    None => seq,
                }))
            }
            "parallel" => {
                let s: ParallelSpec = self.parse(&body, ptr)?;
                let children = self.children(&s.children, &format!("{ptr}/children"))?;
                Some(Box::new(Parallel::new(children, s.completion)))
            }
            "fsm" => {
                let s: FsmSpec = self.parse(&body, ptr)?;
                let states = s
                    .states
                    .iter()
                    .map(|(name, a)| {
                        (
                            name.clone(),
                            self.action(a, &format!("{ptr}/states/{name}")),
                        )
                    })
                    .collect();
                let def = FsmDefinition {
                    states,
                    transitions: s.transitions,
                    start: s.start,
                    terminals: s.terminals,
                };
                match Fsm::new(def) {
                    Ok(f) => Some(Box::new(f)),
                    Err(e) => invalid(self, &e),
                }
            }
            "itinerary" => self.itinerary(&body, ptr),
            "role" => {
                let s: RoleSpec = self.parse(&body, ptr)?;
                let roles = self.registry.roles();
                if !roles.contains(&s.role) {
                    let hint = suggest(&s.role, roles.names());
                    self.error(
                        format!("{ptr}/role"),
                        with_suggestion(format!("unknown role `{}`", s.role), hint),
                    );
                    return None;
                }
                let params = serde_json::to_vec(&s.params).expect("JSON values serialize");
                match roles.construct(&s.role, &params) {
                    Ok(b) => Some(b),
                    Err(e) => invalid(self, &e),
                }
            }
            other => {
                let hint = suggest(other, BEHAVIOR_KINDS.iter().copied());
                self.error(
                    format!("{ptr}/kind"),
                    with_suggestion(format!("unknown behavior kind `{other}`"), hint),
                );
                None
            }
        }
    }

    fn itinerary(&mut self, body: &Value, ptr: &str) -> Option<Box<dyn Behavior>> {
        let s: ItinerarySpec = self.parse(body, ptr)?;
        let before = self.diagnostics.len();
        if s.objectives.is_empty() {
            self.error(format!("{ptr}/objectives"), "route has no objectives");
        }
        let mut objectives = Vec::new();
        for (i, o) in s.objectives.iter().enumerate() {
            let at = format!("{ptr}/objectives/{i}");
            let location = self.location(&o.location, &format!("{at}/location"));
            let latest = o.latest.unwrap_or(u64::MAX);
            if o.earliest > latest {
                self.error(
                    at.clone(),
                    format!(
                        "objective {i} (`{}`): earliest {} is after latest {latest}",
                        o.location, o.earliest
                    ),
                );
            }
            let tasks = self.actions(&o.tasks, &format!("{at}/tasks"));
            if let Some(location) = location {
                objectives.push(Objective::new(location, o.earliest, latest).with_tasks(tasks));
            }
        }
        let listeners = self.actions(&s.listeners, &format!("{ptr}/listeners"));
        let missed = match &s.missed {
            Some(v) => Some(self.behavior(v, &format!("{ptr}/missed"))?),
            None => None,
        };
        let alpha = match s.alpha {
            None => Alpha::default(),
            Some([num, den]) => match Alpha::new(num, den) {
                Some(a) => a,
                None => {
                    self.error(
                        format!("{ptr}/alpha"),
                        "alpha must be num/den with 0 <= num <= den, den > 0",
                    );
                    Alpha::default()
                }
            },
        };
        if self.diagnostics.len() > before {
            return None;
        }
        let route = Route::new(objectives, VirtualTime(s.base_time)).ok()?;
        let itinerary = Itinerary::new(ItineraryConfig::new(route, listeners, missed))
            .with_policy(s.policy)
            .with_estimator(DelayEstimator::new(alpha, s.default_estimate));
        Some(Box::new(itinerary))
    }
}
