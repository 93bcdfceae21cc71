use std::collections::BTreeSet;

use serde_json::Value;

use super::{
    effective_latency, next_runnable_tick, step_cell, LatencyModel, PersistedRecord,
    PlatformAdapter, PlatformError, RunUntil, SimConfig,
};
use crate::model::{
    AgentId, AgentShell, Behavior, BehaviorCell, Effect, InboxEntry, LocationId, Message,
    StateStore, StepOutcome, VirtualTime,
};
use crate::registry::Registry;
use crate::trace::{detail, TraceKind, TraceLog};

struct InFlight {
    number: u64,
    due: VirtualTime,
    msg: Message,
}

struct Travelling {
    shell: AgentShell,
    from: LocationId,
    dest: LocationId,
    started: VirtualTime,
    due: VirtualTime,
}

/// A deliberately naive in-memory adapter: visits every tick, scans flat
/// lists, keeps migrating agents as live objects. Only deterministic latency
/// models are accepted. It exists to run the behavior suites against a
/// second implementation of [`PlatformAdapter`].
pub struct MockPlatform {
    message_latency: LatencyModel,
    migration_latency: LatencyModel,
    max_ticks: VirtualTime,
    registry: Registry,
    locations: Vec<String>,
    agents: Vec<AgentShell>,
    travelling: Vec<Travelling>,
    gone: BTreeSet<AgentId>,
    in_flight: Vec<InFlight>,
    messages_sent: u64,
    mark: u64,
    next_id: u64,
    clock: Option<VirtualTime>,
    trace: TraceLog,
    records: Vec<PersistedRecord>,
}

impl MockPlatform {
    pub fn new(config: SimConfig, registry: Registry) -> Result<Self, PlatformError> {
        for model in [&config.message_latency, &config.migration_latency] {
            if model.is_random() {
                return Err(PlatformError::Unsupported(
                    "random latency models need the simulator".into(),
                ));
            }
        }
        Ok(MockPlatform {
            message_latency: config.message_latency,
            migration_latency: config.migration_latency,
            max_ticks: config.max_ticks,
            registry,
            locations: Vec::new(),
            agents: Vec::new(),
            travelling: Vec::new(),
            gone: BTreeSet::new(),
            in_flight: Vec::new(),
            messages_sent: 0,
            mark: 0,
            next_id: 0,
            clock: None,
            trace: TraceLog::new(),
            records: Vec::new(),
        })
    }

    fn next_tick(&self) -> VirtualTime {
        self.clock.map_or(VirtualTime::ZERO, |t| t + 1)
    }

    fn fixed_latency(model: &LatencyModel, from: LocationId, to: LocationId) -> u64 {
        match model {
            LatencyModel::Fixed(d) => *d,
            LatencyModel::PerLink { links, default } => links
                .iter()
                .find(|l| l.from == from && l.to == to)
                .map_or(*default, |l| l.ticks),
            LatencyModel::UniformRange { lo, .. } => *lo,
        }
    }

    fn where_is(&self, id: AgentId) -> Option<LocationId> {
        self.agents
            .iter()
            .find(|s| s.id == id)
            .map(|s| s.current)
            .or_else(|| {
                self.travelling
                    .iter()
                    .find(|t| t.shell.id == id)
                    .map(|t| t.dest)
            })
    }

    fn known_location(&self, id: LocationId) -> Result<(), PlatformError> {
        if (id.0 as usize) < self.locations.len() {
            Ok(())
        } else {
            Err(PlatformError::UnknownLocation(id))
        }
    }

    fn post(&mut self, msg: Message, from: LocationId, tick: VirtualTime) {
        let to = self.where_is(msg.receiver).unwrap_or(from);
        let due = tick + effective_latency(Self::fixed_latency(&self.message_latency, from, to));
        let number = self.messages_sent;
        self.messages_sent += 1;
        self.trace.push(
            tick,
            TraceKind::Send,
            msg.sender,
            detail([
                ("msg", Value::from(number)),
                ("to", Value::from(msg.receiver.0)),
                ("type", Value::from(msg.type_tag.as_str())),
                ("conversation", Value::from(msg.conversation_id.as_str())),
                ("due", Value::from(due.0)),
            ]),
        );
        self.in_flight.push(InFlight { number, due, msg });
    }

    #[allow(clippy::too_many_arguments)]
    fn add_agent(
        &mut self,
        id: AgentId,
        at: LocationId,
        behaviors: Vec<Box<dyn Behavior>>,
        state: StateStore,
        tick: VirtualTime,
        ready: VirtualTime,
        parent: Option<AgentId>,
    ) {
        let mut shell = AgentShell::new(id, at, tick);
        shell.state = state;
        for b in behaviors {
            shell.behaviors.push(BehaviorCell::ready_at(b, ready));
        }
        self.trace.push(
            tick,
            TraceKind::Spawn,
            id,
            detail([
                ("location", Value::from(at.0)),
                ("parent", parent.map_or(Value::Null, |p| Value::from(p.0))),
            ]),
        );
        if shell.behaviors.is_empty() {
            self.end(shell, tick);
        } else {
            let pos = self.agents.partition_point(|s| s.id < id);
            self.agents.insert(pos, shell);
        }
    }

    fn end(&mut self, shell: AgentShell, tick: VirtualTime) {
        self.trace.push(
            tick,
            TraceKind::Terminate,
            shell.id,
            detail([("location", Value::from(shell.current.0))]),
        );
        self.gone.insert(shell.id);
    }

    fn depart(&mut self, shell: AgentShell, dest: LocationId, tick: VirtualTime) {
        let from = shell.current;
        let due =
            tick + effective_latency(Self::fixed_latency(&self.migration_latency, from, dest));
        self.trace.push(
            tick,
            TraceKind::MigrateStart,
            shell.id,
            detail([
                ("from", Value::from(from.0)),
                ("to", Value::from(dest.0)),
                ("due", Value::from(due.0)),
            ]),
        );
        self.travelling.push(Travelling {
            shell,
            from,
            dest,
            started: tick,
            due,
        });
    }

    fn complain(&mut self, tick: VirtualTime, agent: AgentId, error: String) {
        self.trace.push(
            tick,
            TraceKind::Custom,
            agent,
            detail([
                ("event", Value::from("effect_error")),
                ("error", Value::from(error)),
            ]),
        );
    }

    fn tick(&mut self, now: VirtualTime) {
        self.clock = Some(now);

        let (due, rest): (Vec<_>, Vec<_>) = std::mem::take(&mut self.in_flight)
            .into_iter()
            .partition(|m| m.due <= now);
        self.in_flight = rest;
        for InFlight { number, msg, .. } in due {
            let receiver = msg.receiver;
            let mut d = detail([
                ("msg", Value::from(number)),
                ("from", Value::from(msg.sender.0)),
                ("type", Value::from(msg.type_tag.as_str())),
                ("conversation", Value::from(msg.conversation_id.as_str())),
            ]);
            let inbox = self
                .agents
                .iter_mut()
                .chain(self.travelling.iter_mut().map(|t| &mut t.shell))
                .find(|s| s.id == receiver)
                .map(|s| &mut s.inbox);
            match inbox {
                Some(inbox) => {
                    self.mark += 1;
                    inbox.push_back(InboxEntry {
                        message: msg,
                        delivered_at: now,
                        mark: self.mark,
                    });
                    d.insert("status".into(), Value::from("delivered"));
                }
                None => {
                    d.insert("status".into(), Value::from("failed"));
                }
            }
            self.trace.push(now, TraceKind::Deliver, receiver, d);
        }

        let mut arriving: Vec<Travelling> = Vec::new();
        let mut i = 0;
        while i < self.travelling.len() {
            if self.travelling[i].due <= now {
                arriving.push(self.travelling.remove(i));
            } else {
                i += 1;
            }
        }
        arriving.sort_by_key(|t| t.shell.id);
        for t in arriving {
            let mut shell = t.shell;
            shell.current = t.dest;
            shell.arrived_at = now;
            self.trace.push(
                now,
                TraceKind::MigrateEnd,
                shell.id,
                detail([
                    ("from", Value::from(t.from.0)),
                    ("to", Value::from(t.dest.0)),
                    ("latency", Value::from(now.since(t.started))),
                ]),
            );
            let pos = self.agents.partition_point(|s| s.id < shell.id);
            self.agents.insert(pos, shell);
        }

        let order: Vec<AgentId> = self.agents.iter().map(|s| s.id).collect();
        for id in order {
            let Some(pos) = self.agents.iter().position(|s| s.id == id) else {
                continue;
            };
            let mut shell = self.agents.remove(pos);
            let mut stop = false;
            let mut leave: Option<LocationId> = None;
            let mut index = 0;
            while index < shell.behaviors.len() && !stop && leave.is_none() {
                let step = step_cell(
                    &mut shell,
                    index,
                    now,
                    self.mark,
                    &mut self.next_id,
                    &self.registry,
                );
                index += 1;
                let Some(step) = step else { continue };
                for effect in step.effects {
                    match effect {
                        Effect::Send(msg) => {
                            let from = shell.current;
                            self.post(msg, from, now);
                        }
                        Effect::Spawn {
                            id: child,
                            at,
                            behaviors,
                            state,
                        } => match self.known_location(at) {
                            Ok(()) => {
                                self.add_agent(child, at, behaviors, state, now, now + 1, Some(id))
                            }
                            Err(e) => self.complain(now, id, e.to_string()),
                        },
                        Effect::Attach { target, behavior } => {
                            let kind = behavior.kind().to_string();
                            let cell = BehaviorCell::ready_at(behavior, now + 1);
                            let slot = if target == id {
                                Some(&mut shell)
                            } else {
                                self.agents
                                    .iter_mut()
                                    .chain(self.travelling.iter_mut().map(|t| &mut t.shell))
                                    .find(|s| s.id == target)
                            };
                            match slot {
                                Some(s) => {
                                    s.behaviors.push(cell);
                                    self.trace.push(
                                        now,
                                        TraceKind::Custom,
                                        id,
                                        detail([
                                            ("event", Value::from("attach")),
                                            ("target", Value::from(target.0)),
                                            ("behavior", Value::from(kind)),
                                        ]),
                                    );
                                }
                                None => self.complain(
                                    now,
                                    id,
                                    PlatformError::UnknownAgent(target).to_string(),
                                ),
                            }
                        }
                        Effect::Trace { kind, detail } => self.trace.push(now, kind, id, detail),
                        Effect::Persist { collection, record } => {
                            self.trace.push(
                                now,
                                TraceKind::Custom,
                                id,
                                detail([
                                    ("event", Value::from("persist")),
                                    ("collection", Value::from(collection.as_str())),
                                ]),
                            );
                            self.records.push(PersistedRecord {
                                tick: now,
                                agent: id,
                                collection,
                                record,
                            });
                        }
                        Effect::Migrate(dest) => {
                            if let Err(e) = self.known_location(dest) {
                                self.complain(now, id, e.to_string());
                            } else if leave.is_some() {
                                self.complain(
                                    now,
                                    id,
                                    PlatformError::AlreadyMigrating(id).to_string(),
                                );
                            } else {
                                leave = Some(dest);
                            }
                        }
                        Effect::Stop => stop = true,
                    }
                }
                let error = match step.result {
                    Ok(StepOutcome::Done) => None,
                    Err(e) => Some(e.to_string()),
                    Ok(_) => continue,
                };
                let mut d = detail([
                    ("index", Value::from(index - 1)),
                    ("behavior", Value::from(step.kind)),
                ]);
                if let Some(e) = error {
                    d.insert("error".into(), Value::from(e));
                }
                self.trace.push(now, TraceKind::BehaviorDone, id, d);
            }
            if stop || shell.all_done() {
                self.end(shell, now);
            } else if let Some(dest) = leave {
                self.depart(shell, dest, now);
            } else {
                let pos = self.agents.partition_point(|s| s.id < id);
                self.agents.insert(pos, shell);
            }
        }
    }

    fn idle(&self) -> bool {
        let from = self.next_tick();
        self.in_flight.is_empty()
            && self.travelling.is_empty()
            && self
                .agents
                .iter()
                .all(|s| next_runnable_tick(s, from).is_none())
    }
}

impl PlatformAdapter for MockPlatform {
    fn create_location(&mut self, name: &str) -> Result<LocationId, PlatformError> {
        if self.locations.iter().any(|n| n == name) {
            return Err(PlatformError::DuplicateLocationName(name.into()));
        }
        self.locations.push(name.into());
        Ok(LocationId(self.locations.len() as u32 - 1))
    }

    fn location_id(&self, name: &str) -> Option<LocationId> {
        self.locations
            .iter()
            .position(|n| n == name)
            .map(|i| LocationId(i as u32))
    }

    fn location_name(&self, id: LocationId) -> Option<&str> {
        self.locations.get(id.0 as usize).map(|s| s.as_str())
    }

    fn spawn_agent_with_state(
        &mut self,
        at: LocationId,
        behaviors: Vec<Box<dyn Behavior>>,
        state: StateStore,
    ) -> Result<AgentId, PlatformError> {
        self.known_location(at)?;
        let id = AgentId(self.next_id);
        self.next_id += 1;
        let tick = self.next_tick();
        self.add_agent(id, at, behaviors, state, tick, tick, None);
        Ok(id)
    }

    fn send(&mut self, msg: Message) -> Result<(), PlatformError> {
        let from = self
            .where_is(msg.sender)
            .ok_or(PlatformError::UnknownAgent(msg.sender))?;
        let tick = self.next_tick();
        self.post(msg, from, tick);
        Ok(())
    }

    fn migrate(&mut self, agent: AgentId, dest: LocationId) -> Result<(), PlatformError> {
        self.known_location(dest)?;
        if self.travelling.iter().any(|t| t.shell.id == agent) {
            return Err(PlatformError::AlreadyMigrating(agent));
        }
        let pos = self
            .agents
            .iter()
            .position(|s| s.id == agent)
            .ok_or(PlatformError::UnknownAgent(agent))?;
        let shell = self.agents.remove(pos);
        let tick = self.next_tick();
        self.depart(shell, dest, tick);
        Ok(())
    }

    fn attach_behavior(
        &mut self,
        target: AgentId,
        behavior: Box<dyn Behavior>,
    ) -> Result<(), PlatformError> {
        let tick = self.next_tick();
        let kind = behavior.kind().to_string();
        let shell = self
            .agents
            .iter_mut()
            .chain(self.travelling.iter_mut().map(|t| &mut t.shell))
            .find(|s| s.id == target)
            .ok_or(PlatformError::UnknownAgent(target))?;
        shell.behaviors.push(BehaviorCell::ready_at(behavior, tick));
        self.trace.push(
            tick,
            TraceKind::Custom,
            target,
            detail([
                ("event", Value::from("attach")),
                ("target", Value::from(target.0)),
                ("behavior", Value::from(kind)),
            ]),
        );
        Ok(())
    }

    fn now(&self) -> VirtualTime {
        self.clock.unwrap_or(VirtualTime::ZERO)
    }

    fn run(&mut self, until: RunUntil) -> Result<&TraceLog, PlatformError> {
        loop {
            let next = self.next_tick();
            if let RunUntil::Tick(limit) = until {
                if next > limit {
                    return Ok(&self.trace);
                }
            } else if self.idle() {
                return Ok(&self.trace);
            }
            if next > self.max_ticks {
                if self.idle() {
                    return Ok(&self.trace);
                }
                return Err(PlatformError::TickBudgetExceeded {
                    max_ticks: self.max_ticks,
                    next,
                });
            }
            self.tick(next);
        }
    }

    fn trace(&self) -> &TraceLog {
        &self.trace
    }

    fn registry(&self) -> &Registry {
        &self.registry
    }

    fn agent(&self, id: AgentId) -> Option<&AgentShell> {
        self.agents.iter().find(|s| s.id == id)
    }

    fn is_live(&self, id: AgentId) -> bool {
        self.where_is(id).is_some()
    }

    fn live_agents(&self) -> Vec<AgentId> {
        let mut ids: Vec<AgentId> = self
            .agents
            .iter()
            .map(|s| s.id)
            .chain(self.travelling.iter().map(|t| t.shell.id))
            .collect();
        ids.sort();
        ids
    }

    fn persisted(&self) -> &[PersistedRecord] {
        &self.records
    }
}
