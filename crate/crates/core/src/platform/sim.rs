use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use super::{
    effective_latency, next_runnable_tick, step_cell, PersistedRecord, PlatformAdapter,
    PlatformError, RunUntil, SimConfig,
};
use crate::model::{
    AgentId, AgentShell, Behavior, BehaviorCell, Effect, InboxEntry, LocationId, Message,
    StateStore, StepOutcome, VirtualTime,
};
use crate::registry::Registry;
use crate::trace::{detail, Detail, TraceKind, TraceLog};

/// An agent between MigrateStart and MigrateEnd: serialized, not stepped.
#[derive(Debug)]
struct Transit {
    image: Vec<u8>,
    from: LocationId,
    dest: LocationId,
    started: VirtualTime,
    due: VirtualTime,
    inbox: Vec<InboxEntry>,
    attachments: Vec<BehaviorCell>,
}

/// Per-agent bookkeeping while its behaviors step in one tick.
#[derive(Default)]
struct StepFlags {
    stopped: bool,
    migrate_to: Option<LocationId>,
}

/// Deterministic discrete-event platform.
///
/// Each processed tick runs four phases in order: deliver due messages,
/// finish due migrations, then step every runnable behavior (agents by id,
/// behaviors by list position). Effects of a step are applied right after
/// it. Ticks with nothing to do are skipped.
pub struct SimPlatform {
    config: SimConfig,
    registry: Arc<Registry>,
    rng: ChaCha8Rng,
    locations: Vec<String>,
    agents: BTreeMap<AgentId, AgentShell>,
    transit: BTreeMap<AgentId, Transit>,
    terminated: BTreeSet<AgentId>,
    /// Keyed by (due tick, message number): FIFO among equal due ticks.
    pending: BTreeMap<(VirtualTime, u64), Message>,
    next_message: u64,
    delivery_mark: u64,
    next_agent_id: u64,
    current: VirtualTime,
    processed_through: Option<VirtualTime>,
    trace: TraceLog,
    records: Vec<PersistedRecord>,
}

impl SimPlatform {
    pub fn new(config: SimConfig, registry: Registry) -> Self {
        SimPlatform::with_shared_registry(config, Arc::new(registry))
    }

    pub fn with_shared_registry(config: SimConfig, registry: Arc<Registry>) -> Self {
        SimPlatform {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            config,
            registry,
            locations: Vec::new(),
            agents: BTreeMap::new(),
            transit: BTreeMap::new(),
            terminated: BTreeSet::new(),
            pending: BTreeMap::new(),
            next_message: 0,
            delivery_mark: 0,
            next_agent_id: 0,
            current: VirtualTime::ZERO,
            processed_through: None,
            trace: TraceLog::new(),
            records: Vec::new(),
        }
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn in_transit(&self, id: AgentId) -> bool {
        self.transit.contains_key(&id)
    }

    pub fn take_trace(&mut self) -> TraceLog {
        std::mem::take(&mut self.trace)
    }

    fn first_unprocessed(&self) -> VirtualTime {
        self.processed_through.map_or(VirtualTime::ZERO, |t| t + 1)
    }

    fn check_location(&self, id: LocationId) -> Result<(), PlatformError> {
        if (id.0 as usize) < self.locations.len() {
            Ok(())
        } else {
            Err(PlatformError::UnknownLocation(id))
        }
    }

    fn location_of(&self, id: AgentId) -> Option<LocationId> {
        self.agents
            .get(&id)
            .map(|s| s.current)
            .or_else(|| self.transit.get(&id).map(|t| t.dest))
    }

    fn record(&mut self, tick: VirtualTime, kind: TraceKind, agent: AgentId, d: Detail) {
        self.trace.push(tick, kind, agent, d);
    }

    fn effect_error(&mut self, tick: VirtualTime, agent: AgentId, error: String) {
        self.record(
            tick,
            TraceKind::Custom,
            agent,
            detail([
                ("event", Value::from("effect_error")),
                ("error", Value::from(error)),
            ]),
        );
    }

    fn schedule_message(&mut self, msg: Message, from: LocationId, at: VirtualTime) {
        let to = self.location_of(msg.receiver).unwrap_or(from);
        let latency = self.config.message_latency.draw(&mut self.rng, from, to);
        let due = at + effective_latency(latency);
        let number = self.next_message;
        self.next_message += 1;
        self.record(
            at,
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
        self.pending.insert((due, number), msg);
    }

    #[allow(clippy::too_many_arguments)]
    fn insert_agent(
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
        shell.behaviors = behaviors
            .into_iter()
            .map(|b| BehaviorCell::ready_at(b, ready))
            .collect();
        self.record(
            tick,
            TraceKind::Spawn,
            id,
            detail([
                ("location", Value::from(at.0)),
                ("parent", parent.map_or(Value::Null, |p| Value::from(p.0))),
            ]),
        );
        if shell.behaviors.is_empty() {
            self.terminate(shell, tick);
        } else {
            self.agents.insert(id, shell);
        }
    }

    fn terminate(&mut self, shell: AgentShell, tick: VirtualTime) {
        self.record(
            tick,
            TraceKind::Terminate,
            shell.id,
            detail([("location", Value::from(shell.current.0))]),
        );
        self.terminated.insert(shell.id);
    }

    fn start_migration(&mut self, shell: AgentShell, dest: LocationId, tick: VirtualTime) {
        let from = shell.current;
        let latency = self
            .config
            .migration_latency
            .draw(&mut self.rng, from, dest);
        let due = tick + effective_latency(latency);
        self.record(
            tick,
            TraceKind::MigrateStart,
            shell.id,
            detail([
                ("from", Value::from(from.0)),
                ("to", Value::from(dest.0)),
                ("due", Value::from(due.0)),
            ]),
        );
        self.transit.insert(
            shell.id,
            Transit {
                image: shell.to_bytes(),
                from,
                dest,
                started: tick,
                due,
                inbox: Vec::new(),
                attachments: Vec::new(),
            },
        );
    }

    fn deliver_due(&mut self, tick: VirtualTime) {
        while let Some(entry) = self.pending.first_entry() {
            if entry.key().0 > tick {
                break;
            }
            let ((_, number), msg) = entry.remove_entry();
            let mut d = detail([
                ("msg", Value::from(number)),
                ("from", Value::from(msg.sender.0)),
                ("type", Value::from(msg.type_tag.as_str())),
                ("conversation", Value::from(msg.conversation_id.as_str())),
            ]);
            let receiver = msg.receiver;
            let live = self.agents.contains_key(&receiver) || self.transit.contains_key(&receiver);
            if live {
                self.delivery_mark += 1;
                let entry = InboxEntry {
                    message: msg,
                    delivered_at: tick,
                    mark: self.delivery_mark,
                };
                if let Some(shell) = self.agents.get_mut(&receiver) {
                    shell.inbox.push_back(entry);
                } else if let Some(t) = self.transit.get_mut(&receiver) {
                    t.inbox.push(entry);
                }
                d.insert("status".into(), Value::from("delivered"));
            } else {
                d.insert("status".into(), Value::from("failed"));
            }
            self.record(tick, TraceKind::Deliver, receiver, d);
        }
    }

    fn finish_migrations(&mut self, tick: VirtualTime) {
        let due: Vec<AgentId> = self
            .transit
            .iter()
            .filter(|(_, t)| t.due <= tick)
            .map(|(id, _)| *id)
            .collect();
        for id in due {
            let t = self.transit.remove(&id).expect("listed above");
            let mut shell = match AgentShell::from_bytes(&t.image) {
                Ok(s) => s,
                Err(e) => {
                    self.effect_error(tick, id, format!("cannot decode migrating agent: {e}"));
                    self.terminated.insert(id);
                    continue;
                }
            };
            if let Err(e) = shell.resolve(&self.registry) {
                self.effect_error(tick, id, format!("cannot resolve migrating agent: {e}"));
                self.terminated.insert(id);
                continue;
            }
            shell.current = t.dest;
            shell.arrived_at = tick;
            shell.inbox.extend(t.inbox);
            shell.behaviors.extend(t.attachments);
            self.record(
                tick,
                TraceKind::MigrateEnd,
                id,
                detail([
                    ("from", Value::from(t.from.0)),
                    ("to", Value::from(t.dest.0)),
                    ("latency", Value::from(tick.since(t.started))),
                ]),
            );
            self.agents.insert(id, shell);
        }
    }

    fn apply_effect(
        &mut self,
        shell: &mut AgentShell,
        flags: &mut StepFlags,
        effect: Effect,
        tick: VirtualTime,
    ) {
        let me = shell.id;
        match effect {
            Effect::Send(msg) => self.schedule_message(msg, shell.current, tick),
            Effect::Spawn {
                id,
                at,
                behaviors,
                state,
            } => {
                if let Err(e) = self.check_location(at) {
                    self.effect_error(tick, me, e.to_string());
                } else {
                    self.insert_agent(id, at, behaviors, state, tick, tick + 1, Some(me));
                }
            }
            Effect::Attach { target, behavior } => {
                let kind = behavior.kind().to_string();
                let cell = BehaviorCell::ready_at(behavior, tick + 1);
                let attached = if target == me {
                    shell.behaviors.push(cell);
                    true
                } else if let Some(other) = self.agents.get_mut(&target) {
                    other.behaviors.push(cell);
                    true
                } else if let Some(t) = self.transit.get_mut(&target) {
                    t.attachments.push(cell);
                    true
                } else {
                    false
                };
                if attached {
                    self.record(
                        tick,
                        TraceKind::Custom,
                        me,
                        detail([
                            ("event", Value::from("attach")),
                            ("target", Value::from(target.0)),
                            ("behavior", Value::from(kind)),
                        ]),
                    );
                } else {
                    self.effect_error(tick, me, PlatformError::UnknownAgent(target).to_string());
                }
            }
            Effect::Trace { kind, detail } => self.record(tick, kind, me, detail),
            Effect::Persist { collection, record } => {
                self.record(
                    tick,
                    TraceKind::Custom,
                    me,
                    detail([
                        ("event", Value::from("persist")),
                        ("collection", Value::from(collection.as_str())),
                    ]),
                );
                self.records.push(PersistedRecord {
                    tick,
                    agent: me,
                    collection,
                    record,
                });
            }
            Effect::Migrate(dest) => {
                if let Err(e) = self.check_location(dest) {
                    self.effect_error(tick, me, e.to_string());
                } else if flags.migrate_to.is_some() {
                    self.effect_error(tick, me, PlatformError::AlreadyMigrating(me).to_string());
                } else {
                    flags.migrate_to = Some(dest);
                }
            }
            Effect::Stop => flags.stopped = true,
        }
    }

    fn step_agents(&mut self, tick: VirtualTime) {
        let registry = Arc::clone(&self.registry);
        let ids: Vec<AgentId> = self.agents.keys().copied().collect();
        for id in ids {
            let Some(mut shell) = self.agents.remove(&id) else {
                continue;
            };
            let mut flags = StepFlags::default();
            let count = shell.behaviors.len();
            for index in 0..count {
                if flags.stopped || flags.migrate_to.is_some() {
                    break;
                }
                let Some(step) = step_cell(
                    &mut shell,
                    index,
                    tick,
                    self.delivery_mark,
                    &mut self.next_agent_id,
                    &registry,
                ) else {
                    continue;
                };
                for effect in step.effects {
                    self.apply_effect(&mut shell, &mut flags, effect, tick);
                }
                match step.result {
                    Ok(StepOutcome::Done) => {
                        self.record(
                            tick,
                            TraceKind::BehaviorDone,
                            id,
                            detail([
                                ("index", Value::from(index)),
                                ("behavior", Value::from(step.kind)),
                            ]),
                        );
                    }
                    Err(e) => {
                        self.record(
                            tick,
                            TraceKind::BehaviorDone,
                            id,
                            detail([
                                ("index", Value::from(index)),
                                ("behavior", Value::from(step.kind)),
                                ("error", Value::from(e.to_string())),
                            ]),
                        );
                    }
                    Ok(_) => {}
                }
            }
            if flags.stopped || shell.all_done() {
                self.terminate(shell, tick);
            } else if let Some(dest) = flags.migrate_to {
                self.start_migration(shell, dest, tick);
            } else {
                self.agents.insert(id, shell);
            }
        }
    }

    fn process_tick(&mut self, tick: VirtualTime) {
        self.current = tick;
        self.deliver_due(tick);
        self.finish_migrations(tick);
        self.step_agents(tick);
        self.processed_through = Some(tick);
    }

    fn next_event_tick(&self) -> Option<VirtualTime> {
        let from = self.first_unprocessed();
        let message = self.pending.keys().next().map(|(due, _)| (*due).max(from));
        let migration = self.transit.values().map(|t| t.due.max(from)).min();
        let agents = self
            .agents
            .values()
            .filter_map(|s| next_runnable_tick(s, from))
            .min();
        [message, migration, agents].into_iter().flatten().min()
    }
}

impl PlatformAdapter for SimPlatform {
    fn create_location(&mut self, name: &str) -> Result<LocationId, PlatformError> {
        if self.locations.iter().any(|n| n == name) {
            return Err(PlatformError::DuplicateLocationName(name.to_string()));
        }
        self.locations.push(name.to_string());
        Ok(LocationId(self.locations.len() as u32 - 1))
    }

    fn location_id(&self, name: &str) -> Option<LocationId> {
        self.locations
            .iter()
            .position(|n| n == name)
            .map(|i| LocationId(i as u32))
    }

    fn location_name(&self, id: LocationId) -> Option<&str> {
        self.locations.get(id.0 as usize).map(String::as_str)
    }

    fn spawn_agent_with_state(
        &mut self,
        at: LocationId,
        behaviors: Vec<Box<dyn Behavior>>,
        state: StateStore,
    ) -> Result<AgentId, PlatformError> {
        self.check_location(at)?;
        let id = AgentId(self.next_agent_id);
        self.next_agent_id += 1;
        let tick = self.first_unprocessed();
        self.insert_agent(id, at, behaviors, state, tick, tick, None);
        Ok(id)
    }

    fn send(&mut self, msg: Message) -> Result<(), PlatformError> {
        let from = self
            .location_of(msg.sender)
            .ok_or(PlatformError::UnknownAgent(msg.sender))?;
        let tick = self.first_unprocessed();
        self.schedule_message(msg, from, tick);
        Ok(())
    }

    fn migrate(&mut self, agent: AgentId, dest: LocationId) -> Result<(), PlatformError> {
        self.check_location(dest)?;
        if self.transit.contains_key(&agent) {
            return Err(PlatformError::AlreadyMigrating(agent));
        }
        let shell = self
            .agents
            .remove(&agent)
            .ok_or(PlatformError::UnknownAgent(agent))?;
        let tick = self.first_unprocessed();
        self.start_migration(shell, dest, tick);
        Ok(())
    }

    fn attach_behavior(
        &mut self,
        target: AgentId,
        behavior: Box<dyn Behavior>,
    ) -> Result<(), PlatformError> {
        let tick = self.first_unprocessed();
        let kind = behavior.kind().to_string();
        let cell = BehaviorCell::ready_at(behavior, tick);
        if let Some(shell) = self.agents.get_mut(&target) {
            shell.behaviors.push(cell);
        } else if let Some(t) = self.transit.get_mut(&target) {
            t.attachments.push(cell);
        } else {
            return Err(PlatformError::UnknownAgent(target));
        }
        self.record(
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
        self.processed_through.unwrap_or(self.current)
    }

    fn run(&mut self, until: RunUntil) -> Result<&TraceLog, PlatformError> {
        loop {
            let Some(next) = self.next_event_tick() else {
                if let RunUntil::Tick(limit) = until {
                    if self.processed_through.is_none_or(|t| t < limit) {
                        self.processed_through = Some(limit);
                    }
                }
                return Ok(&self.trace);
            };
            if let RunUntil::Tick(limit) = until {
                if next > limit {
                    if self.processed_through.is_none_or(|t| t < limit) {
                        self.processed_through = Some(limit);
                    }
                    return Ok(&self.trace);
                }
            }
            if next > self.config.max_ticks {
                return Err(PlatformError::TickBudgetExceeded {
                    max_ticks: self.config.max_ticks,
                    next,
                });
            }
            self.process_tick(next);
        }
    }

    fn trace(&self) -> &TraceLog {
        &self.trace
    }

    fn registry(&self) -> &Registry {
        &self.registry
    }

    fn agent(&self, id: AgentId) -> Option<&AgentShell> {
        self.agents.get(&id)
    }

    fn is_live(&self, id: AgentId) -> bool {
        self.agents.contains_key(&id) || self.transit.contains_key(&id)
    }

    fn live_agents(&self) -> Vec<AgentId> {
        let mut ids: Vec<AgentId> = self
            .agents
            .keys()
            .chain(self.transit.keys())
            .copied()
            .collect();
        ids.sort();
        ids
    }

    fn persisted(&self) -> &[PersistedRecord] {
        &self.records
    }
}
