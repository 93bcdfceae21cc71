use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{classify_arrival, next_departure_plan, ArrivalClass, DelayEstimator, Route, Window};
use crate::composite::step_child;
use crate::model::{
    snapshot_of, AgentContext, Behavior, BehaviorCell, BehaviorError, LocationId, StepOutcome,
    VirtualTime, WakeCondition,
};
use crate::registry::ActionDescriptor;
use crate::trace::{detail, TraceKind};

/// State key holding `{index, location, arrival}` of the objective being
/// served, for listeners and stop tasks.
pub const OBJECTIVE_STATE_KEY: &str = "itinerary.objective";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeparturePolicy {
    /// Leave as soon as the previous stop is served; wait at the destination
    /// if early.
    #[default]
    Immediate,
    /// Leave at the time given by [`next_departure_plan`].
    JustInTime,
}

/// Route, reached-listeners and missed behavior. There are no setters: the
/// configuration cannot change once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItineraryConfig {
    route: Route,
    reached_listeners: Vec<ActionDescriptor>,
    missed_behavior: Option<BehaviorCell>,
}

impl ItineraryConfig {
    pub fn new(
        route: Route,
        reached_listeners: Vec<ActionDescriptor>,
        missed_behavior: Option<Box<dyn Behavior>>,
    ) -> Self {
        ItineraryConfig {
            route,
            reached_listeners,
            missed_behavior: missed_behavior.map(BehaviorCell::new),
        }
    }

    pub fn route(&self) -> &Route {
        &self.route
    }

    pub fn reached_listeners(&self) -> &[ActionDescriptor] {
        &self.reached_listeners
    }

    pub fn has_missed_behavior(&self) -> bool {
        self.missed_behavior.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Phase {
    Plan,
    Departing {
        at: VirtualTime,
    },
    Travelling {
        from: LocationId,
        dest: LocationId,
        departed: VirtualTime,
    },
    Waiting {
        arrival: VirtualTime,
    },
    Missed {
        child: BehaviorCell,
    },
    Halted,
    Finished,
}

/// Drives its agent along a route. Arrivals before the window wait for it
/// to open; arrivals after it are traced as missed and handed to the missed
/// behavior, or halt the itinerary when there is none.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Itinerary {
    config: ItineraryConfig,
    #[serde(default)]
    policy: DeparturePolicy,
    #[serde(default)]
    estimator: DelayEstimator,
    #[serde(default)]
    index: usize,
    phase: Phase,
}

impl Itinerary {
    pub const KIND: &'static str = "itinerary";

    pub fn new(config: ItineraryConfig) -> Self {
        Itinerary {
            config,
            policy: DeparturePolicy::default(),
            estimator: DelayEstimator::default(),
            index: 0,
            phase: Phase::Plan,
        }
    }

    pub fn with_policy(mut self, policy: DeparturePolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn with_estimator(mut self, estimator: DelayEstimator) -> Self {
        self.estimator = estimator;
        self
    }

    pub fn config(&self) -> &ItineraryConfig {
        &self.config
    }

    pub fn estimator(&self) -> &DelayEstimator {
        &self.estimator
    }

    /// Index of the objective being worked on.
    pub fn position(&self) -> usize {
        self.index
    }

    pub fn is_halted(&self) -> bool {
        self.phase == Phase::Halted
    }

    fn window(&self) -> Window {
        self.config.route.window(self.index)
    }

    fn target(&self) -> LocationId {
        self.config.route.objectives()[self.index].location
    }

    fn depart(&mut self, ctx: &mut AgentContext<'_>) -> StepOutcome {
        let dest = self.target();
        ctx.request_migration(dest);
        self.phase = Phase::Travelling {
            from: ctx.location(),
            dest,
            departed: ctx.now(),
        };
        StepOutcome::Blocked(WakeCondition::OnArrival(dest))
    }

    fn objective_detail(&self, arrival: VirtualTime) -> crate::trace::Detail {
        let w = self.window();
        detail([
            ("index", Value::from(self.index)),
            ("location", Value::from(self.target().0)),
            ("arrival", Value::from(arrival.0)),
            ("window_start", Value::from(w.start.0)),
            ("window_end", Value::from(w.end.0)),
        ])
    }

    /// Returns `Some` when the step must end here.
    fn arrive(
        &mut self,
        ctx: &mut AgentContext<'_>,
        arrival: VirtualTime,
    ) -> Result<Option<StepOutcome>, BehaviorError> {
        ctx.set_state(
            OBJECTIVE_STATE_KEY,
            &json!({"index": self.index, "location": self.target(), "arrival": arrival}),
        );
        match classify_arrival(self.window(), arrival) {
            ArrivalClass::Early { wait_until } => {
                self.phase = Phase::Waiting { arrival };
                Ok(Some(StepOutcome::Blocked(WakeCondition::AtTime(
                    wait_until,
                ))))
            }
            ArrivalClass::OnTime => {
                self.serve(ctx, arrival);
                Ok(None)
            }
            ArrivalClass::Late { by } => {
                let mut d = self.objective_detail(arrival);
                d.insert("late_by".into(), Value::from(by));
                ctx.trace(TraceKind::ObjectiveMissed, d);
                match &self.config.missed_behavior {
                    Some(template) => {
                        let mut child = template.clone();
                        child.resolve(ctx.registry())?;
                        self.phase = Phase::Missed { child };
                        Ok(None)
                    }
                    None => {
                        ctx.trace_custom(
                            "agent_halted",
                            detail([("index", Value::from(self.index))]),
                        );
                        self.phase = Phase::Halted;
                        Ok(Some(StepOutcome::Blocked(WakeCondition::never())))
                    }
                }
            }
        }
    }

    fn serve(&mut self, ctx: &mut AgentContext<'_>, arrival: VirtualTime) {
        let mut d = self.objective_detail(arrival);
        d.insert("served_at".into(), Value::from(ctx.now().0));
        ctx.trace(TraceKind::ObjectiveReached, d);
        let objective = &self.config.route.objectives()[self.index];
        for action in self
            .config
            .reached_listeners
            .iter()
            .chain(&objective.stop_tasks)
        {
            ctx.run_action_traced(action, None);
        }
        self.index += 1;
        self.phase = Phase::Plan;
    }
}

impl Behavior for Itinerary {
    fn kind(&self) -> &str {
        Self::KIND
    }

    fn step(&mut self, ctx: &mut AgentContext<'_>) -> Result<StepOutcome, BehaviorError> {
        let now = ctx.now();
        loop {
            match &mut self.phase {
                Phase::Finished => return Ok(StepOutcome::Done),
                Phase::Halted => return Ok(StepOutcome::Blocked(WakeCondition::never())),
                Phase::Plan => {
                    if self.index >= self.config.route.len() {
                        self.phase = Phase::Finished;
                        return Ok(StepOutcome::Done);
                    }
                    if ctx.location() == self.target() {
                        if let Some(out) = self.arrive(ctx, now)? {
                            return Ok(out);
                        }
                        continue;
                    }
                    if self.policy == DeparturePolicy::JustInTime {
                        let plan = next_departure_plan(
                            &self.estimator,
                            ctx.location(),
                            self.target(),
                            self.window(),
                            now,
                        );
                        if plan.depart_at > now {
                            self.phase = Phase::Departing { at: plan.depart_at };
                            return Ok(StepOutcome::Blocked(WakeCondition::AtTime(plan.depart_at)));
                        }
                    }
                    return Ok(self.depart(ctx));
                }
                Phase::Departing { at } => {
                    if now < *at {
                        return Ok(StepOutcome::Blocked(WakeCondition::AtTime(*at)));
                    }
                    return Ok(self.depart(ctx));
                }
                Phase::Travelling {
                    from,
                    dest,
                    departed,
                } => {
                    if ctx.location() != *dest {
                        return Ok(StepOutcome::Blocked(WakeCondition::OnArrival(*dest)));
                    }
                    let (from, dest, departed) = (*from, *dest, *departed);
                    let arrival = ctx.arrived_at();
                    self.estimator.observe(from, dest, arrival.since(departed));
                    if let Some(out) = self.arrive(ctx, arrival)? {
                        return Ok(out);
                    }
                }
                Phase::Waiting { arrival } => {
                    let arrival = *arrival;
                    let start = self.window().start;
                    if now < start {
                        return Ok(StepOutcome::Blocked(WakeCondition::AtTime(start)));
                    }
                    self.serve(ctx, arrival);
                }
                Phase::Missed { child } => {
                    step_child(ctx, self.index, child);
                    if !child.is_done() {
                        return Ok(StepOutcome::Blocked(
                            child.pending_wake().expect("child not done"),
                        ));
                    }
                    self.index += 1;
                    self.phase = Phase::Plan;
                }
            }
        }
    }

    fn snapshot(&self) -> Value {
        snapshot_of(self)
    }
}

/// Ready-made missed behaviors.
pub mod missed {
    use crate::behaviors::Task;
    use crate::model::Behavior;
    use crate::registry::ActionDescriptor;

    /// Logs the miss; the itinerary then moves on to the next objective.
    pub fn skip_and_log() -> Box<dyn Behavior> {
        Task::boxed(ActionDescriptor::with_params(
            "log",
            b"objective missed".to_vec(),
        ))
    }

    /// Stops the whole agent.
    pub fn abort() -> Box<dyn Behavior> {
        Task::boxed(ActionDescriptor::new("stop"))
    }
}
