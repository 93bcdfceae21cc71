use std::fmt;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{AgentContext, StepOutcome, VirtualTime, WakeCondition, WakeView};
use crate::registry::Registry;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BehaviorError {
    #[error("behavior stepped after it returned Done")]
    SteppingDone,
    #[error("unknown behavior kind `{0}`")]
    UnknownKind(String),
    #[error("unknown action `{0}`")]
    UnknownAction(String),
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
    #[error("unknown role `{0}`")]
    UnknownRole(String),
    #[error("cannot decode behavior state: {0}")]
    Decode(String),
    #[error("invalid behavior: {0}")]
    Invalid(String),
}

/// A resumable unit of agent activity. The runtime calls [`Behavior::step`]
/// whenever the behavior is runnable; everything the behavior wants to happen
/// outside itself goes through the context and is applied after the step.
///
/// Internal state must round-trip through [`Behavior::snapshot`] and the
/// decoder registered for [`Behavior::kind`], otherwise the behavior cannot
/// migrate.
pub trait Behavior: BehaviorClone + Send + fmt::Debug {
    fn kind(&self) -> &str;
    fn step(&mut self, ctx: &mut AgentContext<'_>) -> Result<StepOutcome, BehaviorError>;
    fn snapshot(&self) -> Value;
}

pub trait BehaviorClone {
    fn clone_box(&self) -> Box<dyn Behavior>;
}

impl<T: Behavior + Clone + 'static> BehaviorClone for T {
    fn clone_box(&self) -> Box<dyn Behavior> {
        Box::new(self.clone())
    }
}

impl Clone for Box<dyn Behavior> {
    fn clone(&self) -> Self {
        self.clone_box()
    }
}

/// Serializes a behavior's state for [`Behavior::snapshot`].
pub fn snapshot_of<T: Serialize>(value: &T) -> Value {
    serde_json::to_value(value).expect("behavior state serializes to JSON")
}

/// Decoder used when registering serde-backed behaviors.
pub fn decode_as<T>(state: Value) -> Result<Box<dyn Behavior>, BehaviorError>
where
    T: Behavior + DeserializeOwned + 'static,
{
    serde_json::from_value::<T>(state)
        .map(|b| Box::new(b) as Box<dyn Behavior>)
        .map_err(|e| BehaviorError::Decode(e.to_string()))
}

/// Scheduling status of a behavior slot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    /// Runnable once the clock reaches the tick.
    Ready(VirtualTime),
    Blocked {
        wake: WakeCondition,
        mark: u64,
    },
    Done,
}

#[derive(Debug, Clone)]
enum CellBody {
    Live(Box<dyn Behavior>),
    /// Decoded from bytes but not yet bound to an implementation; resolved
    /// through the registry on first use.
    Image {
        kind: String,
        state: Value,
    },
}

/// A behavior together with its scheduling status. Used by the platforms for
/// top-level behaviors and by composites for their children; it enforces the
/// "never step after Done" rule in one place.
#[derive(Debug, Clone)]
pub struct BehaviorCell {
    body: CellBody,
    status: CellStatus,
    steps: u64,
}

impl BehaviorCell {
    pub fn new(behavior: Box<dyn Behavior>) -> Self {
        BehaviorCell {
            body: CellBody::Live(behavior),
            status: CellStatus::Ready(VirtualTime::ZERO),
            steps: 0,
        }
    }

    pub fn ready_at(behavior: Box<dyn Behavior>, at: VirtualTime) -> Self {
        let mut cell = BehaviorCell::new(behavior);
        cell.status = CellStatus::Ready(at);
        cell
    }

    pub fn kind(&self) -> &str {
        match &self.body {
            CellBody::Live(b) => b.kind(),
            CellBody::Image { kind, .. } => kind,
        }
    }

    pub fn status(&self) -> &CellStatus {
        &self.status
    }

    pub fn set_ready_at(&mut self, at: VirtualTime) {
        if !self.is_done() {
            self.status = CellStatus::Ready(at);
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn is_done(&self) -> bool {
        self.status == CellStatus::Done
    }

    pub fn is_runnable(&self, view: &WakeView<'_>) -> bool {
        match &self.status {
            CellStatus::Ready(at) => *at <= view.now,
            CellStatus::Blocked { wake, mark } => wake.is_satisfied(view, *mark),
            CellStatus::Done => false,
        }
    }

    /// Wake condition to report upward while this cell waits.
    pub fn pending_wake(&self) -> Option<WakeCondition> {
        match &self.status {
            CellStatus::Ready(at) => Some(WakeCondition::AtTime(*at)),
            CellStatus::Blocked { wake, .. } => Some(wake.clone()),
            CellStatus::Done => None,
        }
    }

    pub fn next_timer(&self) -> Option<VirtualTime> {
        match &self.status {
            CellStatus::Ready(at) => Some(*at),
            CellStatus::Blocked { wake, .. } => wake.next_timer(),
            CellStatus::Done => None,
        }
    }

    /// Binds an image to its implementation.
    pub fn resolve(
        &mut self,
        registry: &Registry,
    ) -> Result<&mut Box<dyn Behavior>, BehaviorError> {
        if let CellBody::Image { kind, state } = &self.body {
            let live = registry.decode_behavior(kind, state.clone())?;
            self.body = CellBody::Live(live);
        }
        match &mut self.body {
            CellBody::Live(b) => Ok(b),
            CellBody::Image { .. } => unreachable!(),
        }
    }

    pub fn behavior(&self) -> Option<&dyn Behavior> {
        match &self.body {
            CellBody::Live(b) => Some(b.as_ref()),
            CellBody::Image { .. } => None,
        }
    }

    pub fn behavior_mut(&mut self) -> Option<&mut Box<dyn Behavior>> {
        match &mut self.body {
            CellBody::Live(b) => Some(b),
            CellBody::Image { .. } => None,
        }
    }

    pub fn snapshot(&self) -> Value {
        match &self.body {
            CellBody::Live(b) => b.snapshot(),
            CellBody::Image { state, .. } => state.clone(),
        }
    }

    /// Steps the behavior once and records the resulting status. A behavior
    /// that errors is retired as if it had returned Done.
    pub fn step(&mut self, ctx: &mut AgentContext<'_>) -> Result<StepOutcome, BehaviorError> {
        if self.is_done() {
            return Err(BehaviorError::SteppingDone);
        }
        let registry = ctx.registry();
        let result = self.resolve(registry).and_then(|b| b.step(ctx));
        self.steps += 1;
        self.status = match &result {
            Ok(StepOutcome::Running) => CellStatus::Ready(ctx.now() + 1),
            Ok(StepOutcome::Blocked(wake)) => CellStatus::Blocked {
                wake: wake.clone(),
                mark: ctx.delivery_mark(),
            },
            Ok(StepOutcome::Done) | Err(_) => CellStatus::Done,
        };
        result
    }
}

impl PartialEq for BehaviorCell {
    fn eq(&self, other: &Self) -> bool {
        self.kind() == other.kind()
            && self.status == other.status
            && self.steps == other.steps
            && self.snapshot() == other.snapshot()
    }
}

#[derive(Serialize, Deserialize)]
struct CellImage {
    kind: String,
    state: Value,
    status: CellStatus,
    steps: u64,
}

impl Serialize for BehaviorCell {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        CellImage {
            kind: self.kind().to_string(),
            state: self.snapshot(),
            status: self.status.clone(),
            steps: self.steps,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for BehaviorCell {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let image = CellImage::deserialize(d)?;
        Ok(BehaviorCell {
            body: CellBody::Image {
                kind: image.kind,
                state: image.state,
            },
            status: image.status,
            steps: image.steps,
        })
    }
}
