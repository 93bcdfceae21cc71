use serde::{Deserialize, Serialize};

use super::{type_matches, InboxEntry, LocationId, VirtualTime};

/// What a blocked behavior waits for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WakeCondition {
    AtTime(VirtualTime),
    /// Type filter; `"*"` matches everything.
    OnMessage(String),
    OnArrival(LocationId),
    /// Satisfied when any member is. The empty set never wakes.
    AnyOf(Vec<WakeCondition>),
}

impl WakeCondition {
    pub fn never() -> Self {
        WakeCondition::AnyOf(Vec::new())
    }

    pub fn message_or_deadline(filter: impl Into<String>, deadline: VirtualTime) -> Self {
        WakeCondition::AnyOf(vec![
            WakeCondition::OnMessage(filter.into()),
            WakeCondition::AtTime(deadline),
        ])
    }

    /// `mark` is the delivery mark observed when the behavior blocked; only
    /// messages delivered after it count.
    pub fn is_satisfied(&self, view: &WakeView<'_>, mark: u64) -> bool {
        match self {
            WakeCondition::AtTime(t) => view.now >= *t,
            WakeCondition::OnMessage(filter) => view
                .inbox
                .iter()
                .any(|e| e.mark > mark && type_matches(filter, &e.message.type_tag)),
            WakeCondition::OnArrival(loc) => !view.migrating && view.location == *loc,
            WakeCondition::AnyOf(all) => all.iter().any(|c| c.is_satisfied(view, mark)),
        }
    }

    /// Earliest tick at which a timer inside this condition fires.
    pub fn next_timer(&self) -> Option<VirtualTime> {
        match self {
            WakeCondition::AtTime(t) => Some(*t),
            WakeCondition::AnyOf(all) => all.iter().filter_map(|c| c.next_timer()).min(),
            _ => None,
        }
    }
}

/// The slice of agent state a wake check needs.
#[derive(Debug, Clone, Copy)]
pub struct WakeView<'a> {
    pub now: VirtualTime,
    pub location: LocationId,
    pub migrating: bool,
    pub inbox: &'a std::collections::VecDeque<InboxEntry>,
}

/// Result of stepping a behavior once.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepOutcome {
    /// Runnable again on the next tick.
    Running,
    Done,
    Blocked(WakeCondition),
}
