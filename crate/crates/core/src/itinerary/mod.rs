//! Travel along a route of objectives, each with an arrival window.

mod behavior;
mod estimator;

pub use behavior::{missed, DeparturePolicy, Itinerary, ItineraryConfig, OBJECTIVE_STATE_KEY};
pub use estimator::{
    next_departure_plan, observe_and_update_delay, Alpha, DelayEstimator, DeparturePlan,
    LinkEstimate,
};

use serde::{Deserialize, Serialize};

use crate::model::{LocationId, VirtualTime};
use crate::registry::ActionDescriptor;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ItineraryError {
    #[error("route has no objectives")]
    EmptyRoute,
    #[error("objective {index}: earliest offset {earliest} is after latest offset {latest}")]
    InvertedWindow {
        index: usize,
        earliest: u64,
        latest: u64,
    },
}

/// Inclusive arrival window in absolute ticks. `end == VirtualTime::NEVER`
/// means unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub start: VirtualTime,
    pub end: VirtualTime,
}

impl Window {
    pub fn new(start: u64, end: u64) -> Self {
        Window {
            start: VirtualTime(start),
            end: VirtualTime(end),
        }
    }

    pub fn contains(&self, t: VirtualTime) -> bool {
        self.start <= t && t <= self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrivalClass {
    Early { wait_until: VirtualTime },
    OnTime,
    Late { by: u64 },
}

pub fn classify_arrival(window: Window, arrival: VirtualTime) -> ArrivalClass {
    if arrival < window.start {
        ArrivalClass::Early {
            wait_until: window.start,
        }
    } else if arrival > window.end {
        ArrivalClass::Late {
            by: arrival.since(window.end),
        }
    } else {
        ArrivalClass::OnTime
    }
}

fn unbounded() -> u64 {
    u64::MAX
}

/// One stop: where to be, when (relative to the route's base time), and what
/// to do there.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Objective {
    pub location: LocationId,
    #[serde(default)]
    pub earliest_offset: u64,
    /// `u64::MAX` leaves the window open-ended.
    #[serde(default = "unbounded")]
    pub latest_offset: u64,
    #[serde(default)]
    pub stop_tasks: Vec<ActionDescriptor>,
}

impl Objective {
    pub fn new(location: LocationId, earliest_offset: u64, latest_offset: u64) -> Self {
        Objective {
            location,
            earliest_offset,
            latest_offset,
            stop_tasks: Vec::new(),
        }
    }

    pub fn open_ended(location: LocationId) -> Self {
        Objective::new(location, 0, unbounded())
    }

    pub fn with_tasks(mut self, tasks: Vec<ActionDescriptor>) -> Self {
        self.stop_tasks = tasks;
        self
    }

    pub fn window(&self, base: VirtualTime) -> Window {
        Window {
            start: base + self.earliest_offset,
            end: base + self.latest_offset,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Route {
    objectives: Vec<Objective>,
    base_time: VirtualTime,
}

impl Route {
    pub fn new(objectives: Vec<Objective>, base_time: VirtualTime) -> Result<Self, ItineraryError> {
        if objectives.is_empty() {
            return Err(ItineraryError::EmptyRoute);
        }
        for (index, o) in objectives.iter().enumerate() {
            if o.earliest_offset > o.latest_offset {
                return Err(ItineraryError::InvertedWindow {
                    index,
                    earliest: o.earliest_offset,
                    latest: o.latest_offset,
                });
            }
        }
        Ok(Route {
            objectives,
            base_time,
        })
    }

    pub fn objectives(&self) -> &[Objective] {
        &self.objectives
    }

    pub fn base_time(&self) -> VirtualTime {
        self.base_time
    }

    pub fn len(&self) -> usize {
        self.objectives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objectives.is_empty()
    }

    pub fn window(&self, index: usize) -> Window {
        self.objectives[index].window(self.base_time)
    }
}
