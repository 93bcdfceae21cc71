use serde::{Deserialize, Serialize};

use super::Window;
use crate::model::{LocationId, VirtualTime};

/// Smoothing factor `num / den`, between 0 and 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alpha {
    pub num: u64,
    pub den: u64,
}

impl Alpha {
    pub const HALF: Alpha = Alpha { num: 1, den: 2 };
    pub const ONE: Alpha = Alpha { num: 1, den: 1 };

    pub fn new(num: u64, den: u64) -> Option<Self> {
        (den > 0 && num <= den).then_some(Alpha { num, den })
    }
}

impl Default for Alpha {
    fn default() -> Self {
        Alpha::HALF
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkEstimate {
    pub from: LocationId,
    pub to: LocationId,
    /// Thousandths of a tick.
    pub milli: u64,
}

/// Per-link exponential moving average of observed migration delays.
///
/// Estimates are kept in milli-ticks; each update is
/// `round_half_up((num * observed + (den - num) * prior) / den)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DelayEstimator {
    alpha: Alpha,
    default_milli: u64,
    #[serde(default)]
    links: Vec<LinkEstimate>,
}

impl Default for DelayEstimator {
    fn default() -> Self {
        DelayEstimator::new(Alpha::HALF, 0)
    }
}

impl DelayEstimator {
    pub fn new(alpha: Alpha, default_estimate: u64) -> Self {
        DelayEstimator {
            alpha,
            default_milli: default_estimate.saturating_mul(1000),
            links: Vec::new(),
        }
    }

    pub fn alpha(&self) -> Alpha {
        self.alpha
    }

    pub fn estimate_milli(&self, from: LocationId, to: LocationId) -> u64 {
        self.links
            .iter()
            .find(|l| l.from == from && l.to == to)
            .map_or(self.default_milli, |l| l.milli)
    }

    /// Whole ticks, rounded up: planning never assumes a faster trip than
    /// the estimate.
    pub fn estimate(&self, from: LocationId, to: LocationId) -> u64 {
        self.estimate_milli(from, to).div_ceil(1000)
    }

    pub fn observe(&mut self, from: LocationId, to: LocationId, observed: u64) {
        let prior = self.estimate_milli(from, to) as u128;
        let Alpha { num, den } = self.alpha;
        let (num, den) = (num as u128, den as u128);
        let total = num * observed as u128 * 1000 + (den - num) * prior;
        let milli = ((total + den / 2) / den) as u64;
        match self.links.iter_mut().find(|l| l.from == from && l.to == to) {
            Some(l) => l.milli = milli,
            None => {
                let pos = self.links.partition_point(|l| (l.from, l.to) < (from, to));
                self.links.insert(pos, LinkEstimate { from, to, milli });
            }
        }
    }

    pub fn links(&self) -> &[LinkEstimate] {
        &self.links
    }
}

pub fn observe_and_update_delay(
    mut est: DelayEstimator,
    link: (LocationId, LocationId),
    observed: u64,
) -> DelayEstimator {
    est.observe(link.0, link.1, observed);
    est
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeparturePlan {
    pub depart_at: VirtualTime,
    /// Leaving now is already predicted to miss the window end.
    pub predicted_late: bool,
}

/// Latest departure that still predicts arrival at the window start, but
/// never earlier than `now`.
pub fn next_departure_plan(
    est: &DelayEstimator,
    current: LocationId,
    next: LocationId,
    window: Window,
    now: VirtualTime,
) -> DeparturePlan {
    let estimate = est.estimate(current, next);
    let latest_safe = VirtualTime(window.start.0.saturating_sub(estimate));
    DeparturePlan {
        depart_at: now.max(latest_safe),
        predicted_late: now + estimate > window.end,
    }
}
