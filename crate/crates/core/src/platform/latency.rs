use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::LocationId;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkLatency {
    pub from: LocationId,
    pub to: LocationId,
    pub ticks: u64,
}

/// How long a message or a migration takes, in ticks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatencyModel {
    Fixed(u64),
    /// Drawn uniformly from `lo..=hi` with the platform's seeded generator.
    UniformRange {
        lo: u64,
        hi: u64,
    },
    /// Directed per-link values; unlisted links use `default`.
    PerLink {
        links: Vec<LinkLatency>,
        default: u64,
    },
}

impl LatencyModel {
    pub fn validate(&self) -> Result<(), String> {
        match self {
            LatencyModel::UniformRange { lo, hi } if lo > hi => {
                Err(format!("uniform latency has lo {lo} > hi {hi}"))
            }
            _ => Ok(()),
        }
    }

    pub fn is_random(&self) -> bool {
        matches!(self, LatencyModel::UniformRange { lo, hi } if lo != hi)
    }

    /// Deterministic value for non-random models.
    pub fn fixed_value(&self, from: LocationId, to: LocationId) -> Option<u64> {
        match self {
            LatencyModel::Fixed(d) => Some(*d),
            LatencyModel::UniformRange { lo, hi } if lo == hi => Some(*lo),
            LatencyModel::UniformRange { .. } => None,
            LatencyModel::PerLink { links, default } => Some(
                links
                    .iter()
                    .find(|l| l.from == from && l.to == to)
                    .map_or(*default, |l| l.ticks),
            ),
        }
    }

    pub fn draw(&self, rng: &mut ChaCha8Rng, from: LocationId, to: LocationId) -> u64 {
        match self {
            LatencyModel::UniformRange { lo, hi } => rng.gen_range(*lo..=*hi),
            other => other.fixed_value(from, to).expect("non-random model"),
        }
    }
}
