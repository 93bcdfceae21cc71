//! Reusable mobile-agent behaviors on top of a platform adapter, with a
//! deterministic simulated platform and an assessment case study.

pub mod assessment;
pub mod behaviors;
pub mod codec;
pub mod composite;
pub mod itinerary;
pub mod model;
pub mod platform;
pub mod registry;
pub mod scenario;
pub mod sweep;
pub mod trace;
pub mod workload;

pub use model::{AgentId, LocationId, Message, VirtualTime};
pub use platform::{PlatformAdapter, PlatformError, RunUntil, SimConfig, SimPlatform};
pub use registry::{ActionDescriptor, Registry};
