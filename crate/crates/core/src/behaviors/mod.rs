//! Leaf behavior patterns: Task, Observer, Listener, Client, Server and the
//! Role Factory.

mod client;
mod listener;
mod observer;
pub mod protocol;
mod role;
mod server;
mod task;

pub use client::{Client, ServerRef};
pub use listener::Listener;
pub use observer::{Mode, Observer};
pub use protocol::{RequestEnvelope, ResultPayload, ResultStatus};
pub use role::{assign_role, assign_role_to_group, RoleError};
pub use server::{Server, ServerWorker};
pub use task::Task;
