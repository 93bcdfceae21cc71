use crate::model::{AgentId, Behavior, BehaviorError};
use crate::platform::{PlatformAdapter, PlatformError};
use crate::registry::Registry;

#[derive(Debug, thiserror::Error)]
pub enum RoleError {
    #[error("unknown role `{0}`")]
    UnknownRole(String),
    #[error("unknown agent {0}")]
    UnknownAgent(AgentId),
    #[error("role constructor failed: {0}")]
    Construct(String),
    #[error(transparent)]
    Platform(PlatformError),
}

fn construct(
    registry: &Registry,
    role: &str,
    params: &[u8],
) -> Result<Box<dyn Behavior>, RoleError> {
    registry
        .roles()
        .construct(role, params)
        .map_err(|e| match e {
            BehaviorError::UnknownRole(r) => RoleError::UnknownRole(r),
            other => RoleError::Construct(other.to_string()),
        })
}

/// Role Factory: builds the behavior registered under `role` and appends it
/// to `target`. The target starts stepping it on the next tick.
pub fn assign_role<P: PlatformAdapter + ?Sized>(
    platform: &mut P,
    target: AgentId,
    role: &str,
    params: &[u8],
) -> Result<(), RoleError> {
    let behavior = construct(platform.registry(), role, params)?;
    if !platform.is_live(target) {
        return Err(RoleError::UnknownAgent(target));
    }
    platform
        .attach_behavior(target, behavior)
        .map_err(|e| match e {
            PlatformError::UnknownAgent(id) => RoleError::UnknownAgent(id),
            other => RoleError::Platform(other),
        })
}

/// Assigns the same role to every agent in a group, in order.
pub fn assign_role_to_group<P: PlatformAdapter + ?Sized>(
    platform: &mut P,
    group: &[AgentId],
    role: &str,
    params: &[u8],
) -> Result<(), RoleError> {
    for &agent in group {
        assign_role(platform, agent, role, params)?;
    }
    Ok(())
}
