use serde::{Deserialize, Serialize};

use super::{AgentId, ModelError, VirtualTime};

/// Wildcard type filter: matches every `type_tag`.
pub const ANY_TYPE: &str = "*";

/// Typed, addressed unit of communication between agents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub sender: AgentId,
    pub receiver: AgentId,
    pub type_tag: String,
    pub conversation_id: String,
    #[serde(with = "crate::codec::b64")]
    pub payload: Vec<u8>,
    pub sent_at: VirtualTime,
}

impl Message {
    pub fn new(
        sender: AgentId,
        receiver: AgentId,
        type_tag: impl Into<String>,
        conversation_id: impl Into<String>,
        payload: Vec<u8>,
        sent_at: VirtualTime,
    ) -> Result<Self, ModelError> {
        let type_tag = type_tag.into();
        if type_tag.is_empty() {
            return Err(ModelError::EmptyTypeTag);
        }
        Ok(Message {
            sender,
            receiver,
            type_tag,
            conversation_id: conversation_id.into(),
            payload,
            sent_at,
        })
    }

    pub fn matches(&self, filter: &str) -> bool {
        type_matches(filter, &self.type_tag)
    }
}

pub fn type_matches(filter: &str, type_tag: &str) -> bool {
    filter == ANY_TYPE || filter == type_tag
}

/// A delivered message as it sits in an agent's inbox. `mark` is the
/// platform-wide delivery sequence number, used to decide whether a message
/// arrived after a behavior blocked.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InboxEntry {
    pub message: Message,
    pub delivered_at: VirtualTime,
    pub mark: u64,
}
