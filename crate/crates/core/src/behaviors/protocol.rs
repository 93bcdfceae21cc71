//! Wire format of the client/server exchange. Payloads are canonical JSON
//! (fixed field order, bytes as base64).

use serde::{Deserialize, Serialize};

use crate::registry::ActionDescriptor;

pub const REQUEST: &str = "REQUEST";
pub const ACK: &str = "ACK";
pub const RESULT: &str = "RESULT";

/// Default timeouts, in ticks, when a scenario leaves them out.
pub const DEFAULT_ACK_TIMEOUT: u64 = 50;
pub const DEFAULT_RESULT_TIMEOUT: u64 = 500;

/// REQUEST payload: the task the server should run and the conversation the
/// result belongs to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RequestEnvelope {
    pub result_slot: String,
    pub task: ActionDescriptor,
}

impl RequestEnvelope {
    pub fn encode(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("envelope serializes")
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, serde_json::Error> {
        serde_json::from_slice(bytes)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AckPayload {
    pub conversation_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResultStatus {
    Ok,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultPayload {
    pub conversation_id: String,
    pub status: ResultStatus,
    #[serde(with = "crate::codec::b64_opt", default)]
    pub output: Option<Vec<u8>>,
    #[serde(default)]
    pub error: Option<String>,
}

impl ResultPayload {
    pub fn encode(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("result payload serializes")
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, serde_json::Error> {
        serde_json::from_slice(bytes)
    }
}
