use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::protocol::{RequestEnvelope, ACK, REQUEST, RESULT};
use crate::model::{
    snapshot_of, AgentContext, AgentId, Behavior, BehaviorError, StepOutcome, VirtualTime,
    WakeCondition,
};
use crate::registry::ActionDescriptor;
use crate::trace::Detail;

/// Where the client finds its server.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ServerRef {
    Agent(AgentId),
    /// Agent id stored in the owning agent's state under this key.
    State(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Phase {
    Start,
    AwaitAck {
        server: AgentId,
        deadline: VirtualTime,
    },
    AwaitResult {
        server: AgentId,
        deadline: VirtualTime,
    },
}

/// Requesting side of the request/acknowledge/result protocol.
///
/// Sends REQUEST, waits up to `ack_timeout` ticks for ACK, then up to
/// `result_timeout` ticks for RESULT. The matching RESULT is handed to
/// `on_result`; either timeout runs `on_failure`. Both end the behavior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Client {
    server: ServerRef,
    task: ActionDescriptor,
    conversation: Option<String>,
    ack_timeout: u64,
    result_timeout: u64,
    on_result: ActionDescriptor,
    on_failure: ActionDescriptor,
    /// Runs before sending; its output replaces the task parameters.
    #[serde(default)]
    prepare: Option<ActionDescriptor>,
    phase: Phase,
}

impl Client {
    pub const KIND: &'static str = "client";

    pub fn new(
        server: ServerRef,
        task: ActionDescriptor,
        ack_timeout: u64,
        result_timeout: u64,
        on_result: ActionDescriptor,
        on_failure: ActionDescriptor,
    ) -> Result<Self, BehaviorError> {
        if ack_timeout == 0 || result_timeout == 0 {
            return Err(BehaviorError::Invalid(
                "client timeouts must be at least 1".into(),
            ));
        }
        Ok(Client {
            server,
            task,
            conversation: None,
            ack_timeout,
            result_timeout,
            on_result,
            on_failure,
            prepare: None,
            phase: Phase::Start,
        })
    }

    /// Uses a caller-chosen conversation id instead of a generated one.
    pub fn with_conversation(mut self, conversation: impl Into<String>) -> Self {
        self.conversation = Some(conversation.into());
        self
    }

    pub fn with_prepare(mut self, prepare: ActionDescriptor) -> Self {
        self.prepare = Some(prepare);
        self
    }

    pub fn conversation(&self) -> Option<&str> {
        self.conversation.as_deref()
    }

    fn fail(
        &mut self,
        ctx: &mut AgentContext<'_>,
        reason: &str,
        server: Option<AgentId>,
    ) -> StepOutcome {
        let mut d = Detail::new();
        d.insert("reason".into(), Value::from(reason));
        d.insert(
            "conversation".into(),
            self.conversation
                .clone()
                .map(Value::from)
                .unwrap_or(Value::Null),
        );
        d.insert(
            "server".into(),
            server.map(|s| Value::from(s.0)).unwrap_or(Value::Null),
        );
        ctx.trace_custom("client_failure", d);
        ctx.run_action_traced(&self.on_failure, None);
        StepOutcome::Done
    }

    fn start(&mut self, ctx: &mut AgentContext<'_>) -> StepOutcome {
        let server = match &self.server {
            ServerRef::Agent(id) => Some(*id),
            ServerRef::State(key) => ctx.get_state::<AgentId>(key),
        };
        let Some(server) = server else {
            return self.fail(ctx, "no_server", None);
        };
        if let Some(prepare) = self.prepare.clone() {
            match ctx.run_action(&prepare, None) {
                Ok(Some(params)) => self.task.params = params,
                Ok(None) => {}
                Err(_) => return self.fail(ctx, "prepare_failed", Some(server)),
            }
        }
        let conversation = match &self.conversation {
            Some(c) => c.clone(),
            None => {
                let c = ctx.new_conversation_id();
                self.conversation = Some(c.clone());
                c
            }
        };
        let envelope = RequestEnvelope {
            result_slot: conversation.clone(),
            task: self.task.clone(),
        };
        ctx.send(server, REQUEST, &conversation, envelope.encode())
            .expect("REQUEST is a non-empty type tag");
        let deadline = ctx.now() + self.ack_timeout;
        self.phase = Phase::AwaitAck { server, deadline };
        StepOutcome::Blocked(WakeCondition::message_or_deadline(ACK, deadline))
    }
}

impl Behavior for Client {
    fn kind(&self) -> &str {
        Self::KIND
    }

    fn step(&mut self, ctx: &mut AgentContext<'_>) -> Result<StepOutcome, BehaviorError> {
        if self.phase == Phase::Start {
            return Ok(self.start(ctx));
        }
        let conv = self.conversation.clone().unwrap_or_default();
        if let Phase::AwaitAck { server, deadline } = self.phase {
            if ctx
                .take_message(|m| m.type_tag == ACK && m.conversation_id == conv)
                .is_some()
            {
                self.phase = Phase::AwaitResult {
                    server,
                    deadline: ctx.now() + self.result_timeout,
                };
            } else if ctx.now() >= deadline {
                return Ok(self.fail(ctx, "ack_timeout", Some(server)));
            } else {
                return Ok(StepOutcome::Blocked(WakeCondition::message_or_deadline(
                    ACK, deadline,
                )));
            }
        }
        let Phase::AwaitResult { server, deadline } = self.phase else {
            unreachable!("client phase handled above");
        };
        if let Some(result) =
            ctx.take_message(|m| m.type_tag == RESULT && m.conversation_id == conv)
        {
            ctx.run_action_traced(&self.on_result, Some(&result));
            return Ok(StepOutcome::Done);
        }
        if ctx.now() >= deadline {
            return Ok(self.fail(ctx, "result_timeout", Some(server)));
        }
        Ok(StepOutcome::Blocked(WakeCondition::message_or_deadline(
            RESULT, deadline,
        )))
    }

    fn snapshot(&self) -> Value {
        snapshot_of(self)
    }
}
