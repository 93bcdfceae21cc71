use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::protocol::{
    AckPayload, RequestEnvelope, ResultPayload, ResultStatus, ACK, REQUEST, RESULT,
};
use crate::model::{
    snapshot_of, AgentContext, AgentId, Behavior, BehaviorError, Message, StateStore, StepOutcome,
    WakeCondition,
};
use crate::registry::ActionError;
use crate::trace::Detail;

/// Serving side of the protocol. Every valid REQUEST gets its own worker
/// agent at the server's location; the server itself goes straight back to
/// listening.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Server {
    /// Ticks a worker spends between ACK and RESULT.
    work_ticks: u64,
    #[serde(default)]
    workers: Vec<AgentId>,
}

impl Server {
    pub const KIND: &'static str = "server";

    pub fn new(work_ticks: u64) -> Self {
        Server {
            work_ticks,
            workers: Vec::new(),
        }
    }

    pub fn workers(&self) -> &[AgentId] {
        &self.workers
    }
}

impl Default for Server {
    fn default() -> Self {
        Server::new(1)
    }
}

impl Behavior for Server {
    fn kind(&self) -> &str {
        Self::KIND
    }

    fn step(&mut self, ctx: &mut AgentContext<'_>) -> Result<StepOutcome, BehaviorError> {
        for request in ctx.take_messages(|m| m.type_tag == REQUEST) {
            match RequestEnvelope::decode(&request.payload) {
                Ok(envelope) => {
                    let worker = ServerWorker::new(request, envelope, self.work_ticks);
                    let here = ctx.location();
                    let id = ctx.spawn(here, vec![Box::new(worker)], StateStore::new());
                    self.workers.push(id);
                }
                Err(err) => {
                    let mut d = Detail::new();
                    d.insert(
                        "error".into(),
                        Value::from(format!("malformed request: {err}")),
                    );
                    d.insert("from".into(), Value::from(request.sender.0));
                    d.insert("conversation".into(), Value::from(request.conversation_id));
                    ctx.trace_custom("malformed_request", d);
                }
            }
        }
        Ok(StepOutcome::Blocked(WakeCondition::OnMessage(
            REQUEST.into(),
        )))
    }

    fn snapshot(&self) -> Value {
        snapshot_of(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum WorkerPhase {
    Ack,
    Work,
}

/// Short-lived worker: acknowledges, works for `work_ticks`, runs the
/// requested task and sends the result. Its agent terminates afterwards
/// unless the task attached further behaviors to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServerWorker {
    request: Message,
    envelope: RequestEnvelope,
    work_ticks: u64,
    phase: WorkerPhase,
}

impl ServerWorker {
    pub const KIND: &'static str = "server_worker";

    pub fn new(request: Message, envelope: RequestEnvelope, work_ticks: u64) -> Self {
        ServerWorker {
            request,
            envelope,
            work_ticks,
            phase: WorkerPhase::Ack,
        }
    }

    pub fn client(&self) -> AgentId {
        self.request.sender
    }

    fn work(&mut self, ctx: &mut AgentContext<'_>) -> StepOutcome {
        let conversation = self.envelope.result_slot.clone();
        let payload = match ctx.run_action(&self.envelope.task, Some(&self.request)) {
            Ok(output) => ResultPayload {
                conversation_id: conversation.clone(),
                status: ResultStatus::Ok,
                output,
                error: None,
            },
            Err(err) => {
                if let ActionError::Unknown(_) = err {
                    let mut d = Detail::new();
                    d.insert("error".into(), Value::from(err.to_string()));
                    ctx.trace_custom("action_error", d);
                }
                ResultPayload {
                    conversation_id: conversation.clone(),
                    status: ResultStatus::Error,
                    output: None,
                    error: Some(err.to_string()),
                }
            }
        };
        ctx.send(self.request.sender, RESULT, &conversation, payload.encode())
            .expect("RESULT is a non-empty type tag");
        StepOutcome::Done
    }
}

impl Behavior for ServerWorker {
    fn kind(&self) -> &str {
        Self::KIND
    }

    fn step(&mut self, ctx: &mut AgentContext<'_>) -> Result<StepOutcome, BehaviorError> {
        match self.phase {
            WorkerPhase::Ack => {
                let conversation = self.envelope.result_slot.clone();
                let ack = AckPayload {
                    conversation_id: conversation.clone(),
                };
                let ack = serde_json::to_vec(&ack).expect("ack serializes");
                ctx.send(self.request.sender, ACK, &conversation, ack)
                    .expect("ACK is a non-empty type tag");
                if self.work_ticks == 0 {
                    return Ok(self.work(ctx));
                }
                self.phase = WorkerPhase::Work;
                Ok(StepOutcome::Blocked(WakeCondition::AtTime(
                    ctx.now() + self.work_ticks,
                )))
            }
            WorkerPhase::Work => Ok(self.work(ctx)),
        }
    }

    fn snapshot(&self) -> Value {
        snapshot_of(self)
    }
}
