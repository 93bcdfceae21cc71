//! Self-assessment session over two channels.
//!
//! A permanent server agent runs a Server behavior. A client opens a session
//! with a REQUEST; the worker handling it turns itself into the session
//! agent by attaching `Parallel[Listener("CMD"), Server]`. From then on each
//! command travels as a `CMD` message (command channel) while the matching
//! data exchange is a REQUEST/ACK/RESULT conversation with the session agent
//! (data channel). On the client, each command is a
//! `Parallel[Task(send CMD), Client(data request)]`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{grade, Answers, AssessmentError, ProgressRecord, Services, Test, TestKind, PROGRESS};
use crate::behaviors::protocol::{
    ResultPayload, ResultStatus, DEFAULT_ACK_TIMEOUT, DEFAULT_RESULT_TIMEOUT,
};
use crate::behaviors::{Client, Listener, Mode, Server, ServerRef, Task};
use crate::composite::{Parallel, Sequential};
use crate::model::{AgentContext, AgentId, Behavior, Message, VirtualTime};
use crate::registry::{ActionDescriptor, ActionInput, Registry};
use crate::trace::{detail, Detail, TraceKind, TraceLog};

pub const CMD: &str = "CMD";

const SESSION_AGENT_KEY: &str = "session.agent";
const SESSION_TEST_KEY: &str = "session.test";
const SESSION_SCORE_KEY: &str = "session.score";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum SessionCommand {
    ListTests,
    GetTest { test_id: String },
    SubmitResults { answers: Answers },
    EndSession,
}

impl SessionCommand {
    pub fn name(&self) -> &'static str {
        match self {
            SessionCommand::ListTests => "list_tests",
            SessionCommand::GetTest { .. } => "get_test",
            SessionCommand::SubmitResults { .. } => "submit_results",
            SessionCommand::EndSession => "end_session",
        }
    }
}

pub fn validate_script(commands: &[SessionCommand]) -> Result<(), AssessmentError> {
    let Some(last) = commands.len().checked_sub(1) else {
        return Err(AssessmentError::EmptyScript);
    };
    if let Some(i) = commands
        .iter()
        .position(|c| *c == SessionCommand::EndSession)
    {
        if i < last {
            return Err(AssessmentError::CommandAfterEnd(i + 1));
        }
    }
    if commands[last] != SessionCommand::EndSession {
        return Err(AssessmentError::MissingEndSession);
    }
    Ok(())
}

/// Entry of the test listing sent over the data channel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestSummary {
    pub id: String,
    pub title: String,
    pub questions: usize,
}

fn data_client(task: ActionDescriptor, on_result: &str) -> Client {
    Client::new(
        ServerRef::State(SESSION_AGENT_KEY.into()),
        task,
        DEFAULT_ACK_TIMEOUT,
        DEFAULT_RESULT_TIMEOUT,
        ActionDescriptor::new(on_result),
        ActionDescriptor::new("assessment.session_failure"),
    )
    .expect("default timeouts are positive")
}

fn command_step(command: &SessionCommand, data: Client) -> Box<dyn Behavior> {
    Box::new(Parallel::all(vec![
        Task::boxed(ActionDescriptor::with_json(
            "assessment.send_command",
            command,
        )),
        Box::new(data),
    ]))
}

/// The client agent's behavior for a validated command script.
pub fn session_behavior(
    server: AgentId,
    commands: &[SessionCommand],
) -> Result<Box<dyn Behavior>, AssessmentError> {
    validate_script(commands)?;
    let open = Client::new(
        ServerRef::Agent(server),
        ActionDescriptor::new("assessment.open_session"),
        DEFAULT_ACK_TIMEOUT,
        DEFAULT_RESULT_TIMEOUT,
        ActionDescriptor::new("assessment.session_opened"),
        ActionDescriptor::new("assessment.session_failure"),
    )
    .expect("default timeouts are positive");
    let mut steps: Vec<Box<dyn Behavior>> = vec![Box::new(open)];
    for command in commands {
        steps.push(match command {
            SessionCommand::ListTests => command_step(
                command,
                data_client(
                    ActionDescriptor::new("assessment.list_tests"),
                    "assessment.on_list",
                ),
            ),
            SessionCommand::GetTest { test_id } => command_step(
                command,
                data_client(
                    ActionDescriptor::with_json(
                        "assessment.get_test",
                        &json!({"test_id": test_id}),
                    ),
                    "assessment.on_test",
                ),
            ),
            SessionCommand::SubmitResults { answers } => Sequential::boxed(vec![
                Task::boxed(ActionDescriptor::with_json(
                    "assessment.grade_local",
                    &json!({"answers": answers}),
                )),
                command_step(
                    command,
                    data_client(
                        ActionDescriptor::new("assessment.record_progress"),
                        "assessment.on_progress",
                    )
                    .with_prepare(ActionDescriptor::new("assessment.prepare_progress")),
                ),
            ]),
            SessionCommand::EndSession => Task::boxed(ActionDescriptor::with_json(
                "assessment.send_command",
                command,
            )),
        });
    }
    Ok(Sequential::boxed(steps))
}

/// What one client saw during its session, rebuilt from its `session.*`
/// trace events.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SessionLog {
    pub client: Option<AgentId>,
    pub session_agent: Option<AgentId>,
    pub listing: Option<Vec<TestSummary>>,
    pub tests: Vec<Test>,
    pub errors: Vec<String>,
    pub commands: Vec<String>,
    pub score: Option<(String, f64, f64)>,
    pub progress_stored: bool,
    pub failures: usize,
    pub events: Vec<(VirtualTime, String)>,
}

impl SessionLog {
    pub fn from_trace(trace: &TraceLog, client: AgentId) -> Self {
        let mut log = SessionLog {
            client: Some(client),
            ..SessionLog::default()
        };
        for e in trace
            .for_agent(client)
            .filter(|e| e.kind == TraceKind::Custom)
        {
            let Some(event) = e.event().filter(|n| n.starts_with("session.")) else {
                continue;
            };
            log.events.push((e.tick, event.to_string()));
            match event {
                "session.opened" => log.session_agent = e.get_u64("agent").map(AgentId),
                "session.command" => log
                    .commands
                    .push(e.get_str("command").unwrap_or_default().to_string()),
                "session.list" => {
                    log.listing = e
                        .get("tests")
                        .and_then(|v| serde_json::from_value(v.clone()).ok())
                }
                "session.test" => {
                    if let Some(t) = e
                        .get("test")
                        .and_then(|v| serde_json::from_value(v.clone()).ok())
                    {
                        log.tests.push(t);
                    }
                }
                "session.graded" => {
                    log.score = Some((
                        e.get_str("test").unwrap_or_default().to_string(),
                        e.get("score").and_then(Value::as_f64).unwrap_or(0.0),
                        e.get("max_score").and_then(Value::as_f64).unwrap_or(0.0),
                    ))
                }
                "session.progress_stored" => log.progress_stored = true,
                "session.error" => log
                    .errors
                    .push(e.get_str("error").unwrap_or_default().to_string()),
                "session.failure" => log.failures += 1,
                _ => {}
            }
        }
        log
    }
}

fn result_of(input: &ActionInput<'_>) -> Result<ResultPayload, String> {
    let msg: &Message = input.message.ok_or("expected a RESULT message")?;
    ResultPayload::decode(&msg.payload).map_err(|e| format!("bad RESULT: {e}"))
}

/// Output of an ok RESULT, or traces the error and returns `None`.
fn ok_output(
    ctx: &mut AgentContext<'_>,
    input: &ActionInput<'_>,
) -> Result<Option<Vec<u8>>, String> {
    let result = result_of(input)?;
    match result.status {
        ResultStatus::Ok => Ok(Some(result.output.unwrap_or_default())),
        ResultStatus::Error => {
            let error = result.error.unwrap_or_else(|| "error".into());
            ctx.trace_custom("session.error", detail([("error", Value::from(error))]));
            Ok(None)
        }
    }
}

#[derive(Deserialize)]
struct GetTestParams {
    test_id: String,
}

#[derive(Deserialize)]
struct GradeParams {
    answers: Answers,
}

#[derive(Serialize, Deserialize)]
struct ProgressParams {
    test_id: String,
    score: f64,
}

pub(super) fn register(reg: &mut Registry, services: Arc<Services>) {
    // Server side.
    reg.register_action("assessment.open_session", |ctx, input| {
        let listener = Listener::new(
            CMD,
            vec![ActionDescriptor::new("assessment.session_command")],
            Mode::Cyclic,
        )
        .expect("one callback");
        let me = ctx.agent();
        ctx.attach(
            me,
            Box::new(Parallel::all(vec![
                Box::new(listener),
                Box::new(Server::default()),
            ])),
        );
        let client = input.message.map(|m| m.sender.0);
        ctx.trace_custom("session_open", detail([("client", json!(client))]));
        Ok(Some(serde_json::to_vec(&me).expect("ids serialize")))
    });

    reg.register_action("assessment.session_command", |ctx, input| {
        let msg = input.message.ok_or("command without message")?;
        let command: SessionCommand =
            serde_json::from_slice(&msg.payload).map_err(|e| format!("bad command: {e}"))?;
        ctx.trace_custom(
            "session_command",
            detail([
                ("command", Value::from(command.name())),
                ("client", Value::from(msg.sender.0)),
            ]),
        );
        if command == SessionCommand::EndSession {
            ctx.stop_agent();
        }
        Ok(None)
    });

    let repo = Arc::clone(&services);
    reg.register_action("assessment.list_tests", move |_, _| {
        let listing: Vec<TestSummary> = repo
            .tests
            .iter()
            .filter(|t| t.kind == TestKind::SelfAssessment)
            .map(|t| TestSummary {
                id: t.id.clone(),
                title: t.title.clone(),
                questions: t.questions.len(),
            })
            .collect();
        Ok(Some(
            serde_json::to_vec(&listing).expect("listing serializes"),
        ))
    });

    let repo = Arc::clone(&services);
    reg.register_action("assessment.get_test", move |_, input| {
        let p: GetTestParams = input.json()?;
        let test = repo
            .tests
            .iter()
            .find(|t| t.id == p.test_id && t.kind == TestKind::SelfAssessment)
            .ok_or_else(|| format!("unknown test `{}`", p.test_id))?;
        Ok(Some(serde_json::to_vec(test).expect("tests serialize")))
    });

    reg.register_action("assessment.record_progress", |ctx, input| {
        let p: ProgressParams = input.json()?;
        let student = input.message.map(|m| m.sender).ok_or("no requester")?;
        let record = ProgressRecord {
            student,
            test_id: p.test_id,
            score: p.score,
            timestamp: ctx.now(),
        };
        ctx.persist(
            PROGRESS,
            serde_json::to_value(&record).expect("record serializes"),
        );
        Ok(Some(b"stored".to_vec()))
    });

    // Client side.
    reg.register_action("assessment.session_opened", |ctx, input| {
        let Some(out) = ok_output(ctx, input)? else {
            return Ok(None);
        };
        let agent: AgentId = serde_json::from_slice(&out).map_err(|e| e.to_string())?;
        ctx.set_state(SESSION_AGENT_KEY, &agent);
        ctx.trace_custom("session.opened", detail([("agent", Value::from(agent.0))]));
        Ok(None)
    });

    reg.register_action("assessment.send_command", |ctx, input| {
        let command: SessionCommand = input.json()?;
        let target: AgentId = ctx.get_state(SESSION_AGENT_KEY).ok_or("no open session")?;
        let conversation = ctx.new_conversation_id();
        let payload = serde_json::to_vec(&command).expect("commands serialize");
        ctx.send(target, CMD, &conversation, payload)
            .map_err(|e| e.to_string())?;
        ctx.trace_custom(
            "session.command",
            detail([("command", Value::from(command.name()))]),
        );
        Ok(None)
    });

    reg.register_action("assessment.on_list", |ctx, input| {
        if let Some(out) = ok_output(ctx, input)? {
            let tests: Value = serde_json::from_slice(&out).map_err(|e| e.to_string())?;
            ctx.trace_custom("session.list", detail([("tests", tests)]));
        }
        Ok(None)
    });

    reg.register_action("assessment.on_test", |ctx, input| {
        if let Some(out) = ok_output(ctx, input)? {
            let test: Test = serde_json::from_slice(&out).map_err(|e| e.to_string())?;
            ctx.set_state(SESSION_TEST_KEY, &test);
            ctx.trace_custom(
                "session.test",
                detail([(
                    "test",
                    serde_json::to_value(&test).expect("tests serialize"),
                )]),
            );
        }
        Ok(None)
    });

    reg.register_action("assessment.grade_local", |ctx, input| {
        let p: GradeParams = input.json()?;
        let test: Test = ctx.get_state(SESSION_TEST_KEY).ok_or("no test retrieved")?;
        let g = grade(&test, &p.answers).map_err(|e| e.to_string())?;
        ctx.set_state(
            SESSION_SCORE_KEY,
            &json!({"test_id": test.id, "score": g.score, "max_score": g.max_score}),
        );
        ctx.trace_custom(
            "session.graded",
            detail([
                ("test", Value::from(test.id.as_str())),
                ("score", Value::from(g.score)),
                ("max_score", Value::from(g.max_score)),
            ]),
        );
        Ok(None)
    });

    reg.register_action("assessment.prepare_progress", |ctx, _| {
        let score: Value = ctx.get_state(SESSION_SCORE_KEY).ok_or("nothing graded")?;
        let params = ProgressParams {
            test_id: score["test_id"].as_str().unwrap_or_default().to_string(),
            score: score["score"].as_f64().unwrap_or(0.0),
        };
        Ok(Some(serde_json::to_vec(&params).expect("params serialize")))
    });

    reg.register_action("assessment.on_progress", |ctx, input| {
        if ok_output(ctx, input)?.is_some() {
            ctx.trace_custom("session.progress_stored", Detail::new());
        }
        Ok(None)
    });

    reg.register_action("assessment.session_failure", |ctx, _| {
        ctx.trace_custom("session.failure", Detail::new());
        Ok(None)
    });
}

/// One scripted client session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSpec {
    pub location: String,
    pub commands: Vec<SessionCommand>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PullSetup {
    pub server: String,
    pub sessions: Vec<SessionSpec>,
}

/// Spawns the permanent server agent and one client agent per session.
/// Returns `(server, clients)`.
pub fn launch<P: crate::platform::PlatformAdapter + ?Sized>(
    platform: &mut P,
    setup: &PullSetup,
) -> Result<(AgentId, Vec<AgentId>), AssessmentError> {
    for s in &setup.sessions {
        validate_script(&s.commands)?;
    }
    let mut location = |name: &str| match platform.location_id(name) {
        Some(id) => Ok(id),
        None => platform.create_location(name),
    };
    let server_at = location(&setup.server)?;
    let mut sites = Vec::new();
    for s in &setup.sessions {
        sites.push(location(&s.location)?);
    }
    let server = platform.spawn_agent(server_at, vec![Box::new(Server::default())])?;
    let mut clients = Vec::new();
    for (s, at) in setup.sessions.iter().zip(sites) {
        clients.push(platform.spawn_agent(at, vec![session_behavior(server, &s.commands)?])?);
    }
    Ok((server, clients))
}

#[derive(Debug, Clone)]
pub struct PullRun {
    pub server: AgentId,
    pub clients: Vec<AgentId>,
    pub logs: Vec<SessionLog>,
    pub server_live: bool,
    pub trace: TraceLog,
    pub persisted: Vec<crate::platform::PersistedRecord>,
}

/// Runs the scripted sessions on a fresh simulated world.
pub fn self_assessment_session(
    config: crate::platform::SimConfig,
    setup: &PullSetup,
    services: Services,
) -> Result<PullRun, AssessmentError> {
    use crate::platform::PlatformAdapter;
    let mut platform = crate::platform::SimPlatform::new(config, super::registry(services));
    let (server, clients) = launch(&mut platform, setup)?;
    platform.run(crate::platform::RunUntil::Quiescent)?;
    let logs = clients
        .iter()
        .map(|c| SessionLog::from_trace(platform.trace(), *c))
        .collect();
    Ok(PullRun {
        server,
        clients,
        logs,
        server_live: platform.is_live(server),
        persisted: platform.persisted().to_vec(),
        trace: platform.take_trace(),
    })
}
