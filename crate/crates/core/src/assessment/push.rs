//! Compulsory exam: an observer agent at the server wakes at the scheduled
//! time, travels to every client location carrying the test, leaves a
//! short-lived user agent at each one, comes back and collects the
//! submissions.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{grade, AssessmentError, ExamReport, Services, Submission, Test, TestKind};
use super::{EXAM_REPORTS, SUBMISSIONS};
use crate::behaviors::{Mode, Observer, Task};
use crate::composite::Sequential;
use crate::itinerary::{Itinerary, ItineraryConfig, Objective, Route, OBJECTIVE_STATE_KEY};
use crate::model::{
    snapshot_of, AgentContext, AgentId, Behavior, BehaviorError, LocationId, StateStore,
    StepOutcome, WakeCondition,
};
use crate::platform::{PersistedRecord, PlatformAdapter};
use crate::registry::{ActionDescriptor, Registry};
use crate::trace::detail;

pub const SUBMISSION: &str = "SUBMISSION";

const TEST_KEY: &str = "exam.test";
const PLAN_KEY: &str = "exam.plan";
const DELIVERED_KEY: &str = "exam.delivered";
const MISSED_KEY: &str = "exam.missed";
const COLLECTOR_KEY: &str = "exam.collector";
const LOCATION_NAME_KEY: &str = "exam.location";

/// A client location and its arrival window, relative to the exam start.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClientSlot {
    pub location: String,
    pub earliest: u64,
    pub latest: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExamSetup {
    pub test: Test,
    pub server: String,
    pub clients: Vec<ClientSlot>,
    /// Observer period while waiting for the scheduled time.
    #[serde(default = "one")]
    pub check_period: u64,
}

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PlannedClient {
    location: LocationId,
    name: String,
    earliest: u64,
    latest: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ExamPlan {
    test: Test,
    server: LocationId,
    clients: Vec<PlannedClient>,
}

impl ExamSetup {
    pub fn validate(&self) -> Result<(), AssessmentError> {
        self.test.validate()?;
        if !matches!(self.test.kind, TestKind::Exam { .. }) {
            return Err(AssessmentError::NotAnExam(self.test.id.clone()));
        }
        if self.clients.is_empty() {
            return Err(AssessmentError::NoClients);
        }
        Ok(())
    }
}

/// Spawns the exam's observer agent at the server location, creating any
/// location that does not exist yet. Returns the agent id.
pub fn launch<P: PlatformAdapter + ?Sized>(
    platform: &mut P,
    setup: &ExamSetup,
) -> Result<AgentId, AssessmentError> {
    setup.validate()?;
    let TestKind::Exam { scheduled_at } = setup.test.kind else {
        unreachable!("validated above");
    };
    let mut location = |name: &str| match platform.location_id(name) {
        Some(id) => Ok(id),
        None => platform.create_location(name),
    };
    let server = location(&setup.server)?;
    let mut clients = Vec::new();
    for c in &setup.clients {
        clients.push(PlannedClient {
            location: location(&c.location)?,
            name: c.location.clone(),
            earliest: c.earliest,
            latest: c.latest,
        });
    }
    let plan = ExamPlan {
        test: setup.test.clone(),
        server,
        clients,
    };
    let observer = Observer::new(
        setup.check_period.max(1),
        ActionDescriptor::with_json("clock_at_least", &scheduled_at.0),
        ActionDescriptor::with_json("assessment.start_exam", &plan),
        Mode::OneShot,
    )
    .expect("period is at least 1");
    Ok(platform.spawn_agent(server, vec![Box::new(observer)])?)
}

/// The report persisted by the collector, if the exam finished.
pub fn report(records: &[PersistedRecord]) -> Option<ExamReport> {
    records
        .iter()
        .find(|r| r.collection == EXAM_REPORTS)
        .and_then(|r| serde_json::from_value(r.record.clone()).ok())
}

/// Waits, back at the server, until every delivered client has submitted,
/// then persists the report and stops the agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExamCollector {
    test_id: String,
    #[serde(default)]
    submissions: Vec<Submission>,
}

impl ExamCollector {
    pub const KIND: &'static str = "exam_collector";

    pub fn new(test_id: impl Into<String>) -> Self {
        ExamCollector {
            test_id: test_id.into(),
            submissions: Vec::new(),
        }
    }
}

impl Behavior for ExamCollector {
    fn kind(&self) -> &str {
        Self::KIND
    }

    fn step(&mut self, ctx: &mut AgentContext<'_>) -> Result<StepOutcome, BehaviorError> {
        for msg in ctx.take_messages(|m| m.type_tag == SUBMISSION) {
            match serde_json::from_slice::<Submission>(&msg.payload) {
                Ok(s) if s.test_id == self.test_id => self.submissions.push(s),
                Ok(s) => ctx.trace_custom(
                    "foreign_submission",
                    detail([("test", Value::from(s.test_id))]),
                ),
                Err(e) => ctx.trace_custom(
                    "malformed_submission",
                    detail([("error", Value::from(e.to_string()))]),
                ),
            }
        }
        let delivered: Vec<LocationId> = ctx.get_state(DELIVERED_KEY).unwrap_or_default();
        if self.submissions.len() < delivered.len() {
            return Ok(StepOutcome::Blocked(WakeCondition::OnMessage(
                SUBMISSION.into(),
            )));
        }
        let report = ExamReport {
            test_id: self.test_id.clone(),
            delivered,
            missed: ctx.get_state(MISSED_KEY).unwrap_or_default(),
            submissions: self.submissions.clone(),
        };
        for s in &report.submissions {
            ctx.persist(SUBMISSIONS, snapshot_of(s));
        }
        ctx.persist(EXAM_REPORTS, snapshot_of(&report));
        ctx.stop_agent();
        Ok(StepOutcome::Done)
    }

    fn snapshot(&self) -> Value {
        snapshot_of(self)
    }
}

fn objective_location(ctx: &AgentContext<'_>) -> Result<LocationId, String> {
    ctx.get_state::<Value>(OBJECTIVE_STATE_KEY)
        .and_then(|o| serde_json::from_value(o["location"].clone()).ok())
        .ok_or_else(|| "no current objective".to_string())
}

pub(super) fn register(reg: &mut Registry, services: Arc<Services>) {
    reg.register_action("assessment.start_exam", |ctx, input| {
        let plan: ExamPlan = input.json()?;
        let mut objectives: Vec<Objective> = plan
            .clients
            .iter()
            .map(|c| {
                Objective::new(c.location, c.earliest, c.latest)
                    .with_tasks(vec![ActionDescriptor::new("assessment.deliver_test")])
            })
            .collect();
        objectives.push(Objective::open_ended(plan.server));
        let route = Route::new(objectives, ctx.now()).map_err(|e| e.to_string())?;
        let config = ItineraryConfig::new(
            route,
            Vec::new(),
            Some(Task::boxed(ActionDescriptor::new(
                "assessment.record_missed",
            ))),
        );
        let test_id = plan.test.id.clone();
        ctx.set_state(TEST_KEY, &plan.test);
        ctx.set_state(PLAN_KEY, &plan.clients);
        ctx.set_state(DELIVERED_KEY, &Vec::<LocationId>::new());
        ctx.set_state(MISSED_KEY, &Vec::<LocationId>::new());
        ctx.trace_custom(
            "exam_started",
            detail([("test", Value::from(test_id.as_str()))]),
        );
        let me = ctx.agent();
        ctx.attach(
            me,
            Sequential::boxed(vec![
                Box::new(Itinerary::new(config)),
                Box::new(ExamCollector::new(test_id)),
            ]),
        );
        Ok(None)
    });

    reg.register_action("assessment.deliver_test", |ctx, _| {
        let here = objective_location(ctx)?;
        let test: Test = ctx.get_state(TEST_KEY).ok_or("courier carries no test")?;
        let plan: Vec<PlannedClient> = ctx.get_state(PLAN_KEY).unwrap_or_default();
        let name = plan
            .iter()
            .find(|c| c.location == here)
            .map(|c| c.name.clone())
            .unwrap_or_default();
        let mut state = StateStore::new();
        state.insert(TEST_KEY.into(), snapshot_of(&test));
        state.insert(COLLECTOR_KEY.into(), json!(ctx.agent()));
        state.insert(LOCATION_NAME_KEY.into(), json!(name));
        let student = ctx.spawn(
            here,
            vec![Task::boxed(ActionDescriptor::new("assessment.take_test"))],
            state,
        );
        ctx.push_state(DELIVERED_KEY, &here);
        ctx.trace_custom(
            "exam_delivered",
            detail([
                ("location", Value::from(here.0)),
                ("student", Value::from(student.0)),
            ]),
        );
        Ok(None)
    });

    let sources = Arc::clone(&services);
    reg.register_action("assessment.take_test", move |ctx, _| {
        let test: Test = ctx.get_state(TEST_KEY).ok_or("no test delivered")?;
        let collector: AgentId = ctx.get_state(COLLECTOR_KEY).ok_or("no collector")?;
        let name: String = ctx.get_state(LOCATION_NAME_KEY).unwrap_or_default();
        let answers = sources
            .answer_sources
            .get(&name)
            .cloned()
            .unwrap_or_default();
        let g = grade(&test, &answers).map_err(|e| e.to_string())?;
        let submission = Submission {
            test_id: test.id.clone(),
            student: ctx.agent(),
            answers,
            score: g.score,
            max_score: g.max_score,
            graded_at: ctx.now(),
        };
        let conversation = ctx.new_conversation_id();
        let payload = serde_json::to_vec(&submission).map_err(|e| e.to_string())?;
        ctx.send(collector, SUBMISSION, &conversation, payload)
            .map_err(|e| e.to_string())?;
        Ok(None)
    });

    reg.register_action("assessment.record_missed", |ctx, _| {
        let here = objective_location(ctx)?;
        ctx.push_state(MISSED_KEY, &here);
        ctx.trace_custom("exam_missed", detail([("location", Value::from(here.0))]));
        Ok(None)
    });
}

/// Outcome of a complete simulated exam.
#[derive(Debug, Clone)]
pub struct ExamRun {
    pub server: AgentId,
    pub report: Option<ExamReport>,
    pub trace: crate::trace::TraceLog,
    pub persisted: Vec<PersistedRecord>,
}

/// Builds a simulated world for `setup`, runs it to quiescence and returns
/// the report.
pub fn run_exam_push(
    config: crate::platform::SimConfig,
    setup: &ExamSetup,
    services: Services,
) -> Result<ExamRun, AssessmentError> {
    let mut platform = crate::platform::SimPlatform::new(config, super::registry(services));
    let server = launch(&mut platform, setup)?;
    platform.run(crate::platform::RunUntil::Quiescent)?;
    Ok(ExamRun {
        server,
        report: report(platform.persisted()),
        persisted: platform.persisted().to_vec(),
        trace: platform.take_trace(),
    })
}
