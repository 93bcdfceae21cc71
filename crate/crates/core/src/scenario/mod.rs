//! Scenario files: a JSON description of a world (config, locations, agents
//! with behavior-spec trees, optional assessment setup) that can be
//! validated, instantiated on any platform and run.

pub mod spec;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::assessment::pull::PullSetup;
use crate::assessment::repository::{parse_tests, ResultRecord};
use crate::assessment::{self, Answers, ClientSlot, ExamSetup, Services, Test, TestKind};
use crate::behaviors::{Listener, Mode};
use crate::model::{AgentId, Behavior, LocationId, StateStore, VirtualTime};
use crate::platform::{
    LatencyModel, PersistedRecord, PlatformAdapter, PlatformError, RunUntil, SimConfig, SimPlatform,
};
use crate::registry::{ActionDescriptor, Registry};
use crate::trace::{Detail, TraceLog};

use spec::{suggest, Builder};

pub const SCENARIO_FORMAT_VERSION: u32 = 1;

/// A validation finding with a JSON-pointer location into the scenario file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub pointer: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let at = if self.pointer.is_empty() {
            "/"
        } else {
            &self.pointer
        };
        write!(f, "{at}: {}", self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("{0}: file not found")]
    FileNotFound(PathBuf),
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("scenario is invalid ({} problem(s))", .0.len())]
    Invalid(Vec<Diagnostic>),
    #[error(transparent)]
    Platform(#[from] PlatformError),
}

fn default_latency() -> LatencyModel {
    LatencyModel::Fixed(1)
}

fn default_max_ticks() -> u64 {
    100_000
}

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigSpec {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_latency")]
    pub message_latency: LatencyModel,
    #[serde(default = "default_latency")]
    pub migration_latency: LatencyModel,
    #[serde(default = "default_max_ticks")]
    pub max_ticks: u64,
}

impl Default for ConfigSpec {
    fn default() -> Self {
        ConfigSpec {
            seed: None,
            message_latency: default_latency(),
            migration_latency: default_latency(),
            max_ticks: default_max_ticks(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub location: String,
    pub behaviors: Vec<Value>,
    #[serde(default)]
    pub state: StateStore,
}

/// The compulsory exam: `test` names a test in the repository.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExamSpec {
    pub test: String,
    pub server: String,
    pub clients: Vec<ClientSlot>,
    #[serde(default = "one")]
    pub check_period: u64,
}

/// The file as written. Paths are relative to the scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub format_version: u32,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub description: Option<String>,
    #[serde(default)]
    pub config: ConfigSpec,
    #[serde(default)]
    pub locations: Vec<String>,
    #[serde(default)]
    pub agents: Vec<AgentSpec>,
    #[serde(default)]
    pub tests: Option<PathBuf>,
    #[serde(default)]
    pub answers: BTreeMap<String, Answers>,
    #[serde(default)]
    pub exam: Option<ExamSpec>,
    #[serde(default)]
    pub sessions: Option<PullSetup>,
    #[serde(default)]
    pub expected: Option<PathBuf>,
}

/// A parsed scenario plus everything it references on disk.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub path: PathBuf,
    tests: Vec<Test>,
    load_diagnostics: Vec<Diagnostic>,
}

/// Agents created by [`Scenario::populate`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Population {
    pub agents: Vec<AgentId>,
    pub exam_observer: Option<AgentId>,
    pub pull_server: Option<AgentId>,
    pub pull_clients: Vec<AgentId>,
}

#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub seed: u64,
    pub population: Population,
    pub trace: TraceLog,
    pub persisted: Vec<PersistedRecord>,
    pub outcome: Result<(), PlatformError>,
}

fn parse_error(path: &Path, err: serde_path_to_error::Error<serde_json::Error>) -> ScenarioError {
    let path_str = err.path().to_string();
    let inner = err.into_inner();
    let (line, column) = (inner.line(), inner.column());
    let message = if path_str == "." || inner.is_syntax() || inner.is_eof() {
        inner.to_string()
    } else {
        format!("at {path_str}: {inner}")
    };
    ScenarioError::Parse {
        path: path.to_path_buf(),
        line,
        column,
        message,
    }
}

impl Scenario {
    /// Reads and parses a scenario file and the test repository it names.
    /// Problems with referenced files become diagnostics, not errors.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(ScenarioError::FileNotFound(path.to_path_buf()))
            }
            Err(source) => {
                return Err(ScenarioError::Io {
                    path: path.to_path_buf(),
                    source,
                })
            }
        };
        let mut scenario = Scenario::parse(&text, path)?;
        scenario.load_references();
        Ok(scenario)
    }

    /// Parses scenario text; `path` anchors relative references.
    pub fn parse(text: &str, path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let mut de = serde_json::Deserializer::from_str(text);
        let file: ScenarioFile =
            serde_path_to_error::deserialize(&mut de).map_err(|e| parse_error(path, e))?;
        de.end().map_err(|e| ScenarioError::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        Ok(Scenario {
            file,
            path: path.to_path_buf(),
            tests: Vec::new(),
            load_diagnostics: Vec::new(),
        })
    }

    /// Builds a scenario from an in-memory file, with tests supplied
    /// directly instead of from a repository path.
    pub fn from_parts(file: ScenarioFile, tests: Vec<Test>) -> Self {
        Scenario {
            file,
            path: PathBuf::from("<memory>"),
            tests,
            load_diagnostics: Vec::new(),
        }
    }

    fn base_dir(&self) -> PathBuf {
        self.path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default()
    }

    /// Resolves a path from the file relative to the scenario's directory.
    pub fn resolve(&self, relative: &Path) -> PathBuf {
        if relative.is_absolute() {
            relative.to_path_buf()
        } else {
            self.base_dir().join(relative)
        }
    }

    pub fn expected_path(&self) -> Option<PathBuf> {
        self.file.expected.as_deref().map(|p| self.resolve(p))
    }

    pub fn name(&self) -> String {
        self.file.name.clone().unwrap_or_else(|| {
            self.path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default()
        })
    }

    pub fn tests(&self) -> &[Test] {
        &self.tests
    }

    fn load_references(&mut self) {
        let Some(rel) = self.file.tests.clone() else {
            return;
        };
        let full = self.resolve(&rel);
        match std::fs::read_to_string(&full) {
            Ok(text) => match parse_tests(&text, &full.display().to_string()) {
                Ok(tests) => self.tests = tests,
                Err(e) => self.load_diagnostics.push(Diagnostic {
                    pointer: "/tests".into(),
                    message: e.to_string(),
                }),
            },
            Err(e) => self.load_diagnostics.push(Diagnostic {
                pointer: "/tests".into(),
                message: format!("cannot read test repository {}: {e}", full.display()),
            }),
        }
    }

    /// Seed precedence: override, then the file, then 0.
    pub fn config(&self, seed_override: Option<u64>) -> SimConfig {
        let c = &self.file.config;
        SimConfig {
            seed: seed_override.or(c.seed).unwrap_or(0),
            message_latency: c.message_latency.clone(),
            migration_latency: c.migration_latency.clone(),
            max_ticks: VirtualTime(c.max_ticks),
        }
    }

    pub fn services(&self) -> Services {
        Services {
            tests: self.tests.clone(),
            answer_sources: self.file.answers.clone(),
        }
    }

    /// Built-ins, the assessment actions and the demo roles.
    pub fn registry(&self) -> Registry {
        let mut reg = Registry::new();
        assessment::install(&mut reg, self.services());
        install_demo_roles(&mut reg);
        reg
    }

    /// Every problem found, in file order. Empty means the scenario can be
    /// instantiated.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut diags = self.load_diagnostics.clone();
        let f = &self.file;
        if f.format_version != SCENARIO_FORMAT_VERSION {
            diags.push(Diagnostic {
                pointer: "/format_version".into(),
                message: format!(
                    "unsupported format_version {} (expected {SCENARIO_FORMAT_VERSION})",
                    f.format_version
                ),
            });
        }
        if f.config.max_ticks == 0 {
            diags.push(Diagnostic {
                pointer: "/config/max_ticks".into(),
                message: "max_ticks must be at least 1".into(),
            });
        }
        for (field, model) in [
            ("message_latency", &f.config.message_latency),
            ("migration_latency", &f.config.migration_latency),
        ] {
            if let Err(e) = model.validate() {
                diags.push(Diagnostic {
                    pointer: format!("/config/{field}"),
                    message: e,
                });
            }
        }

        let mut locations = BTreeMap::new();
        for (i, name) in f.locations.iter().enumerate() {
            if locations
                .insert(name.clone(), LocationId(i as u32))
                .is_some()
            {
                diags.push(Diagnostic {
                    pointer: format!("/locations/{i}"),
                    message: format!("duplicate location `{name}`"),
                });
            }
        }

        let registry = self.registry();
        let mut b = Builder::new(&registry, &locations, f.agents.len());
        for (i, agent) in f.agents.iter().enumerate() {
            let ptr = format!("/agents/{i}");
            b.location(&agent.location, &format!("{ptr}/location"));
            if agent.behaviors.is_empty() {
                b.error(
                    format!("{ptr}/behaviors"),
                    "agent needs at least one behavior",
                );
            }
            for (j, v) in agent.behaviors.iter().enumerate() {
                b.behavior(v, &format!("{ptr}/behaviors/{j}"));
            }
        }
        for name in f.answers.keys() {
            b.location(name, &format!("/answers/{}", escape_pointer(name)));
        }
        if let Some(exam) = &f.exam {
            self.validate_exam(exam, &mut b);
        }
        if let Some(pull) = &f.sessions {
            b.location(&pull.server, "/sessions/server");
            for (i, s) in pull.sessions.iter().enumerate() {
                let ptr = format!("/sessions/sessions/{i}");
                b.location(&s.location, &format!("{ptr}/location"));
                if let Err(e) = assessment::pull::validate_script(&s.commands) {
                    b.error(format!("{ptr}/commands"), e.to_string());
                }
            }
        }
        diags.extend(b.diagnostics);
        diags
    }

    fn validate_exam(&self, exam: &ExamSpec, b: &mut Builder<'_>) {
        b.location(&exam.server, "/exam/server");
        for (i, c) in exam.clients.iter().enumerate() {
            let ptr = format!("/exam/clients/{i}");
            b.location(&c.location, &format!("{ptr}/location"));
            if c.earliest > c.latest {
                b.error(
                    ptr,
                    format!(
                        "client `{}`: earliest {} is after latest {}",
                        c.location, c.earliest, c.latest
                    ),
                );
            }
        }
        if exam.clients.is_empty() {
            b.error("/exam/clients", "exam has no client locations");
        }
        if exam.check_period == 0 {
            b.error("/exam/check_period", "check_period must be at least 1");
        }
        if self.file.tests.is_none() && self.tests.is_empty() {
            b.error("/exam/test", "exam needs a test repository (`tests`)");
            return;
        }
        match self.tests.iter().find(|t| t.id == exam.test) {
            Some(t) if !matches!(t.kind, TestKind::Exam { .. }) => {
                b.error("/exam/test", format!("test `{}` is not an exam", t.id))
            }
            Some(_) => {}
            None if !self.load_diagnostics.is_empty() => {}
            None => {
                let hint = suggest(&exam.test, self.tests.iter().map(|t| t.id.as_str()));
                let mut msg = format!("unknown test `{}`", exam.test);
                if let Some(h) = hint {
                    msg.push_str(&format!(" (did you mean `{h}`?)"));
                }
                b.error("/exam/test", msg);
            }
        }
    }

    fn exam_setup(&self) -> Option<ExamSetup> {
        let exam = self.file.exam.as_ref()?;
        let test = self.tests.iter().find(|t| t.id == exam.test)?.clone();
        Some(ExamSetup {
            test,
            server: exam.server.clone(),
            clients: exam.clients.clone(),
            check_period: exam.check_period,
        })
    }

    /// Creates the locations and agents on a fresh platform. Scenario agents
    /// are spawned first, in file order, so agent `i` gets id `i`.
    pub fn populate<P: PlatformAdapter + ?Sized>(
        &self,
        platform: &mut P,
    ) -> Result<Population, ScenarioError> {
        let diags = self.validate();
        if !diags.is_empty() {
            return Err(ScenarioError::Invalid(diags));
        }
        let mut locations = BTreeMap::new();
        for name in &self.file.locations {
            locations.insert(name.clone(), platform.create_location(name)?);
        }
        let behaviors = {
            let mut b = Builder::new(platform.registry(), &locations, self.file.agents.len());
            let mut all = Vec::new();
            for (i, agent) in self.file.agents.iter().enumerate() {
                let built: Vec<Box<dyn Behavior>> = agent
                    .behaviors
                    .iter()
                    .enumerate()
                    .filter_map(|(j, v)| b.behavior(v, &format!("/agents/{i}/behaviors/{j}")))
                    .collect();
                all.push(built);
            }
            if !b.diagnostics.is_empty() {
                return Err(ScenarioError::Invalid(b.diagnostics));
            }
            all
        };
        let mut population = Population::default();
        for (agent, behaviors) in self.file.agents.iter().zip(behaviors) {
            let at = locations[&agent.location];
            let id = platform.spawn_agent_with_state(at, behaviors, agent.state.clone())?;
            population.agents.push(id);
        }
        if let Some(setup) = self.exam_setup() {
            let id = assessment::push::launch(platform, &setup).map_err(platform_or_invalid)?;
            population.exam_observer = Some(id);
        }
        if let Some(pull) = &self.file.sessions {
            let (server, clients) =
                assessment::pull::launch(platform, pull).map_err(platform_or_invalid)?;
            population.pull_server = Some(server);
            population.pull_clients = clients;
        }
        Ok(population)
    }

    /// Runs on the deterministic simulator.
    pub fn run(
        &self,
        seed_override: Option<u64>,
        until: RunUntil,
    ) -> Result<ScenarioRun, ScenarioError> {
        let config = self.config(seed_override);
        let seed = config.seed;
        let mut platform = SimPlatform::new(config, self.registry());
        let population = self.populate(&mut platform)?;
        let outcome = platform.run(until).map(|_| ());
        Ok(ScenarioRun {
            seed,
            population,
            persisted: platform.persisted().to_vec(),
            trace: platform.take_trace(),
            outcome,
        })
    }

    /// Header line for trace files written from this scenario.
    pub fn trace_header(&self, seed: u64) -> Detail {
        let mut header = Detail::new();
        header.insert("scenario".into(), Value::from(self.name()));
        header.insert("seed".into(), Value::from(seed));
        header
    }
}

impl ScenarioRun {
    pub fn trace_jsonl(&self, scenario: &Scenario) -> String {
        self.trace.to_jsonl(&scenario.trace_header(self.seed))
    }
}

fn platform_or_invalid(e: assessment::AssessmentError) -> ScenarioError {
    match e {
        assessment::AssessmentError::Platform(p) => ScenarioError::Platform(p),
        other => ScenarioError::Invalid(vec![Diagnostic {
            pointer: String::new(),
            message: other.to_string(),
        }]),
    }
}

/// Validates the scenario at `path`.
pub fn validate_scenario(path: impl AsRef<Path>) -> Result<Vec<Diagnostic>, ScenarioError> {
    Ok(Scenario::load(path)?.validate())
}

fn escape_pointer(segment: &str) -> String {
    segment.replace('~', "~0").replace('/', "~1")
}

/// First line where two trace files differ.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Divergence {
    /// 1-based.
    pub line: usize,
    pub expected: Option<String>,
    pub actual: Option<String>,
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |s: &Option<String>| s.clone().unwrap_or_else(|| "<end of file>".into());
        write!(
            f,
            "first divergence at line {}\n  expected: {}\n  actual:   {}",
            self.line,
            show(&self.expected),
            show(&self.actual)
        )
    }
}

/// Exact comparison; `None` when byte-identical.
pub fn first_divergence(expected: &str, actual: &str) -> Option<Divergence> {
    if expected == actual {
        return None;
    }
    let mut e = expected.lines();
    let mut a = actual.lines();
    let mut line = 1;
    loop {
        match (e.next(), a.next()) {
            (Some(x), Some(y)) if x == y => line += 1,
            (None, None) => {
                // Only trailing newlines differ.
                return Some(Divergence {
                    line,
                    expected: None,
                    actual: None,
                });
            }
            (x, y) => {
                return Some(Divergence {
                    line,
                    expected: x.map(str::to_string),
                    actual: y.map(str::to_string),
                })
            }
        }
    }
}

fn logger_role(params: &[u8]) -> Result<Box<dyn Behavior>, String> {
    #[derive(Deserialize, Default)]
    #[serde(deny_unknown_fields)]
    struct P {
        #[serde(default)]
        filter: Option<String>,
    }
    let p: P = if params.is_empty() {
        P::default()
    } else {
        serde_json::from_slice::<Option<P>>(params)
            .map_err(|e| e.to_string())?
            .unwrap_or_default()
    };
    let listener = Listener::new(
        p.filter.unwrap_or_else(|| "*".into()),
        vec![ActionDescriptor::new("demo.log_message")],
        Mode::Cyclic,
    )
    .map_err(|e| e.to_string())?;
    Ok(Box::new(listener))
}

fn echo_role(_: &[u8]) -> Result<Box<dyn Behavior>, String> {
    let listener = Listener::new(
        "PING",
        vec![ActionDescriptor::new("demo.echo")],
        Mode::Cyclic,
    )
    .map_err(|e| e.to_string())?;
    Ok(Box::new(listener))
}

/// Two small roles used by the demo scenario: `logger` traces every
/// matching message, `echo` answers PING with PONG carrying the same payload.
pub fn install_demo_roles(reg: &mut Registry) {
    reg.register_action("demo.log_message", |ctx, input| {
        let msg = input.message.ok_or("no message")?;
        let mut d = Detail::new();
        d.insert("from".into(), Value::from(msg.sender.0));
        d.insert("type".into(), Value::from(msg.type_tag.clone()));
        d.insert(
            "payload".into(),
            Value::from(String::from_utf8_lossy(&msg.payload).into_owned()),
        );
        ctx.trace_custom("logged", d);
        Ok(None)
    });
    reg.register_action("demo.echo", |ctx, input| {
        let msg = input.message.ok_or("no message")?;
        ctx.send(
            msg.sender,
            "PONG",
            &msg.conversation_id,
            msg.payload.clone(),
        )
        .map_err(|e| e.to_string())?;
        Ok(None)
    });
    reg.register_role("logger", logger_role)
        .expect("fresh role name");
    reg.register_role("echo", echo_role)
        .expect("fresh role name");
}

/// Exam reports and progress records among the persisted data, in order.
pub fn result_records(persisted: &[PersistedRecord]) -> Vec<ResultRecord> {
    persisted
        .iter()
        .filter_map(|r| match r.collection.as_str() {
            assessment::EXAM_REPORTS => serde_json::from_value(r.record.clone())
                .ok()
                .map(ResultRecord::ExamReport),
            assessment::PROGRESS => serde_json::from_value(r.record.clone())
                .ok()
                .map(ResultRecord::Progress),
            _ => None,
        })
        .collect()
}
