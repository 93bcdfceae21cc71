//! The assessment case study: tests and exact-answer grading, the
//! compulsory-exam push scenario, the self-assessment pull scenario and a
//! file-backed repository.

mod grading;
mod model;
pub mod pull;
pub mod push;
pub mod repository;

use std::collections::BTreeMap;
use std::sync::Arc;

pub use grading::{grade, is_correct, Grade, GradeError, QuestionScore};
pub use model::{
    Answer, Answers, ExamReport, ProgressRecord, Question, QuestionKind, Submission, Test,
    TestError, TestKind,
};
pub use pull::{SessionCommand, SessionLog};
pub use push::{ClientSlot, ExamCollector, ExamSetup};
pub use repository::{load_tests, store_report, RepositoryError, ResultRecord};

use crate::model::decode_as;
use crate::platform::PlatformError;
use crate::registry::Registry;

/// Persisted collections.
pub const EXAM_REPORTS: &str = "exam_reports";
pub const SUBMISSIONS: &str = "submissions";
pub const PROGRESS: &str = "progress";

#[derive(Debug, thiserror::Error)]
pub enum AssessmentError {
    #[error(transparent)]
    Test(#[from] TestError),
    #[error("test `{0}` is not an exam")]
    NotAnExam(String),
    #[error("exam has no client locations")]
    NoClients,
    #[error("session script is empty")]
    EmptyScript,
    #[error("session script must end with EndSession")]
    MissingEndSession,
    #[error("command {0} comes after EndSession")]
    CommandAfterEnd(usize),
    #[error(transparent)]
    Platform(#[from] PlatformError),
}

/// Data the assessment actions need at run time: the self-assessment
/// repository on the server side and scripted student answers per client
/// location name.
#[derive(Debug, Clone, Default)]
pub struct Services {
    pub tests: Vec<Test>,
    pub answer_sources: BTreeMap<String, Answers>,
}

/// Registers every assessment action and behavior.
pub fn install(registry: &mut Registry, services: Services) {
    let services = Arc::new(services);
    registry.register_behavior(ExamCollector::KIND, decode_as::<ExamCollector>);
    push::register(registry, Arc::clone(&services));
    pull::register(registry, services);
}

/// A registry with the built-ins plus the assessment actions.
pub fn registry(services: Services) -> Registry {
    let mut reg = Registry::new();
    install(&mut reg, services);
    reg
}
