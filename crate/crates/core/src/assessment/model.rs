use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::model::{AgentId, LocationId, VirtualTime};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TestError {
    #[error("test `{0}` has no questions")]
    NoQuestions(String),
    #[error("test `{test}`: question id `{question}` is used twice")]
    DuplicateQuestionId { test: String, question: String },
    #[error("question `{question}`: weight must be positive, got {weight}")]
    NonPositiveWeight { question: String, weight: f64 },
    #[error("question `{0}`: choice questions need options")]
    NoOptions(String),
    #[error("question `{question}`: key index {index} is out of range")]
    KeyOutOfRange { question: String, index: usize },
    #[error("question `{0}`: numeric key must be finite")]
    NonFiniteKey(String),
}

/// Kind-specific part of a question: options where they apply and the key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QuestionKind {
    SingleChoice {
        options: Vec<String>,
        key: usize,
    },
    MultipleChoice {
        options: Vec<String>,
        key: BTreeSet<usize>,
    },
    TrueFalse {
        key: bool,
    },
    FillNumeric {
        key: f64,
        #[serde(default)]
        tolerance: f64,
    },
    FillText {
        key: String,
    },
}

impl QuestionKind {
    pub fn name(&self) -> &'static str {
        match self {
            QuestionKind::SingleChoice { .. } => "single_choice",
            QuestionKind::MultipleChoice { .. } => "multiple_choice",
            QuestionKind::TrueFalse { .. } => "true_false",
            QuestionKind::FillNumeric { .. } => "fill_numeric",
            QuestionKind::FillText { .. } => "fill_text",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub prompt: String,
    pub weight: f64,
    #[serde(flatten)]
    pub kind: QuestionKind,
}

impl Question {
    pub fn validate(&self) -> Result<(), TestError> {
        let id = || self.id.clone();
        if !(self.weight > 0.0 && self.weight.is_finite()) {
            return Err(TestError::NonPositiveWeight {
                question: id(),
                weight: self.weight,
            });
        }
        let check = |options: &Vec<String>, keys: &mut dyn Iterator<Item = usize>| {
            if options.is_empty() {
                return Err(TestError::NoOptions(id()));
            }
            for index in keys {
                if index >= options.len() {
                    return Err(TestError::KeyOutOfRange {
                        question: id(),
                        index,
                    });
                }
            }
            Ok(())
        };
        match &self.kind {
            QuestionKind::SingleChoice { options, key } => {
                check(options, &mut std::iter::once(*key))
            }
            QuestionKind::MultipleChoice { options, key } => {
                check(options, &mut key.iter().copied())
            }
            QuestionKind::FillNumeric { key, tolerance } => {
                if key.is_finite() && tolerance.is_finite() && *tolerance >= 0.0 {
                    Ok(())
                } else {
                    Err(TestError::NonFiniteKey(id()))
                }
            }
            QuestionKind::TrueFalse { .. } | QuestionKind::FillText { .. } => Ok(()),
        }
    }

    /// The answer that earns full weight.
    pub fn correct_answer(&self) -> Answer {
        match &self.kind {
            QuestionKind::SingleChoice { key, .. } => Answer::Choice(*key),
            QuestionKind::MultipleChoice { key, .. } => Answer::Choices(key.clone()),
            QuestionKind::TrueFalse { key } => Answer::Bool(*key),
            QuestionKind::FillNumeric { key, .. } => Answer::Number(*key),
            QuestionKind::FillText { key } => Answer::Text(key.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TestKind {
    SelfAssessment,
    Exam { scheduled_at: VirtualTime },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Test {
    pub id: String,
    pub title: String,
    pub questions: Vec<Question>,
    pub kind: TestKind,
}

impl Test {
    /// Builds a validated test.
    pub fn new(
        id: impl Into<String>,
        title: impl Into<String>,
        questions: Vec<Question>,
        kind: TestKind,
    ) -> Result<Self, TestError> {
        let test = Test {
            id: id.into(),
            title: title.into(),
            questions,
            kind,
        };
        test.validate()?;
        Ok(test)
    }

    pub fn validate(&self) -> Result<(), TestError> {
        if self.questions.is_empty() {
            return Err(TestError::NoQuestions(self.id.clone()));
        }
        let mut seen = BTreeSet::new();
        for q in &self.questions {
            if !seen.insert(q.id.as_str()) {
                return Err(TestError::DuplicateQuestionId {
                    test: self.id.clone(),
                    question: q.id.clone(),
                });
            }
            q.validate()?;
        }
        Ok(())
    }

    pub fn total_weight(&self) -> f64 {
        self.questions.iter().map(|q| q.weight).sum()
    }

    pub fn question(&self, id: &str) -> Option<&Question> {
        self.questions.iter().find(|q| q.id == id)
    }

    /// Answers that score the full weight.
    pub fn answer_key(&self) -> Answers {
        self.questions
            .iter()
            .map(|q| (q.id.clone(), q.correct_answer()))
            .collect()
    }
}

/// A student's answer. Numbers may also be given as text, which is how a
/// filled-in blank usually arrives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Answer {
    Bool(bool),
    Choice(usize),
    Number(f64),
    Choices(BTreeSet<usize>),
    Text(String),
}

pub type Answers = BTreeMap<String, Answer>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Submission {
    pub test_id: String,
    pub student: AgentId,
    pub answers: Answers,
    pub score: f64,
    pub max_score: f64,
    pub graded_at: VirtualTime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExamReport {
    pub test_id: String,
    pub delivered: Vec<LocationId>,
    pub missed: Vec<LocationId>,
    pub submissions: Vec<Submission>,
}

/// What the pull scenario keeps about a self-assessment: no answers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProgressRecord {
    pub student: AgentId,
    pub test_id: String,
    pub score: f64,
    pub timestamp: VirtualTime,
}
