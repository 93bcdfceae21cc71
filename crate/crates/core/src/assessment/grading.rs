use serde::{Deserialize, Serialize};

use super::model::{Answer, Answers, Question, QuestionKind, Test};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GradeError {
    #[error("answer for unknown question `{0}`")]
    UnknownQuestionId(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionScore {
    pub question: String,
    pub awarded: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grade {
    pub score: f64,
    pub max_score: f64,
    pub breakdown: Vec<QuestionScore>,
}

fn normalize(text: &str) -> String {
    text.trim().to_lowercase()
}

fn as_number(answer: &Answer) -> Option<f64> {
    match answer {
        Answer::Number(n) => Some(*n),
        Answer::Choice(n) => Some(*n as f64),
        Answer::Text(t) => t.trim().parse::<f64>().ok().filter(|n| n.is_finite()),
        _ => None,
    }
}

/// Exact-answer rule for one question.
pub fn is_correct(question: &Question, answer: &Answer) -> bool {
    match (&question.kind, answer) {
        (QuestionKind::SingleChoice { key, .. }, Answer::Choice(a)) => a == key,
        (QuestionKind::MultipleChoice { key, .. }, Answer::Choices(a)) => a == key,
        (QuestionKind::MultipleChoice { key, .. }, Answer::Choice(a)) => {
            key.len() == 1 && key.contains(a)
        }
        (QuestionKind::TrueFalse { key }, Answer::Bool(a)) => a == key,
        (QuestionKind::FillNumeric { key, tolerance }, a) => {
            as_number(a).is_some_and(|n| (n - key).abs() <= *tolerance)
        }
        (QuestionKind::FillText { key }, Answer::Text(a)) => normalize(a) == normalize(key),
        _ => false,
    }
}

/// Full weight per exactly right answer, nothing otherwise; unanswered
/// questions score 0.
pub fn grade(test: &Test, answers: &Answers) -> Result<Grade, GradeError> {
    if let Some(unknown) = answers.keys().find(|id| test.question(id).is_none()) {
        return Err(GradeError::UnknownQuestionId(unknown.clone()));
    }
    let breakdown: Vec<QuestionScore> = test
        .questions
        .iter()
        .map(|q| QuestionScore {
            question: q.id.clone(),
            awarded: match answers.get(&q.id) {
                Some(a) if is_correct(q, a) => q.weight,
                _ => 0.0,
            },
            weight: q.weight,
        })
        .collect();
    Ok(Grade {
        score: breakdown.iter().map(|s| s.awarded).sum(),
        max_score: test.total_weight(),
        breakdown,
    })
}
