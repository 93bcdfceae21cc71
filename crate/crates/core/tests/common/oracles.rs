//! Independent reference implementations used to cross-check the library.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;

use mabs::assessment::{Answer, Answers, Question, QuestionKind, Test, TestKind};

/// Early / on time / late by counting, with no arithmetic on the window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Class {
    Early(u64),
    OnTime,
    Late(u64),
}

pub fn classify(start: u64, end: u64, arrival: u64) -> Class {
    if (start..=end).contains(&arrival) {
        return Class::OnTime;
    }
    if arrival < start {
        return Class::Early(start);
    }
    let mut by = 0;
    let mut t = end;
    while t < arrival {
        t += 1;
        by += 1;
    }
    Class::Late(by)
}

/// One stop of a route in absolute ticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stop {
    pub location: usize,
    pub start: u64,
    pub end: u64,
}

/// Whether some choice of departure times serves every stop inside its
/// window, when every move takes `travel` ticks and staying put takes none.
pub fn route_feasible(stops: &[Stop], from: usize, now: u64, travel: u64) -> bool {
    let Some((first, rest)) = stops.split_first() else {
        return true;
    };
    let cost = if first.location == from { 0 } else { travel };
    for depart in now..=first.end {
        let arrival = depart + cost;
        if arrival > first.end {
            break;
        }
        let served = arrival.max(first.start);
        if route_feasible(rest, first.location, served, travel) {
            return true;
        }
    }
    false
}

/// A random test and answer sheet, plus the score the sheet must earn. Each
/// answer is built to be right or wrong, so the expected score needs no
/// grading logic.
pub fn random_graded_case(rng: &mut impl Rng) -> (Test, Answers, f64) {
    let n = rng.gen_range(1..8);
    let mut questions = Vec::new();
    let mut answers = BTreeMap::new();
    let mut expected = 0.0;
    let mode = rng.gen_range(0..4);
    for i in 0..n {
        let id = format!("q{i}");
        let weight = rng.gen_range(1..10) as f64;
        let (kind, right, wrong) = random_question(rng);
        questions.push(Question {
            id: id.clone(),
            prompt: format!("question {i}"),
            weight,
            kind,
        });
        let answer = match mode {
            0 => Some(true),
            1 => None,
            _ => match rng.gen_range(0..3) {
                0 => Some(true),
                1 => Some(false),
                _ => None,
            },
        };
        match answer {
            Some(true) => {
                expected += weight;
                answers.insert(id, right);
            }
            Some(false) => {
                answers.insert(id, wrong);
            }
            None => {}
        }
    }
    let test = Test::new("t", "random", questions, TestKind::SelfAssessment).unwrap();
    (test, answers, expected)
}

fn options(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("option {i}")).collect()
}

fn random_question(rng: &mut impl Rng) -> (QuestionKind, Answer, Answer) {
    match rng.gen_range(0..5) {
        0 => {
            let n = rng.gen_range(2..6);
            let key = rng.gen_range(0..n);
            let wrong = (key + rng.gen_range(1..n)) % n;
            (
                QuestionKind::SingleChoice {
                    options: options(n),
                    key,
                },
                Answer::Choice(key),
                Answer::Choice(wrong),
            )
        }
        1 => {
            let n = rng.gen_range(2..6);
            let mut all: Vec<usize> = (0..n).collect();
            all.shuffle(rng);
            let k = rng.gen_range(1..=n);
            let key: BTreeSet<usize> = all[..k].iter().copied().collect();
            let mut wrong = key.clone();
            let flip = rng.gen_range(0..n);
            if !wrong.remove(&flip) {
                wrong.insert(flip);
            }
            (
                QuestionKind::MultipleChoice {
                    options: options(n),
                    key: key.clone(),
                },
                Answer::Choices(key),
                Answer::Choices(wrong),
            )
        }
        2 => {
            let key = rng.gen_bool(0.5);
            (
                QuestionKind::TrueFalse { key },
                Answer::Bool(key),
                Answer::Bool(!key),
            )
        }
        3 => {
            let key = rng.gen_range(-50..50) as f64;
            let tolerance = [0.0, 0.5, 1.0][rng.gen_range(0..3)];
            let inside = key + tolerance / 2.0;
            let right = if rng.gen_bool(0.5) {
                Answer::Number(inside)
            } else {
                Answer::Text(format!(" {inside} "))
            };
            (
                QuestionKind::FillNumeric { key, tolerance },
                right,
                Answer::Number(key + tolerance + 1.0),
            )
        }
        _ => {
            let words = ["Paris", "Rome", "oxygen", "Turing"];
            let key = words[rng.gen_range(0..words.len())].to_string();
            let right = match rng.gen_range(0..3) {
                0 => key.clone(),
                1 => format!("  {}", key.to_uppercase()),
                _ => format!("{}\t", key.to_lowercase()),
            };
            (
                QuestionKind::FillText { key: key.clone() },
                Answer::Text(right),
                Answer::Text(format!("{key}x")),
            )
        }
    }
}
