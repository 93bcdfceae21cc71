//! File-backed test repository and results store.
//!
//! The repository is a JSON document `{"tests": [...]}`; an empty file is an
//! empty repository. Results are JSON Lines, one [`ResultRecord`] per line.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{ExamReport, ProgressRecord, Test};

#[derive(Debug, thiserror::Error)]
pub enum RepositoryError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed repository {origin} at {pointer}: {message}")]
    MalformedRepository {
        origin: String,
        /// JSON pointer to the offending element.
        pointer: String,
        message: String,
    },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RepositoryFile {
    #[serde(default)]
    format_version: Option<u32>,
    #[serde(default)]
    tests: Vec<Test>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", content = "data", rename_all = "snake_case")]
pub enum ResultRecord {
    ExamReport(ExamReport),
    Progress(ProgressRecord),
}

fn io_error(path: &Path, source: std::io::Error) -> RepositoryError {
    RepositoryError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Parses and validates repository text. `origin` names the source in
/// diagnostics.
pub fn parse_tests(text: &str, origin: &str) -> Result<Vec<Test>, RepositoryError> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let malformed = |pointer: String, message: String| RepositoryError::MalformedRepository {
        origin: origin.to_string(),
        pointer,
        message,
    };
    let mut de = serde_json::Deserializer::from_str(text);
    let file: RepositoryFile = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let pointer = e.path().to_string();
        let inner = e.into_inner();
        let message = format!("{inner} (line {}, column {})", inner.line(), inner.column());
        malformed(pointer, message)
    })?;
    for (i, test) in file.tests.iter().enumerate() {
        for (j, q) in test.questions.iter().enumerate() {
            q.validate()
                .map_err(|e| malformed(format!("/tests/{i}/questions/{j}"), e.to_string()))?;
        }
        test.validate()
            .map_err(|e| malformed(format!("/tests/{i}"), e.to_string()))?;
    }
    Ok(file.tests)
}

pub fn load_tests(path: impl AsRef<Path>) -> Result<Vec<Test>, RepositoryError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    parse_tests(&text, &path.display().to_string())
}

pub fn save_tests(tests: &[Test], path: impl AsRef<Path>) -> Result<(), RepositoryError> {
    let path = path.as_ref();
    let file = RepositoryFile {
        format_version: Some(1),
        tests: tests.to_vec(),
    };
    let text = serde_json::to_string_pretty(&file).expect("tests serialize");
    fs::write(path, text + "\n").map_err(|e| io_error(path, e))
}

pub fn append_result(record: &ResultRecord, path: impl AsRef<Path>) -> Result<(), RepositoryError> {
    let path = path.as_ref();
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| io_error(path, e))?;
    let line = serde_json::to_string(record).expect("records serialize");
    writeln!(file, "{line}").map_err(|e| io_error(path, e))
}

pub fn store_report(report: &ExamReport, path: impl AsRef<Path>) -> Result<(), RepositoryError> {
    append_result(&ResultRecord::ExamReport(report.clone()), path)
}

pub fn store_progress(
    record: &ProgressRecord,
    path: impl AsRef<Path>,
) -> Result<(), RepositoryError> {
    append_result(&ResultRecord::Progress(record.clone()), path)
}

pub fn load_results(path: impl AsRef<Path>) -> Result<Vec<ResultRecord>, RepositoryError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, line)| {
            serde_json::from_str(line).map_err(|e| RepositoryError::MalformedRepository {
                origin: path.display().to_string(),
                pointer: format!("line {}", n + 1),
                message: e.to_string(),
            })
        })
        .collect()
}
