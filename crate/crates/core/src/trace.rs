//! Trace events and the JSON Lines trace format.

use std::collections::BTreeMap;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::model::{AgentId, VirtualTime};

pub const TRACE_FORMAT_VERSION: u32 = 1;

pub type Detail = BTreeMap<String, Value>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TraceKind {
    Spawn,
    Terminate,
    Send,
    Deliver,
    MigrateStart,
    MigrateEnd,
    BehaviorDone,
    ObjectiveReached,
    ObjectiveMissed,
    Custom,
}

/// Field order is part of the file format: tick, seq, kind, agent, detail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub tick: VirtualTime,
    pub seq: u64,
    pub kind: TraceKind,
    pub agent: AgentId,
    pub detail: Detail,
}

impl TraceEvent {
    pub fn get(&self, key: &str) -> Option<&Value> {
        self.detail.get(key)
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.detail.get(key).and_then(Value::as_str)
    }

    pub fn get_u64(&self, key: &str) -> Option<u64> {
        self.detail.get(key).and_then(Value::as_u64)
    }

    /// Name of a Custom event.
    pub fn event(&self) -> Option<&str> {
        self.get_str("event")
    }

    pub fn is_custom(&self, name: &str) -> bool {
        self.kind == TraceKind::Custom && self.event() == Some(name)
    }

    pub fn is_failed_delivery(&self) -> bool {
        self.kind == TraceKind::Deliver && self.get_str("status") == Some("failed")
    }
}

/// Builds a detail map from `(key, value)` pairs.
pub fn detail<I, K>(pairs: I) -> Detail
where
    I: IntoIterator<Item = (K, Value)>,
    K: Into<String>,
{
    pairs.into_iter().map(|(k, v)| (k.into(), v)).collect()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TraceLog {
    events: Vec<TraceEvent>,
}

impl TraceLog {
    pub fn new() -> Self {
        TraceLog::default()
    }

    pub fn push(&mut self, tick: VirtualTime, kind: TraceKind, agent: AgentId, detail: Detail) {
        let seq = self.events.len() as u64;
        self.events.push(TraceEvent {
            tick,
            seq,
            kind,
            agent,
            detail,
        });
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &TraceEvent> {
        self.events.iter()
    }

    pub fn of_kind(&self, kind: TraceKind) -> impl Iterator<Item = &TraceEvent> {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    pub fn for_agent(&self, agent: AgentId) -> impl Iterator<Item = &TraceEvent> {
        self.events.iter().filter(move |e| e.agent == agent)
    }

    pub fn custom<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a TraceEvent> + 'a {
        self.events.iter().filter(move |e| e.is_custom(name))
    }

    /// Writes the header line followed by one event per line.
    pub fn write_jsonl<W: Write>(&self, mut out: W, header: &Detail) -> io::Result<()> {
        let mut head = header.clone();
        head.insert("format_version".into(), Value::from(TRACE_FORMAT_VERSION));
        serde_json::to_writer(&mut out, &head)?;
        out.write_all(b"\n")?;
        for event in &self.events {
            serde_json::to_writer(&mut out, event)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self, header: &Detail) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf, header)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }

    /// Parses the output of [`TraceLog::write_jsonl`], skipping the header.
    pub fn from_jsonl(text: &str) -> Result<Self, serde_json::Error> {
        let mut events = Vec::new();
        for line in text.lines().skip(1).filter(|l| !l.trim().is_empty()) {
            events.push(serde_json::from_str(line)?);
        }
        Ok(TraceLog { events })
    }
}
