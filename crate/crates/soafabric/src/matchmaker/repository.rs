//! Trigger events and their append-only repository.
//!
//! Every matchmaking run is stamped as a [`TriggerEvent`] — cause, the full
//! task situation, and the resulting decision — and appended as one compact
//! JSON line. The log is the audit trail: [`load_events`] rejects files whose
//! event ids are not strictly increasing, and replay re-derives each logged
//! decision from the same inputs.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{decide, Decision, MatchError, TaskSpec};
use crate::descriptor::ServiceDescriptor;

/// Why a trigger event was raised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cause {
    ClientRequest,
    Replay,
}

/// A raised trigger whose decision has not been computed yet.
#[derive(Debug, Clone)]
pub struct OpenEvent {
    pub event_id: u64,
    pub logical_time: u64,
    pub cause: Cause,
    pub task: TaskSpec,
    pub considered: Vec<String>,
}

impl OpenEvent {
    pub fn complete(self, decision: Decision) -> TriggerEvent {
        TriggerEvent {
            event_id: self.event_id,
            logical_time: self.logical_time,
            cause: self.cause,
            task: self.task,
            considered: self.considered,
            decision,
        }
    }
}

/// A completed decision record. Serialized field order is the wire format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriggerEvent {
    pub event_id: u64,
    pub logical_time: u64,
    pub cause: Cause,
    pub task: TaskSpec,
    pub considered: Vec<String>,
    pub decision: Decision,
}

/// Allocates strictly increasing event ids, starting at 1.
#[derive(Debug)]
pub struct Trigger {
    next_id: AtomicU64,
}

impl Default for Trigger {
    fn default() -> Self {
        Self::new()
    }
}

impl Trigger {
    pub fn new() -> Self {
        Trigger { next_id: AtomicU64::new(1) }
    }

    /// Opens an event for `task` over the gathered descriptors. The decision
    /// is filled in later via [`OpenEvent::complete`].
    pub fn raise(
        &self,
        task: &TaskSpec,
        descriptors: &[ServiceDescriptor],
        cause: Cause,
        logical_time: u64,
    ) -> OpenEvent {
        OpenEvent {
            event_id: self.next_id.fetch_add(1, Ordering::SeqCst),
            logical_time,
            cause,
            task: task.clone(),
            considered: descriptors.iter().map(|d| d.service_name.clone()).collect(),
        }
    }
}

/// Append-only JSON-lines store for trigger events.
///
/// Appends are serialized and flushed whole-line, so concurrent writers never
/// interleave bytes; event ids must arrive strictly increasing.
pub struct TriggerRepository {
    path: PathBuf,
    inner: Mutex<RepoInner>,
}

struct RepoInner {
    writer: BufWriter<File>,
    last_id: u64,
}

impl TriggerRepository {
    /// Creates (truncating) a repository file for a fresh run.
    pub fn create(path: impl AsRef<Path>) -> Result<Self, MatchError> {
        let file = OpenOptions::new()
            .create(true)
            .write(true)
            .truncate(true)
            .open(path.as_ref())?;
        Ok(TriggerRepository {
            path: path.as_ref().to_path_buf(),
            inner: Mutex::new(RepoInner { writer: BufWriter::new(file), last_id: 0 }),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Appends one event as a single line and flushes before returning.
    pub fn record_event(&self, event: &TriggerEvent) -> Result<(), MatchError> {
        let line = serde_json::to_string(event).expect("trigger events always serialize");
        let mut inner = self.inner.lock().unwrap_or_else(|e| e.into_inner());
        if event.event_id <= inner.last_id {
            return Err(MatchError::OutOfOrderEvent(event.event_id));
        }
        inner.writer.write_all(line.as_bytes())?;
        inner.writer.write_all(b"\n")?;
        inner.writer.flush()?;
        inner.last_id = event.event_id;
        Ok(())
    }
}

/// Reads a repository file back, enforcing event-id monotonicity.
pub fn load_events(path: impl AsRef<Path>) -> Result<Vec<TriggerEvent>, MatchError> {
    let file = File::open(path.as_ref())?;
    let reader = BufReader::new(file);
    let mut events: Vec<TriggerEvent> = Vec::new();
    let mut last_id = 0u64;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let event: TriggerEvent = serde_json::from_str(&line).map_err(|e| {
            MatchError::CorruptLog { line: idx + 1, msg: e.to_string() }
        })?;
        if event.event_id <= last_id {
            return Err(MatchError::CorruptLog {
                line: idx + 1,
                msg: format!("event_id {} is not greater than {}", event.event_id, last_id),
            });
        }
        last_id = event.event_id;
        events.push(event);
    }
    Ok(events)
}

/// The client-facing entry point: raises a trigger, runs the inference rules,
/// and records the completed event, all under one lock so the repository sees
/// ids in file order even with many concurrent clients.
pub struct ClientApi {
    trigger: Trigger,
    repo: TriggerRepository,
    gate: Mutex<()>,
}

impl ClientApi {
    pub fn new(repo: TriggerRepository) -> Self {
        ClientApi { trigger: Trigger::new(), repo, gate: Mutex::new(()) }
    }

    pub fn repository(&self) -> &TriggerRepository {
        &self.repo
    }

    pub fn decide_recorded(
        &self,
        task: &TaskSpec,
        descriptors: &[ServiceDescriptor],
        cause: Cause,
        logical_time: u64,
    ) -> Result<TriggerEvent, MatchError> {
        let _gate = self.gate.lock().unwrap_or_else(|e| e.into_inner());
        let open = self.trigger.raise(task, descriptors, cause, logical_time);
        let decision = decide(task, descriptors);
        let event = open.complete(decision);
        self.repo.record_event(&event)?;
        Ok(event)
    }
}
