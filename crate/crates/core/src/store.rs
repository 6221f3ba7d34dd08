//! Append-only session logs on disk.
//!
//! Layout under the data directory:
//!
//! ```text
//! sessions/{id}.jsonl   one LogEntry per line
//! index.jsonl           SessionRecord snapshots, last one per id wins
//! ```
//!
//! A line is acknowledged only after it has been written and synced. A crash
//! mid-write leaves at most one partial trailing line, which readers skip and
//! report, and the next append cuts off.

use std::collections::HashMap;
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryKind {
    StudentEvent,
    AgentReply,
    Scores,
    Decision,
    Report,
}

impl EntryKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EntryKind::StudentEvent => "student_event",
            EntryKind::AgentReply => "agent_reply",
            EntryKind::Scores => "scores",
            EntryKind::Decision => "decision",
            EntryKind::Report => "report",
        }
    }
}

impl fmt::Display for EntryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub seq: u64,
    pub kind: EntryKind,
    pub ts: DateTime<Utc>,
    pub payload: serde_json::Value,
}

/// An entry before the store assigns its sequence number.
#[derive(Debug, Clone, PartialEq)]
pub struct NewEntry {
    pub kind: EntryKind,
    pub ts: DateTime<Utc>,
    pub payload: serde_json::Value,
}

impl NewEntry {
    pub fn new(kind: EntryKind, ts: DateTime<Utc>, payload: serde_json::Value) -> Self {
        Self { kind, ts, payload }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionStatus {
    Open,
    Closed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session_id: String,
    pub scenario_id: String,
    pub created: DateTime<Utc>,
    #[serde(default)]
    pub closed: Option<DateTime<Utc>>,
    pub status: SessionStatus,
}

/// Entries read back from a session file.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRead {
    pub entries: Vec<LogEntry>,
    /// Bytes of a partial trailing line that were ignored.
    pub torn_bytes: usize,
}

impl LogRead {
    pub fn truncated(&self) -> bool {
        self.torn_bytes > 0
    }
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("session `{0}` already exists")]
    DuplicateSession(String),
    #[error("session `{0}` is closed")]
    Closed(String),
    #[error("session `{0}` has no report entry and cannot be closed")]
    MissingReport(String),
    #[error("invalid session id `{0}`")]
    InvalidId(String),
    #[error("{path}:{line}: corrupt log line: {message}")]
    Corrupt { path: PathBuf, line: usize, message: String },
    #[error("storage I/O failure: {0}")]
    Io(#[from] io::Error),
}

/// How hard an append pushes bytes to disk before returning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Durability {
    /// `fsync` every append.
    #[default]
    Sync,
    /// Leave flushing to the OS. Only for tests and throwaway runs.
    Buffered,
}

#[derive(Debug)]
struct SessionSlot {
    record: SessionRecord,
    /// Next sequence number, known once the file has been scanned.
    next_seq: Option<u64>,
    has_report: bool,
}

/// File-backed store: one writer per session file, serialized index updates.
#[derive(Debug)]
pub struct FileStore {
    root: PathBuf,
    durability: Durability,
    sessions: RwLock<HashMap<String, Arc<Mutex<SessionSlot>>>>,
    index: Mutex<()>,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 128 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

impl FileStore {
    pub fn open(root: impl AsRef<Path>) -> Result<Self, StoreError> {
        Self::open_with(root, Durability::Sync)
    }

    pub fn open_with(root: impl AsRef<Path>, durability: Durability) -> Result<Self, StoreError> {
        let root = root.as_ref().to_path_buf();
        fs::create_dir_all(root.join("sessions"))?;
        let mut sessions = HashMap::new();
        let index_path = root.join("index.jsonl");
        if index_path.exists() {
            let (records, torn) = read_lines::<SessionRecord>(&index_path)?;
            if torn > 0 {
                tracing::warn!(bytes = torn, "ignoring partial trailing line in session index");
                truncate_to_complete(&index_path)?;
            }
            for record in records {
                sessions.insert(
                    record.session_id.clone(),
                    Arc::new(Mutex::new(SessionSlot { record, next_seq: None, has_report: false })),
                );
            }
        }
        Ok(Self { root, durability, sessions: RwLock::new(sessions), index: Mutex::new(()) })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn log_path(&self, session_id: &str) -> PathBuf {
        self.root.join("sessions").join(format!("{session_id}.jsonl"))
    }

    /// Creates a session with a fresh random id.
    pub fn create_session(&self, scenario_id: &str, ts: DateTime<Utc>) -> Result<SessionRecord, StoreError> {
        self.create_session_with_id(&uuid::Uuid::new_v4().simple().to_string(), scenario_id, ts)
    }

    pub fn create_session_with_id(
        &self,
        session_id: &str,
        scenario_id: &str,
        ts: DateTime<Utc>,
    ) -> Result<SessionRecord, StoreError> {
        if !valid_id(session_id) {
            return Err(StoreError::InvalidId(session_id.to_string()));
        }
        let mut sessions = self.sessions.write().expect("session map lock");
        if sessions.contains_key(session_id) {
            return Err(StoreError::DuplicateSession(session_id.to_string()));
        }
        let record = SessionRecord {
            session_id: session_id.to_string(),
            scenario_id: scenario_id.to_string(),
            created: ts,
            closed: None,
            status: SessionStatus::Open,
        };
        let file = OpenOptions::new().create(true).truncate(true).write(true).open(self.log_path(session_id))?;
        self.finish(&file)?;
        self.write_index(&record)?;
        sessions.insert(
            session_id.to_string(),
            Arc::new(Mutex::new(SessionSlot { record: record.clone(), next_seq: Some(1), has_report: false })),
        );
        Ok(record)
    }

    fn slot(&self, session_id: &str) -> Result<Arc<Mutex<SessionSlot>>, StoreError> {
        self.sessions
            .read()
            .expect("session map lock")
            .get(session_id)
            .cloned()
            .ok_or_else(|| StoreError::UnknownSession(session_id.to_string()))
    }

    pub fn session(&self, session_id: &str) -> Result<SessionRecord, StoreError> {
        Ok(self.slot(session_id)?.lock().expect("session lock").record.clone())
    }

    /// All sessions, oldest first.
    pub fn sessions(&self) -> Vec<SessionRecord> {
        let map = self.sessions.read().expect("session map lock");
        let mut records: Vec<_> = map.values().map(|s| s.lock().expect("session lock").record.clone()).collect();
        records.sort_by(|a, b| a.created.cmp(&b.created).then_with(|| a.session_id.cmp(&b.session_id)));
        records
    }

    pub fn append(&self, session_id: &str, entry: NewEntry) -> Result<u64, StoreError> {
        Ok(self.append_all(session_id, vec![entry])?[0])
    }

    /// Appends several entries with one write and one sync. Returns their
    /// sequence numbers.
    pub fn append_all(&self, session_id: &str, entries: Vec<NewEntry>) -> Result<Vec<u64>, StoreError> {
        let slot = self.slot(session_id)?;
        let mut slot = slot.lock().expect("session lock");
        if slot.record.status == SessionStatus::Closed {
            return Err(StoreError::Closed(session_id.to_string()));
        }
        let path = self.log_path(session_id);
        let mut next = match slot.next_seq {
            Some(n) => n,
            None => {
                let read = read_log_file(&path)?;
                if read.truncated() {
                    truncate_to_complete(&path)?;
                }
                slot.has_report = read.entries.iter().any(|e| e.kind == EntryKind::Report);
                read.entries.last().map_or(1, |e| e.seq + 1)
            }
        };
        let mut buf = Vec::new();
        let mut seqs = Vec::with_capacity(entries.len());
        let mut report = false;
        for entry in entries {
            let line = LogEntry { seq: next, kind: entry.kind, ts: entry.ts, payload: entry.payload };
            serde_json::to_writer(&mut buf, &line).map_err(io::Error::other)?;
            buf.push(b'\n');
            seqs.push(next);
            report |= entry.kind == EntryKind::Report;
            next += 1;
        }
        let mut file = OpenOptions::new().append(true).open(&path)?;
        file.write_all(&buf)?;
        self.finish(&file)?;
        slot.next_seq = Some(next);
        slot.has_report |= report;
        Ok(seqs)
    }

    pub fn read_log(&self, session_id: &str) -> Result<LogRead, StoreError> {
        let slot = self.slot(session_id)?;
        let _guard = slot.lock().expect("session lock");
        read_log_file(&self.log_path(session_id))
    }

    /// Marks the session closed. A report entry must already be in its log.
    pub fn close_session(&self, session_id: &str, ts: DateTime<Utc>) -> Result<SessionRecord, StoreError> {
        let slot = self.slot(session_id)?;
        let mut slot = slot.lock().expect("session lock");
        if slot.record.status == SessionStatus::Closed {
            return Err(StoreError::Closed(session_id.to_string()));
        }
        if slot.next_seq.is_none() {
            let read = read_log_file(&self.log_path(session_id))?;
            slot.has_report = read.entries.iter().any(|e| e.kind == EntryKind::Report);
        }
        if !slot.has_report {
            return Err(StoreError::MissingReport(session_id.to_string()));
        }
        let mut record = slot.record.clone();
        record.status = SessionStatus::Closed;
        record.closed = Some(ts);
        self.write_index(&record)?;
        slot.record = record.clone();
        Ok(record)
    }

    fn write_index(&self, record: &SessionRecord) -> Result<(), StoreError> {
        let _guard = self.index.lock().expect("index lock");
        let mut line = serde_json::to_vec(record).map_err(io::Error::other)?;
        line.push(b'\n');
        let mut file = OpenOptions::new().create(true).append(true).open(self.root.join("index.jsonl"))?;
        file.write_all(&line)?;
        self.finish(&file)
    }

    fn finish(&self, file: &File) -> Result<(), StoreError> {
        if self.durability == Durability::Sync {
            file.sync_data()?;
        }
        Ok(())
    }
}

/// Parses every complete line of a JSON-lines file. Returns the values and the
/// length of any partial trailing line.
fn read_lines<T: serde::de::DeserializeOwned>(path: &Path) -> Result<(Vec<T>, usize), StoreError> {
    let bytes = fs::read(path)?;
    let complete = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    let mut out = Vec::new();
    for (i, line) in bytes[..complete].split(|&b| b == b'\n').enumerate() {
        if line.is_empty() {
            continue;
        }
        let value = serde_json::from_slice(line).map_err(|e| StoreError::Corrupt {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(value);
    }
    Ok((out, bytes.len() - complete))
}

/// Reads a session file and checks that sequence numbers run 1, 2, 3, ...
pub fn read_log_file(path: &Path) -> Result<LogRead, StoreError> {
    let (entries, torn_bytes) = read_lines::<LogEntry>(path)?;
    for (i, entry) in entries.iter().enumerate() {
        if entry.seq != i as u64 + 1 {
            return Err(StoreError::Corrupt {
                path: path.to_path_buf(),
                line: i + 1,
                message: format!("sequence number {} where {} was expected", entry.seq, i + 1),
            });
        }
    }
    if torn_bytes > 0 {
        tracing::warn!(path = %path.display(), bytes = torn_bytes, "log ends with a partial entry");
    }
    Ok(LogRead { entries, torn_bytes })
}

fn truncate_to_complete(path: &Path) -> Result<(), StoreError> {
    let bytes = fs::read(path)?;
    let complete = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    let file = OpenOptions::new().write(true).open(path)?;
    file.set_len(complete as u64)?;
    file.sync_data()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn ts() -> DateTime<Utc> {
        "2025-01-01T10:00:00Z".parse().unwrap()
    }

    fn entry(n: u64) -> NewEntry {
        NewEntry::new(EntryKind::StudentEvent, ts(), json!({ "n": n }))
    }

    #[test]
    fn sequence_starts_at_one_and_reads_back_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let store = FileStore::open(dir.path()).unwrap();
        let s = store.create_session("chest_pain", ts()).unwrap();
        assert_eq!(store.append(&s.session_id, entry(0)).unwrap(), 1);
        for n in 1..5 {
            store.append(&s.session_id, entry(n)).unwrap();
        }
        let log = store.read_log(&s.session_id).unwrap();
        assert!(!log.truncated());
        assert_eq!(log.entries.iter().map(|e| e.payload["n"].as_u64().unwrap()).collect::<Vec<_>>(), [0, 1, 2, 3, 4]);
    }

    #[test]
    fn closed_sessions_reject_appends() {
        let dir = tempfile::tempdir().unwrap();
        let store = FileStore::open(dir.path()).unwrap();
        let s = store.create_session("x", ts()).unwrap();
        store.append(&s.session_id, entry(1)).unwrap();
        assert!(matches!(store.close_session(&s.session_id, ts()), Err(StoreError::MissingReport(_))));
        store.append(&s.session_id, NewEntry::new(EntryKind::Report, ts(), json!({}))).unwrap();
        store.close_session(&s.session_id, ts()).unwrap();
        assert!(matches!(store.append(&s.session_id, entry(2)), Err(StoreError::Closed(_))));
    }

    #[test]
    fn unknown_and_invalid_ids() {
        let dir = tempfile::tempdir().unwrap();
        let store = FileStore::open(dir.path()).unwrap();
        assert!(matches!(store.read_log("nope"), Err(StoreError::UnknownSession(_))));
        assert!(matches!(store.create_session_with_id("../etc", "x", ts()), Err(StoreError::InvalidId(_))));
    }

    #[test]
    fn survives_restart() {
        let dir = tempfile::tempdir().unwrap();
        let id = {
            let store = FileStore::open(dir.path()).unwrap();
            let s = store.create_session("x", ts()).unwrap();
            store.append(&s.session_id, entry(1)).unwrap();
            s.session_id
        };
        let store = FileStore::open(dir.path()).unwrap();
        assert_eq!(store.read_log(&id).unwrap().entries.len(), 1);
        assert_eq!(store.append(&id, entry(2)).unwrap(), 2);
        assert_eq!(store.sessions().len(), 1);
    }
}
