//! Append-only event log and snapshots.
//!
//! The log is JSON lines, one [`EventRecord`] per line, in `events.jsonl`.
//! A snapshot (`snapshot.json`) holds a folded [`LabState`]; replay starts
//! from it and applies the records after its sequence number. A final line
//! without a newline is a torn write and is dropped.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::state::{Experiment, LabState, Session};
use super::LabError;
use crate::interleave::SessionOutcome;
use crate::systems::SystemDescriptor;

pub const LOG_FILE: &str = "events.jsonl";
pub const SNAPSHOT_FILE: &str = "snapshot.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum Event {
    SystemRegistered(SystemDescriptor),
    ExperimentCreated(Experiment),
    Started {
        experiment_id: String,
    },
    Stopped {
        experiment_id: String,
    },
    TrafficUpdated {
        experiment_id: String,
        traffic_fraction_experimental: f64,
    },
    SessionCreated(Session),
    FeedbackRecorded {
        session_id: String,
        clicks: Vec<usize>,
        outcome: SessionOutcome,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub sequence_no: u64,
    pub recorded_at: DateTime<Utc>,
    #[serde(flatten)]
    pub event: Event,
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> LabError {
    LabError::Storage(format!("{}: {e}", path.display()))
}

/// Parsed log contents plus the byte length of the intact prefix.
struct LogContents {
    records: Vec<EventRecord>,
    valid_len: u64,
}

fn read_log(path: &Path) -> Result<LogContents, LabError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Ok(LogContents {
                records: Vec::new(),
                valid_len: 0,
            })
        }
        Err(e) => return Err(io_error(path, e)),
    };
    let mut reader = BufReader::new(file);
    let mut records = Vec::new();
    let mut valid_len = 0u64;
    let mut line = String::new();
    let mut line_no = 0usize;
    loop {
        line.clear();
        let n = reader.read_line(&mut line).map_err(|e| io_error(path, e))?;
        if n == 0 {
            break;
        }
        line_no += 1;
        if !line.ends_with('\n') {
            break;
        }
        if !line.trim().is_empty() {
            let record = serde_json::from_str::<EventRecord>(line.trim_end())
                .map_err(|e| LabError::Corrupt(format!("{} line {line_no}: {e}", path.display())))?;
            records.push(record);
        }
        valid_len += n as u64;
    }
    Ok(LogContents { records, valid_len })
}

/// Fold a log file from the empty state.
pub fn replay_log(path: &Path) -> Result<LabState, LabError> {
    let mut state = LabState::default();
    for record in read_log(path)?.records {
        state.apply(&record)?;
    }
    Ok(state)
}

fn load_snapshot(path: &Path) -> Result<Option<LabState>, LabError> {
    match fs::read_to_string(path) {
        Ok(text) => serde_json::from_str(&text)
            .map(Some)
            .map_err(|e| LabError::Corrupt(format!("{}: {e}", path.display()))),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(io_error(path, e)),
    }
}

/// Restore state from a data directory: snapshot, then the log tail.
pub fn load_state(data_dir: &Path) -> Result<LabState, LabError> {
    Ok(restore(data_dir)?.0)
}

fn restore(data_dir: &Path) -> Result<(LabState, u64), LabError> {
    let mut state = load_snapshot(&data_dir.join(SNAPSHOT_FILE))?.unwrap_or_default();
    let contents = read_log(&data_dir.join(LOG_FILE))?;
    for record in &contents.records {
        if record.sequence_no <= state.last_sequence_no {
            continue;
        }
        state.apply(record)?;
    }
    Ok((state, contents.valid_len))
}

/// Single writer over a data directory.
#[derive(Debug)]
pub struct EventStore {
    dir: PathBuf,
    log: File,
}

impl EventStore {
    /// Open (creating if needed) and restore the state. A torn final line is
    /// truncated away so later appends start on a fresh line.
    pub fn open(dir: &Path) -> Result<(EventStore, LabState), LabError> {
        fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        let (state, valid_len) = restore(dir)?;
        let path = dir.join(LOG_FILE);
        let log = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| io_error(&path, e))?;
        let on_disk = log.metadata().map_err(|e| io_error(&path, e))?.len();
        if on_disk > valid_len {
            log.set_len(valid_len).map_err(|e| io_error(&path, e))?;
        }
        Ok((
            EventStore {
                dir: dir.to_path_buf(),
                log,
            },
            state,
        ))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn append(&mut self, record: &EventRecord) -> Result<(), LabError> {
        let mut line = serde_json::to_string(record).expect("event serializes");
        line.push('\n');
        let path = self.dir.join(LOG_FILE);
        self.log
            .write_all(line.as_bytes())
            .and_then(|_| self.log.flush())
            .map_err(|e| io_error(&path, e))
    }

    /// Write `snapshot.json` via a temporary file and rename.
    pub fn snapshot(&self, state: &LabState) -> Result<(), LabError> {
        let path = self.dir.join(SNAPSHOT_FILE);
        let tmp = self.dir.join("snapshot.json.tmp");
        let body = serde_json::to_vec(state).expect("state serializes");
        fs::write(&tmp, body).map_err(|e| io_error(&tmp, e))?;
        self.log.sync_data().map_err(|e| io_error(&path, e))?;
        fs::rename(&tmp, &path).map_err(|e| io_error(&path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lab::state::{ExperimentDraft, ExperimentMethod};
    use crate::systems::Task;

    fn record(seq: u64, event: Event) -> EventRecord {
        EventRecord {
            sequence_no: seq,
            recorded_at: DateTime::UNIX_EPOCH,
            event,
        }
    }

    fn created(id: &str) -> Event {
        let draft = ExperimentDraft {
            site_id: "s".into(),
            task: Task::AdhocRetrieval,
            baseline_system: "a".into(),
            candidate_systems: vec!["b".into()],
            method: ExperimentMethod::TeamDraft,
            traffic_fraction_experimental: 0.5,
            candidate_rotation: Default::default(),
            k: 10,
            seed: 7,
        };
        Event::ExperimentCreated(Experiment::from_draft(id.into(), draft))
    }

    fn write_lines(path: &Path, records: &[EventRecord]) {
        let body: String = records
            .iter()
            .map(|r| serde_json::to_string(r).unwrap() + "\n")
            .collect();
        fs::write(path, body).unwrap();
    }

    #[test]
    fn record_layout() {
        let r = record(3, Event::Started {
            experiment_id: "exp-0001".into(),
        });
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        assert_eq!(v["sequence_no"], 3);
        assert_eq!(v["kind"], "started");
        assert_eq!(v["payload"]["experiment_id"], "exp-0001");
        let back: EventRecord = serde_json::from_value(v).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn empty_log_gives_empty_state() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(replay_log(&dir.path().join(LOG_FILE)).unwrap(), LabState::default());
        fs::write(dir.path().join(LOG_FILE), "").unwrap();
        assert_eq!(replay_log(&dir.path().join(LOG_FILE)).unwrap(), LabState::default());
    }

    #[test]
    fn gap_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(LOG_FILE);
        write_lines(&path, &[record(1, created("exp-0001")), record(3, created("exp-0002"))]);
        let err = replay_log(&path).unwrap_err().to_string();
        assert!(err.contains("sequence gap: expected 2, found 3"), "{err}");
    }

    #[test]
    fn torn_tail_dropped_and_truncated() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(LOG_FILE);
        write_lines(&path, &[record(1, created("exp-0001"))]);
        let intact = fs::metadata(&path).unwrap().len();
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"{\"sequence_no\":2,\"recorded_").unwrap();
        drop(f);
        assert_eq!(replay_log(&path).unwrap().experiments.len(), 1);
        let (mut store, state) = EventStore::open(dir.path()).unwrap();
        assert_eq!(fs::metadata(&path).unwrap().len(), intact);
        store
            .append(&record(state.last_sequence_no + 1, created("exp-0002")))
            .unwrap();
        assert_eq!(replay_log(&path).unwrap().experiments.len(), 2);
    }

    #[test]
    fn malformed_middle_line_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(LOG_FILE);
        fs::write(&path, "not json\n").unwrap();
        assert!(matches!(replay_log(&path), Err(LabError::Corrupt(_))));
    }

    #[test]
    fn snapshot_then_tail() {
        let dir = tempfile::tempdir().unwrap();
        let (mut store, mut state) = EventStore::open(dir.path()).unwrap();
        for (seq, id) in [(1, "exp-0001"), (2, "exp-0002")] {
            let r = record(seq, created(id));
            store.append(&r).unwrap();
            state.apply(&r).unwrap();
        }
        store.snapshot(&state).unwrap();
        let r = record(3, Event::Started {
            experiment_id: "exp-0001".into(),
        });
        store.append(&r).unwrap();
        state.apply(&r).unwrap();
        drop(store);
        assert_eq!(load_state(dir.path()).unwrap(), state);
        assert_eq!(replay_log(&dir.path().join(LOG_FILE)).unwrap(), state);
    }
}
