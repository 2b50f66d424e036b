use std::fs::{self, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::OrchestratorError;
use crate::scoring::LeaderboardTarget;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    TeamRegistered,
    SubmissionAccepted,
    SubmissionRejected,
    SubmissionCompleted,
    ResultRecorded,
}

/// One line of the append-only log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub timestamp: u64,
    pub kind: EventKind,
    pub team_id: String,
    #[serde(default)]
    pub submission_id: Option<String>,
    #[serde(default)]
    pub target: Option<LeaderboardTarget>,
    pub payload: serde_json::Value,
}

/// Newline-delimited JSON event file.
#[derive(Debug, Clone)]
pub struct EventLog {
    path: PathBuf,
}

impl EventLog {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        EventLog { path: path.into() }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn read_all(&self) -> Result<Vec<Event>, OrchestratorError> {
        let file = match fs::File::open(&self.path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(OrchestratorError::io(&self.path, e)),
        };
        let mut events = Vec::new();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| OrchestratorError::io(&self.path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let event: Event = serde_json::from_str(&line).map_err(|e| {
                OrchestratorError::Storage(format!("{}:{}: {e}", self.path.display(), n + 1))
            })?;
            if event.seq != events.len() as u64 + 1 {
                return Err(OrchestratorError::Storage(format!(
                    "{}:{}: sequence {} out of order",
                    self.path.display(),
                    n + 1,
                    event.seq
                )));
            }
            events.push(event);
        }
        Ok(events)
    }

    pub fn append(&self, event: &Event) -> Result<(), OrchestratorError> {
        if let Some(parent) = self.path.parent() {
            fs::create_dir_all(parent).map_err(|e| OrchestratorError::io(parent, e))?;
        }
        let mut line = serde_json::to_string(event).expect("event serializes");
        line.push('\n');
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(|e| OrchestratorError::io(&self.path, e))?;
        file.write_all(line.as_bytes())
            .and_then(|_| file.sync_data())
            .map_err(|e| OrchestratorError::io(&self.path, e))
    }
}
