use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::events::{Event, EventKind, EventLog};
use super::quota::{QuotaLedger, Rejection};
use super::submission::{Phase, Submission, SubmissionStatus};
use super::OrchestratorError;
use crate::model::{TaskId, TaskRegistry};
use crate::scoring::{
    rank_leaderboard, score_report, LeaderboardEntry, LeaderboardTarget, Membership, TaskScore,
};

/// A submission's standing on one board.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoardEntry {
    pub target: LeaderboardTarget,
    pub submission_id: String,
    pub team_id: String,
    pub timestamp: u64,
    pub aggregate: f64,
    pub per_task: Vec<TaskScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RecordedPayload {
    phase: Phase,
    entries: Vec<BoardEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotEntry {
    pub rank: usize,
    pub submission_id: String,
    pub team_id: String,
    pub aggregate: f64,
    pub per_task: Vec<TaskScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardSnapshot {
    pub phase: Phase,
    pub target: LeaderboardTarget,
    pub entries: Vec<SnapshotEntry>,
}

impl LeaderboardSnapshot {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("snapshot serializes");
        s.push('\n');
        s
    }
}

/// Everything derivable from the event log.
#[derive(Debug, Clone, Default)]
pub struct EngineState {
    pub ledger: QuotaLedger,
    boards: BTreeMap<(Phase, LeaderboardTarget), Vec<BoardEntry>>,
    recorded: BTreeSet<String>,
    seq: u64,
}

impl EngineState {
    pub fn apply(&mut self, event: &Event) -> Result<(), OrchestratorError> {
        let corrupt =
            |what: String| OrchestratorError::Storage(format!("event {}: {what}", event.seq));
        match event.kind {
            EventKind::TeamRegistered => {
                self.ledger.register_team(&event.team_id);
            }
            EventKind::SubmissionAccepted => {
                let sub: Submission = serde_json::from_value(event.payload.clone())
                    .map_err(|e| corrupt(e.to_string()))?;
                self.ledger
                    .apply_accept(&sub)
                    .map_err(|e| corrupt(e.to_string()))?;
            }
            EventKind::SubmissionRejected => {}
            EventKind::SubmissionCompleted => {
                let status: SubmissionStatus = serde_json::from_value(event.payload.clone())
                    .map_err(|e| corrupt(e.to_string()))?;
                let id = event
                    .submission_id
                    .as_deref()
                    .ok_or_else(|| corrupt("no submission id".into()))?;
                self.ledger
                    .complete(id, status)
                    .map_err(|e| corrupt(e.to_string()))?;
            }
            EventKind::ResultRecorded => {
                let payload: RecordedPayload = serde_json::from_value(event.payload.clone())
                    .map_err(|e| corrupt(e.to_string()))?;
                let id = event
                    .submission_id
                    .clone()
                    .ok_or_else(|| corrupt("no submission id".into()))?;
                if self.recorded.insert(id) {
                    for entry in payload.entries {
                        self.boards
                            .entry((payload.phase, entry.target))
                            .or_default()
                            .push(entry);
                    }
                }
            }
        }
        self.seq = event.seq;
        Ok(())
    }

    pub fn is_recorded(&self, submission_id: &str) -> bool {
        self.recorded.contains(submission_id)
    }

    /// Boards that have at least one entry.
    pub fn boards(&self) -> Vec<(Phase, LeaderboardTarget)> {
        self.boards.keys().copied().collect()
    }

    pub fn snapshot(&self, phase: Phase, target: LeaderboardTarget) -> LeaderboardSnapshot {
        let entries = self
            .boards
            .get(&(phase, target))
            .cloned()
            .unwrap_or_default();
        let keyed: Vec<LeaderboardEntry> = entries
            .iter()
            .map(|e| LeaderboardEntry {
                submission_id: e.submission_id.clone(),
                target,
                timestamp: e.timestamp,
                score: e.aggregate,
            })
            .collect();
        let ranked = rank_leaderboard(keyed).expect("one entry per submission and target");
        let by_id: BTreeMap<&str, &BoardEntry> = entries
            .iter()
            .map(|e| (e.submission_id.as_str(), e))
            .collect();
        LeaderboardSnapshot {
            phase,
            target,
            entries: ranked
                .into_iter()
                .map(|r| {
                    let e = by_id[r.entry.submission_id.as_str()];
                    SnapshotEntry {
                        rank: r.rank,
                        submission_id: e.submission_id.clone(),
                        team_id: e.team_id.clone(),
                        aggregate: e.aggregate,
                        per_task: e.per_task.clone(),
                    }
                })
                .collect(),
        }
    }
}

/// Folds a log into state.
pub fn replay(events: &[Event]) -> Result<EngineState, OrchestratorError> {
    let mut state = EngineState::default();
    for event in events {
        state.apply(event)?;
    }
    Ok(state)
}

/// Persistent submission state: an event log plus derived snapshot files.
/// Every change is appended to the log before it is applied.
#[derive(Debug)]
pub struct Orchestrator {
    dir: PathBuf,
    log: EventLog,
    state: EngineState,
    membership: Membership,
}

impl Orchestrator {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, OrchestratorError> {
        let dir = dir.into();
        let log = EventLog::new(dir.join("events.jsonl"));
        let state = replay(&log.read_all()?)?;
        Ok(Orchestrator {
            dir,
            log,
            state,
            membership: Membership::default(),
        })
    }

    pub fn with_membership(mut self, membership: Membership) -> Self {
        self.membership = membership;
        self
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn state(&self) -> &EngineState {
        &self.state
    }

    pub fn ledger(&self) -> &QuotaLedger {
        &self.state.ledger
    }

    pub fn membership(&self) -> &Membership {
        &self.membership
    }

    fn emit(
        &mut self,
        kind: EventKind,
        team_id: &str,
        submission_id: Option<&str>,
        target: Option<LeaderboardTarget>,
        payload: serde_json::Value,
        timestamp: u64,
    ) -> Result<(), OrchestratorError> {
        let event = Event {
            seq: self.state.seq + 1,
            timestamp,
            kind,
            team_id: team_id.to_string(),
            submission_id: submission_id.map(str::to_string),
            target,
            payload,
        };
        self.log.append(&event)?;
        self.state.apply(&event)
    }

    /// Registers a team; returns false when it already existed.
    pub fn register_team(&mut self, team: &str) -> Result<bool, OrchestratorError> {
        if self.state.ledger.team(team).is_some() {
            return Ok(false);
        }
        let ts = self.state.ledger.clock();
        self.emit(
            EventKind::TeamRegistered,
            team,
            None,
            None,
            serde_json::Value::Null,
            ts,
        )?;
        Ok(true)
    }

    /// Accepts or rejects a submission; both outcomes are logged.
    pub fn submit(
        &mut self,
        team: &str,
        phase: Phase,
        target: LeaderboardTarget,
        algorithm_ref: &str,
    ) -> Result<Submission, OrchestratorError> {
        let mut trial = self.state.ledger.clone();
        match trial.submit(team, phase, target, algorithm_ref) {
            Ok(sub) => {
                let payload = serde_json::to_value(&sub).expect("submission serializes");
                self.emit(
                    EventKind::SubmissionAccepted,
                    team,
                    Some(&sub.submission_id),
                    Some(target),
                    payload,
                    sub.timestamp,
                )?;
                Ok(sub)
            }
            Err(rejection) => {
                if !matches!(rejection, Rejection::UnknownTeam { .. }) {
                    let payload = serde_json::json!({
                        "phase": phase,
                        "algorithm_ref": algorithm_ref,
                        "reason": rejection.to_string(),
                    });
                    let ts = self.state.ledger.clock();
                    self.emit(
                        EventKind::SubmissionRejected,
                        team,
                        None,
                        Some(target),
                        payload,
                        ts,
                    )?;
                }
                Err(OrchestratorError::Rejected(rejection))
            }
        }
    }

    pub fn complete(
        &mut self,
        submission_id: &str,
        status: SubmissionStatus,
    ) -> Result<Submission, OrchestratorError> {
        let sub = self
            .state
            .ledger
            .submission(submission_id)
            .cloned()
            .ok_or_else(|| OrchestratorError::UnknownSubmission(submission_id.into()))?;
        let mut trial = self.state.ledger.clone();
        trial.complete(submission_id, status.clone())?;
        let payload = serde_json::to_value(&status).expect("status serializes");
        self.emit(
            EventKind::SubmissionCompleted,
            &sub.team_id,
            Some(submission_id),
            Some(sub.target),
            payload,
            trial.clock(),
        )?;
        Ok(self
            .state
            .ledger
            .submission(submission_id)
            .cloned()
            .expect("completed submission"))
    }

    /// Records a succeeded submission's raw task scores and returns the
    /// updated snapshot of its board. Recording the same submission again
    /// changes nothing. Test-phase all-tasks results also rank on each
    /// combined test board.
    pub fn record_and_rank(
        &mut self,
        registry: &TaskRegistry,
        submission_id: &str,
        raw_scores: &BTreeMap<TaskId, f64>,
    ) -> Result<LeaderboardSnapshot, OrchestratorError> {
        let sub = self
            .state
            .ledger
            .submission(submission_id)
            .cloned()
            .ok_or_else(|| OrchestratorError::UnknownSubmission(submission_id.into()))?;
        if sub.status != SubmissionStatus::Succeeded {
            return Err(OrchestratorError::NotSucceeded(submission_id.into()));
        }
        if !sub.phase.has_leaderboard() {
            return Err(OrchestratorError::NoLeaderboard(sub.phase));
        }
        if !self.state.is_recorded(submission_id) {
            let extra: Vec<u8> = raw_scores
                .keys()
                .filter(|t| !self.membership.tasks(sub.target).contains(t))
                .map(|t| t.0)
                .collect();
            if !extra.is_empty() {
                return Err(crate::scoring::ScoringError::ExtraTasks(extra).into());
            }
            let mut targets = vec![sub.target];
            if sub.phase == Phase::Test && sub.target == LeaderboardTarget::AllTasks {
                targets.extend(LeaderboardTarget::COMBINED);
            }
            let mut entries = Vec::new();
            for target in targets {
                let members = self.membership.tasks(target);
                let subset: BTreeMap<TaskId, f64> = raw_scores
                    .iter()
                    .filter(|(t, _)| members.contains(t))
                    .map(|(t, v)| (*t, *v))
                    .collect();
                let report = score_report(registry, &subset, target, &self.membership)?;
                entries.push(BoardEntry {
                    target,
                    submission_id: sub.submission_id.clone(),
                    team_id: sub.team_id.clone(),
                    timestamp: sub.timestamp,
                    aggregate: report.aggregate.value,
                    per_task: report.tasks,
                });
            }
            let payload = serde_json::to_value(RecordedPayload {
                phase: sub.phase,
                entries,
            })
            .expect("record serializes");
            let ts = self.state.ledger.clock();
            self.emit(
                EventKind::ResultRecorded,
                &sub.team_id,
                Some(submission_id),
                Some(sub.target),
                payload,
                ts,
            )?;
        }
        self.write_snapshots()?;
        Ok(self.state.snapshot(sub.phase, sub.target))
    }

    pub fn snapshot(&self, phase: Phase, target: LeaderboardTarget) -> LeaderboardSnapshot {
        self.state.snapshot(phase, target)
    }

    pub fn snapshot_path(&self, phase: Phase, target: LeaderboardTarget) -> PathBuf {
        self.dir
            .join("leaderboards")
            .join(phase.as_str())
            .join(format!("{target}.json"))
    }

    /// Rewrites every non-empty board's snapshot file from current state.
    pub fn write_snapshots(&self) -> Result<(), OrchestratorError> {
        for (phase, target) in self.state.boards() {
            let path = self.snapshot_path(phase, target);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent).map_err(|e| OrchestratorError::io(parent, e))?;
            }
            fs::write(&path, self.state.snapshot(phase, target).to_json())
                .map_err(|e| OrchestratorError::io(&path, e))?;
        }
        Ok(())
    }
}
