use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::submission::{Phase, Submission, SubmissionStatus};
use crate::scoring::LeaderboardTarget;

/// Why a submission was refused. The display strings are stable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[serde(tag = "rejection", rename_all = "snake_case")]
pub enum Rejection {
    #[error("unknown team {team}")]
    UnknownTeam { team: String },
    #[error("check phase not passed")]
    CheckNotPassed,
    #[error("quota {limit} exhausted for {target}")]
    QuotaExhausted {
        target: LeaderboardTarget,
        limit: u32,
    },
    #[error("test submission to {target} already made")]
    TestAlreadySubmitted { target: LeaderboardTarget },
    #[error("test submissions go to all_tasks or to combined boards, not both ({existing} then {target})")]
    TestExclusive {
        existing: LeaderboardTarget,
        target: LeaderboardTarget,
    },
    #[error("no test leaderboard for {target}")]
    TestTargetNotAllowed { target: LeaderboardTarget },
}

/// Successful validation submissions allowed per board.
pub fn validation_limit(target: LeaderboardTarget) -> u32 {
    match target {
        LeaderboardTarget::TaskSpecific(_) => 3,
        LeaderboardTarget::AllTasks => 1,
        _ => 2,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub succeeded: u32,
    pub in_flight: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "slot", rename_all = "snake_case")]
pub enum TestSlot {
    Reserved { submission_id: String },
    Used { submission_id: String },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TeamRecord {
    /// Clock value at which the team's first check submission succeeded.
    pub check_passed_at: Option<u64>,
    pub validation: BTreeMap<LeaderboardTarget, Usage>,
    pub test: BTreeMap<LeaderboardTarget, TestSlot>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LedgerError {
    #[error("unknown submission {0}")]
    UnknownSubmission(String),
    #[error("submission {0} is already final")]
    AlreadyFinal(String),
    #[error("completion status must be final")]
    NotFinal,
    #[error("submission {0} already exists")]
    DuplicateSubmission(String),
}

/// Submission accounting for every team. All mutation goes through
/// [`QuotaLedger::submit`] and [`QuotaLedger::complete`] (or their replay
/// counterparts), which preserve [`QuotaLedger::check_invariants`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuotaLedger {
    clock: u64,
    next_id: u64,
    teams: BTreeMap<String, TeamRecord>,
    submissions: BTreeMap<String, Submission>,
}

impl QuotaLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn register_team(&mut self, team: &str) -> bool {
        if self.teams.contains_key(team) {
            return false;
        }
        self.teams.insert(team.to_string(), TeamRecord::default());
        true
    }

    pub fn team(&self, team: &str) -> Option<&TeamRecord> {
        self.teams.get(team)
    }

    pub fn submission(&self, id: &str) -> Option<&Submission> {
        self.submissions.get(id)
    }

    pub fn submissions(&self) -> impl Iterator<Item = &Submission> {
        self.submissions.values()
    }

    /// Decides whether a submission may start, without changing state.
    pub fn admit(
        &self,
        team: &str,
        phase: Phase,
        target: LeaderboardTarget,
    ) -> Result<(), Rejection> {
        let record = self
            .teams
            .get(team)
            .ok_or_else(|| Rejection::UnknownTeam { team: team.into() })?;
        if phase == Phase::Check {
            return Ok(());
        }
        if record.check_passed_at.is_none() {
            return Err(Rejection::CheckNotPassed);
        }
        match phase {
            Phase::Check => Ok(()),
            Phase::Validation => {
                let limit = validation_limit(target);
                let used = record
                    .validation
                    .get(&target)
                    .map_or(0, |u| u.succeeded + u.in_flight);
                if used >= limit {
                    Err(Rejection::QuotaExhausted { target, limit })
                } else {
                    Ok(())
                }
            }
            Phase::Test => {
                if !(target == LeaderboardTarget::AllTasks || target.is_combined()) {
                    return Err(Rejection::TestTargetNotAllowed { target });
                }
                if record.test.contains_key(&target) {
                    return Err(Rejection::TestAlreadySubmitted { target });
                }
                let clash = record.test.keys().find(|&&t| {
                    (t == LeaderboardTarget::AllTasks) != (target == LeaderboardTarget::AllTasks)
                });
                match clash {
                    Some(&existing) => Err(Rejection::TestExclusive { existing, target }),
                    None => Ok(()),
                }
            }
        }
    }

    /// Accepts a submission and reserves its quota, or rejects it.
    pub fn submit(
        &mut self,
        team: &str,
        phase: Phase,
        target: LeaderboardTarget,
        algorithm_ref: &str,
    ) -> Result<Submission, Rejection> {
        self.admit(team, phase, target)?;
        let submission = Submission {
            submission_id: format!("sub-{:06}", self.next_id + 1),
            team_id: team.to_string(),
            phase,
            target,
            algorithm_ref: algorithm_ref.to_string(),
            timestamp: self.clock + 1,
            status: SubmissionStatus::Pending,
        };
        self.apply_accept(&submission).expect("fresh submission id");
        Ok(submission)
    }

    /// Re-applies an accepted submission, as when replaying a log.
    pub fn apply_accept(&mut self, submission: &Submission) -> Result<(), LedgerError> {
        if self.submissions.contains_key(&submission.submission_id) {
            return Err(LedgerError::DuplicateSubmission(
                submission.submission_id.clone(),
            ));
        }
        self.register_team(&submission.team_id);
        let record = self
            .teams
            .get_mut(&submission.team_id)
            .expect("team registered");
        match submission.phase {
            Phase::Check => {}
            Phase::Validation => {
                record
                    .validation
                    .entry(submission.target)
                    .or_default()
                    .in_flight += 1
            }
            Phase::Test => {
                record.test.insert(
                    submission.target,
                    TestSlot::Reserved {
                        submission_id: submission.submission_id.clone(),
                    },
                );
            }
        }
        self.next_id += 1;
        self.clock = self.clock.max(submission.timestamp);
        self.submissions
            .insert(submission.submission_id.clone(), submission.clone());
        Ok(())
    }

    /// Moves a submission to a final status. Failed and timed-out runs give
    /// their reservation back.
    pub fn complete(
        &mut self,
        submission_id: &str,
        status: SubmissionStatus,
    ) -> Result<Submission, LedgerError> {
        if !status.is_final() {
            return Err(LedgerError::NotFinal);
        }
        let sub = self
            .submissions
            .get_mut(submission_id)
            .ok_or_else(|| LedgerError::UnknownSubmission(submission_id.into()))?;
        if sub.status.is_final() {
            return Err(LedgerError::AlreadyFinal(submission_id.into()));
        }
        self.clock += 1;
        let ok = status == SubmissionStatus::Succeeded;
        sub.status = status;
        let record = self
            .teams
            .get_mut(&sub.team_id)
            .expect("team of a submission");
        match sub.phase {
            Phase::Check => {
                if ok && record.check_passed_at.is_none() {
                    record.check_passed_at = Some(self.clock);
                }
            }
            Phase::Validation => {
                let usage = record
                    .validation
                    .get_mut(&sub.target)
                    .expect("reserved usage");
                usage.in_flight -= 1;
                if ok {
                    usage.succeeded += 1;
                }
            }
            Phase::Test => {
                if ok {
                    record.test.insert(
                        sub.target,
                        TestSlot::Used {
                            submission_id: sub.submission_id.clone(),
                        },
                    );
                } else {
                    record.test.remove(&sub.target);
                }
            }
        }
        Ok(sub.clone())
    }

    /// Checks every ledger invariant, returning the first violation found.
    pub fn check_invariants(&self) -> Result<(), String> {
        for (team, record) in &self.teams {
            let subs: Vec<&Submission> = self
                .submissions
                .values()
                .filter(|s| &s.team_id == team)
                .collect();
            for (target, usage) in &record.validation {
                let limit = validation_limit(*target);
                if usage.succeeded + usage.in_flight > limit {
                    return Err(format!("{team}: {target} validation usage over {limit}"));
                }
                let succeeded = subs
                    .iter()
                    .filter(|s| {
                        s.phase == Phase::Validation
                            && s.target == *target
                            && s.status == SubmissionStatus::Succeeded
                    })
                    .count() as u32;
                let open = subs
                    .iter()
                    .filter(|s| {
                        s.phase == Phase::Validation && s.target == *target && !s.status.is_final()
                    })
                    .count() as u32;
                if succeeded != usage.succeeded || open != usage.in_flight {
                    return Err(format!("{team}: {target} usage disagrees with submissions"));
                }
            }
            let all = record.test.contains_key(&LeaderboardTarget::AllTasks);
            if all && record.test.len() > 1 {
                return Err(format!("{team}: test on all_tasks and combined boards"));
            }
            for target in record.test.keys() {
                if !(*target == LeaderboardTarget::AllTasks || target.is_combined()) {
                    return Err(format!("{team}: test slot on {target}"));
                }
            }
            for target in LeaderboardTarget::all() {
                let live = subs
                    .iter()
                    .filter(|s| {
                        s.phase == Phase::Test
                            && s.target == target
                            && matches!(
                                s.status,
                                SubmissionStatus::Succeeded
                                    | SubmissionStatus::Pending
                                    | SubmissionStatus::Running
                            )
                    })
                    .count();
                if live > 1 {
                    return Err(format!("{team}: {live} test submissions on {target}"));
                }
                if live != record.test.contains_key(&target) as usize {
                    return Err(format!(
                        "{team}: test slot on {target} disagrees with submissions"
                    ));
                }
            }
            for s in &subs {
                if s.phase != Phase::Check
                    && !record.check_passed_at.is_some_and(|at| at < s.timestamp)
                {
                    return Err(format!(
                        "{team}: {} submitted before passing check",
                        s.submission_id
                    ));
                }
            }
            let mut stamps: Vec<u64> = subs.iter().map(|s| s.timestamp).collect();
            stamps.sort_unstable();
            if stamps.windows(2).any(|w| w[0] == w[1]) {
                return Err(format!("{team}: repeated submission timestamp"));
            }
        }
        Ok(())
    }
}
