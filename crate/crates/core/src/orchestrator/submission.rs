use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::scoring::LeaderboardTarget;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Check,
    Validation,
    Test,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::Check, Phase::Validation, Phase::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Check => "check",
            Phase::Validation => "validation",
            Phase::Test => "test",
        }
    }

    /// Whether results of this phase are ranked on a leaderboard.
    pub fn has_leaderboard(self) -> bool {
        self != Phase::Check
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Phase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Phase::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown phase {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum SubmissionStatus {
    Pending,
    Running,
    Succeeded,
    Failed { reason: String },
    TimedOut,
}

impl SubmissionStatus {
    pub fn is_final(&self) -> bool {
        !matches!(self, SubmissionStatus::Pending | SubmissionStatus::Running)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Submission {
    pub submission_id: String,
    pub team_id: String,
    pub phase: Phase,
    pub target: LeaderboardTarget,
    pub algorithm_ref: String,
    /// Logical instant from the ledger clock; strictly increasing.
    pub timestamp: u64,
    pub status: SubmissionStatus,
}
