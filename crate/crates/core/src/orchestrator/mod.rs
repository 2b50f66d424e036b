//! Submission phases and quotas, the two-step evaluation pipeline, the
//! append-only event log with derived leaderboards, and the audit of what
//! the algorithm step could see.

mod algorithm;
mod audit;
mod events;
mod execute;
mod pipeline;
mod quota;
mod state;
mod submission;

pub use algorithm::{Algorithm, AlgorithmRegistry, CasePrediction, LabeledCase, LanguageBatch};
pub use audit::{audit_information_flow, AuditReport, Violation};
pub use events::{Event, EventKind, EventLog};
pub use execute::{Execution, RunRequest};
pub use pipeline::{
    algorithm_dir, run_pipeline, PipelineOptions, PipelineReport, RunBudget, RunMetadata, TaskRun,
    TaskStatus,
};
pub use quota::{
    validation_limit, LedgerError, QuotaLedger, Rejection, TeamRecord, TestSlot, Usage,
};
pub use state::{
    replay, BoardEntry, EngineState, LeaderboardSnapshot, Orchestrator, SnapshotEntry,
};
pub use submission::{Phase, Submission, SubmissionStatus};

use std::path::{Path, PathBuf};

use crate::adaptors::AdaptorError;
use crate::model::ModelError;
use crate::scoring::ScoringError;

#[derive(Debug, thiserror::Error)]
pub enum OrchestratorError {
    #[error("rejected: {0}")]
    Rejected(Rejection),
    #[error("unknown submission {0}")]
    UnknownSubmission(String),
    #[error("submission {0} has not succeeded")]
    NotSucceeded(String),
    #[error("{0} phase has no leaderboard")]
    NoLeaderboard(Phase),
    #[error("unknown algorithm {0:?}")]
    UnknownAlgorithm(String),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error("event log: {0}")]
    Storage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error(transparent)]
    Adaptor(#[from] AdaptorError),
}

impl OrchestratorError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        OrchestratorError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Short machine-readable category.
    pub fn category(&self) -> &'static str {
        match self {
            OrchestratorError::Rejected(Rejection::QuotaExhausted { .. })
            | OrchestratorError::Rejected(Rejection::TestAlreadySubmitted { .. })
            | OrchestratorError::Rejected(Rejection::TestExclusive { .. }) => "quota",
            OrchestratorError::Rejected(_) => "rejected",
            OrchestratorError::UnknownSubmission(_) | OrchestratorError::UnknownAlgorithm(_) => {
                "not_found"
            }
            OrchestratorError::NotSucceeded(_)
            | OrchestratorError::NoLeaderboard(_)
            | OrchestratorError::Ledger(_) => "state",
            OrchestratorError::Storage(_) | OrchestratorError::Io { .. } => "io",
            OrchestratorError::Model(_) => "data",
            OrchestratorError::Scoring(_) => "scoring",
            OrchestratorError::Adaptor(_) => "adaptor",
        }
    }
}
