use std::path::PathBuf;

use super::algorithm::AlgorithmRegistry;
use super::audit::{audit_information_flow, AuditReport};
use super::pipeline::{run_pipeline, PipelineOptions, PipelineReport, RunBudget};
use super::state::{LeaderboardSnapshot, Orchestrator};
use super::submission::{Phase, Submission, SubmissionStatus};
use super::OrchestratorError;
use crate::adaptors::AdaptorSpec;
use crate::model::TaskRegistry;
use crate::scoring::LeaderboardTarget;

/// Everything needed to submit and evaluate one run.
#[derive(Debug, Clone)]
pub struct RunRequest {
    pub team_id: String,
    pub phase: Phase,
    pub target: LeaderboardTarget,
    pub algorithm_ref: String,
    pub benchmark_root: PathBuf,
    pub adaptor: AdaptorSpec,
    /// Each submission gets `<workspaces>/<submission_id>`.
    pub workspaces: PathBuf,
    pub budget: RunBudget,
    pub parallelism: usize,
}

#[derive(Debug, Clone)]
pub struct Execution {
    pub submission: Submission,
    pub report: PipelineReport,
    pub audit: AuditReport,
    pub workspace: PathBuf,
    /// Updated board, for succeeded validation and test runs.
    pub snapshot: Option<LeaderboardSnapshot>,
}

impl Orchestrator {
    /// Submits, runs the pipeline, audits the workspace, completes the
    /// submission and, when it succeeded, records it on its leaderboard.
    /// An audit violation fails the run.
    pub fn execute(
        &mut self,
        registry: &TaskRegistry,
        algorithms: &AlgorithmRegistry,
        request: &RunRequest,
    ) -> Result<Execution, OrchestratorError> {
        let algorithm = algorithms
            .get(&request.algorithm_ref)
            .ok_or_else(|| OrchestratorError::UnknownAlgorithm(request.algorithm_ref.clone()))?;
        request.adaptor.check()?;
        self.register_team(&request.team_id)?;
        let submission = self.submit(
            &request.team_id,
            request.phase,
            request.target,
            &request.algorithm_ref,
        )?;
        let workspace = request.workspaces.join(&submission.submission_id);
        let options = PipelineOptions {
            workspace: workspace.clone(),
            budget: request.budget,
            parallelism: request.parallelism,
            membership: self.membership().clone(),
        };
        let mut report = match run_pipeline(
            &submission,
            &request.benchmark_root,
            &request.adaptor,
            algorithm,
            registry,
            &options,
        ) {
            Ok(r) => r,
            Err(e) => {
                self.complete(
                    &submission.submission_id,
                    SubmissionStatus::Failed {
                        reason: e.to_string(),
                    },
                )?;
                return Err(e);
            }
        };
        let audit = audit_information_flow(&workspace);
        if !audit.is_clean() && report.status == SubmissionStatus::Succeeded {
            report.status = SubmissionStatus::Failed {
                reason: format!(
                    "audit: {} information-flow violations",
                    audit.violations.len()
                ),
            };
        }
        let submission = self.complete(&submission.submission_id, report.status.clone())?;
        let snapshot = if submission.status == SubmissionStatus::Succeeded
            && submission.phase.has_leaderboard()
        {
            Some(self.record_and_rank(registry, &submission.submission_id, &report.raw_scores())?)
        } else {
            None
        };
        Ok(Execution {
            submission,
            report,
            audit,
            workspace,
            snapshot,
        })
    }
}
