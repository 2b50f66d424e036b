//! Score normalization, aggregate scores and leaderboard ordering.

mod leaderboard;
mod target;

pub use leaderboard::{leaderboard_order, rank_leaderboard, LeaderboardEntry, RankedEntry};
pub use target::{LeaderboardTarget, Membership};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::{TaskDefinition, TaskId, TaskRegistry};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScoringError {
    #[error("non-finite raw score for {0}")]
    NonFinite(TaskId),
    #[error("raw score {raw} for {task} is outside the metric range")]
    OutOfRange { task: TaskId, raw: f64 },
    #[error("scores missing for tasks {0:?}")]
    MissingTasks(Vec<u8>),
    #[error("scores given for non-member tasks {0:?}")]
    ExtraTasks(Vec<u8>),
    #[error("entries belong to different targets: {0} and {1}")]
    MixedTargets(LeaderboardTarget, LeaderboardTarget),
    #[error("duplicate leaderboard entry {0}")]
    DuplicateEntry(String),
    #[error("unknown leaderboard target {0:?}")]
    UnknownTarget(String),
    #[error("invalid membership configuration: {0}")]
    Config(String),
}

/// Raw metric value of one task and its value on the common scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskScore {
    pub task_id: TaskId,
    pub raw: f64,
    pub normalized: f64,
    pub s_ref: f64,
    pub s_max: f64,
}

/// `(raw - s_ref) / (s_max - s_ref)`, not clipped: below-reference results
/// are negative.
pub fn normalize_task_score(task: &TaskDefinition, raw: f64) -> Result<TaskScore, ScoringError> {
    if !raw.is_finite() {
        return Err(ScoringError::NonFinite(task.task_id));
    }
    let tolerance = 1e-9;
    if raw > task.norm.s_max + tolerance {
        return Err(ScoringError::OutOfRange {
            task: task.task_id,
            raw,
        });
    }
    let s_ref = task.norm.s_ref;
    let s_max = task.norm.s_max;
    Ok(TaskScore {
        task_id: task.task_id,
        raw,
        normalized: (raw - s_ref) / (s_max - s_ref),
        s_ref,
        s_max,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateScore {
    pub target: LeaderboardTarget,
    pub value: f64,
    pub n_tasks: usize,
}

/// Aggregate of raw scores that cover exactly the target's tasks under the
/// default membership.
pub fn unicorn_score(
    registry: &TaskRegistry,
    scores: &BTreeMap<TaskId, f64>,
    target: LeaderboardTarget,
) -> Result<AggregateScore, ScoringError> {
    unicorn_score_with(registry, scores, target, &Membership::default())
}

pub fn unicorn_score_with(
    registry: &TaskRegistry,
    scores: &BTreeMap<TaskId, f64>,
    target: LeaderboardTarget,
    membership: &Membership,
) -> Result<AggregateScore, ScoringError> {
    Ok(score_report(registry, scores, target, membership)?.aggregate)
}

/// Audit trail of one aggregate: every raw and normalized score with its
/// constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub target: LeaderboardTarget,
    pub tasks: Vec<TaskScore>,
    pub aggregate: AggregateScore,
}

impl ScoreReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("score report serializes")
    }
}

pub fn score_report(
    registry: &TaskRegistry,
    scores: &BTreeMap<TaskId, f64>,
    target: LeaderboardTarget,
    membership: &Membership,
) -> Result<ScoreReport, ScoringError> {
    let members = membership.tasks(target);
    let missing: Vec<u8> = members
        .iter()
        .filter(|t| !scores.contains_key(t))
        .map(|t| t.0)
        .collect();
    if !missing.is_empty() {
        return Err(ScoringError::MissingTasks(missing));
    }
    let extra: Vec<u8> = scores
        .keys()
        .filter(|t| !members.contains(t))
        .map(|t| t.0)
        .collect();
    if !extra.is_empty() {
        return Err(ScoringError::ExtraTasks(extra));
    }
    let tasks = members
        .iter()
        .map(|&id| normalize_task_score(registry.get(id), scores[&id]))
        .collect::<Result<Vec<_>, _>>()?;
    let value = tasks.iter().map(|t| t.normalized).sum::<f64>() / tasks.len() as f64;
    Ok(ScoreReport {
        target,
        aggregate: AggregateScore {
            target,
            value,
            n_tasks: tasks.len(),
        },
        tasks,
    })
}
