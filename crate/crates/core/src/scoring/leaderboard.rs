use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{LeaderboardTarget, ScoringError};

/// One submission's score on a board. `timestamp` is the orchestrator's
/// monotonic submission instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    pub submission_id: String,
    pub target: LeaderboardTarget,
    pub timestamp: u64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub rank: usize,
    #[serde(flatten)]
    pub entry: LeaderboardEntry,
}

/// Highest score first; ties go to the earlier timestamp, then the smaller
/// submission id. Ranks are 1-based and distinct.
pub fn leaderboard_order(a: &LeaderboardEntry, b: &LeaderboardEntry) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.timestamp.cmp(&b.timestamp))
        .then_with(|| a.submission_id.cmp(&b.submission_id))
}

pub fn rank_leaderboard(
    mut entries: Vec<LeaderboardEntry>,
) -> Result<Vec<RankedEntry>, ScoringError> {
    if let Some(first) = entries.first() {
        let target = first.target;
        if let Some(other) = entries.iter().find(|e| e.target != target) {
            return Err(ScoringError::MixedTargets(target, other.target));
        }
    }
    entries.sort_by(leaderboard_order);
    let mut seen = std::collections::BTreeSet::new();
    for e in &entries {
        if !seen.insert(e.submission_id.as_str()) {
            return Err(ScoringError::DuplicateEntry(e.submission_id.clone()));
        }
    }
    Ok(entries
        .into_iter()
        .enumerate()
        .map(|(i, entry)| RankedEntry { rank: i + 1, entry })
        .collect())
}
