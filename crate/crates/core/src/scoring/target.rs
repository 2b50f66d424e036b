use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ScoringError;
use crate::model::TaskId;

/// A leaderboard: one task, one of the three combined boards, or all tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum LeaderboardTarget {
    TaskSpecific(TaskId),
    PathologyVision,
    RadiologyVision,
    Language,
    AllTasks,
}

impl LeaderboardTarget {
    pub const COMBINED: [LeaderboardTarget; 3] = [
        LeaderboardTarget::PathologyVision,
        LeaderboardTarget::RadiologyVision,
        LeaderboardTarget::Language,
    ];

    /// Every board, task-specific ones first.
    pub fn all() -> Vec<LeaderboardTarget> {
        TaskId::all()
            .map(LeaderboardTarget::TaskSpecific)
            .chain(Self::COMBINED)
            .chain([LeaderboardTarget::AllTasks])
            .collect()
    }

    pub fn is_combined(self) -> bool {
        Self::COMBINED.contains(&self)
    }

    /// Member tasks under the default membership.
    pub fn tasks(self) -> Vec<TaskId> {
        Membership::default().tasks(self)
    }
}

impl fmt::Display for LeaderboardTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LeaderboardTarget::TaskSpecific(id) => write!(f, "{id}"),
            LeaderboardTarget::PathologyVision => f.write_str("pathology_vision"),
            LeaderboardTarget::RadiologyVision => f.write_str("radiology_vision"),
            LeaderboardTarget::Language => f.write_str("language"),
            LeaderboardTarget::AllTasks => f.write_str("all_tasks"),
        }
    }
}

impl FromStr for LeaderboardTarget {
    type Err = ScoringError;

    /// Accepts `pathology_vision`, `radiology_vision`, `language`,
    /// `all_tasks`, and a task as `T5`, `5` or `task_specific:T5`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let unknown = || ScoringError::UnknownTarget(s.to_string());
        match s {
            "pathology_vision" => return Ok(LeaderboardTarget::PathologyVision),
            "radiology_vision" => return Ok(LeaderboardTarget::RadiologyVision),
            "language" => return Ok(LeaderboardTarget::Language),
            "all_tasks" => return Ok(LeaderboardTarget::AllTasks),
            _ => {}
        }
        let rest = s.strip_prefix("task_specific:").unwrap_or(s);
        let digits = rest
            .strip_prefix('T')
            .or_else(|| rest.strip_prefix('t'))
            .unwrap_or(rest);
        let n: u8 = digits.parse().map_err(|_| unknown())?;
        TaskId::new(n)
            .map(LeaderboardTarget::TaskSpecific)
            .map_err(|_| unknown())
    }
}

impl From<LeaderboardTarget> for String {
    fn from(t: LeaderboardTarget) -> String {
        t.to_string()
    }
}

impl TryFrom<String> for LeaderboardTarget {
    type Error = ScoringError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

fn ids(range: &[u8]) -> Vec<TaskId> {
    range.iter().map(|&n| TaskId(n)).collect()
}

/// Task sets of the combined boards. Loadable from configuration; the
/// default follows the domain and modality of each task, with the
/// vision-language task only on the all-tasks board.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Membership {
    pub pathology_vision: Vec<TaskId>,
    pub radiology_vision: Vec<TaskId>,
    pub language: Vec<TaskId>,
    pub all_tasks: Vec<TaskId>,
}

impl Default for Membership {
    fn default() -> Self {
        Membership {
            pathology_vision: ids(&[1, 3, 4, 5, 8, 9]),
            radiology_vision: ids(&[2, 6, 7, 10, 11]),
            language: ids(&[12, 13, 14, 15, 16, 17, 18, 19]),
            all_tasks: TaskId::all().collect(),
        }
    }
}

impl Membership {
    /// Sorted, deduplicated member tasks of a board.
    pub fn tasks(&self, target: LeaderboardTarget) -> Vec<TaskId> {
        let mut out = match target {
            LeaderboardTarget::TaskSpecific(id) => vec![id],
            LeaderboardTarget::PathologyVision => self.pathology_vision.clone(),
            LeaderboardTarget::RadiologyVision => self.radiology_vision.clone(),
            LeaderboardTarget::Language => self.language.clone(),
            LeaderboardTarget::AllTasks => self.all_tasks.clone(),
        };
        out.sort();
        out.dedup();
        out
    }

    pub fn from_json(text: &str) -> Result<Self, ScoringError> {
        let m: Membership =
            serde_json::from_str(text).map_err(|e| ScoringError::Config(e.to_string()))?;
        for id in m
            .pathology_vision
            .iter()
            .chain(&m.radiology_vision)
            .chain(&m.language)
            .chain(&m.all_tasks)
        {
            TaskId::new(id.0).map_err(|e| ScoringError::Config(e.to_string()))?;
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for t in LeaderboardTarget::all() {
            assert_eq!(t.to_string().parse::<LeaderboardTarget>().unwrap(), t);
            let json = serde_json::to_string(&t).unwrap();
            assert_eq!(serde_json::from_str::<LeaderboardTarget>(&json).unwrap(), t);
        }
        assert_eq!(
            "7".parse::<LeaderboardTarget>().unwrap(),
            LeaderboardTarget::TaskSpecific(TaskId(7))
        );
        assert_eq!(
            "task_specific:T12".parse::<LeaderboardTarget>().unwrap(),
            LeaderboardTarget::TaskSpecific(TaskId(12))
        );
        assert!("T21".parse::<LeaderboardTarget>().is_err());
        assert!("vision".parse::<LeaderboardTarget>().is_err());
    }

    #[test]
    fn default_membership_partitions_all_but_the_caption_task() {
        let m = Membership::default();
        let mut union: Vec<TaskId> = LeaderboardTarget::COMBINED
            .iter()
            .flat_map(|&t| m.tasks(t))
            .collect();
        union.sort();
        let expected: Vec<TaskId> = (1..=19).map(TaskId).collect();
        assert_eq!(union, expected);
        assert_eq!(m.tasks(LeaderboardTarget::AllTasks).len(), 20);
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(Membership::from_json(&json).unwrap(), m);
        assert!(Membership::from_json(
            r#"{"pathology_vision":[21],"radiology_vision":[],"language":[],"all_tasks":[]}"#
        )
        .is_err());
    }
}
