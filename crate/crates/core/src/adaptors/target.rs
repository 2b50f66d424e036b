use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::AdaptorError;
use crate::model::{LabelSpace, OutputKind, ReferenceLabel, TaskDefinition};

/// A few-shot label reduced to what an adaptor can learn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Target {
    Class { label: usize },
    Binary { positive: bool },
    Paired { left: usize, right: usize },
    Multi { values: BTreeMap<String, f64> },
    Scalar { value: f64 },
    Survival { event: bool, time: f64 },
}

impl Target {
    pub fn from_reference(
        label: &ReferenceLabel,
        task: &TaskDefinition,
    ) -> Result<Self, AdaptorError> {
        let bad = |why: String| AdaptorError::InvalidLabel(format!("{}: {why}", task.task_id));
        let in_range = |v: i64, count: usize| -> Result<usize, AdaptorError> {
            if v >= 0 && (v as usize) < count {
                Ok(v as usize)
            } else {
                Err(bad(format!("label {v} outside 0..{count}")))
            }
        };
        match (task.output, label) {
            (OutputKind::ClassLabel, ReferenceLabel::ClassLabel { label }) => {
                let count = class_count(task).ok_or_else(|| bad("no class count".into()))?;
                Ok(Target::Class {
                    label: in_range(*label, count)?,
                })
            }
            (OutputKind::Probability, ReferenceLabel::ClassLabel { label }) => Ok(Target::Binary {
                positive: in_range(*label, 2)? == 1,
            }),
            (OutputKind::PairedClassLabels, ReferenceLabel::PairedLabels { left, right }) => {
                let count = class_count(task).ok_or_else(|| bad("no class count".into()))?;
                Ok(Target::Paired {
                    left: in_range(*left, count)?,
                    right: in_range(*right, count)?,
                })
            }
            (OutputKind::MultiLabelProbabilities, ReferenceLabel::MultiLabel { values })
            | (OutputKind::NamedContinuousValues, ReferenceLabel::MultiLabel { values }) => {
                let keys = value_names(task).ok_or_else(|| bad("no value names".into()))?;
                let mut out = BTreeMap::new();
                for key in keys {
                    let v = values
                        .get(&key)
                        .ok_or_else(|| bad(format!("missing value {key}")))?;
                    if !v.is_finite() {
                        return Err(bad(format!("non-finite value for {key}")));
                    }
                    out.insert(key, *v);
                }
                Ok(Target::Multi { values: out })
            }
            (OutputKind::ContinuousValue, ReferenceLabel::Continuous { value })
                if value.is_finite() =>
            {
                Ok(Target::Scalar { value: *value })
            }
            (OutputKind::TimeToEvent, ReferenceLabel::Survival { event, time_years })
                if time_years.is_finite() =>
            {
                Ok(Target::Survival {
                    event: *event,
                    time: *time_years,
                })
            }
            _ => Err(bad(format!(
                "{} label for {} output",
                label.variant_name(),
                task.output.as_str()
            ))),
        }
    }
}

/// Number of classes of a categorical task (2 for binary tasks).
pub(crate) fn class_count(task: &TaskDefinition) -> Option<usize> {
    match &task.label_space {
        LabelSpace::Classes { count, .. } | LabelSpace::PairedClasses { count, .. } => {
            Some(*count as usize)
        }
        LabelSpace::Binary => Some(2),
        _ => None,
    }
}

/// Keys of a task whose prediction is a named map of values.
pub(crate) fn value_names(task: &TaskDefinition) -> Option<Vec<String>> {
    match &task.label_space {
        LabelSpace::MultiLabel { labels } => Some(labels.clone()),
        LabelSpace::Scalars { variables } => {
            Some(variables.iter().map(|v| v.name.clone()).collect())
        }
        _ => None,
    }
}

pub(crate) fn targets(
    few_shot: &[(crate::model::Representation, ReferenceLabel)],
    task: &TaskDefinition,
) -> Result<Vec<Target>, AdaptorError> {
    few_shot
        .iter()
        .map(|(_, l)| Target::from_reference(l, task))
        .collect()
}
