use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::standardize::Standardizer;
use super::target::{class_count, targets, Target};
use super::{argmax_smallest, k_smallest, squared_distance, AdaptorError, Hyperparams};
use crate::model::{OutputKind, Prediction, ReferenceLabel, Representation, TaskDefinition};

const DISTANCE_FLOOR: f64 = 1e-9;
const CENSORED_WEIGHT: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    /// Few-shot features exactly as provided.
    pub features: Vec<Vec<f64>>,
    pub targets: Vec<Target>,
    pub standardizer: Standardizer,
    standardized: Vec<Vec<f64>>,
    classes: Option<usize>,
}

impl KnnModel {
    pub fn fit(
        few_shot: &[(Representation, ReferenceLabel)],
        task: &TaskDefinition,
        k: usize,
    ) -> Result<Self, AdaptorError> {
        if k > few_shot.len() {
            return Err(AdaptorError::KTooLarge {
                k,
                available: few_shot.len(),
            });
        }
        let features: Vec<Vec<f64>> = few_shot
            .iter()
            .map(|(r, _)| {
                r.case_features.clone().ok_or_else(|| {
                    AdaptorError::IncompatibleRepresentation(format!(
                        "{} is not case-level",
                        r.case_id
                    ))
                })
            })
            .collect::<Result<_, _>>()?;
        let dim = features[0].len();
        let standardizer = Standardizer::fit(features.iter().map(|f| f.as_slice()), dim)?;
        let standardized = features
            .iter()
            .map(|f| standardizer.transform(f))
            .collect::<Result<_, _>>()?;
        Ok(KnnModel {
            targets: targets(few_shot, task)?,
            features,
            standardizer,
            standardized,
            classes: class_count(task),
        })
    }

    /// Nearest few-shot indices with their Euclidean distances, nearest first.
    pub fn ranked(&self, features: &[f64], k: usize) -> Result<Vec<(usize, f64)>, AdaptorError> {
        if k > self.features.len() {
            return Err(AdaptorError::KTooLarge {
                k,
                available: self.features.len(),
            });
        }
        let x = self.standardizer.transform(features)?;
        let d: Vec<f64> = self
            .standardized
            .iter()
            .map(|s| squared_distance(s, &x))
            .collect();
        Ok(k_smallest(&d, k)
            .into_iter()
            .map(|i| (i, d[i].sqrt()))
            .collect())
    }

    pub fn neighbors(&self, features: &[f64], k: usize) -> Result<Vec<usize>, AdaptorError> {
        Ok(self
            .ranked(features, k)?
            .into_iter()
            .map(|(i, _)| i)
            .collect())
    }

    pub fn predict(
        &self,
        features: &[f64],
        task: &TaskDefinition,
        hp: &Hyperparams,
    ) -> Result<(Prediction, Option<Vec<f64>>), AdaptorError> {
        let nn = self.ranked(features, hp.k)?;
        let k = nn.len() as f64;
        let classes = self.classes.unwrap_or(0);
        let unexpected = || {
            AdaptorError::InvalidLabel(format!(
                "{}: stored target does not fit output",
                task.task_id
            ))
        };
        match task.output {
            OutputKind::ClassLabel => {
                let mut votes = vec![0.0; classes];
                for &(i, _) in &nn {
                    match self.targets[i] {
                        Target::Class { label } => votes[label] += 1.0,
                        _ => return Err(unexpected()),
                    }
                }
                let label = argmax_smallest(&votes) as i64;
                let probs = votes.iter().map(|v| v / k).collect();
                Ok((Prediction::ClassLabel { label }, Some(probs)))
            }
            OutputKind::Probability => {
                let mut positive = 0.0;
                for &(i, _) in &nn {
                    match self.targets[i] {
                        Target::Binary { positive: p } => positive += if p { 1.0 } else { 0.0 },
                        _ => return Err(unexpected()),
                    }
                }
                let p = positive / k;
                Ok((Prediction::Probability { value: p }, Some(vec![1.0 - p, p])))
            }
            OutputKind::PairedClassLabels => {
                let mut left = vec![0.0; classes];
                let mut right = vec![0.0; classes];
                for &(i, _) in &nn {
                    match self.targets[i] {
                        Target::Paired { left: l, right: r } => {
                            left[l] += 1.0;
                            right[r] += 1.0;
                        }
                        _ => return Err(unexpected()),
                    }
                }
                Ok((
                    Prediction::PairedLabels {
                        left: argmax_smallest(&left) as i64,
                        right: argmax_smallest(&right) as i64,
                    },
                    None,
                ))
            }
            OutputKind::MultiLabelProbabilities | OutputKind::NamedContinuousValues => {
                let weighted = task.output == OutputKind::NamedContinuousValues;
                let mut sums: BTreeMap<String, f64> = BTreeMap::new();
                let mut total = 0.0;
                for &(i, d) in &nn {
                    let w = if weighted {
                        1.0 / (d + DISTANCE_FLOOR)
                    } else {
                        1.0
                    };
                    match &self.targets[i] {
                        Target::Multi { values } => {
                            for (key, v) in values {
                                *sums.entry(key.clone()).or_insert(0.0) += w * v;
                            }
                        }
                        _ => return Err(unexpected()),
                    }
                    total += w;
                }
                let values = sums.into_iter().map(|(key, s)| (key, s / total)).collect();
                Ok((Prediction::MultiLabel { values }, None))
            }
            OutputKind::ContinuousValue => {
                let mut num = 0.0;
                let mut den = 0.0;
                for &(i, d) in &nn {
                    match self.targets[i] {
                        Target::Scalar { value } => {
                            let w = 1.0 / (d + DISTANCE_FLOOR);
                            num += w * value;
                            den += w;
                        }
                        _ => return Err(unexpected()),
                    }
                }
                Ok((Prediction::Continuous { value: num / den }, None))
            }
            OutputKind::TimeToEvent => {
                let mut num = 0.0;
                let mut den = 0.0;
                for &(i, _) in &nn {
                    match self.targets[i] {
                        Target::Survival { event, time } => {
                            let w = if event { 1.0 } else { CENSORED_WEIGHT };
                            num += w * time;
                            den += w;
                        }
                        _ => return Err(unexpected()),
                    }
                }
                Ok((Prediction::Continuous { value: num / den }, None))
            }
            other => Err(AdaptorError::UnsupportedTask {
                strategy: "knn".into(),
                output: other.as_str().into(),
            }),
        }
    }
}
