use serde::{Deserialize, Serialize};

use super::standardize::Standardizer;
use super::target::{class_count, targets, Target};
use super::{argmax_smallest, squared_distance, AdaptorError};
use crate::model::{OutputKind, Prediction, ReferenceLabel, Representation, TaskDefinition};

/// One mean vector per observed class, in standardized feature space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentroidModel {
    pub standardizer: Standardizer,
    /// `centroids[c]` is `None` for classes absent from the few-shot set.
    pub centroids: Vec<Option<Vec<f64>>>,
    /// Second-slot centroids for paired labels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right: Option<Vec<Option<Vec<f64>>>>,
}

fn means(rows: &[(Vec<f64>, usize)], classes: usize, dim: usize) -> Vec<Option<Vec<f64>>> {
    let mut sums = vec![vec![0.0; dim]; classes];
    let mut counts = vec![0usize; classes];
    for (row, c) in rows {
        counts[*c] += 1;
        for (s, v) in sums[*c].iter_mut().zip(row) {
            *s += v;
        }
    }
    sums.into_iter()
        .zip(counts)
        .map(|(s, n)| (n > 0).then(|| s.into_iter().map(|v| v / n as f64).collect()))
        .collect()
}

/// Softmax of negative squared distances over present classes; absent
/// classes get probability 0.
fn probabilities(centroids: &[Option<Vec<f64>>], x: &[f64]) -> Vec<f64> {
    let d: Vec<Option<f64>> = centroids
        .iter()
        .map(|c| c.as_ref().map(|c| squared_distance(c, x)))
        .collect();
    let min = d.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    let e: Vec<f64> = d
        .iter()
        .map(|d| d.map_or(0.0, |d| (min - d).exp()))
        .collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|v| v / total).collect()
}

impl CentroidModel {
    pub fn fit(
        few_shot: &[(Representation, ReferenceLabel)],
        task: &TaskDefinition,
    ) -> Result<Self, AdaptorError> {
        let classes = class_count(task).ok_or_else(|| AdaptorError::UnsupportedTask {
            strategy: "nearest_centroid".into(),
            output: task.output.as_str().into(),
        })?;
        let features: Vec<&[f64]> = few_shot
            .iter()
            .map(|(r, _)| {
                r.case_features.as_deref().ok_or_else(|| {
                    AdaptorError::IncompatibleRepresentation(format!(
                        "{} is not case-level",
                        r.case_id
                    ))
                })
            })
            .collect::<Result<_, _>>()?;
        let standardizer = Standardizer::fit(features.iter().copied(), features[0].len())?;
        let z: Vec<Vec<f64>> = features
            .iter()
            .map(|f| standardizer.transform(f))
            .collect::<Result<_, _>>()?;
        let dim = standardizer.output_dim();
        let mut left = Vec::new();
        let mut right = Vec::new();
        for (row, t) in z.into_iter().zip(targets(few_shot, task)?) {
            match t {
                Target::Class { label } => left.push((row, label)),
                Target::Binary { positive } => left.push((row, positive as usize)),
                Target::Paired { left: l, right: r } => {
                    right.push((row.clone(), r));
                    left.push((row, l));
                }
                _ => {
                    return Err(AdaptorError::UnsupportedTask {
                        strategy: "nearest_centroid".into(),
                        output: task.output.as_str().into(),
                    })
                }
            }
        }
        Ok(CentroidModel {
            standardizer,
            centroids: means(&left, classes, dim),
            right: (!right.is_empty()).then(|| means(&right, classes, dim)),
        })
    }

    pub fn predict(
        &self,
        features: &[f64],
        task: &TaskDefinition,
    ) -> Result<(Prediction, Option<Vec<f64>>), AdaptorError> {
        let x = self.standardizer.transform(features)?;
        let probs = probabilities(&self.centroids, &x);
        match task.output {
            OutputKind::ClassLabel => Ok((
                Prediction::ClassLabel {
                    label: argmax_smallest(&probs) as i64,
                },
                Some(probs),
            )),
            OutputKind::Probability => {
                Ok((Prediction::Probability { value: probs[1] }, Some(probs)))
            }
            OutputKind::PairedClassLabels => {
                let right = self.right.as_ref().ok_or_else(|| {
                    AdaptorError::InvalidLabel("model was not fitted on paired labels".into())
                })?;
                Ok((
                    Prediction::PairedLabels {
                        left: argmax_smallest(&probs) as i64,
                        right: argmax_smallest(&probabilities(right, &x)) as i64,
                    },
                    None,
                ))
            }
            other => Err(AdaptorError::UnsupportedTask {
                strategy: "nearest_centroid".into(),
                output: other.as_str().into(),
            }),
        }
    }
}
