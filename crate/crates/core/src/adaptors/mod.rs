//! Few-shot adaptors: lightweight models fitted only on the labeled few-shot
//! representations of a task, then applied to its evaluation cases.
//!
//! All adaptors share one convention for ties: the smallest index or the
//! smallest label wins.

mod centroid;
mod knn;
mod patch;
mod probe;
mod spec;
mod standardize;
mod target;

pub use probe::{probe_loss_and_grad, ProbeModel, ProbeObjective};
pub use spec::{
    registry_list_adaptors, AdaptorDescriptor, AdaptorSpec, AdaptorStrategy, Hyperparams,
};
pub use standardize::Standardizer;
pub use target::Target;

use serde::{Deserialize, Serialize};

use crate::model::{
    validate_representation_set, ModelError, Prediction, ReferenceLabel, Representation,
    RepresentationKind, TaskDefinition, TaskId,
};

#[derive(Debug, thiserror::Error)]
pub enum AdaptorError {
    #[error("incompatible representation kind: {0}")]
    IncompatibleRepresentation(String),
    #[error("k = {k} exceeds the {available} available few-shot samples")]
    KTooLarge { k: usize, available: usize },
    #[error("feature dimension {got} differs from fit-time dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("no few-shot examples")]
    EmptyFewShot,
    #[error("strategy {strategy} does not support output {output}")]
    UnsupportedTask { strategy: String, output: String },
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
    #[error("reference label does not fit the task: {0}")]
    InvalidLabel(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Prediction plus per-class vote fractions, when the strategy produces them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptorOutput {
    pub case_id: String,
    pub prediction: Prediction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_probabilities: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
enum Model {
    Knn(knn::KnnModel),
    Centroid(centroid::CentroidModel),
    Probe(ProbeModel),
    PatchSegmentation(patch::PatchSegModel),
    PatchDetection(patch::PatchDetModel),
}

/// An adaptor fitted on one task's few-shot set. Holds nothing that was not
/// derived from those examples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedAdaptor {
    pub spec: AdaptorSpec,
    pub task_id: TaskId,
    pub dim: usize,
    model: Model,
}

impl FittedAdaptor {
    /// Per-epoch training loss, for probe adaptors.
    pub fn loss_curve(&self) -> Option<&[f64]> {
        match &self.model {
            Model::Probe(p) => Some(&p.loss_curve),
            _ => None,
        }
    }

    /// Number of stored few-shot samples (cases or patches) for lazy learners.
    pub fn stored_samples(&self) -> Option<usize> {
        match &self.model {
            Model::Knn(m) => Some(m.features.len()),
            Model::PatchSegmentation(m) => Some(m.features.len()),
            Model::PatchDetection(m) => Some(m.features.len()),
            _ => None,
        }
    }

    /// Indices of the `k` nearest few-shot cases of a case-level k-NN model,
    /// nearest first.
    pub fn neighbors(&self, rep: &Representation) -> Result<Vec<usize>, AdaptorError> {
        match &self.model {
            Model::Knn(m) => m.neighbors(case_features(rep, self.dim)?, self.spec.hyperparams.k),
            _ => Err(AdaptorError::UnsupportedTask {
                strategy: self.spec.strategy.as_str().into(),
                output: "neighbor query".into(),
            }),
        }
    }
}

fn case_features(rep: &Representation, dim: usize) -> Result<&[f64], AdaptorError> {
    let features = match (&rep.kind, &rep.case_features) {
        (RepresentationKind::CaseLevel, Some(f)) => f,
        _ => {
            return Err(AdaptorError::IncompatibleRepresentation(format!(
                "{} is not case-level",
                rep.case_id
            )))
        }
    };
    if features.len() != dim {
        return Err(AdaptorError::DimensionMismatch {
            expected: dim,
            got: features.len(),
        });
    }
    Ok(features)
}

/// Fits an adaptor on labeled few-shot representations.
pub fn adaptor_fit(
    spec: &AdaptorSpec,
    few_shot: &[(Representation, ReferenceLabel)],
    task: &TaskDefinition,
) -> Result<FittedAdaptor, AdaptorError> {
    spec.check()?;
    if few_shot.is_empty() {
        return Err(AdaptorError::EmptyFewShot);
    }
    if !spec.strategy.supports(task.output) {
        return Err(AdaptorError::UnsupportedTask {
            strategy: spec.strategy.as_str().into(),
            output: task.output.as_str().into(),
        });
    }
    let reps: Vec<Representation> = few_shot.iter().map(|(r, _)| r.clone()).collect();
    let (kind, dim) = validate_representation_set(&reps)?.ok_or(AdaptorError::EmptyFewShot)?;
    let wanted = if spec.strategy.is_patch_level() {
        RepresentationKind::PatchLevel
    } else {
        RepresentationKind::CaseLevel
    };
    if kind != wanted {
        return Err(AdaptorError::IncompatibleRepresentation(format!(
            "{} needs {:?} representations, got {:?}",
            spec.strategy.as_str(),
            wanted,
            kind
        )));
    }

    let model = match spec.strategy {
        AdaptorStrategy::Knn => Model::Knn(knn::KnnModel::fit(few_shot, task, spec.hyperparams.k)?),
        AdaptorStrategy::NearestCentroid => {
            Model::Centroid(centroid::CentroidModel::fit(few_shot, task)?)
        }
        AdaptorStrategy::LinearProbe => {
            Model::Probe(ProbeModel::fit(few_shot, task, &spec.hyperparams)?)
        }
        AdaptorStrategy::PatchKnnSegmentation => {
            Model::PatchSegmentation(patch::PatchSegModel::fit(few_shot, spec.hyperparams.k)?)
        }
        AdaptorStrategy::PatchKnnDetection => {
            Model::PatchDetection(patch::PatchDetModel::fit(few_shot, spec.hyperparams.k)?)
        }
    };
    Ok(FittedAdaptor {
        spec: spec.clone(),
        task_id: task.task_id,
        dim,
        model,
    })
}

/// Predicts every evaluation case independently of the others.
pub fn adaptor_predict(
    model: &FittedAdaptor,
    eval_reps: &[Representation],
    task: &TaskDefinition,
) -> Result<Vec<Prediction>, AdaptorError> {
    Ok(adaptor_predict_detailed(model, eval_reps, task)?
        .into_iter()
        .map(|o| o.prediction)
        .collect())
}

pub fn adaptor_predict_detailed(
    model: &FittedAdaptor,
    eval_reps: &[Representation],
    task: &TaskDefinition,
) -> Result<Vec<AdaptorOutput>, AdaptorError> {
    eval_reps
        .iter()
        .map(|rep| {
            rep.validate()?;
            let (prediction, class_probabilities) = match &model.model {
                Model::Knn(m) => m.predict(
                    case_features(rep, model.dim)?,
                    task,
                    &model.spec.hyperparams,
                )?,
                Model::Centroid(m) => m.predict(case_features(rep, model.dim)?, task)?,
                Model::Probe(m) => m.predict(case_features(rep, model.dim)?, task)?,
                Model::PatchSegmentation(m) => {
                    (m.predict(rep, model.dim, &model.spec.hyperparams)?, None)
                }
                Model::PatchDetection(m) => (
                    m.predict(rep, model.dim, task, &model.spec.hyperparams)?,
                    None,
                ),
            };
            Ok(AdaptorOutput {
                case_id: rep.case_id.clone(),
                prediction,
                class_probabilities,
            })
        })
        .collect()
}

/// Smallest-label winner of a vote over `0..counts.len()`.
pub(crate) fn argmax_smallest(counts: &[f64]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

/// Indices of the `k` smallest distances, ties to the lower index.
pub(crate) fn k_smallest(distances: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..distances.len()).collect();
    order.sort_by(|&a, &b| distances[a].total_cmp(&distances[b]).then(a.cmp(&b)));
    order.truncate(k);
    order
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
