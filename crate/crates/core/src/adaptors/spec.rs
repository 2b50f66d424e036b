use serde::{Deserialize, Serialize};

use super::AdaptorError;
use crate::model::{OutputKind, TaskDefinition, TaskType};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdaptorStrategy {
    Knn,
    NearestCentroid,
    LinearProbe,
    PatchKnnSegmentation,
    PatchKnnDetection,
}

impl AdaptorStrategy {
    pub const ALL: [AdaptorStrategy; 5] = [
        AdaptorStrategy::Knn,
        AdaptorStrategy::NearestCentroid,
        AdaptorStrategy::LinearProbe,
        AdaptorStrategy::PatchKnnSegmentation,
        AdaptorStrategy::PatchKnnDetection,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AdaptorStrategy::Knn => "knn",
            AdaptorStrategy::NearestCentroid => "nearest_centroid",
            AdaptorStrategy::LinearProbe => "linear_probe",
            AdaptorStrategy::PatchKnnSegmentation => "patch_knn_segmentation",
            AdaptorStrategy::PatchKnnDetection => "patch_knn_detection",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.as_str() == name)
    }

    pub fn is_patch_level(self) -> bool {
        matches!(
            self,
            AdaptorStrategy::PatchKnnSegmentation | AdaptorStrategy::PatchKnnDetection
        )
    }

    pub fn outputs(self) -> &'static [OutputKind] {
        use OutputKind::*;
        match self {
            AdaptorStrategy::Knn => &[
                ClassLabel,
                Probability,
                TimeToEvent,
                PairedClassLabels,
                MultiLabelProbabilities,
                ContinuousValue,
                NamedContinuousValues,
            ],
            AdaptorStrategy::NearestCentroid => &[ClassLabel, Probability, PairedClassLabels],
            AdaptorStrategy::LinearProbe => &[ClassLabel, Probability, ContinuousValue],
            AdaptorStrategy::PatchKnnSegmentation => &[SegmentationMask],
            AdaptorStrategy::PatchKnnDetection => &[
                PointSet,
                PointSetWithConfidence,
                PointSetWithCaseProbability,
            ],
        }
    }

    pub fn supports(self, output: OutputKind) -> bool {
        self.outputs().contains(&output)
    }

    pub fn task_types(self) -> &'static [TaskType] {
        match self {
            AdaptorStrategy::Knn => &[TaskType::Classification, TaskType::Regression],
            AdaptorStrategy::NearestCentroid => &[TaskType::Classification],
            AdaptorStrategy::LinearProbe => &[TaskType::Classification, TaskType::Regression],
            AdaptorStrategy::PatchKnnSegmentation => &[TaskType::Segmentation],
            AdaptorStrategy::PatchKnnDetection => &[TaskType::Detection],
        }
    }
}

fn default_k() -> usize {
    5
}
fn default_lr() -> f64 {
    0.05
}
fn default_epochs() -> usize {
    200
}
fn default_l2() -> f64 {
    1e-4
}
fn default_peak() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hyperparams {
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_l2")]
    pub l2: f64,
    #[serde(default = "default_peak")]
    pub peak_threshold: f64,
    /// Suppression radius for detection peaks, in physical units. Defaults
    /// to the largest physical extent of a patch.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nms_radius: Option<f64>,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            k: default_k(),
            learning_rate: default_lr(),
            epochs: default_epochs(),
            l2: default_l2(),
            peak_threshold: default_peak(),
            nms_radius: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptorSpec {
    pub strategy: AdaptorStrategy,
    #[serde(default)]
    pub hyperparams: Hyperparams,
    #[serde(default)]
    pub seed: u64,
}

impl AdaptorSpec {
    pub fn new(strategy: AdaptorStrategy) -> Self {
        AdaptorSpec {
            strategy,
            hyperparams: Hyperparams::default(),
            seed: 0,
        }
    }

    pub fn check(&self) -> Result<(), AdaptorError> {
        let h = &self.hyperparams;
        let bad = |m: &str| Err(AdaptorError::InvalidHyperparameter(m.into()));
        if h.k == 0 {
            return bad("k must be positive");
        }
        if !(h.learning_rate.is_finite() && h.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if h.epochs == 0 {
            return bad("epochs must be positive");
        }
        if !(h.l2.is_finite() && h.l2 >= 0.0) {
            return bad("l2 must be nonnegative");
        }
        if !(0.0..=1.0).contains(&h.peak_threshold) {
            return bad("peak_threshold must be in [0, 1]");
        }
        if let Some(r) = h.nms_radius {
            if !(r.is_finite() && r > 0.0) {
                return bad("nms_radius must be positive");
            }
        }
        Ok(())
    }

    /// The adaptor spec to use for a given task. A case-level k-NN spec applied to a
    /// dense task becomes the matching patch-level k-NN strategy with the
    /// same hyperparameters.
    pub fn resolve_for(&self, task: &TaskDefinition) -> AdaptorSpec {
        let mut spec = self.clone();
        if self.strategy == AdaptorStrategy::Knn && task.output.is_dense() {
            spec.strategy = if task.output == OutputKind::SegmentationMask {
                AdaptorStrategy::PatchKnnSegmentation
            } else {
                AdaptorStrategy::PatchKnnDetection
            };
        }
        spec
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("adaptor spec serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, AdaptorError> {
        let spec: AdaptorSpec = serde_json::from_str(text)
            .map_err(|e| AdaptorError::InvalidHyperparameter(e.to_string()))?;
        spec.check()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptorDescriptor {
    pub name: String,
    pub defaults: AdaptorSpec,
    pub task_types: Vec<TaskType>,
    pub outputs: Vec<OutputKind>,
    pub patch_level: bool,
}

/// The built-in strategies with their defaults, in a fixed order.
pub fn registry_list_adaptors() -> Vec<AdaptorDescriptor> {
    AdaptorStrategy::ALL
        .into_iter()
        .map(|s| AdaptorDescriptor {
            name: s.as_str().to_string(),
            defaults: AdaptorSpec::new(s),
            task_types: s.task_types().to_vec(),
            outputs: s.outputs().to_vec(),
            patch_level: s.is_patch_level(),
        })
        .collect()
}
