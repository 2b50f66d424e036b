//! Synthetic benchmark generation. Every task gets planted, generator-known
//! ground truth: class-dependent intensity levels for case-level vision
//! tasks, blobs and blocks for dense tasks, templated reports for language
//! tasks and templated captions for the captioning task.

mod reports;
mod vision;

use std::path::Path;

use fmbench_core::load_task_registry;
use fmbench_core::metrics::evaluate_task;
use fmbench_core::model::{
    validate_prediction, ArchiveItem, BenchmarkLayout, BenchmarkManifest, CasePayload, LabelSpace,
    ModelError, OutputKind, Prediction, ReferenceLabel, ScoredPoint, Split, SplitIndex,
    TaskDefinition, TaskId, TaskManifestEntry,
};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use reports::{REPORT_LOCATIONS, REPORT_TRIALS};
pub use vision::{CELL_TILE, DENSE_2D_SHAPE, DETECTION_3D_SHAPE, INSTANCE_SHAPE, LESION_ROI_SHAPE};

#[derive(Debug, thiserror::Error)]
pub enum GenerateError {
    #[error("invalid generator settings: {0}")]
    InvalidSpec(String),
    #[error("{task}: degenerate task data: {reason}")]
    Degenerate { task: TaskId, reason: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Generator settings. Few-shot counts are taken from the registry as is;
/// evaluation counts are scaled and rounded up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticBenchmarkSpec {
    pub seed: u64,
    pub scale: f64,
    /// Approximate pixel count of case-level images: 2D images are
    /// `ceil(sqrt(d))` on a side and 3D images `ceil(cbrt(d))`.
    pub feature_dim: usize,
    /// Multiplier on every planted intensity difference (class levels,
    /// lesion and cell contrast, segment levels).
    pub separation: f64,
    /// Probability that a report leaves out the phrase carrying its label.
    pub report_noise: f64,
}

impl Default for SyntheticBenchmarkSpec {
    fn default() -> Self {
        SyntheticBenchmarkSpec {
            seed: 0,
            scale: 0.1,
            feature_dim: 64,
            separation: 1.0,
            report_noise: 0.05,
        }
    }
}

impl SyntheticBenchmarkSpec {
    pub fn new(seed: u64) -> Self {
        SyntheticBenchmarkSpec {
            seed,
            ..Self::default()
        }
    }

    pub fn check(&self) -> Result<(), GenerateError> {
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(GenerateError::InvalidSpec(format!(
                "scale must be positive, got {}",
                self.scale
            )));
        }
        if self.feature_dim < 4 {
            return Err(GenerateError::InvalidSpec(format!(
                "feature_dim must be at least 4, got {}",
                self.feature_dim
            )));
        }
        if !(self.separation.is_finite() && self.separation >= 0.0) {
            return Err(GenerateError::InvalidSpec(format!(
                "separation must be nonnegative, got {}",
                self.separation
            )));
        }
        if !(0.0..=1.0).contains(&self.report_noise) {
            return Err(GenerateError::InvalidSpec(format!(
                "report_noise must lie in [0, 1], got {}",
                self.report_noise
            )));
        }
        Ok(())
    }

    /// Few-shot, validation and test case counts for a task.
    pub fn counts(&self, task: &TaskDefinition) -> (usize, usize, usize) {
        let floor = min_evaluation_cases(task);
        let scaled = |n: u32| (((n as f64 * self.scale) - 1e-9).ceil() as usize).max(floor);
        (
            task.counts.few_shot as usize,
            scaled(task.counts.validation),
            scaled(task.counts.test),
        )
    }
}

/// Smallest evaluation split that can hold every class at least once.
fn min_evaluation_cases(task: &TaskDefinition) -> usize {
    match &task.label_space {
        LabelSpace::Classes { count, .. } | LabelSpace::PairedClasses { count, .. } => {
            (*count as usize).max(2)
        }
        _ => 2,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Part {
    FewShot,
    Validation,
    Test,
}

/// A case before it gets an id.
pub(crate) struct Draft {
    pub payload: CasePayload,
    pub reference: ReferenceLabel,
}

/// Labels `0..k` repeated to length `n`, shuffled.
pub(crate) fn balanced(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    let mut labels: Vec<usize> = (0..n).map(|i| i % k).collect();
    labels.shuffle(rng);
    labels
}

fn task_rng(seed: u64, task: TaskId) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(task.0 as u64);
    rng
}

fn drafts(
    spec: &SyntheticBenchmarkSpec,
    task: &TaskDefinition,
    rng: &mut ChaCha8Rng,
    part: Part,
    n: usize,
) -> Result<Vec<Draft>, GenerateError> {
    let degenerate = |reason: String| GenerateError::Degenerate {
        task: task.task_id,
        reason,
    };
    match task.task_id.0 {
        1..=11 | 20 => vision::drafts(spec, task, rng, part, n).map_err(degenerate),
        _ => reports::drafts(spec, task, rng, part, n).map_err(degenerate),
    }
}

/// Generates one task's cases and split index. Case ids are assigned after
/// shuffling, so they carry no split information.
pub fn generate_task(
    spec: &SyntheticBenchmarkSpec,
    task: &TaskDefinition,
) -> Result<(Vec<ArchiveItem>, SplitIndex), GenerateError> {
    spec.check()?;
    let mut rng = task_rng(spec.seed, task.task_id);
    let (few, val, test) = spec.counts(task);
    let mut all: Vec<(Part, Draft)> = Vec::with_capacity(few + val + test);
    for (part, n) in [
        (Part::FewShot, few),
        (Part::Validation, val),
        (Part::Test, test),
    ] {
        if n == 0 {
            continue;
        }
        all.extend(
            drafts(spec, task, &mut rng, part, n)?
                .into_iter()
                .map(|d| (part, d)),
        );
    }
    all.shuffle(&mut rng);

    let mut items = Vec::with_capacity(all.len());
    let mut splits = SplitIndex::default();
    for (i, (part, draft)) in all.into_iter().enumerate() {
        let id = format!("case-{i:04}");
        let split = match part {
            Part::FewShot => {
                splits.few_shot.push(id.clone());
                Split::FewShot
            }
            Part::Validation => {
                splits.validation.push(id.clone());
                Split::Evaluation
            }
            Part::Test => {
                splits.test.push(id.clone());
                Split::Evaluation
            }
        };
        items.push(ArchiveItem::new(
            id,
            task.task_id,
            split,
            draft.payload,
            draft.reference,
        )?);
    }
    check_preconditions(task, &items, &splits)?;
    Ok((items, splits))
}

/// The prediction that reproduces a reference exactly.
pub fn reference_prediction(task: &TaskDefinition, reference: &ReferenceLabel) -> Prediction {
    let points = |coords: Vec<Vec<f64>>| {
        coords
            .into_iter()
            .map(|c| ScoredPoint::new(c, 1.0))
            .collect()
    };
    match (task.output, reference.clone()) {
        (OutputKind::Probability, ReferenceLabel::ClassLabel { label }) => {
            Prediction::Probability {
                value: if label == 1 { 1.0 } else { 0.0 },
            }
        }
        (_, ReferenceLabel::ClassLabel { label }) => Prediction::ClassLabel { label },
        (_, ReferenceLabel::Continuous { value }) => Prediction::Continuous { value },
        (_, ReferenceLabel::Survival { time_years, .. }) => {
            Prediction::Continuous { value: time_years }
        }
        (_, ReferenceLabel::Points { coords }) => Prediction::PointSet {
            points: points(coords),
        },
        (OutputKind::PointSetWithCaseProbability, ReferenceLabel::LesionRefs { lesions }) => {
            Prediction::PointSetWithCaseProbability {
                case_probability: if lesions.is_empty() { 0.0 } else { 1.0 },
                points: points(lesions.into_iter().map(|l| l.coord).collect()),
            }
        }
        (_, ReferenceLabel::LesionRefs { lesions }) => Prediction::PointSet {
            points: points(lesions.into_iter().map(|l| l.coord).collect()),
        },
        (_, ReferenceLabel::Mask { mask }) => Prediction::Mask { mask },
        (_, ReferenceLabel::EntitySpans { spans }) => Prediction::EntitySpans { spans },
        (_, ReferenceLabel::Caption { text }) => Prediction::Caption { text },
        (_, ReferenceLabel::MultiLabel { values }) => Prediction::MultiLabel { values },
        (_, ReferenceLabel::PairedLabels { left, right }) => {
            Prediction::PairedLabels { left, right }
        }
    }
}

/// Every evaluation split must be scorable: reference-derived predictions
/// pass validation and the task metric is defined.
fn check_preconditions(
    task: &TaskDefinition,
    items: &[ArchiveItem],
    splits: &SplitIndex,
) -> Result<(), GenerateError> {
    for (name, ids) in [("validation", &splits.validation), ("test", &splits.test)] {
        let subset: Vec<ArchiveItem> = items
            .iter()
            .filter(|i| ids.contains(&i.case_id))
            .cloned()
            .collect();
        let preds: Vec<Prediction> = subset
            .iter()
            .map(|i| reference_prediction(task, &i.reference))
            .collect();
        for (item, pred) in subset.iter().zip(&preds) {
            if let Some(v) = validate_prediction(task, pred, item).violations.first() {
                return Err(GenerateError::Degenerate {
                    task: task.task_id,
                    reason: format!("{name} case {}: {v}", item.case_id),
                });
            }
        }
        evaluate_task(task, &subset, &preds).map_err(|e| GenerateError::Degenerate {
            task: task.task_id,
            reason: format!("{name} split: {e}"),
        })?;
    }
    Ok(())
}

/// Writes all 20 tasks and the manifest under `out_dir`.
pub fn generate_benchmark(
    spec: &SyntheticBenchmarkSpec,
    out_dir: &Path,
) -> Result<BenchmarkManifest, GenerateError> {
    spec.check()?;
    let registry = load_task_registry();
    let layout = BenchmarkLayout::new(out_dir);
    let mut tasks = Vec::new();
    for task in registry.iter() {
        let (items, splits) = generate_task(spec, task)?;
        layout.write_task(task, &items, &splits)?;
        tasks.push(TaskManifestEntry {
            task_id: task.task_id,
            few_shot: splits.few_shot.len(),
            validation: splits.validation.len(),
            test: splits.test.len(),
        });
    }
    let manifest = BenchmarkManifest {
        seed: spec.seed,
        scale: spec.scale,
        feature_dim: spec.feature_dim,
        tasks,
    };
    layout.write_manifest(&manifest)?;
    Ok(manifest)
}
