//! Task registry, case data model, representations, predictions and the
//! on-disk benchmark layout.

mod case;
mod grid;
mod layout;
mod prediction;
mod representation;
mod task;
mod validate;

use std::path::PathBuf;

pub use case::{
    check_unique_case_ids, ArchiveItem, CasePayload, ReportPayload, Split, VisionPayload,
};
pub use grid::{Grid, ImageGrid, MaskGrid};
pub use layout::{
    payload_from_files, AlgorithmCase, AlgorithmView, BenchmarkLayout, BenchmarkManifest,
    CaseManifest, SequesteredStore, SplitIndex, TaskManifestEntry, SEQUESTERED_DIR,
};
pub use prediction::{EntitySpan, Lesion, Prediction, ReferenceLabel, ScoredPoint};
pub use representation::{
    validate_representation_set, PatchFeature, Representation, RepresentationKind,
};
pub use task::{
    emit_task_config, load_task_registry, CaseCounts, DeliveryMode, Domain, HitRule, LabelSpace,
    MetricSpec, Modality, NormalizationConstants, OutputKind, ScalarVariable, TaskConfigDocument,
    TaskDefinition, TaskId, TaskRegistry, TaskType, TimeLimits, CELL_HIT_RADIUS, COLON_LABELS,
    HIP_CATEGORIES, PII_TAGS, SAMPLE_ORIGIN_CLASSES,
};
pub use validate::{validate_prediction, ValidationReport};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("unknown task id {0}")]
    UnknownTask(i64),
    #[error("invalid task registry: {0}")]
    Registry(String),
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("invalid reference label: {0}")]
    InvalidLabel(String),
    #[error("invalid case payload: {0}")]
    InvalidPayload(String),
    #[error("invalid representation: {0}")]
    InvalidRepresentation(String),
    #[error("duplicate case id {0}")]
    DuplicateCase(String),
    #[error("layout error: {0}")]
    Layout(String),
    #[error("access to sequestered data denied: {}", .0.display())]
    Sequestered(PathBuf),
    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed json in {}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl ModelError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ModelError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        ModelError::Json {
            path: path.into(),
            source,
        }
    }
}
