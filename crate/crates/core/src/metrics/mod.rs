//! Task metrics. Every function here is a pure function of its inputs.

mod caption;
mod detection;
mod dispatch;
mod kappa;
mod ranking;
mod redaction;
mod regression;
mod segmentation;
mod survival;

pub use caption::{
    bleu4, caption_score, cider, meteor_lite, rouge_l, tokenize, CaptionScore, EmbeddingScorer,
    HashedNgramEmbedder, TokenEmbedder, BLEU_SMOOTHING_EPSILON, ROUGE_BETA,
};
pub use detection::{
    detection_auroc_ap, detection_f1, froc_cpm, lesion_hit_labels, match_points,
    match_points_with_radii, FrocConfig, FrocResult, MatchCounts, DEFAULT_FP_RATES,
};
pub use dispatch::{evaluate_task, evaluate_task_with, MetricResult};
pub use kappa::{cohen_kappa, kappa_pooled_pairs, KappaWeighting};
pub use ranking::{auroc, average_precision, average_precision_with_total, macro_auroc};
pub use redaction::{blended_redaction_f1, RedactionCounts, RedactionScore, RedactionWeights};
pub use regression::{rsmapes, rsmapes_case_error, rsmapes_multi, RsmapesConfig};
pub use segmentation::{
    axis_measurements, dice, instance_averaged_dice, relative_axis_error, uls_case_score,
    AxisMeasurements, CompositeWeights, DiceMode, UlsParts,
};
pub use survival::concordance_index_censored;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    Empty,
    #[error("label {label} outside 0..{categories}")]
    LabelOutOfRange { label: i64, categories: usize },
    #[error("degenerate marginals")]
    DegenerateMarginals,
    #[error("AUROC undefined: labels contain a single class")]
    AurocUndefined,
    #[error("AUROC undefined for label {0}")]
    DegenerateLabel(String),
    #[error("no positive labels")]
    NoPositives,
    #[error("no comparable pairs")]
    NoComparablePairs,
    #[error("radius must be positive")]
    NonPositiveRadius,
    #[error("empty reference set")]
    NoReferences,
    #[error("shape mismatch: {0:?} vs {1:?}")]
    ShapeMismatch(Vec<usize>, Vec<usize>),
    #[error("reference mask has no instances")]
    NoInstances,
    #[error("empty mask")]
    EmptyMask,
    #[error("expected a 3D mask, got rank {0}")]
    NotVolumetric(usize),
    #[error("span {start}..{end} out of bounds for text of length {len}")]
    SpanOutOfBounds {
        start: usize,
        end: usize,
        len: usize,
    },
    #[error("reference spans overlap")]
    OverlappingReference,
    #[error("invalid value: {0}")]
    InvalidValue(String),
    #[error("empty prediction")]
    EmptyPrediction,
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("prediction for case {case} does not fit the task: {reason}")]
    Incompatible { case: String, reason: String },
}

pub(crate) fn check_lengths(a: usize, b: usize) -> Result<(), MetricError> {
    if a != b {
        Err(MetricError::LengthMismatch(a, b))
    } else if a == 0 {
        Err(MetricError::Empty)
    } else {
        Ok(())
    }
}

pub(crate) fn check_finite(values: &[f64], what: &str) -> Result<(), MetricError> {
    match values.iter().find(|v| !v.is_finite()) {
        Some(v) => Err(MetricError::InvalidValue(format!("non-finite {what} {v}"))),
        None => Ok(()),
    }
}
