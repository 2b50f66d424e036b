//! Stand-in baseline algorithm: intensity statistics as frozen features for
//! vision tasks, tf-idf nearest neighbors and span pattern rules for
//! reports, and caption retrieval for the vision-language task.

mod extract;
mod language;
mod redact;

use fmbench_core::model::{AlgorithmCase, OutputKind, Prediction, Representation, TaskDefinition};
use fmbench_core::orchestrator::{Algorithm, CasePrediction, LanguageBatch};

pub use extract::{
    baseline_extract, intensity_statistics, tile_shape, HISTOGRAM_BINS, PERCENTILES, STATISTICS_DIM,
};
pub use language::{baseline_language, tokenize, TfIdfIndex, PROBABILITY_NEIGHBORS};
pub use redact::{shape, SpanRules};

pub const BASELINE_NAME: &str = "baseline";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BaselineError {
    #[error("case has no vision payload")]
    NotVision,
    #[error("case has no report")]
    NotReport,
    #[error("{0}: tissue mask selects no pixels")]
    EmptyMask(String),
    #[error("batch has no few-shot reports")]
    EmptyBatch,
    #[error("unexpected {0} label")]
    UnexpectedLabel(&'static str),
    #[error("baseline does not produce {0}")]
    Unsupported(&'static str),
}

/// Built-in caption bank: each caption with the mean tissue intensity it
/// describes best.
pub const CAPTION_BANK: [(f64, &str); 3] = [
    (
        0.3,
        "H&E stained section of tissue with sparse cellularity and abundant stroma.",
    ),
    (
        0.5,
        "H&E stained section of tissue with moderate cellularity.",
    ),
    (
        0.7,
        "H&E stained section of tissue with dense cellularity with crowded nuclei.",
    ),
];

/// The bank caption whose anchor intensity is closest to the case's mean
/// tissue intensity.
pub fn retrieve_caption(case: &AlgorithmCase) -> Result<&'static str, BaselineError> {
    let mean = extract::masked_mean(&case.case_id, &case.payload)?;
    let mut best = CAPTION_BANK[0];
    for entry in CAPTION_BANK {
        if (entry.0 - mean).abs() < (best.0 - mean).abs() {
            best = entry;
        }
    }
    Ok(best.1)
}

/// Deterministic and free of external resources.
#[derive(Debug, Clone, Copy, Default)]
pub struct BaselineAlgorithm;

impl Algorithm for BaselineAlgorithm {
    fn name(&self) -> &str {
        BASELINE_NAME
    }

    fn encode(
        &self,
        task: &TaskDefinition,
        case: &AlgorithmCase,
    ) -> Result<Representation, String> {
        baseline_extract(&case.case_id, &case.payload, task).map_err(|e| e.to_string())
    }

    fn predict_batch(
        &self,
        task: &TaskDefinition,
        batch: &LanguageBatch,
    ) -> Result<Vec<CasePrediction>, String> {
        baseline_language(batch, task).map_err(|e| e.to_string())
    }

    fn predict_case(
        &self,
        task: &TaskDefinition,
        case: &AlgorithmCase,
    ) -> Result<Prediction, String> {
        if task.output != OutputKind::CaptionText {
            return Err(BaselineError::Unsupported(task.output.as_str()).to_string());
        }
        let text = retrieve_caption(case).map_err(|e| e.to_string())?;
        Ok(Prediction::Caption {
            text: text.to_string(),
        })
    }
}
