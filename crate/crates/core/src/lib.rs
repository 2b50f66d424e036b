//! Evaluation engine for a multi-task, multi-modality benchmark of frozen
//! encoders.
//!
//! The crate is split along the two-step evaluation flow:
//!
//! - [`model`]: task registry, archive items, representations, predictions
//!   and the validation contract.
//! - [`metrics`]: pure task metrics (kappa, AUROC, c-index, FROC, Dice,
//!   RSMAPES, redaction F1, caption scores) and the per-task dispatcher.
//! - [`adaptors`]: few-shot adaptors that turn representations into
//!   predictions.
//! - [`scoring`]: score normalization, aggregate scores and leaderboard
//!   ordering.
//! - [`orchestrator`]: submission phases, quotas, the evaluation pipeline,
//!   the append-only event log and the information-flow audit.

pub mod adaptors;
pub mod metrics;
pub mod model;
pub mod orchestrator;
pub mod scoring;

pub use model::{
    load_task_registry, ArchiveItem, CasePayload, Prediction, ReferenceLabel, Representation,
    TaskDefinition, TaskId, TaskRegistry,
};
