use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::model::{
    AlgorithmCase, CasePayload, Prediction, ReferenceLabel, Representation, TaskDefinition, TaskId,
};

/// A few-shot report with its label, as handed to language algorithms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledCase {
    pub case_id: String,
    pub payload: CasePayload,
    pub label: ReferenceLabel,
}

/// All reports of a language task, delivered at once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageBatch {
    pub task_id: TaskId,
    pub few_shot: Vec<LabeledCase>,
    pub cases: Vec<AlgorithmCase>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CasePrediction {
    pub case_id: String,
    pub prediction: Prediction,
}

/// The algorithm side of the two-step flow. Vision cases arrive one at a
/// time with no split information; language tasks arrive as one batch;
/// vision-language cases arrive one at a time with their task description.
/// Errors are free-form messages that end up in the task log.
pub trait Algorithm: Send + Sync {
    fn name(&self) -> &str;

    fn encode(&self, task: &TaskDefinition, case: &AlgorithmCase)
        -> Result<Representation, String>;

    fn predict_batch(
        &self,
        task: &TaskDefinition,
        batch: &LanguageBatch,
    ) -> Result<Vec<CasePrediction>, String>;

    fn predict_case(
        &self,
        task: &TaskDefinition,
        case: &AlgorithmCase,
    ) -> Result<Prediction, String>;
}

/// Named algorithm implementations a submission can refer to.
#[derive(Default, Clone)]
pub struct AlgorithmRegistry {
    algorithms: BTreeMap<String, Arc<dyn Algorithm>>,
}

impl AlgorithmRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, algorithm: Arc<dyn Algorithm>) {
        self.algorithms
            .insert(algorithm.name().to_string(), algorithm);
    }

    pub fn get(&self, name: &str) -> Option<Arc<dyn Algorithm>> {
        self.algorithms.get(name).cloned()
    }

    pub fn names(&self) -> Vec<&str> {
        self.algorithms.keys().map(String::as_str).collect()
    }
}

impl std::fmt::Debug for AlgorithmRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AlgorithmRegistry")
            .field("names", &self.names())
            .finish()
    }
}
