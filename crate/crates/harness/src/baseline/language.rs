use std::collections::BTreeMap;

use fmbench_core::model::{OutputKind, Prediction, ReferenceLabel, TaskDefinition};
use fmbench_core::orchestrator::{CasePrediction, LanguageBatch};

use super::redact::SpanRules;
use super::BaselineError;

/// Neighbors averaged for probability outputs.
pub const PROBABILITY_NEIGHBORS: usize = 5;

/// Lowercased alphanumeric runs.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_ascii_lowercase())
        .collect()
}

type SparseVector = BTreeMap<String, f64>;

/// Unit-length tf-idf vectors of a fixed document collection.
#[derive(Debug, Clone)]
pub struct TfIdfIndex {
    idf: BTreeMap<String, f64>,
    docs: Vec<SparseVector>,
}

impl TfIdfIndex {
    /// Fits document frequencies on `docs` plus `extra` (unlabeled text
    /// that only contributes to the frequencies).
    pub fn fit(docs: &[String], extra: &[String]) -> Self {
        let mut df: BTreeMap<String, f64> = BTreeMap::new();
        for doc in docs.iter().chain(extra) {
            let mut seen = tokenize(doc);
            seen.sort();
            seen.dedup();
            for t in seen {
                *df.entry(t).or_insert(0.0) += 1.0;
            }
        }
        let n = (docs.len() + extra.len()) as f64;
        let idf = df
            .into_iter()
            .map(|(t, d)| (t, ((1.0 + n) / (1.0 + d)).ln() + 1.0))
            .collect();
        let mut index = TfIdfIndex {
            idf,
            docs: Vec::new(),
        };
        index.docs = docs.iter().map(|d| index.vector(d)).collect();
        index
    }

    pub fn vector(&self, text: &str) -> SparseVector {
        let mut v: SparseVector = BTreeMap::new();
        for t in tokenize(text) {
            if let Some(idf) = self.idf.get(&t) {
                *v.entry(t).or_insert(0.0) += idf;
            }
        }
        let norm = v.values().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.values_mut().for_each(|x| *x /= norm);
        }
        v
    }

    /// Indexed documents by cosine similarity to `text`, most similar
    /// first; ties keep document order.
    pub fn ranked(&self, text: &str) -> Vec<(usize, f64)> {
        let q = self.vector(text);
        let mut sims: Vec<(usize, f64)> = self
            .docs
            .iter()
            .enumerate()
            .map(|(i, d)| {
                (
                    i,
                    d.iter()
                        .map(|(t, x)| x * q.get(t).copied().unwrap_or(0.0))
                        .sum(),
                )
            })
            .collect();
        sims.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        sims
    }

    pub fn nearest(&self, text: &str) -> usize {
        self.ranked(text)[0].0
    }
}

/// Sentences mentioning `side`, joined.
fn side_text(text: &str, side: &str) -> String {
    text.split('.')
        .filter(|s| tokenize(s).iter().any(|t| t == side))
        .collect::<Vec<_>>()
        .join(".")
}

fn binary(label: &ReferenceLabel) -> Result<f64, BaselineError> {
    match label {
        ReferenceLabel::ClassLabel { label } => Ok(if *label == 1 { 1.0 } else { 0.0 }),
        other => Err(BaselineError::UnexpectedLabel(other.variant_name())),
    }
}

/// Predictions for every evaluation report of a batch.
pub fn baseline_language(
    batch: &LanguageBatch,
    task: &TaskDefinition,
) -> Result<Vec<CasePrediction>, BaselineError> {
    if batch.few_shot.is_empty() {
        return Err(BaselineError::EmptyBatch);
    }
    let few_texts: Vec<String> = batch
        .few_shot
        .iter()
        .map(|c| {
            c.payload
                .report()
                .map(|r| r.text.clone())
                .ok_or(BaselineError::NotReport)
        })
        .collect::<Result<_, _>>()?;
    let eval_texts: Vec<String> = batch
        .cases
        .iter()
        .map(|c| {
            c.payload
                .report()
                .map(|r| r.text.clone())
                .ok_or(BaselineError::NotReport)
        })
        .collect::<Result<_, _>>()?;
    let labels: Vec<&ReferenceLabel> = batch.few_shot.iter().map(|c| &c.label).collect();

    let predictions: Vec<Prediction> = match task.output {
        OutputKind::EntitySpans => {
            let rules = SpanRules::fit(
                batch
                    .few_shot
                    .iter()
                    .zip(&few_texts)
                    .map(|(c, t)| (t.as_str(), &c.label)),
            )?;
            eval_texts
                .iter()
                .map(|t| Prediction::EntitySpans {
                    spans: rules.apply(t),
                })
                .collect()
        }
        OutputKind::PairedClassLabels => {
            let sides = ["left", "right"].map(|side| {
                let docs: Vec<String> = few_texts.iter().map(|t| side_text(t, side)).collect();
                TfIdfIndex::fit(&docs, &[])
            });
            eval_texts
                .iter()
                .map(|t| {
                    let l = sides[0].nearest(&side_text(t, "left"));
                    let r = sides[1].nearest(&side_text(t, "right"));
                    match (labels[l], labels[r]) {
                        (
                            ReferenceLabel::PairedLabels { left, .. },
                            ReferenceLabel::PairedLabels { right, .. },
                        ) => Ok(Prediction::PairedLabels {
                            left: *left,
                            right: *right,
                        }),
                        (other, _) => Err(BaselineError::UnexpectedLabel(other.variant_name())),
                    }
                })
                .collect::<Result<_, _>>()?
        }
        _ => {
            let index = TfIdfIndex::fit(&few_texts, &eval_texts);
            eval_texts
                .iter()
                .map(|t| predict_from_neighbors(task, &index.ranked(t), &labels))
                .collect::<Result<_, _>>()?
        }
    };
    Ok(batch
        .cases
        .iter()
        .zip(predictions)
        .map(|(c, prediction)| CasePrediction {
            case_id: c.case_id.clone(),
            prediction,
        })
        .collect())
}

/// The nearest report's label, or for probability outputs the
/// similarity-weighted mean over the nearest few.
fn predict_from_neighbors(
    task: &TaskDefinition,
    ranked: &[(usize, f64)],
    labels: &[&ReferenceLabel],
) -> Result<Prediction, BaselineError> {
    let top = &ranked[..PROBABILITY_NEIGHBORS.min(ranked.len())];
    let weights: Vec<f64> = top.iter().map(|(_, s)| s.max(1e-9)).collect();
    let total: f64 = weights.iter().sum();
    let nearest = labels[ranked[0].0];
    match (task.output, nearest) {
        (OutputKind::ClassLabel, ReferenceLabel::ClassLabel { label }) => {
            Ok(Prediction::ClassLabel { label: *label })
        }
        (OutputKind::ContinuousValue, ReferenceLabel::Continuous { value }) => {
            Ok(Prediction::Continuous { value: *value })
        }
        (OutputKind::NamedContinuousValues, ReferenceLabel::MultiLabel { values }) => {
            Ok(Prediction::MultiLabel {
                values: values.clone(),
            })
        }
        (OutputKind::Probability, _) => {
            let mut p = 0.0;
            for ((i, _), w) in top.iter().zip(&weights) {
                p += w * binary(labels[*i])?;
            }
            Ok(Prediction::Probability { value: p / total })
        }
        (OutputKind::MultiLabelProbabilities, _) => {
            let mut sums: BTreeMap<String, f64> = BTreeMap::new();
            for ((i, _), w) in top.iter().zip(&weights) {
                match labels[*i] {
                    ReferenceLabel::MultiLabel { values } => {
                        for (k, v) in values {
                            *sums.entry(k.clone()).or_insert(0.0) += w * v;
                        }
                    }
                    other => return Err(BaselineError::UnexpectedLabel(other.variant_name())),
                }
            }
            Ok(Prediction::MultiLabel {
                values: sums.into_iter().map(|(k, s)| (k, s / total)).collect(),
            })
        }
        (
            OutputKind::ClassLabel
            | OutputKind::ContinuousValue
            | OutputKind::NamedContinuousValues,
            other,
        ) => Err(BaselineError::UnexpectedLabel(other.variant_name())),
        (output, _) => Err(BaselineError::Unsupported(output.as_str())),
    }
}
