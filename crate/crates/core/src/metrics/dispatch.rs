use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::caption::{caption_score, HashedNgramEmbedder, TokenEmbedder};
use super::detection::{
    detection_auroc_ap, detection_f1, froc_cpm, match_points, FrocConfig, MatchCounts,
};
use super::kappa::{cohen_kappa, kappa_pooled_pairs, KappaWeighting};
use super::ranking::{auroc, macro_auroc};
use super::redaction::{RedactionCounts, RedactionWeights};
use super::regression::{rsmapes, rsmapes_multi, RsmapesConfig};
use super::segmentation::{
    dice, instance_averaged_dice, uls_case_score, CompositeWeights, DiceMode,
};
use super::survival::concordance_index_censored;
use super::MetricError;
use crate::model::{
    ArchiveItem, HitRule, LabelSpace, Lesion, MetricSpec, Prediction, ReferenceLabel, ScoredPoint,
    TaskDefinition,
};

/// Raw task score plus named sub-scores for the audit trail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricResult {
    pub raw: f64,
    pub details: BTreeMap<String, f64>,
}

impl MetricResult {
    fn plain(raw: f64) -> Self {
        MetricResult {
            raw,
            details: BTreeMap::new(),
        }
    }

    fn with(mut self, key: &str, value: f64) -> Self {
        self.details.insert(key.to_string(), value);
        self
    }
}

fn incompatible(item: &ArchiveItem, pred: &Prediction) -> MetricError {
    MetricError::Incompatible {
        case: item.case_id.clone(),
        reason: format!(
            "prediction {} against reference {}",
            pred.variant_name(),
            item.reference.variant_name()
        ),
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Result<f64, MetricError> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        Err(MetricError::Empty)
    } else {
        Ok(sum / n as f64)
    }
}

fn class_count(task: &TaskDefinition) -> Result<usize, MetricError> {
    match &task.label_space {
        LabelSpace::Classes { count, .. } | LabelSpace::PairedClasses { count, .. } => {
            Ok(*count as usize)
        }
        other => Err(MetricError::InvalidValue(format!(
            "{} has label space {other:?}",
            task.task_id
        ))),
    }
}

fn hit_rule(task: &TaskDefinition) -> Result<HitRule, MetricError> {
    match &task.label_space {
        LabelSpace::Points { hit_rule, .. } => Ok(*hit_rule),
        other => Err(MetricError::InvalidValue(format!(
            "{} has label space {other:?}",
            task.task_id
        ))),
    }
}

/// Computes a task's metric over its evaluation items using the hashed
/// fallback embedder for caption scoring.
pub fn evaluate_task(
    task: &TaskDefinition,
    items: &[ArchiveItem],
    preds: &[Prediction],
) -> Result<MetricResult, MetricError> {
    evaluate_task_with(task, items, preds, &HashedNgramEmbedder::default())
}

/// Computes a task's metric. `items[i]` is the case `preds[i]` was made for.
pub fn evaluate_task_with(
    task: &TaskDefinition,
    items: &[ArchiveItem],
    preds: &[Prediction],
    embedder: &dyn TokenEmbedder,
) -> Result<MetricResult, MetricError> {
    super::check_lengths(items.len(), preds.len())?;
    let pairs = || items.iter().zip(preds);

    match task.metric_spec {
        MetricSpec::QuadraticWeightedKappa | MetricSpec::UnweightedKappa => {
            let mut p = Vec::new();
            let mut r = Vec::new();
            for (item, pred) in pairs() {
                match (pred, &item.reference) {
                    (Prediction::ClassLabel { label }, ReferenceLabel::ClassLabel { label: l }) => {
                        p.push(*label);
                        r.push(*l);
                    }
                    _ => return Err(incompatible(item, pred)),
                }
            }
            let weighting = if task.metric_spec == MetricSpec::QuadraticWeightedKappa {
                KappaWeighting::Quadratic
            } else {
                KappaWeighting::None
            };
            Ok(MetricResult::plain(cohen_kappa(
                &p,
                &r,
                class_count(task)?,
                weighting,
            )?))
        }
        MetricSpec::PooledPairKappa => {
            let mut p = Vec::new();
            let mut r = Vec::new();
            for (item, pred) in pairs() {
                match (pred, &item.reference) {
                    (
                        Prediction::PairedLabels { left, right },
                        ReferenceLabel::PairedLabels {
                            left: rl,
                            right: rr,
                        },
                    ) => {
                        p.push((*left, *right));
                        r.push((*rl, *rr));
                    }
                    _ => return Err(incompatible(item, pred)),
                }
            }
            Ok(MetricResult::plain(kappa_pooled_pairs(
                &p,
                &r,
                class_count(task)?,
            )?))
        }
        MetricSpec::Auroc => {
            let mut scores = Vec::new();
            let mut labels = Vec::new();
            for (item, pred) in pairs() {
                match (pred, &item.reference) {
                    (Prediction::Probability { value }, ReferenceLabel::ClassLabel { label }) => {
                        scores.push(*value);
                        labels.push(*label == 1);
                    }
                    _ => return Err(incompatible(item, pred)),
                }
            }
            Ok(MetricResult::plain(auroc(&scores, &labels)?))
        }
        MetricSpec::CensoredConcordanceIndex => {
            let mut risks = Vec::new();
            let mut events = Vec::new();
            let mut times = Vec::new();
            for (item, pred) in pairs() {
                match (pred, &item.reference) {
                    // predictions are times to event; a shorter time is a higher risk
                    (
                        Prediction::Continuous { value },
                        ReferenceLabel::Survival { event, time_years },
                    ) => {
                        risks.push(-value);
                        events.push(*event);
                        times.push(*time_years);
                    }
                    _ => return Err(incompatible(item, pred)),
                }
            }
            Ok(MetricResult::plain(concordance_index_censored(
                &risks, &events, &times,
            )?))
        }
        MetricSpec::DetectionF1 => {
            let radius = match hit_rule(task)? {
                HitRule::FixedRadius { radius } => radius,
                HitRule::HalfEquivalentDiameter => {
                    return Err(MetricError::InvalidValue(
                        "F1 tasks use a fixed radius".into(),
                    ))
                }
            };
            let mut counts = MatchCounts::default();
            for (item, pred) in pairs() {
                match (pred, &item.reference) {
                    (Prediction::PointSet { points }, ReferenceLabel::Points { coords }) => {
                        counts = counts + match_points(points, coords, radius)?;
                    }
                    _ => return Err(incompatible(item, pred)),
                }
            }
            Ok(MetricResult::plain(detection_f1(counts))
                .with("tp", counts.tp as f64)
                .with("fp", counts.fp as f64)
                .with("fn", counts.fn_ as f64))
        }
        MetricSpec::AurocApAverage => {
            let mut case_probs = Vec::new();
            let mut cands: Vec<Vec<ScoredPoint>> = Vec::new();
            let mut refs: Vec<Vec<Lesion>> = Vec::new();
            for (item, pred) in pairs() {
                match (pred, &item.reference) {
                    (
                        Prediction::PointSetWithCaseProbability {
                            points,
                            case_probability,
                        },
                        ReferenceLabel::LesionRefs { lesions },
                    ) => {
                        case_probs.push((*case_probability, !lesions.is_empty()));
                        cands.push(points.clone());
                        refs.push(lesions.clone());
                    }
                    _ => return Err(incompatible(item, pred)),
                }
            }
            let value = detection_auroc_ap(&case_probs, &cands, &refs, hit_rule(task)?)?;
            let scores: Vec<f64> = case_probs.iter().map(|c| c.0).collect();
            let labels: Vec<bool> = case_probs.iter().map(|c| c.1).collect();
            let case_auc = auroc(&scores, &labels)?;
            Ok(MetricResult::plain(value)
                .with("auroc", case_auc)
                .with("ap", 2.0 * value - case_auc))
        }
        MetricSpec::FrocCpm => {
            let mut cands = Vec::new();
            let mut refs = Vec::new();
            for (item, pred) in pairs() {
                match (pred, &item.reference) {
                    (Prediction::PointSet { points }, ReferenceLabel::LesionRefs { lesions }) => {
                        cands.push(points.clone());
                        refs.push(lesions.clone());
                    }
                    _ => return Err(incompatible(item, pred)),
                }
            }
            let config = FrocConfig {
                hit_rule: hit_rule(task)?,
                ..FrocConfig::default()
            };
            let result = froc_cpm(&cands, &refs, &config)?;
            let mut out = MetricResult::plain(result.cpm);
            for (rate, s) in config.fp_rates.iter().zip(&result.sensitivities) {
                out = out.with(&format!("sensitivity@{rate}"), *s);
            }
            Ok(out)
        }
        MetricSpec::Dice => {
            let classes = match &task.label_space {
                LabelSpace::MaskClasses { foreground, .. } => foreground.clone(),
                _ => {
                    return Err(MetricError::InvalidValue(
                        "dice task without classes".into(),
                    ))
                }
            };
            let mode = DiceMode::MulticlassMean { classes };
            let mut scores = Vec::new();
            for (item, pred) in pairs() {
                match (pred, &item.reference) {
                    (Prediction::Mask { mask }, ReferenceLabel::Mask { mask: r }) => {
                        scores.push(dice(mask, r, &mode)?)
                    }
                    _ => return Err(incompatible(item, pred)),
                }
            }
            Ok(MetricResult::plain(mean(scores.into_iter())?))
        }
        MetricSpec::UlsComposite => {
            let weights = CompositeWeights::default();
            let mut parts = Vec::new();
            for (item, pred) in pairs() {
                match (pred, &item.reference) {
                    (Prediction::Mask { mask }, ReferenceLabel::Mask { mask: r }) => {
                        parts.push(uls_case_score(mask, r, &weights)?)
                    }
                    _ => return Err(incompatible(item, pred)),
                }
            }
            Ok(MetricResult::plain(mean(parts.iter().map(|p| p.cs))?)
                .with("sp", mean(parts.iter().map(|p| p.sp))?)
                .with("lae", mean(parts.iter().map(|p| p.lae))?)
                .with("sae", mean(parts.iter().map(|p| p.sae))?))
        }
        MetricSpec::InstanceDice => {
            let mut scores = Vec::new();
            for (item, pred) in pairs() {
                match (pred, &item.reference) {
                    (Prediction::Mask { mask }, ReferenceLabel::Mask { mask: r }) => {
                        scores.push(instance_averaged_dice(mask, r)?)
                    }
                    _ => return Err(incompatible(item, pred)),
                }
            }
            Ok(MetricResult::plain(mean(scores.into_iter())?))
        }
        MetricSpec::MacroAuroc => {
            let labels = match &task.label_space {
                LabelSpace::MultiLabel { labels } => labels.clone(),
                _ => {
                    return Err(MetricError::InvalidValue(
                        "macro AUROC without labels".into(),
                    ))
                }
            };
            let mut per_label: BTreeMap<String, (Vec<f64>, Vec<bool>)> = labels
                .iter()
                .map(|l| (l.clone(), (Vec::new(), Vec::new())))
                .collect();
            for (item, pred) in pairs() {
                match (pred, &item.reference) {
                    (
                        Prediction::MultiLabel { values },
                        ReferenceLabel::MultiLabel { values: r },
                    ) => {
                        for label in &labels {
                            let (Some(p), Some(t)) = (values.get(label), r.get(label)) else {
                                return Err(incompatible(item, pred));
                            };
                            let entry = per_label.get_mut(label).expect("label initialized");
                            entry.0.push(*p);
                            entry.1.push(*t >= 0.5);
                        }
                    }
                    _ => return Err(incompatible(item, pred)),
                }
            }
            let mut out = MetricResult::plain(macro_auroc(&per_label)?);
            for (label, (s, l)) in &per_label {
                out = out.with(label, auroc(s, l)?);
            }
            Ok(out)
        }
        MetricSpec::Rsmapes => {
            let epsilon = match &task.label_space {
                LabelSpace::Scalar { epsilon } => *epsilon,
                _ => {
                    return Err(MetricError::InvalidValue(
                        "RSMAPES task without epsilon".into(),
                    ))
                }
            };
            let mut p = Vec::new();
            let mut r = Vec::new();
            for (item, pred) in pairs() {
                match (pred, &item.reference) {
                    (Prediction::Continuous { value }, ReferenceLabel::Continuous { value: v }) => {
                        p.push(*value);
                        r.push(*v);
                    }
                    _ => return Err(incompatible(item, pred)),
                }
            }
            Ok(MetricResult::plain(rsmapes(
                &p,
                &r,
                RsmapesConfig::new(epsilon)?,
            )?))
        }
        MetricSpec::RsmapesMulti => {
            let variables = match &task.label_space {
                LabelSpace::Scalars { variables } => variables.clone(),
                _ => {
                    return Err(MetricError::InvalidValue(
                        "RSMAPES task without variables".into(),
                    ))
                }
            };
            let mut per_var: Vec<(Vec<f64>, Vec<f64>, f64)> = variables
                .iter()
                .map(|v| (Vec::new(), Vec::new(), v.epsilon))
                .collect();
            for (item, pred) in pairs() {
                match (pred, &item.reference) {
                    (
                        Prediction::MultiLabel { values },
                        ReferenceLabel::MultiLabel { values: r },
                    ) => {
                        for (k, var) in variables.iter().enumerate() {
                            let (Some(p), Some(t)) = (values.get(&var.name), r.get(&var.name))
                            else {
                                return Err(incompatible(item, pred));
                            };
                            per_var[k].0.push(*p);
                            per_var[k].1.push(*t);
                        }
                    }
                    _ => return Err(incompatible(item, pred)),
                }
            }
            let mut out = MetricResult::plain(rsmapes_multi(&per_var)?);
            for (var, (p, r, eps)) in variables.iter().zip(&per_var) {
                out = out.with(&var.name, rsmapes(p, r, RsmapesConfig::new(*eps)?)?);
            }
            Ok(out)
        }
        MetricSpec::BlendedRedactionF1 => {
            let mut counts = RedactionCounts::default();
            for (item, pred) in pairs() {
                match (pred, &item.reference) {
                    (
                        Prediction::EntitySpans { spans },
                        ReferenceLabel::EntitySpans { spans: r },
                    ) => {
                        let len = item.text_len().ok_or_else(|| incompatible(item, pred))?;
                        counts += RedactionCounts::from_spans(spans, r, len)?;
                    }
                    _ => return Err(incompatible(item, pred)),
                }
            }
            let score = counts.score(RedactionWeights::default());
            Ok(MetricResult::plain(score.blended)
                .with("strict", score.strict)
                .with("binary", score.binary))
        }
        MetricSpec::CaptionComposite => {
            let mut corpus = Vec::new();
            for item in items {
                match &item.reference {
                    ReferenceLabel::Caption { text } => corpus.push(text.clone()),
                    _ => {
                        return Err(MetricError::Incompatible {
                            case: item.case_id.clone(),
                            reason: "reference is not a caption".into(),
                        })
                    }
                }
            }
            let mut composite = Vec::new();
            let mut parts: BTreeMap<String, Vec<f64>> = BTreeMap::new();
            for ((item, pred), reference) in pairs().zip(&corpus) {
                let Prediction::Caption { text } = pred else {
                    return Err(incompatible(item, pred));
                };
                let s = caption_score(text, std::slice::from_ref(reference), &corpus, embedder)?;
                composite.push(s.composite);
                for (k, v) in s.parts {
                    parts.entry(k).or_default().push(v);
                }
            }
            let mut out = MetricResult::plain(mean(composite.into_iter())?);
            for (k, v) in parts {
                out = out.with(&k, mean(v.into_iter())?);
            }
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{load_task_registry, CasePayload, ReportPayload, Split, TaskId};

    fn report_item(task: u8, id: &str, reference: ReferenceLabel) -> ArchiveItem {
        ArchiveItem::new(
            id,
            TaskId(task),
            Split::Evaluation,
            CasePayload::ReportText(ReportPayload {
                text: "report text for the case".into(),
                preamble: None,
            }),
            reference,
        )
        .unwrap()
    }

    #[test]
    fn kappa_task_dispatch() {
        let registry = load_task_registry();
        let t12 = registry.lookup(12).unwrap();
        let items: Vec<_> = (0..4)
            .map(|i| {
                report_item(
                    12,
                    &format!("c{i}"),
                    ReferenceLabel::ClassLabel { label: i % 3 },
                )
            })
            .collect();
        let preds: Vec<_> = (0..4)
            .map(|i| Prediction::ClassLabel { label: i % 3 })
            .collect();
        assert_eq!(evaluate_task(t12, &items, &preds).unwrap().raw, 1.0);
    }

    #[test]
    fn variant_mismatch_is_reported() {
        let registry = load_task_registry();
        let t13 = registry.lookup(13).unwrap();
        let items = vec![report_item(
            13,
            "c0",
            ReferenceLabel::ClassLabel { label: 1 },
        )];
        let preds = vec![Prediction::ClassLabel { label: 1 }];
        assert!(matches!(
            evaluate_task(t13, &items, &preds),
            Err(MetricError::Incompatible { .. })
        ));
    }

    #[test]
    fn caption_dispatch_identity() {
        let registry = load_task_registry();
        let t20 = registry.lookup(20).unwrap();
        let items = vec![
            report_item(
                20,
                "a",
                ReferenceLabel::Caption {
                    text: "tubular adenoma".into(),
                },
            ),
            report_item(
                20,
                "b",
                ReferenceLabel::Caption {
                    text: "hyperplastic polyp".into(),
                },
            ),
        ];
        let preds = vec![
            Prediction::Caption {
                text: "tubular adenoma".into(),
            },
            Prediction::Caption {
                text: "hyperplastic polyp".into(),
            },
        ];
        assert_eq!(evaluate_task(t20, &items, &preds).unwrap().raw, 1.0);
    }
}
