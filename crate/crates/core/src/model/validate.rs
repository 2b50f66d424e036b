use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::case::ArchiveItem;
use super::prediction::{Prediction, ScoredPoint};
use super::task::{LabelSpace, OutputKind, TaskDefinition};

/// Outcome of checking one prediction against its task's output contract.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, msg: impl Into<String>) {
        self.violations.push(msg.into());
    }
}

/// Checks that `prediction` has the variant, range and geometry the task
/// expects for `case`. A clean report guarantees the task metric can be
/// computed from it.
pub fn validate_prediction(
    task: &TaskDefinition,
    prediction: &Prediction,
    case: &ArchiveItem,
) -> ValidationReport {
    let mut report = ValidationReport::default();
    if prediction.reals().iter().any(|v| !v.is_finite()) {
        report.push("non-finite value in prediction");
    }
    match (task.output, prediction) {
        (OutputKind::ClassLabel, Prediction::ClassLabel { label }) => {
            if let LabelSpace::Classes { count, .. } = &task.label_space {
                check_label(&mut report, *label, *count);
            }
        }
        (OutputKind::Probability, Prediction::Probability { value }) => {
            check_unit(&mut report, "probability", *value);
        }
        (OutputKind::TimeToEvent, Prediction::Continuous { .. }) => {}
        (OutputKind::PointSet, Prediction::PointSet { points })
        | (OutputKind::PointSetWithConfidence, Prediction::PointSet { points }) => {
            check_points(&mut report, task, points);
        }
        (
            OutputKind::PointSetWithCaseProbability,
            Prediction::PointSetWithCaseProbability {
                points,
                case_probability,
            },
        ) => {
            check_points(&mut report, task, points);
            check_unit(&mut report, "case probability", *case_probability);
        }
        (OutputKind::SegmentationMask, Prediction::Mask { mask }) => {
            match case.payload.vision() {
                Some(vision) if mask.shape() == vision.image.shape() => {}
                _ => report.push("mask/grid shape mismatch"),
            }
            let allowed: Option<(i32, i32)> = match &task.label_space {
                LabelSpace::MaskClasses { foreground, .. } => {
                    Some((0, foreground.iter().copied().max().unwrap_or(0)))
                }
                LabelSpace::Instances { max_label, .. } => Some((0, *max_label)),
                _ => None,
            };
            if let Some((lo, hi)) = allowed {
                if let Some(bad) = mask.data().iter().find(|&&v| v < lo || v > hi) {
                    report.push(format!("mask label {bad} out of range {lo}..{hi}"));
                }
            }
        }
        (OutputKind::PairedClassLabels, Prediction::PairedLabels { left, right }) => {
            if let LabelSpace::PairedClasses { count, .. } = &task.label_space {
                check_label(&mut report, *left, *count);
                check_label(&mut report, *right, *count);
            }
        }
        (OutputKind::MultiLabelProbabilities, Prediction::MultiLabel { values }) => {
            if let LabelSpace::MultiLabel { labels } = &task.label_space {
                check_keys(&mut report, values.keys(), labels.iter());
            }
            for (name, v) in values {
                check_unit(&mut report, name, *v);
            }
        }
        (OutputKind::ContinuousValue, Prediction::Continuous { .. }) => {}
        (OutputKind::NamedContinuousValues, Prediction::MultiLabel { values }) => {
            if let LabelSpace::Scalars { variables } = &task.label_space {
                check_keys(
                    &mut report,
                    values.keys(),
                    variables.iter().map(|v| &v.name),
                );
            }
        }
        (OutputKind::EntitySpans, Prediction::EntitySpans { spans }) => {
            let len = case.text_len().unwrap_or(0);
            let tags: Option<BTreeSet<&str>> = match &task.label_space {
                LabelSpace::Entities { tags } => Some(tags.iter().map(String::as_str).collect()),
                _ => None,
            };
            for span in spans {
                if span.start >= span.end || span.end > len {
                    report.push(format!(
                        "span {}..{} out of text bounds 0..{len}",
                        span.start, span.end
                    ));
                }
                if let Some(tags) = &tags {
                    if !tags.contains(span.tag.as_str()) {
                        report.push(format!("unknown entity tag {}", span.tag));
                    }
                }
            }
        }
        (OutputKind::CaptionText, Prediction::Caption { text }) => {
            if text.trim().is_empty() {
                report.push("empty caption");
            }
        }
        (expected, got) => report.push(format!(
            "wrong prediction variant {} for output {}",
            got.variant_name(),
            expected.as_str()
        )),
    }
    report
}

fn check_label(report: &mut ValidationReport, label: i64, count: u32) {
    if label < 0 || label >= count as i64 {
        report.push(format!("label out of range 0..{}", count as i64 - 1));
    }
}

fn check_unit(report: &mut ValidationReport, what: &str, v: f64) {
    if !(0.0..=1.0).contains(&v) {
        report.push(format!("{what} {v} outside [0, 1]"));
    }
}

fn check_points(report: &mut ValidationReport, task: &TaskDefinition, points: &[ScoredPoint]) {
    let rank = match &task.label_space {
        LabelSpace::Points { rank, .. } => Some(*rank),
        _ => None,
    };
    for p in points {
        if let Some(rank) = rank {
            if p.coord.len() != rank {
                report.push(format!(
                    "point has {} coordinates, expected {rank}",
                    p.coord.len()
                ));
            }
        }
        check_unit(report, "confidence", p.confidence);
    }
}

fn check_keys<'a>(
    report: &mut ValidationReport,
    got: impl Iterator<Item = &'a String>,
    expected: impl Iterator<Item = &'a String>,
) {
    let got: BTreeSet<&str> = got.map(String::as_str).collect();
    let expected: BTreeSet<&str> = expected.map(String::as_str).collect();
    for missing in expected.difference(&got) {
        report.push(format!("missing value for {missing}"));
    }
    for extra in got.difference(&expected) {
        report.push(format!("unexpected key {extra}"));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        load_task_registry, CasePayload, EntitySpan, Grid, ReferenceLabel, ReportPayload, Split,
        VisionPayload,
    };

    fn vision_case(task: u8, shape: Vec<usize>) -> ArchiveItem {
        let spacing = vec![1.0; shape.len()];
        let image = Grid::filled(shape.clone(), spacing.clone(), 0.0).unwrap();
        let mask = Grid::filled(shape, spacing, 0).unwrap();
        ArchiveItem::new(
            "c0",
            crate::model::TaskId(task),
            Split::Evaluation,
            CasePayload::VisionGrid(VisionPayload::new(image, None).unwrap()),
            ReferenceLabel::Mask { mask },
        )
        .unwrap()
    }

    #[test]
    fn class_label_range() {
        let registry = load_task_registry();
        let t1 = registry.lookup(1).unwrap();
        let case = vision_case(1, vec![4, 4]);
        assert!(validate_prediction(t1, &Prediction::ClassLabel { label: 3 }, &case).is_ok());
        let report = validate_prediction(t1, &Prediction::ClassLabel { label: 7 }, &case);
        assert_eq!(
            report.violations,
            vec!["label out of range 0..5".to_string()]
        );
    }

    #[test]
    fn mask_shape_mismatch() {
        let registry = load_task_registry();
        let t9 = registry.lookup(9).unwrap();
        let case = vision_case(9, vec![8, 8]);
        let mask = Grid::filled(vec![4, 8], vec![1.0, 1.0], 1).unwrap();
        let report = validate_prediction(t9, &Prediction::Mask { mask }, &case);
        assert_eq!(
            report.violations,
            vec!["mask/grid shape mismatch".to_string()]
        );
    }

    #[test]
    fn wrong_variant_and_nan() {
        let registry = load_task_registry();
        let t2 = registry.lookup(2).unwrap();
        let case = vision_case(2, vec![4, 4, 4]);
        assert!(!validate_prediction(t2, &Prediction::ClassLabel { label: 1 }, &case).is_ok());
        let nan = Prediction::Probability { value: f64::NAN };
        assert!(!validate_prediction(t2, &nan, &case).is_ok());
    }

    #[test]
    fn span_bounds() {
        let registry = load_task_registry();
        let t19 = registry.lookup(19).unwrap();
        let case = ArchiveItem::new(
            "r0",
            crate::model::TaskId(19),
            Split::Evaluation,
            CasePayload::ReportText(ReportPayload {
                text: "seen on 2020-01-01".into(),
                preamble: None,
            }),
            ReferenceLabel::EntitySpans { spans: vec![] },
        )
        .unwrap();
        let ok = Prediction::EntitySpans {
            spans: vec![EntitySpan::new(8, 18, "DATE")],
        };
        assert!(validate_prediction(t19, &ok, &case).is_ok());
        let bad = Prediction::EntitySpans {
            spans: vec![EntitySpan::new(8, 19, "DATE")],
        };
        assert!(!validate_prediction(t19, &bad, &case).is_ok());
    }
}
