use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::grid::MaskGrid;
use super::ModelError;

/// A predicted point in physical coordinates with its confidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPoint {
    pub coord: Vec<f64>,
    pub confidence: f64,
}

impl ScoredPoint {
    pub fn new(coord: Vec<f64>, confidence: f64) -> Self {
        ScoredPoint { coord, confidence }
    }
}

/// A tagged half-open character range `[start, end)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntitySpan {
    pub start: usize,
    pub end: usize,
    pub tag: String,
}

impl EntitySpan {
    pub fn new(start: usize, end: usize, tag: impl Into<String>) -> Self {
        EntitySpan {
            start,
            end,
            tag: tag.into(),
        }
    }
}

/// A reference lesion: center in physical coordinates and its equivalent
/// diameter in millimeters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lesion {
    pub coord: Vec<f64>,
    pub equivalent_diameter_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Prediction {
    ClassLabel {
        label: i64,
    },
    Probability {
        value: f64,
    },
    ProbabilityVector {
        values: Vec<f64>,
    },
    Continuous {
        value: f64,
    },
    PointSet {
        points: Vec<ScoredPoint>,
    },
    PointSetWithCaseProbability {
        points: Vec<ScoredPoint>,
        case_probability: f64,
    },
    Mask {
        mask: MaskGrid,
    },
    EntitySpans {
        spans: Vec<EntitySpan>,
    },
    Caption {
        text: String,
    },
    MultiLabel {
        values: BTreeMap<String, f64>,
    },
    PairedLabels {
        left: i64,
        right: i64,
    },
}

impl Prediction {
    pub fn variant_name(&self) -> &'static str {
        match self {
            Prediction::ClassLabel { .. } => "class_label",
            Prediction::Probability { .. } => "probability",
            Prediction::ProbabilityVector { .. } => "probability_vector",
            Prediction::Continuous { .. } => "continuous",
            Prediction::PointSet { .. } => "point_set",
            Prediction::PointSetWithCaseProbability { .. } => "point_set_with_case_probability",
            Prediction::Mask { .. } => "mask",
            Prediction::EntitySpans { .. } => "entity_spans",
            Prediction::Caption { .. } => "caption",
            Prediction::MultiLabel { .. } => "multi_label",
            Prediction::PairedLabels { .. } => "paired_labels",
        }
    }

    /// Every real number carried by the prediction.
    pub fn reals(&self) -> Vec<f64> {
        match self {
            Prediction::Probability { value } | Prediction::Continuous { value } => vec![*value],
            Prediction::ProbabilityVector { values } => values.clone(),
            Prediction::PointSet { points } => points
                .iter()
                .flat_map(|p| p.coord.iter().copied().chain([p.confidence]))
                .collect(),
            Prediction::PointSetWithCaseProbability {
                points,
                case_probability,
            } => points
                .iter()
                .flat_map(|p| p.coord.iter().copied().chain([p.confidence]))
                .chain([*case_probability])
                .collect(),
            Prediction::Mask { mask } => mask.spacing().to_vec(),
            Prediction::MultiLabel { values } => values.values().copied().collect(),
            Prediction::ClassLabel { .. }
            | Prediction::EntitySpans { .. }
            | Prediction::Caption { .. }
            | Prediction::PairedLabels { .. } => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ReferenceLabel {
    ClassLabel { label: i64 },
    Continuous { value: f64 },
    Survival { event: bool, time_years: f64 },
    Points { coords: Vec<Vec<f64>> },
    LesionRefs { lesions: Vec<Lesion> },
    Mask { mask: MaskGrid },
    EntitySpans { spans: Vec<EntitySpan> },
    Caption { text: String },
    MultiLabel { values: BTreeMap<String, f64> },
    PairedLabels { left: i64, right: i64 },
}

impl ReferenceLabel {
    pub fn variant_name(&self) -> &'static str {
        match self {
            ReferenceLabel::ClassLabel { .. } => "class_label",
            ReferenceLabel::Continuous { .. } => "continuous",
            ReferenceLabel::Survival { .. } => "survival",
            ReferenceLabel::Points { .. } => "points",
            ReferenceLabel::LesionRefs { .. } => "lesion_refs",
            ReferenceLabel::Mask { .. } => "mask",
            ReferenceLabel::EntitySpans { .. } => "entity_spans",
            ReferenceLabel::Caption { .. } => "caption",
            ReferenceLabel::MultiLabel { .. } => "multi_label",
            ReferenceLabel::PairedLabels { .. } => "paired_labels",
        }
    }

    pub fn check(&self) -> Result<(), ModelError> {
        match self {
            ReferenceLabel::Survival { time_years, .. } => {
                if !(time_years.is_finite() && *time_years >= 0.0) {
                    return Err(ModelError::InvalidLabel(format!(
                        "survival time must be a nonnegative number, got {time_years}"
                    )));
                }
            }
            ReferenceLabel::LesionRefs { lesions } => {
                for lesion in lesions {
                    if !(lesion.equivalent_diameter_mm.is_finite()
                        && lesion.equivalent_diameter_mm > 0.0)
                    {
                        return Err(ModelError::InvalidLabel(
                            "equivalent diameter must be positive".into(),
                        ));
                    }
                    if lesion.coord.iter().any(|c| !c.is_finite()) {
                        return Err(ModelError::InvalidLabel(
                            "lesion coordinates must be finite".into(),
                        ));
                    }
                }
            }
            ReferenceLabel::Continuous { value } if !value.is_finite() => {
                return Err(ModelError::InvalidLabel(
                    "non-finite reference value".into(),
                ));
            }
            _ => {}
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tagged_json_shape() {
        let p = Prediction::ClassLabel { label: 3 };
        assert_eq!(
            serde_json::to_value(&p).unwrap(),
            serde_json::json!({"type": "class_label", "label": 3})
        );
        let r: ReferenceLabel =
            serde_json::from_str(r#"{"type":"survival","event":true,"time_years":2.5}"#).unwrap();
        assert_eq!(
            r,
            ReferenceLabel::Survival {
                event: true,
                time_years: 2.5
            }
        );
    }

    #[test]
    fn reference_checks() {
        assert!(ReferenceLabel::Survival {
            event: false,
            time_years: -1.0
        }
        .check()
        .is_err());
        assert!(ReferenceLabel::LesionRefs {
            lesions: vec![Lesion {
                coord: vec![0.0, 0.0, 0.0],
                equivalent_diameter_mm: 0.0
            }]
        }
        .check()
        .is_err());
    }
}
