use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::grid::{ImageGrid, MaskGrid};
use super::prediction::ReferenceLabel;
use super::task::TaskId;
use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    FewShot,
    Evaluation,
}

/// The image part of a vision case: intensities plus an optional companion
/// tissue mask of identical dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisionPayload {
    pub image: ImageGrid,
    pub tissue_mask: Option<MaskGrid>,
}

impl VisionPayload {
    pub fn new(image: ImageGrid, tissue_mask: Option<MaskGrid>) -> Result<Self, ModelError> {
        if let Some(mask) = &tissue_mask {
            if !mask.same_geometry(&image) {
                return Err(ModelError::Grid(format!(
                    "tissue mask shape {:?} differs from image shape {:?}",
                    mask.shape(),
                    image.shape()
                )));
            }
        }
        Ok(VisionPayload { image, tissue_mask })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportPayload {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preamble: Option<BTreeMap<String, String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CasePayload {
    VisionGrid(VisionPayload),
    ReportText(ReportPayload),
    VisionWithTaskDescription {
        vision: VisionPayload,
        description: String,
    },
}

impl CasePayload {
    pub fn vision(&self) -> Option<&VisionPayload> {
        match self {
            CasePayload::VisionGrid(v) => Some(v),
            CasePayload::VisionWithTaskDescription { vision, .. } => Some(vision),
            CasePayload::ReportText(_) => None,
        }
    }

    pub fn report(&self) -> Option<&ReportPayload> {
        match self {
            CasePayload::ReportText(r) => Some(r),
            _ => None,
        }
    }

    pub fn check(&self) -> Result<(), ModelError> {
        match self {
            CasePayload::VisionGrid(v) => {
                VisionPayload::new(v.image.clone(), v.tissue_mask.clone()).map(|_| ())
            }
            CasePayload::VisionWithTaskDescription {
                vision,
                description,
            } => {
                if description.trim().is_empty() {
                    return Err(ModelError::InvalidPayload("empty task description".into()));
                }
                if let Some(mask) = &vision.tissue_mask {
                    if !mask.same_geometry(&vision.image) {
                        return Err(ModelError::Grid("tissue mask shape mismatch".into()));
                    }
                }
                Ok(())
            }
            CasePayload::ReportText(r) => {
                if r.text.trim().is_empty() {
                    Err(ModelError::InvalidPayload("empty report text".into()))
                } else {
                    Ok(())
                }
            }
        }
    }
}

/// One benchmark case, including its sequestered reference label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveItem {
    pub case_id: String,
    pub task_id: TaskId,
    pub split: Split,
    pub payload: CasePayload,
    pub reference: ReferenceLabel,
}

impl ArchiveItem {
    pub fn new(
        case_id: impl Into<String>,
        task_id: TaskId,
        split: Split,
        payload: CasePayload,
        reference: ReferenceLabel,
    ) -> Result<Self, ModelError> {
        let case_id = case_id.into();
        if case_id.is_empty() {
            return Err(ModelError::InvalidPayload("empty case id".into()));
        }
        payload.check()?;
        reference.check()?;
        Ok(ArchiveItem {
            case_id,
            task_id,
            split,
            payload,
            reference,
        })
    }

    /// Number of characters in the report text, for language cases.
    pub fn text_len(&self) -> Option<usize> {
        self.payload.report().map(|r| r.text.chars().count())
    }
}

/// Checks that case ids are unique within one task's item list.
pub fn check_unique_case_ids<'a>(ids: impl IntoIterator<Item = &'a str>) -> Result<(), ModelError> {
    let mut seen = std::collections::BTreeSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(ModelError::DuplicateCase(id.to_string()));
        }
    }
    Ok(())
}
