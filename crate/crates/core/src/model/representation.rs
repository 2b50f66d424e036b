use serde::{Deserialize, Serialize};

use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepresentationKind {
    CaseLevel,
    PatchLevel,
}

/// Feature vector of one spatial patch. `coord` is the corner with the
/// lowest index on every axis, in grid units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchFeature {
    pub coord: Vec<usize>,
    pub size: Vec<usize>,
    pub spacing: Vec<f64>,
    pub features: Vec<f64>,
}

impl PatchFeature {
    /// Physical position of the patch's central pixel (fractional for even
    /// sizes), using the index-times-spacing convention of the grids.
    pub fn center(&self) -> Vec<f64> {
        self.coord
            .iter()
            .zip(&self.size)
            .zip(&self.spacing)
            .map(|((&c, &s), &sp)| (c as f64 + (s as f64 - 1.0) / 2.0) * sp)
            .collect()
    }

    /// Largest physical extent of the patch along any axis.
    pub fn physical_extent(&self) -> f64 {
        self.size
            .iter()
            .zip(&self.spacing)
            .map(|(&s, &sp)| s as f64 * sp)
            .fold(0.0, f64::max)
    }

    /// Whether a physical point falls in one of the patch's pixels, each
    /// pixel covering half a spacing on either side of its position.
    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.coord.len()
            && point
                .iter()
                .zip(&self.coord)
                .zip(self.size.iter().zip(&self.spacing))
                .all(|((&p, &c), (&s, &sp))| {
                    let lo = (c as f64 - 0.5) * sp;
                    let hi = ((c + s) as f64 - 0.5) * sp;
                    p >= lo && p < hi
                })
    }
}

/// Frozen-encoder output for one case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Representation {
    pub case_id: String,
    pub kind: RepresentationKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub case_features: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patches: Option<Vec<PatchFeature>>,
    /// Dimensions of the case grid the patches tile; required for
    /// patch-level representations so dense outputs can be rasterized.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_shape: Option<Vec<usize>>,
}

impl Representation {
    pub fn case_level(case_id: impl Into<String>, features: Vec<f64>) -> Self {
        Representation {
            case_id: case_id.into(),
            kind: RepresentationKind::CaseLevel,
            case_features: Some(features),
            patches: None,
            grid_shape: None,
        }
    }

    pub fn patch_level(
        case_id: impl Into<String>,
        grid_shape: Vec<usize>,
        patches: Vec<PatchFeature>,
    ) -> Self {
        Representation {
            case_id: case_id.into(),
            kind: RepresentationKind::PatchLevel,
            case_features: None,
            patches: Some(patches),
            grid_shape: Some(grid_shape),
        }
    }

    /// Feature dimension, after checking the representation's own invariants.
    pub fn validate(&self) -> Result<usize, ModelError> {
        let bad =
            |msg: String| ModelError::InvalidRepresentation(format!("{}: {msg}", self.case_id));
        match self.kind {
            RepresentationKind::CaseLevel => {
                if self.patches.is_some() {
                    return Err(bad("case-level representation carries patches".into()));
                }
                let features = self
                    .case_features
                    .as_ref()
                    .ok_or_else(|| bad("case-level representation without features".into()))?;
                check_vector(features).map_err(bad)?;
                Ok(features.len())
            }
            RepresentationKind::PatchLevel => {
                if self.case_features.is_some() {
                    return Err(bad(
                        "patch-level representation carries case features".into()
                    ));
                }
                let patches = self
                    .patches
                    .as_ref()
                    .filter(|p| !p.is_empty())
                    .ok_or_else(|| {
                        bad("patch-level representation needs at least one patch".into())
                    })?;
                let shape = self
                    .grid_shape
                    .as_ref()
                    .ok_or_else(|| bad("patch-level representation without grid shape".into()))?;
                let dim = patches[0].features.len();
                for patch in patches {
                    let rank = shape.len();
                    if patch.coord.len() != rank
                        || patch.size.len() != rank
                        || patch.spacing.len() != rank
                    {
                        return Err(bad("patch geometry rank differs from grid rank".into()));
                    }
                    for axis in 0..rank {
                        if patch.size[axis] == 0
                            || patch.coord[axis] + patch.size[axis] > shape[axis]
                        {
                            return Err(bad(format!(
                                "patch at {:?} exceeds grid bounds",
                                patch.coord
                            )));
                        }
                        if !(patch.spacing[axis].is_finite() && patch.spacing[axis] > 0.0) {
                            return Err(bad("patch spacing must be positive".into()));
                        }
                    }
                    if patch.features.len() != dim {
                        return Err(bad("patch feature dimensions differ".into()));
                    }
                    check_vector(&patch.features).map_err(bad)?;
                }
                Ok(dim)
            }
        }
    }
}

fn check_vector(values: &[f64]) -> Result<(), String> {
    if values.is_empty() {
        return Err("feature vector is empty".into());
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err("feature vector has non-finite values".into());
    }
    Ok(())
}

/// Checks a set of representations shares one kind and one feature dimension.
pub fn validate_representation_set(
    reps: &[Representation],
) -> Result<Option<(RepresentationKind, usize)>, ModelError> {
    let mut common: Option<(RepresentationKind, usize)> = None;
    for rep in reps {
        let dim = rep.validate()?;
        match common {
            None => common = Some((rep.kind, dim)),
            Some((kind, d)) => {
                if kind != rep.kind {
                    return Err(ModelError::InvalidRepresentation(
                        "mixed representation kinds".into(),
                    ));
                }
                if d != dim {
                    return Err(ModelError::InvalidRepresentation(format!(
                        "feature dimension {dim} of {} differs from {d}",
                        rep.case_id
                    )));
                }
            }
        }
    }
    Ok(common)
}
