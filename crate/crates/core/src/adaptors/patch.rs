use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::standardize::Standardizer;
use super::{argmax_smallest, k_smallest, squared_distance, AdaptorError, Hyperparams};
use crate::model::{
    MaskGrid, OutputKind, PatchFeature, Prediction, ReferenceLabel, Representation, ScoredPoint,
    TaskDefinition,
};

/// Standardized store of labeled few-shot patches shared by both patch
/// strategies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PatchStore {
    standardizer: Standardizer,
    standardized: Vec<Vec<f64>>,
}

impl PatchStore {
    fn fit(features: &[Vec<f64>], k: usize) -> Result<Self, AdaptorError> {
        if k > features.len() {
            return Err(AdaptorError::KTooLarge {
                k,
                available: features.len(),
            });
        }
        let standardizer =
            Standardizer::fit(features.iter().map(|f| f.as_slice()), features[0].len())?;
        let standardized = features
            .iter()
            .map(|f| standardizer.transform(f))
            .collect::<Result<_, _>>()?;
        Ok(PatchStore {
            standardizer,
            standardized,
        })
    }

    fn neighbors(&self, features: &[f64], k: usize) -> Result<Vec<usize>, AdaptorError> {
        let x = self.standardizer.transform(features)?;
        let d: Vec<f64> = self
            .standardized
            .iter()
            .map(|s| squared_distance(s, &x))
            .collect();
        Ok(k_smallest(&d, k))
    }
}

fn patches_of(rep: &Representation) -> Result<&[PatchFeature], AdaptorError> {
    rep.patches.as_deref().ok_or_else(|| {
        AdaptorError::IncompatibleRepresentation(format!("{} is not patch-level", rep.case_id))
    })
}

fn check_dim(patches: &[PatchFeature], dim: usize) -> Result<(), AdaptorError> {
    match patches.iter().find(|p| p.features.len() != dim) {
        Some(p) => Err(AdaptorError::DimensionMismatch {
            expected: dim,
            got: p.features.len(),
        }),
        None => Ok(()),
    }
}

/// Calls `f` with every grid index covered by the patch, in row-major order.
fn for_each_index(patch: &PatchFeature, mut f: impl FnMut(&[usize])) {
    let rank = patch.coord.len();
    let mut index = patch.coord.clone();
    loop {
        f(&index);
        let mut axis = rank;
        loop {
            if axis == 0 {
                return;
            }
            axis -= 1;
            index[axis] += 1;
            if index[axis] < patch.coord[axis] + patch.size[axis] {
                break;
            }
            index[axis] = patch.coord[axis];
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchSegModel {
    pub features: Vec<Vec<f64>>,
    /// Mask label carried by each stored patch.
    pub labels: Vec<i32>,
    /// Sorted distinct labels; votes are indexed by position in this list.
    pub classes: Vec<i32>,
    store: PatchStore,
}

impl PatchSegModel {
    pub fn fit(
        few_shot: &[(Representation, ReferenceLabel)],
        k: usize,
    ) -> Result<Self, AdaptorError> {
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (rep, label) in few_shot {
            let mask = match label {
                ReferenceLabel::Mask { mask } => mask,
                other => {
                    return Err(AdaptorError::InvalidLabel(format!(
                        "{}: {} label for a segmentation adaptor",
                        rep.case_id,
                        other.variant_name()
                    )))
                }
            };
            if rep.grid_shape.as_deref() != Some(mask.shape()) {
                return Err(AdaptorError::InvalidLabel(format!(
                    "{}: mask shape differs from the representation grid",
                    rep.case_id
                )));
            }
            for patch in patches_of(rep)? {
                let mut counts: BTreeMap<i32, usize> = BTreeMap::new();
                for_each_index(patch, |idx| *counts.entry(*mask.get(idx)).or_insert(0) += 1);
                let mut best = (0, 0usize);
                for (&l, &c) in &counts {
                    if c > best.1 {
                        best = (l, c);
                    }
                }
                features.push(patch.features.clone());
                labels.push(best.0);
            }
        }
        let mut classes = labels.clone();
        classes.sort_unstable();
        classes.dedup();
        Ok(PatchSegModel {
            store: PatchStore::fit(&features, k)?,
            features,
            labels,
            classes,
        })
    }

    pub fn predict(
        &self,
        rep: &Representation,
        dim: usize,
        hp: &Hyperparams,
    ) -> Result<Prediction, AdaptorError> {
        let patches = patches_of(rep)?;
        check_dim(patches, dim)?;
        let shape = rep.grid_shape.clone().ok_or_else(|| {
            AdaptorError::IncompatibleRepresentation(format!("{} has no grid shape", rep.case_id))
        })?;
        let mut mask = MaskGrid::filled(shape, patches[0].spacing.clone(), 0)?;
        for patch in patches {
            let mut votes = vec![0.0; self.classes.len()];
            for i in self.store.neighbors(&patch.features, hp.k)? {
                let c = self
                    .classes
                    .binary_search(&self.labels[i])
                    .expect("label is a known class");
                votes[c] += 1.0;
            }
            let label = self.classes[argmax_smallest(&votes)];
            for_each_index(patch, |idx| mask.set(idx, label));
        }
        Ok(Prediction::Mask { mask })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchDetModel {
    pub features: Vec<Vec<f64>>,
    /// Whether each stored patch contains a reference point.
    pub positive: Vec<bool>,
    store: PatchStore,
}

impl PatchDetModel {
    pub fn fit(
        few_shot: &[(Representation, ReferenceLabel)],
        k: usize,
    ) -> Result<Self, AdaptorError> {
        let mut features = Vec::new();
        let mut positive = Vec::new();
        for (rep, label) in few_shot {
            let points: Vec<&[f64]> = match label {
                ReferenceLabel::Points { coords } => coords.iter().map(|c| c.as_slice()).collect(),
                ReferenceLabel::LesionRefs { lesions } => {
                    lesions.iter().map(|l| l.coord.as_slice()).collect()
                }
                other => {
                    return Err(AdaptorError::InvalidLabel(format!(
                        "{}: {} label for a detection adaptor",
                        rep.case_id,
                        other.variant_name()
                    )))
                }
            };
            for patch in patches_of(rep)? {
                features.push(patch.features.clone());
                positive.push(points.iter().any(|p| patch.contains(p)));
            }
        }
        Ok(PatchDetModel {
            store: PatchStore::fit(&features, k)?,
            features,
            positive,
        })
    }

    /// Fraction of positive neighbors for every patch of `rep`.
    pub fn scores(
        &self,
        rep: &Representation,
        dim: usize,
        k: usize,
    ) -> Result<Vec<f64>, AdaptorError> {
        let patches = patches_of(rep)?;
        check_dim(patches, dim)?;
        patches
            .iter()
            .map(|p| {
                let nn = self.store.neighbors(&p.features, k)?;
                Ok(nn.iter().filter(|&&i| self.positive[i]).count() as f64 / nn.len() as f64)
            })
            .collect()
    }

    pub fn predict(
        &self,
        rep: &Representation,
        dim: usize,
        task: &TaskDefinition,
        hp: &Hyperparams,
    ) -> Result<Prediction, AdaptorError> {
        let patches = patches_of(rep)?;
        let scores = self.scores(rep, dim, hp.k)?;
        let centers: Vec<Vec<f64>> = patches.iter().map(|p| p.center()).collect();
        let mut points = Vec::new();
        for (i, &s) in scores.iter().enumerate() {
            if s < hp.peak_threshold || s <= 0.0 {
                continue;
            }
            let radius = hp
                .nms_radius
                .unwrap_or_else(|| patches[i].physical_extent());
            let dominated = scores.iter().enumerate().any(|(j, &t)| {
                j != i
                    && squared_distance(&centers[i], &centers[j]) <= radius * radius
                    && (t > s || (t == s && j < i))
            });
            if !dominated {
                points.push(ScoredPoint::new(centers[i].clone(), s));
            }
        }
        Ok(match task.output {
            OutputKind::PointSetWithCaseProbability => Prediction::PointSetWithCaseProbability {
                points,
                case_probability: scores.iter().copied().fold(0.0, f64::max),
            },
            _ => Prediction::PointSet { points },
        })
    }
}
