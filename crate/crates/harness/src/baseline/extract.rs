use fmbench_core::model::{CasePayload, PatchFeature, Representation, TaskDefinition, TaskType};

use super::BaselineError;

pub const HISTOGRAM_BINS: usize = 8;
/// Quantiles reported after mean and variance.
pub const PERCENTILES: [f64; 5] = [10.0, 25.0, 50.0, 75.0, 90.0];
/// Length of every statistics vector.
pub const STATISTICS_DIM: usize = 2 + PERCENTILES.len() + HISTOGRAM_BINS;

/// Linear-interpolated percentile of sorted values.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Mean, population variance, percentiles and an 8-bin histogram over
/// `[0, 1]` (fractions; values outside fall into the end bins).
pub fn intensity_statistics(values: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    let (mut mean, mut m2) = (0.0, 0.0);
    for (i, &v) in values.iter().enumerate() {
        let delta = v - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (v - mean);
    }
    let variance = m2 / n;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut out = Vec::with_capacity(STATISTICS_DIM);
    out.push(mean);
    out.push(variance);
    out.extend(PERCENTILES.iter().map(|&q| percentile(&sorted, q)));
    let mut hist = [0.0; HISTOGRAM_BINS];
    for v in values {
        let bin = (v * HISTOGRAM_BINS as f64)
            .floor()
            .clamp(0.0, (HISTOGRAM_BINS - 1) as f64) as usize;
        hist[bin] += 1.0 / n;
    }
    out.extend(hist);
    out
}

/// Fixed tiling per task family: 4-pixel tiles in 2D, 4-voxel tiles for 3D
/// detection and 2-voxel tiles for 3D segmentation.
pub fn tile_shape(task: &TaskDefinition, rank: usize) -> Vec<usize> {
    match (rank, task.task_type) {
        (2, _) => vec![4, 4],
        (_, TaskType::Segmentation) => vec![2; rank],
        _ => vec![4; rank],
    }
}

/// Calls `f` with every index of the box `[start, start + size)`.
fn for_each_in_box(start: &[usize], size: &[usize], mut f: impl FnMut(&[usize])) {
    if size.contains(&0) {
        return;
    }
    let mut idx = start.to_vec();
    loop {
        f(&idx);
        let mut axis = idx.len();
        loop {
            if axis == 0 {
                return;
            }
            axis -= 1;
            idx[axis] += 1;
            if idx[axis] < start[axis] + size[axis] {
                break;
            }
            idx[axis] = start[axis];
        }
    }
}

/// Representation of a vision case: one statistics vector over the masked
/// grid, or one per tile for tasks with dense outputs. Tiles cover the whole
/// grid (edge tiles are cropped) and ignore the tissue mask.
pub fn baseline_extract(
    case_id: &str,
    payload: &CasePayload,
    task: &TaskDefinition,
) -> Result<Representation, BaselineError> {
    let vision = payload.vision().ok_or(BaselineError::NotVision)?;
    let image = &vision.image;
    if task.output.is_dense() {
        let shape = image.shape().to_vec();
        let tile = tile_shape(task, shape.len());
        let counts: Vec<usize> = shape
            .iter()
            .zip(&tile)
            .map(|(s, t)| s.div_ceil(*t))
            .collect();
        let mut patches = Vec::new();
        for_each_in_box(&vec![0; shape.len()], &counts, |cell| {
            let coord: Vec<usize> = cell.iter().zip(&tile).map(|(c, t)| c * t).collect();
            let size: Vec<usize> = coord
                .iter()
                .zip(&tile)
                .zip(&shape)
                .map(|((c, t), s)| (*t).min(s - c))
                .collect();
            let mut values = Vec::with_capacity(size.iter().product());
            for_each_in_box(&coord, &size, |idx| values.push(*image.get(idx)));
            patches.push(PatchFeature {
                features: intensity_statistics(&values),
                coord,
                size,
                spacing: image.spacing().to_vec(),
            });
        });
        return Ok(Representation::patch_level(case_id, shape, patches));
    }
    let values: Vec<f64> = match &vision.tissue_mask {
        Some(mask) => image
            .data()
            .iter()
            .zip(mask.data())
            .filter(|(_, &m)| m != 0)
            .map(|(&v, _)| v)
            .collect(),
        None => image.data().to_vec(),
    };
    if values.is_empty() {
        return Err(BaselineError::EmptyMask(case_id.to_string()));
    }
    Ok(Representation::case_level(
        case_id,
        intensity_statistics(&values),
    ))
}

/// Mean intensity over the tissue mask, or over the whole grid without one.
pub(crate) fn masked_mean(case_id: &str, payload: &CasePayload) -> Result<f64, BaselineError> {
    let vision = payload.vision().ok_or(BaselineError::NotVision)?;
    let mut sum = 0.0;
    let mut n = 0usize;
    for (i, v) in vision.image.data().iter().enumerate() {
        if vision.tissue_mask.as_ref().is_none_or(|m| m.data()[i] != 0) {
            sum += v;
            n += 1;
        }
    }
    if n == 0 {
        return Err(BaselineError::EmptyMask(case_id.to_string()));
    }
    Ok(sum / n as f64)
}
