use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::MetricError;
use crate::model::MaskGrid;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum DiceMode {
    /// Any nonzero label is foreground.
    Binary,
    /// Unweighted mean of per-class binary Dice over the listed classes.
    MulticlassMean { classes: Vec<i32> },
}

fn check_shapes(pred: &MaskGrid, reference: &MaskGrid) -> Result<(), MetricError> {
    if pred.shape() != reference.shape() {
        return Err(MetricError::ShapeMismatch(
            pred.shape().to_vec(),
            reference.shape().to_vec(),
        ));
    }
    Ok(())
}

fn binary_dice(pred: &MaskGrid, reference: &MaskGrid, is_fg: impl Fn(i32) -> bool) -> f64 {
    let mut inter = 0u64;
    let mut p = 0u64;
    let mut r = 0u64;
    for (&a, &b) in pred.data().iter().zip(reference.data()) {
        let (fa, fb) = (is_fg(a), is_fg(b));
        p += fa as u64;
        r += fb as u64;
        inter += (fa && fb) as u64;
    }
    if p + r == 0 {
        1.0
    } else {
        2.0 * inter as f64 / (p + r) as f64
    }
}

/// Dice coefficient; two empty masks agree perfectly.
pub fn dice(pred: &MaskGrid, reference: &MaskGrid, mode: &DiceMode) -> Result<f64, MetricError> {
    check_shapes(pred, reference)?;
    match mode {
        DiceMode::Binary => Ok(binary_dice(pred, reference, |v| v != 0)),
        DiceMode::MulticlassMean { classes } => {
            if classes.is_empty() {
                return Err(MetricError::InvalidValue("no foreground classes".into()));
            }
            let sum: f64 = classes
                .iter()
                .map(|&c| binary_dice(pred, reference, |v| v == c))
                .sum();
            Ok(sum / classes.len() as f64)
        }
    }
}

/// Mean over reference instances of the binary Dice of that instance label.
pub fn instance_averaged_dice(pred: &MaskGrid, reference: &MaskGrid) -> Result<f64, MetricError> {
    check_shapes(pred, reference)?;
    let instances: BTreeSet<i32> = reference
        .data()
        .iter()
        .copied()
        .filter(|&v| v != 0)
        .collect();
    if instances.is_empty() {
        return Err(MetricError::NoInstances);
    }
    let sum: f64 = instances
        .iter()
        .map(|&label| binary_dice(pred, reference, |v| v == label))
        .sum();
    Ok(sum / instances.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisMeasurements {
    pub long_axis_mm: f64,
    pub short_axis_mm: f64,
    pub slice: usize,
}

/// Long and short axis of a 3D binary lesion mask, measured on the axial
/// slice (axis 0) with the largest lesion area.
///
/// The long axis is the largest distance between two boundary pixel centers;
/// the short axis is the extent of the lesion's pixel centers projected onto
/// the direction perpendicular to the long axis. Ties go to the lowest slice
/// and the lexicographically smallest boundary pair.
pub fn axis_measurements(mask: &MaskGrid) -> Result<AxisMeasurements, MetricError> {
    if mask.rank() != 3 {
        return Err(MetricError::NotVolumetric(mask.rank()));
    }
    let (depth, rows, cols) = (mask.shape()[0], mask.shape()[1], mask.shape()[2]);
    let (sy, sx) = (mask.spacing()[1], mask.spacing()[2]);
    let plane = rows * cols;
    let data = mask.data();

    let mut best_slice = None;
    let mut best_area = 0usize;
    for z in 0..depth {
        let area = data[z * plane..(z + 1) * plane]
            .iter()
            .filter(|&&v| v != 0)
            .count();
        if area > best_area {
            best_area = area;
            best_slice = Some(z);
        }
    }
    let z = best_slice.ok_or(MetricError::EmptyMask)?;
    let slice = &data[z * plane..(z + 1) * plane];
    let fg = |y: isize, x: isize| -> bool {
        y >= 0
            && x >= 0
            && (y as usize) < rows
            && (x as usize) < cols
            && slice[y as usize * cols + x as usize] != 0
    };

    let mut pixels = Vec::new();
    let mut boundary = Vec::new();
    for y in 0..rows as isize {
        for x in 0..cols as isize {
            if !fg(y, x) {
                continue;
            }
            let point = (y as f64 * sy, x as f64 * sx);
            pixels.push(point);
            if !(fg(y - 1, x) && fg(y + 1, x) && fg(y, x - 1) && fg(y, x + 1)) {
                boundary.push(point);
            }
        }
    }

    let mut long = 0.0;
    let mut dir: Option<(f64, f64)> = None;
    for i in 0..boundary.len() {
        for j in i + 1..boundary.len() {
            let (dy, dx) = (boundary[j].0 - boundary[i].0, boundary[j].1 - boundary[i].1);
            let d = (dy * dy + dx * dx).sqrt();
            if d > long {
                long = d;
                dir = Some((dy / d, dx / d));
            }
        }
    }
    let short = match dir {
        None => 0.0,
        Some((uy, ux)) => {
            // perpendicular unit vector
            let (py, px) = (-ux, uy);
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for &(y, x) in &pixels {
                let t = y * py + x * px;
                lo = lo.min(t);
                hi = hi.max(t);
            }
            hi - lo
        }
    };
    Ok(AxisMeasurements {
        long_axis_mm: long,
        short_axis_mm: short,
        slice: z,
    })
}

/// Symmetric relative error `|p - r| / (|p| + |r|)`, in `[0, 1]`; zero when
/// both are zero.
pub fn relative_axis_error(pred: f64, reference: f64) -> f64 {
    let den = pred.abs() + reference.abs();
    if den == 0.0 {
        0.0
    } else {
        ((pred - reference).abs() / den).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompositeWeights {
    pub w_sp: f64,
    pub w_lae: f64,
    pub w_sae: f64,
}

impl Default for CompositeWeights {
    fn default() -> Self {
        CompositeWeights {
            w_sp: 0.888,
            w_lae: 0.056,
            w_sae: 0.056,
        }
    }
}

impl CompositeWeights {
    pub fn check(&self) -> Result<(), MetricError> {
        let ws = [self.w_sp, self.w_lae, self.w_sae];
        if ws.iter().any(|w| !(w.is_finite() && *w >= 0.0))
            || (ws.iter().sum::<f64>() - 1.0).abs() > 1e-12
        {
            return Err(MetricError::InvalidValue(
                "composite weights must sum to 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UlsParts {
    pub sp: f64,
    pub lae: f64,
    pub sae: f64,
    pub cs: f64,
}

/// Composite lesion-segmentation score of one case: binary Dice plus long-
/// and short-axis agreement, each axis term being `1 - relative error`. An
/// empty prediction measures zero on both axes.
pub fn uls_case_score(
    pred: &MaskGrid,
    reference: &MaskGrid,
    weights: &CompositeWeights,
) -> Result<UlsParts, MetricError> {
    weights.check()?;
    let sp = dice(pred, reference, &DiceMode::Binary)?;
    let ref_axes = axis_measurements(reference)?;
    let (p_long, p_short) = match axis_measurements(pred) {
        Ok(m) => (m.long_axis_mm, m.short_axis_mm),
        Err(MetricError::EmptyMask) => (0.0, 0.0),
        Err(e) => return Err(e),
    };
    let lae = 1.0 - relative_axis_error(p_long, ref_axes.long_axis_mm);
    let sae = 1.0 - relative_axis_error(p_short, ref_axes.short_axis_mm);
    Ok(UlsParts {
        sp,
        lae,
        sae,
        cs: weights.w_sp * sp + weights.w_lae * lae + weights.w_sae * sae,
    })
}
