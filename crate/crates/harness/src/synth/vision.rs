use fmbench_core::model::{
    CasePayload, Grid, ImageGrid, Lesion, MaskGrid, ReferenceLabel, TaskDefinition, VisionPayload,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{balanced, Draft, Part, SyntheticBenchmarkSpec};

/// Grid of the 2D cell-detection and tissue-segmentation ROIs.
pub const DENSE_2D_SHAPE: [usize; 2] = [32, 32];
/// Grid of the 3D lesion-detection volumes.
pub const DETECTION_3D_SHAPE: [usize; 3] = [12, 16, 16];
/// Grid of the lesion-segmentation ROIs.
pub const LESION_ROI_SHAPE: [usize; 3] = [8, 12, 12];
/// Grid of the stacked-structure segmentation volumes.
pub const INSTANCE_SHAPE: [usize; 3] = [12, 8, 8];
/// Side of the cells that planted detection targets are aligned to. Each
/// target sits one or two pixels inside its cell.
pub const CELL_TILE: usize = 4;

const BACKGROUND_GLASS: f64 = 0.95;
const PIXEL_SD: f64 = 0.12;
const DENSE_SD: f64 = 0.05;

pub(super) const CAPTION_FINDINGS: [&str; 3] = [
    "sparse cellularity and abundant stroma",
    "moderate cellularity",
    "dense cellularity with crowded nuclei",
];
const CAPTION_STAINS: [&str; 2] = ["H&E stained", "Haematoxylin and eosin stained"];
const CAPTION_ORGANS: [&str; 5] = ["prostate", "breast", "colon", "lung", "skin"];
const CAPTION_DESCRIPTION: &str = "Write a short diagnostic caption for this whole-slide image.";

fn normal(rng: &mut ChaCha8Rng, sd: f64) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    z * sd
}

fn round3(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

/// Smallest side `s` with `s^rank >= d`.
pub(crate) fn case_side(d: usize, rank: u32) -> usize {
    let mut s: usize = 1;
    while s.pow(rank) < d {
        s += 1;
    }
    s
}

fn grid(shape: Vec<usize>, data: Vec<f64>) -> Result<ImageGrid, String> {
    let rank = shape.len();
    Grid::new(
        shape,
        vec![1.0; rank],
        data.into_iter().map(round3).collect(),
    )
    .map_err(|e| e.to_string())
}

/// A rectangular tissue region covering at least 60% of each side.
fn tissue_mask(rng: &mut ChaCha8Rng, side: usize) -> Result<MaskGrid, String> {
    let min = ((side as f64) * 0.6).ceil() as usize;
    let h = rng.gen_range(min..=side);
    let w = rng.gen_range(min..=side);
    let r0 = rng.gen_range(0..=side - h);
    let c0 = rng.gen_range(0..=side - w);
    let mut data = vec![0; side * side];
    for r in r0..r0 + h {
        for c in c0..c0 + w {
            data[r * side + c] = 1;
        }
    }
    Grid::new(vec![side, side], vec![1.0, 1.0], data).map_err(|e| e.to_string())
}

/// Case-level image whose tissue pixels scatter around `level`.
fn level_image(
    rng: &mut ChaCha8Rng,
    shape: Vec<usize>,
    level: f64,
    mask: Option<&MaskGrid>,
) -> Result<ImageGrid, String> {
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|i| match mask {
            Some(m) if m.data()[i] == 0 => BACKGROUND_GLASS + normal(rng, 0.01),
            _ => level + normal(rng, PIXEL_SD),
        })
        .collect();
    grid(shape, data)
}

fn vision_case(image: ImageGrid, mask: Option<MaskGrid>) -> Result<CasePayload, String> {
    VisionPayload::new(image, mask)
        .map(CasePayload::VisionGrid)
        .map_err(|e| e.to_string())
}

/// Pathology slide stand-in: square image with a tissue mask.
fn slide(
    spec: &SyntheticBenchmarkSpec,
    rng: &mut ChaCha8Rng,
    level: f64,
) -> Result<VisionPayload, String> {
    let side = case_side(spec.feature_dim, 2);
    let mask = tissue_mask(rng, side)?;
    let image = level_image(rng, vec![side, side], level, Some(&mask))?;
    VisionPayload::new(image, Some(mask)).map_err(|e| e.to_string())
}

/// Level for class `label` of `k`, spread around 0.5.
fn class_level(spec: &SyntheticBenchmarkSpec, label: usize, k: usize) -> f64 {
    0.5 + spec.separation * 0.6 * (label as f64 / (k - 1) as f64 - 0.5)
}

fn graded(
    spec: &SyntheticBenchmarkSpec,
    rng: &mut ChaCha8Rng,
    n: usize,
    k: usize,
) -> Result<Vec<Draft>, String> {
    balanced(rng, n, k)
        .into_iter()
        .map(|label| {
            let level = class_level(spec, label, k) + normal(rng, 0.04);
            let v = slide(spec, rng, level)?;
            Ok(Draft {
                payload: CasePayload::VisionGrid(v),
                reference: ReferenceLabel::ClassLabel {
                    label: label as i64,
                },
            })
        })
        .collect()
}

fn nodules(
    spec: &SyntheticBenchmarkSpec,
    rng: &mut ChaCha8Rng,
    n: usize,
) -> Result<Vec<Draft>, String> {
    let side = case_side(spec.feature_dim, 3);
    balanced(rng, n, 2)
        .into_iter()
        .map(|label| {
            let sign = if label == 1 { 1.0 } else { -1.0 };
            let level = 0.5 + sign * 0.08 * spec.separation + normal(rng, 0.05);
            let image = level_image(rng, vec![side; 3], level, None)?;
            Ok(Draft {
                payload: vision_case(image, None)?,
                reference: ReferenceLabel::ClassLabel {
                    label: label as i64,
                },
            })
        })
        .collect()
}

/// Survival cases: a latent risk sets both the slide level and the event
/// time; censoring times are uniform.
fn recurrence(
    spec: &SyntheticBenchmarkSpec,
    rng: &mut ChaCha8Rng,
    n: usize,
) -> Result<Vec<Draft>, String> {
    for _ in 0..100 {
        let mut cases = Vec::with_capacity(n);
        for _ in 0..n {
            let risk: f64 = rng.gen_range(0.0..1.0);
            let event_time = 10.0 * (-2.5 * risk).exp() * normal(rng, 0.3).exp();
            let censor_time: f64 = rng.gen_range(0.5..12.0);
            let event = event_time <= censor_time;
            let time = round3(event_time.min(censor_time));
            let level = 0.5 + spec.separation * 0.4 * (risk - 0.5);
            cases.push((slide(spec, rng, level)?, event, time));
        }
        let comparable = cases
            .iter()
            .any(|(_, e, t)| *e && cases.iter().any(|(_, _, u)| u > t));
        if comparable {
            return Ok(cases
                .into_iter()
                .map(|(v, event, time_years)| Draft {
                    payload: CasePayload::VisionGrid(v),
                    reference: ReferenceLabel::Survival { event, time_years },
                })
                .collect());
        }
    }
    Err("no comparable survival pair after 100 draws".into())
}

fn captions(
    spec: &SyntheticBenchmarkSpec,
    rng: &mut ChaCha8Rng,
    n: usize,
) -> Result<Vec<Draft>, String> {
    balanced(rng, n, CAPTION_FINDINGS.len())
        .into_iter()
        .map(|finding| {
            let level = 0.5 + spec.separation * 0.2 * (finding as f64 - 1.0) + normal(rng, 0.03);
            let vision = slide(spec, rng, level)?;
            let stain = CAPTION_STAINS[rng.gen_range(0..CAPTION_STAINS.len())];
            let organ = CAPTION_ORGANS[rng.gen_range(0..CAPTION_ORGANS.len())];
            Ok(Draft {
                payload: CasePayload::VisionWithTaskDescription {
                    vision,
                    description: CAPTION_DESCRIPTION.into(),
                },
                reference: ReferenceLabel::Caption {
                    text: format!(
                        "{stain} section of {organ} tissue with {}.",
                        CAPTION_FINDINGS[finding]
                    ),
                },
            })
        })
        .collect()
}

/// Distinct cells of a tile grid whose pairwise Chebyshev distance is at
/// least 2, so that no two targets share or touch a cell.
fn pick_cells(rng: &mut ChaCha8Rng, tiles: &[usize], count: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    let mut tries = 0;
    while out.len() < count && tries < 1000 {
        tries += 1;
        let cell: Vec<usize> = tiles.iter().map(|&t| rng.gen_range(0..t)).collect();
        let far = out.iter().all(|o| {
            o.iter()
                .zip(&cell)
                .map(|(&a, &b)| a.abs_diff(b))
                .max()
                .unwrap_or(0)
                >= 2
        });
        if far {
            out.push(cell);
        }
    }
    out
}

/// Target position inside a cell: one or two pixels in on every axis.
fn inside(rng: &mut ChaCha8Rng, cell: &[usize]) -> Vec<usize> {
    cell.iter()
        .map(|&c| c * CELL_TILE + rng.gen_range(1..=2))
        .collect()
}

/// Adds a blob of peak `contrast` around `center`: neighbors within
/// squared distance 2 get 70% of it.
fn stamp(data: &mut [f64], shape: &[usize], center: &[usize], contrast: f64) -> usize {
    let rank = shape.len();
    let mut covered = 0;
    let offsets: Vec<Vec<i64>> = if rank == 2 {
        (-1..=1)
            .flat_map(|a| (-1..=1).map(move |b| vec![a, b]))
            .collect()
    } else {
        (-1..=1)
            .flat_map(|a| (-1..=1).flat_map(move |b| (-1..=1).map(move |c| vec![a, b, c])))
            .collect()
    };
    for off in offsets {
        let d2: i64 = off.iter().map(|o| o * o).sum();
        if d2 > 2 {
            continue;
        }
        let mut idx = 0;
        for axis in 0..rank {
            let p = center[axis] as i64 + off[axis];
            idx = idx * shape[axis] + p as usize;
        }
        data[idx] += if d2 == 0 { contrast } else { 0.7 * contrast };
        covered += 1;
    }
    covered
}

fn noise_field(rng: &mut ChaCha8Rng, n: usize, level: f64) -> Vec<f64> {
    (0..n).map(|_| level + normal(rng, DENSE_SD)).collect()
}

/// Cells (`contrast > 0`) or dark figures (`contrast < 0`) on a 2D ROI.
fn cells(
    spec: &SyntheticBenchmarkSpec,
    rng: &mut ChaCha8Rng,
    n: usize,
    background: f64,
    contrast: f64,
) -> Result<Vec<Draft>, String> {
    let shape = DENSE_2D_SHAPE.to_vec();
    let tiles: Vec<usize> = shape.iter().map(|s| s / CELL_TILE).collect();
    (0..n)
        .map(|_| {
            let mut data = noise_field(rng, shape.iter().product(), background);
            let count = rng.gen_range(1..=4);
            let mut coords = Vec::new();
            for cell in pick_cells(rng, &tiles, count) {
                let center = inside(rng, &cell);
                stamp(&mut data, &shape, &center, contrast * spec.separation);
                coords.push(center.iter().map(|&c| c as f64).collect());
            }
            Ok(Draft {
                payload: vision_case(grid(shape.clone(), data)?, None)?,
                reference: ReferenceLabel::Points { coords },
            })
        })
        .collect()
}

/// 3D volumes with spherical lesions. `counts[i]` lesions go into case `i`.
fn lesions(
    spec: &SyntheticBenchmarkSpec,
    rng: &mut ChaCha8Rng,
    counts: Vec<usize>,
) -> Result<Vec<Draft>, String> {
    let shape = DETECTION_3D_SHAPE.to_vec();
    let tiles: Vec<usize> = shape.iter().map(|s| s / CELL_TILE).collect();
    counts
        .into_iter()
        .map(|count| {
            let mut data = noise_field(rng, shape.iter().product(), 0.3);
            let mut found = Vec::new();
            for cell in pick_cells(rng, &tiles, count) {
                let center = inside(rng, &cell);
                let voxels = stamp(&mut data, &shape, &center, 0.45 * spec.separation);
                let diameter = 2.0 * (3.0 * voxels as f64 / (4.0 * std::f64::consts::PI)).cbrt();
                found.push(Lesion {
                    coord: center.iter().map(|&c| c as f64).collect(),
                    equivalent_diameter_mm: round3(diameter),
                });
            }
            Ok(Draft {
                payload: vision_case(grid(shape.clone(), data)?, None)?,
                reference: ReferenceLabel::LesionRefs { lesions: found },
            })
        })
        .collect()
}

fn mask_case(
    rng: &mut ChaCha8Rng,
    shape: Vec<usize>,
    labels: Vec<i32>,
    level: impl Fn(i32) -> f64,
) -> Result<Draft, String> {
    let rank = shape.len();
    let data = labels
        .iter()
        .map(|&l| level(l) + normal(rng, DENSE_SD))
        .collect();
    let mask = Grid::new(shape.clone(), vec![1.0; rank], labels).map_err(|e| e.to_string())?;
    Ok(Draft {
        payload: vision_case(grid(shape, data)?, None)?,
        reference: ReferenceLabel::Mask { mask },
    })
}

/// Tissue segmentation: 8-pixel blocks of classes 0..=3, at least one
/// foreground block per case.
fn tissue_blocks(
    spec: &SyntheticBenchmarkSpec,
    rng: &mut ChaCha8Rng,
    n: usize,
) -> Result<Vec<Draft>, String> {
    const BLOCK: usize = 8;
    let [h, w] = DENSE_2D_SHAPE;
    let s = spec.separation;
    (0..n)
        .map(|_| {
            let (bh, bw) = (h / BLOCK, w / BLOCK);
            let mut blocks: Vec<i32> = (0..bh * bw).map(|_| rng.gen_range(0..=3)).collect();
            if blocks.iter().all(|&b| b == 0) {
                let i = rng.gen_range(0..blocks.len());
                blocks[i] = rng.gen_range(1..=3);
            }
            let labels = (0..h * w)
                .map(|i| blocks[(i / w / BLOCK) * bw + (i % w) / BLOCK])
                .collect();
            mask_case(rng, vec![h, w], labels, |l| {
                0.5 + s * (0.15 + 0.25 * l as f64 - 0.5)
            })
        })
        .collect()
}

fn even_start(rng: &mut ChaCha8Rng, side: usize, extent: usize) -> usize {
    2 * rng.gen_range(0..=(side - extent) / 2)
}

/// One box lesion per ROI, with even extents and offsets.
fn lesion_boxes(
    spec: &SyntheticBenchmarkSpec,
    rng: &mut ChaCha8Rng,
    n: usize,
) -> Result<Vec<Draft>, String> {
    let shape = LESION_ROI_SHAPE;
    let s = spec.separation;
    (0..n)
        .map(|_| {
            let ext = [
                [2, 4, 6][rng.gen_range(0..3)],
                [4, 6, 8][rng.gen_range(0..3)],
                [4, 6, 8][rng.gen_range(0..3)],
            ];
            let start: Vec<usize> = (0..3).map(|a| even_start(rng, shape[a], ext[a])).collect();
            let mut labels = Vec::with_capacity(shape.iter().product());
            for z in 0..shape[0] {
                for y in 0..shape[1] {
                    for x in 0..shape[2] {
                        let inside = [z, y, x]
                            .iter()
                            .enumerate()
                            .all(|(a, &p)| p >= start[a] && p < start[a] + ext[a]);
                        labels.push(inside as i32);
                    }
                }
            }
            mask_case(rng, shape.to_vec(), labels, |l| 0.25 + s * 0.4 * l as f64)
        })
        .collect()
}

/// Two or three structures stacked along the first axis, four slices each,
/// labeled 1, 2, 3 from the top.
fn stacked_structures(
    spec: &SyntheticBenchmarkSpec,
    rng: &mut ChaCha8Rng,
    n: usize,
) -> Result<Vec<Draft>, String> {
    let shape = INSTANCE_SHAPE;
    let s = spec.separation;
    (0..n)
        .map(|_| {
            let count = rng.gen_range(2..=3);
            let boxes: Vec<(usize, usize, usize)> = (0..count)
                .map(|_| {
                    let size = [4, 6][rng.gen_range(0..2)];
                    (
                        size,
                        even_start(rng, shape[1], size),
                        even_start(rng, shape[2], size),
                    )
                })
                .collect();
            let mut labels = Vec::with_capacity(shape.iter().product());
            for z in 0..shape[0] {
                for y in 0..shape[1] {
                    for x in 0..shape[2] {
                        let l = z / 4;
                        let v = match boxes.get(l) {
                            Some(&(size, y0, x0))
                                if y >= y0 && y < y0 + size && x >= x0 && x < x0 + size =>
                            {
                                l as i32 + 1
                            }
                            _ => 0,
                        };
                        labels.push(v);
                    }
                }
            }
            mask_case(rng, shape.to_vec(), labels, |l| 0.1 + s * 0.25 * l as f64)
        })
        .collect()
}

pub(super) fn drafts(
    spec: &SyntheticBenchmarkSpec,
    task: &TaskDefinition,
    rng: &mut ChaCha8Rng,
    part: Part,
    n: usize,
) -> Result<Vec<Draft>, String> {
    match task.task_id.0 {
        1 => graded(spec, rng, n, 6),
        2 => nodules(spec, rng, n),
        3 => recurrence(spec, rng, n),
        4 => graded(spec, rng, n, 3),
        5 => cells(spec, rng, n, 0.25, 0.5),
        6 => {
            let counts = balanced(rng, n, 2)
                .into_iter()
                .map(|positive| {
                    if positive == 1 {
                        rng.gen_range(1..=2)
                    } else {
                        0
                    }
                })
                .collect();
            lesions(spec, rng, counts)
        }
        7 => {
            let mut counts: Vec<usize> = (0..n).map(|_| rng.gen_range(0..=2)).collect();
            if part != Part::FewShot || counts.iter().all(|&c| c == 0) {
                counts[0] = counts[0].max(1);
            }
            lesions(spec, rng, counts)
        }
        8 => cells(spec, rng, n, 0.65, -0.45),
        9 => tissue_blocks(spec, rng, n),
        10 => lesion_boxes(spec, rng, n),
        11 => stacked_structures(spec, rng, n),
        20 => captions(spec, rng, n),
        other => Err(format!("T{other} is not a vision task")),
    }
}
