//! Random small instances. Values are drawn from coarse grids so that ties
//! and exact matches are common.

use fmbench_core::model::{EntitySpan, Grid, Lesion, MaskGrid, ScoredPoint};
use rand::seq::SliceRandom;
use rand::Rng;

/// A value in `[0, 1]` on a grid of `steps + 1` points.
pub fn quantized(rng: &mut impl Rng, steps: u32) -> f64 {
    rng.gen_range(0..=steps) as f64 / steps as f64
}

/// Paired label lists over `k` categories, `2 <= k <= 6`.
pub fn labels(rng: &mut impl Rng, max_len: usize) -> (Vec<i64>, Vec<i64>, usize) {
    let k = rng.gen_range(2..=6);
    let n = rng.gen_range(1..=max_len);
    let refs: Vec<i64> = (0..n).map(|_| rng.gen_range(0..k as i64)).collect();
    let preds = refs
        .iter()
        .map(|&r| {
            if rng.gen_bool(0.5) {
                r
            } else {
                rng.gen_range(0..k as i64)
            }
        })
        .collect();
    (preds, refs, k)
}

/// Scores with boolean labels; at least one positive, and at least one
/// negative when `both` is set.
pub fn scored_labels(rng: &mut impl Rng, max_len: usize, both: bool) -> (Vec<f64>, Vec<bool>) {
    let n = rng.gen_range(2..=max_len);
    let mut labels: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
    labels[0] = true;
    if both {
        labels[1] = false;
    }
    labels.shuffle(rng);
    let scores = labels
        .iter()
        .map(|&l| (quantized(rng, 10) + if l { 0.2 } else { 0.0 }).min(1.0))
        .collect();
    (scores, labels)
}

/// Risks, event flags and times with roughly 30% censoring.
pub fn survival(rng: &mut impl Rng, max_len: usize) -> (Vec<f64>, Vec<bool>, Vec<f64>) {
    let n = rng.gen_range(2..=max_len);
    let times: Vec<f64> = (0..n).map(|_| rng.gen_range(1..=15) as f64 * 0.5).collect();
    let events = (0..n).map(|_| rng.gen_bool(0.7)).collect();
    let risks = times
        .iter()
        .map(|t| -t + rng.gen_range(-3..=3) as f64)
        .collect();
    (risks, events, times)
}

/// Up to `max` points in a square of side `extent`, on a half-unit grid.
pub fn scored_points(rng: &mut impl Rng, max: usize, extent: f64) -> Vec<ScoredPoint> {
    let n = rng.gen_range(0..=max);
    (0..n)
        .map(|_| {
            let steps = (extent * 2.0) as i32;
            let coord = vec![
                rng.gen_range(0..=steps) as f64 * 0.5,
                rng.gen_range(0..=steps) as f64 * 0.5,
            ];
            ScoredPoint::new(coord, quantized(rng, 8))
        })
        .collect()
}

/// Candidates and reference lesions for 1 to `max_cases` cases.
pub fn detection_cases(
    rng: &mut impl Rng,
    max_cases: usize,
) -> (Vec<Vec<ScoredPoint>>, Vec<Vec<Lesion>>) {
    let cases = rng.gen_range(1..=max_cases);
    let mut cands = Vec::new();
    let mut lesions = Vec::new();
    for _ in 0..cases {
        let refs: Vec<Lesion> = scored_points(rng, 3, 6.0)
            .into_iter()
            .map(|p| Lesion {
                coord: p.coord,
                equivalent_diameter_mm: rng.gen_range(1..=6) as f64,
            })
            .collect();
        let mut cs = scored_points(rng, 5, 6.0);
        // some candidates close to a lesion
        for l in &refs {
            if rng.gen_bool(0.6) {
                let coord = l
                    .coord
                    .iter()
                    .map(|c| c + rng.gen_range(-2..=2) as f64 * 0.5)
                    .collect();
                cs.push(ScoredPoint::new(coord, quantized(rng, 8)));
            }
        }
        cs.shuffle(rng);
        cands.push(cs);
        lesions.push(refs);
    }
    (cands, lesions)
}

/// A small 2D or 3D shape.
pub fn shape(rng: &mut impl Rng) -> Vec<usize> {
    if rng.gen_bool(0.5) {
        vec![rng.gen_range(1..=12), rng.gen_range(1..=12)]
    } else {
        vec![
            rng.gen_range(1..=5),
            rng.gen_range(1..=5),
            rng.gen_range(1..=5),
        ]
    }
}

/// A mask with labels `0..labels`, background most common.
pub fn mask(rng: &mut impl Rng, shape: &[usize], labels: i32) -> MaskGrid {
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            if rng.gen_bool(0.4) {
                0
            } else {
                rng.gen_range(0..labels)
            }
        })
        .collect();
    Grid::new(shape.to_vec(), vec![1.0; shape.len()], data).expect("valid mask")
}

/// Predictions and nonnegative references.
pub fn regression(rng: &mut impl Rng, max_len: usize) -> (Vec<f64>, Vec<f64>) {
    let n = rng.gen_range(1..=max_len);
    let refs: Vec<f64> = (0..n).map(|_| rng.gen_range(0..=40) as f64 * 0.5).collect();
    let preds = refs
        .iter()
        .map(|r| match rng.gen_range(0..3) {
            0 => *r,
            1 => r + rng.gen_range(-4.0..4.0),
            _ => rng.gen_range(-5.0..30.0),
        })
        .collect();
    (preds, refs)
}

const TAGS: [&str; 3] = ["NAME", "DATE", "ID"];

/// Random spans over a text of length `len`; reference spans never overlap.
pub fn spans(rng: &mut impl Rng, len: usize, allow_overlap: bool) -> Vec<EntitySpan> {
    let mut out: Vec<EntitySpan> = Vec::new();
    for _ in 0..rng.gen_range(0..=6) {
        let start = rng.gen_range(0..len);
        let end = (start + rng.gen_range(1..=15)).min(len);
        if !allow_overlap && out.iter().any(|s| start < s.end && s.start < end) {
            continue;
        }
        out.push(EntitySpan::new(
            start,
            end,
            *TAGS.choose(rng).expect("tags"),
        ));
    }
    out
}

const WORDS: [&str; 6] = ["mild", "cells", "tumor", "no", "seen", "grade"];

fn sentence(rng: &mut impl Rng, max: usize) -> Vec<String> {
    (0..rng.gen_range(1..=max))
        .map(|_| WORDS.choose(rng).expect("words").to_string())
        .collect()
}

/// A candidate, one to three references and a corpus containing all of
/// them plus unrelated documents.
pub fn captions(rng: &mut impl Rng) -> (Vec<String>, Vec<Vec<String>>, Vec<Vec<String>>) {
    let cand = sentence(rng, 10);
    let refs: Vec<Vec<String>> = (0..rng.gen_range(1..=3))
        .map(|_| sentence(rng, 10))
        .collect();
    let mut corpus = refs.clone();
    corpus.push(cand.clone());
    for _ in 0..rng.gen_range(0..3) {
        corpus.push(sentence(rng, 8));
    }
    (cand, refs, corpus)
}
