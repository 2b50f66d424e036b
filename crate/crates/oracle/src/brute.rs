//! Brute-force reference implementations. Each one follows the textbook
//! definition as literally as possible and makes no attempt to be fast.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use fmbench_core::model::{EntitySpan, HitRule, Lesion, MaskGrid, ScoredPoint};

/// Kappa from an explicit confusion matrix. Unweighted kappa uses the
/// agreement form `(po - pe) / (1 - pe)`; quadratic kappa the weighted
/// disagreement form. `None` when the chance term vanishes.
pub fn kappa(preds: &[i64], refs: &[i64], k: usize, quadratic: bool) -> Option<f64> {
    let n = preds.len() as f64;
    let mut o = vec![vec![0.0; k]; k];
    for (&p, &r) in preds.iter().zip(refs) {
        o[r as usize][p as usize] += 1.0 / n;
    }
    let row: Vec<f64> = (0..k).map(|i| (0..k).map(|j| o[i][j]).sum()).collect();
    let col: Vec<f64> = (0..k).map(|j| (0..k).map(|i| o[i][j]).sum()).collect();
    if quadratic {
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..k {
            for j in 0..k {
                let w = ((i as f64 - j as f64) / (k as f64 - 1.0)).powi(2);
                num += w * o[i][j];
                den += w * row[i] * col[j];
            }
        }
        (den > 1e-15).then(|| 1.0 - num / den)
    } else {
        let po: f64 = (0..k).map(|i| o[i][i]).sum();
        let pe: f64 = (0..k).map(|i| row[i] * col[i]).sum();
        (1.0 - pe > 1e-15).then(|| (po - pe) / (1.0 - pe))
    }
}

/// Probability that a random positive outscores a random negative, with
/// half credit for ties, by enumerating every pair.
pub fn auroc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut credit = 0.0;
    let mut pairs = 0.0;
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if labels[i] && !labels[j] {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    credit += 1.0;
                } else if scores[i] == scores[j] {
                    credit += 0.5;
                }
            }
        }
    }
    credit / pairs
}

/// Sweeps every distinct score as a threshold from the top and sums
/// recall steps times precision.
pub fn average_precision(scores: &[f64], labels: &[bool], total_positives: usize) -> f64 {
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for t in thresholds {
        let selected: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] >= t).collect();
        let tp = selected.iter().filter(|&&i| labels[i]).count() as f64;
        let recall = tp / total_positives as f64;
        let precision = tp / selected.len() as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    ap
}

pub fn macro_auroc(per_label: &BTreeMap<String, (Vec<f64>, Vec<bool>)>) -> f64 {
    per_label.values().map(|(s, l)| auroc(s, l)).sum::<f64>() / per_label.len() as f64
}

/// Ordered-pair enumeration of the censored concordance index.
pub fn concordance(risks: &[f64], events: &[bool], times: &[f64]) -> Option<f64> {
    let mut comparable = 0.0;
    let mut concordant = 0.0;
    for i in 0..risks.len() {
        for j in 0..risks.len() {
            if i == j || !events[i] {
                continue;
            }
            if times[i] < times[j] {
                comparable += 1.0;
                if risks[i] > risks[j] {
                    concordant += 1.0;
                } else if risks[i] == risks[j] {
                    concordant += 0.5;
                }
            } else if times[i] == times[j] && events[j] && risks[i] != risks[j] {
                comparable += 1.0;
                if risks[i] > risks[j] {
                    concordant += 1.0;
                }
            }
        }
    }
    (comparable > 0.0).then(|| concordant / comparable)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Greedy binding written out with an explicit sorted candidate list per
/// prediction. Returns the claimed reference per prediction and whether it
/// hit anything.
fn bind(points: &[&[f64]], refs: &[Vec<f64>], radii: &[f64]) -> Vec<(Option<usize>, bool)> {
    let mut claimed = BTreeSet::new();
    points
        .iter()
        .map(|p| {
            let mut hits: Vec<(f64, usize)> = refs
                .iter()
                .enumerate()
                .map(|(r, c)| (dist(p, c), r))
                .filter(|&(d, r)| d <= radii[r])
                .collect();
            hits.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            let any = !hits.is_empty();
            let pick = hits.into_iter().map(|h| h.1).find(|r| !claimed.contains(r));
            if let Some(r) = pick {
                claimed.insert(r);
            }
            (pick, any)
        })
        .collect()
}

/// `(tp, fp, fn)` under the counting rules, and the resulting F1.
pub fn point_matching(
    preds: &[ScoredPoint],
    refs: &[Vec<f64>],
    radius: f64,
) -> ((usize, usize, usize), f64) {
    let coords: Vec<&[f64]> = preds.iter().map(|p| p.coord.as_slice()).collect();
    let bound = bind(&coords, refs, &vec![radius; refs.len()]);
    let tp = bound.iter().filter(|b| b.0.is_some()).count();
    let fp = bound.iter().filter(|b| !b.1).count();
    let fn_ = refs.len() - tp;
    let f1 = if tp + fp + fn_ == 0 {
        1.0
    } else {
        2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
    };
    ((tp, fp, fn_), f1)
}

fn hit_radius(rule: HitRule, lesion: &Lesion) -> f64 {
    match rule {
        HitRule::FixedRadius { radius } => radius,
        HitRule::HalfEquivalentDiameter => lesion.equivalent_diameter_mm / 2.0,
    }
}

/// Recomputes sensitivity and false positives from scratch at every
/// candidate threshold, then reads off the operating points.
pub fn froc(
    cands: &[Vec<ScoredPoint>],
    refs: &[Vec<Lesion>],
    rates: &[f64],
    rule: HitRule,
) -> (f64, Vec<(f64, f64)>) {
    let total: usize = refs.iter().map(Vec::len).sum();
    let mut thresholds: Vec<f64> = cands.iter().flatten().map(|c| c.confidence).collect();
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();
    let mut curve = Vec::new();
    for &t in &thresholds {
        let mut found = 0;
        let mut fps = 0;
        for (cs, ls) in cands.iter().zip(refs) {
            let kept: Vec<&ScoredPoint> = cs.iter().filter(|c| c.confidence >= t).collect();
            found += ls
                .iter()
                .filter(|l| {
                    kept.iter()
                        .any(|c| dist(&c.coord, &l.coord) <= hit_radius(rule, l))
                })
                .count();
            fps += kept
                .iter()
                .filter(|c| {
                    !ls.iter()
                        .any(|l| dist(&c.coord, &l.coord) <= hit_radius(rule, l))
                })
                .count();
        }
        curve.push((fps as f64 / cands.len() as f64, found as f64 / total as f64));
    }
    let mut sum = 0.0;
    for &rate in rates {
        let mut best = 0.0;
        for &(fp, s) in &curve {
            if fp <= rate && s > best {
                best = s;
            }
        }
        sum += best;
    }
    (sum / rates.len() as f64, curve)
}

/// Half the pairwise AUROC plus half the threshold-sweep AP, where each
/// candidate's label comes from binding in descending confidence order.
pub fn detection_auroc_ap(
    case_probs: &[(f64, bool)],
    cands: &[Vec<ScoredPoint>],
    refs: &[Vec<Lesion>],
    rule: HitRule,
) -> f64 {
    let scores: Vec<f64> = case_probs.iter().map(|c| c.0).collect();
    let labels: Vec<bool> = case_probs.iter().map(|c| c.1).collect();
    let mut all_scores = Vec::new();
    let mut all_labels = Vec::new();
    let mut total = 0;
    for (cs, ls) in cands.iter().zip(refs) {
        total += ls.len();
        let mut order: Vec<usize> = (0..cs.len()).collect();
        order.sort_by(|&a, &b| {
            cs[b]
                .confidence
                .partial_cmp(&cs[a].confidence)
                .unwrap()
                .then(a.cmp(&b))
        });
        let coords: Vec<&[f64]> = order.iter().map(|&i| cs[i].coord.as_slice()).collect();
        let centers: Vec<Vec<f64>> = ls.iter().map(|l| l.coord.clone()).collect();
        let radii: Vec<f64> = ls.iter().map(|l| hit_radius(rule, l)).collect();
        for (k, b) in bind(&coords, &centers, &radii).into_iter().enumerate() {
            all_scores.push(cs[order[k]].confidence);
            all_labels.push(b.0.is_some());
        }
    }
    0.5 * auroc(&scores, &labels) + 0.5 * average_precision(&all_scores, &all_labels, total)
}

fn voxel_sets(mask: &MaskGrid, is_fg: impl Fn(i32) -> bool) -> BTreeSet<Vec<usize>> {
    (0..mask.len())
        .map(|o| mask.unravel(o))
        .filter(|idx| is_fg(*mask.get(idx)))
        .collect()
}

fn set_dice(p: &BTreeSet<Vec<usize>>, r: &BTreeSet<Vec<usize>>) -> f64 {
    if p.is_empty() && r.is_empty() {
        1.0
    } else {
        2.0 * p.intersection(r).count() as f64 / (p.len() + r.len()) as f64
    }
}

/// Dice over explicit voxel index sets.
pub fn dice_binary(pred: &MaskGrid, reference: &MaskGrid) -> f64 {
    set_dice(
        &voxel_sets(pred, |v| v != 0),
        &voxel_sets(reference, |v| v != 0),
    )
}

pub fn dice_multiclass(pred: &MaskGrid, reference: &MaskGrid, classes: &[i32]) -> f64 {
    classes
        .iter()
        .map(|&c| {
            set_dice(
                &voxel_sets(pred, |v| v == c),
                &voxel_sets(reference, |v| v == c),
            )
        })
        .sum::<f64>()
        / classes.len() as f64
}

pub fn dice_instances(pred: &MaskGrid, reference: &MaskGrid) -> f64 {
    let labels: BTreeSet<i32> = reference
        .data()
        .iter()
        .copied()
        .filter(|&v| v != 0)
        .collect();
    let scores: Vec<f64> = labels
        .iter()
        .map(|&l| {
            set_dice(
                &voxel_sets(pred, |v| v == l),
                &voxel_sets(reference, |v| v == l),
            )
        })
        .collect();
    scores.iter().sum::<f64>() / scores.len() as f64
}

pub fn rsmapes(preds: &[f64], refs: &[f64], eps: f64) -> f64 {
    let mut total = 0.0;
    for i in 0..preds.len() {
        let diff = (preds[i] - refs[i]).abs();
        let e = if diff <= eps {
            0.0
        } else {
            let raw = (diff - eps) / ((preds[i].abs() + refs[i].abs()) / 2.0 + eps);
            raw.min(1.0)
        };
        total += e;
    }
    1.0 - total / preds.len() as f64
}

fn char_tags(spans: &[EntitySpan], len: usize) -> Vec<Option<String>> {
    (0..len)
        .map(|c| {
            spans
                .iter()
                .find(|s| s.start <= c && c < s.end)
                .map(|s| s.tag.clone())
        })
        .collect()
}

fn f1(tp: usize, fp: usize, fn_: usize) -> f64 {
    if tp + fp + fn_ == 0 {
        1.0
    } else {
        2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
    }
}

/// Per-character enumeration: `(strict, binary, blended)`.
pub fn redaction(pred: &[EntitySpan], reference: &[EntitySpan], len: usize) -> (f64, f64, f64) {
    let p = char_tags(pred, len);
    let r = char_tags(reference, len);
    let strict_tp = (0..len).filter(|&c| p[c].is_some() && p[c] == r[c]).count();
    let strict_fp = (0..len).filter(|&c| p[c].is_some() && p[c] != r[c]).count();
    let strict_fn = (0..len).filter(|&c| r[c].is_some() && p[c] != r[c]).count();
    let bin_tp = (0..len)
        .filter(|&c| p[c].is_some() && r[c].is_some())
        .count();
    let bin_fp = (0..len)
        .filter(|&c| p[c].is_some() && r[c].is_none())
        .count();
    let bin_fn = (0..len)
        .filter(|&c| p[c].is_none() && r[c].is_some())
        .count();
    let strict = f1(strict_tp, strict_fp, strict_fn);
    let binary = f1(bin_tp, bin_fp, bin_fn);
    (strict, binary, 0.7 * strict + 0.3 * binary)
}

fn grams(tokens: &[String], n: usize) -> Vec<Vec<String>> {
    if tokens.len() < n {
        return Vec::new();
    }
    (0..=tokens.len() - n)
        .map(|i| tokens[i..i + n].to_vec())
        .collect()
}

fn occurrences(list: &[Vec<String>], gram: &[String]) -> usize {
    list.iter().filter(|g| g.as_slice() == gram).count()
}

/// BLEU by linear-scan n-gram counting and a direct product of precisions.
pub fn bleu4(cand: &[String], refs: &[Vec<String>], smoothing: f64) -> f64 {
    let orders = cand.len().min(4);
    let mut product = 1.0;
    for n in 1..=orders {
        let cg = grams(cand, n);
        let mut distinct = cg.clone();
        distinct.sort();
        distinct.dedup();
        let mut clipped = 0;
        for g in &distinct {
            let best = refs
                .iter()
                .map(|r| occurrences(&grams(r, n), g))
                .max()
                .unwrap_or(0);
            clipped += occurrences(&cg, g).min(best);
        }
        let p = if clipped == 0 {
            smoothing
        } else {
            clipped as f64
        } / cg.len() as f64;
        product *= p;
    }
    let c = cand.len() as f64;
    let mut r_len = refs[0].len();
    for r in refs {
        let (d_new, d_old) = (r.len().abs_diff(cand.len()), r_len.abs_diff(cand.len()));
        if d_new < d_old || (d_new == d_old && r.len() < r_len) {
            r_len = r.len();
        }
    }
    let bp = if c > r_len as f64 {
        1.0
    } else {
        (1.0 - r_len as f64 / c).exp()
    };
    bp * product.powf(1.0 / orders as f64)
}

fn is_subsequence(sub: &[&String], of: &[String]) -> bool {
    let mut it = of.iter();
    sub.iter().all(|s| it.any(|t| t == *s))
}

/// LCS by enumerating every subsequence of the candidate; only for short
/// candidates.
pub fn rouge_l(cand: &[String], refs: &[Vec<String>], beta: f64) -> f64 {
    assert!(cand.len() <= 16, "candidate too long for enumeration");
    let mut best = 0.0f64;
    for r in refs {
        let mut lcs = 0;
        for mask in 0u32..(1 << cand.len()) {
            let sub: Vec<&String> = (0..cand.len())
                .filter(|i| mask >> i & 1 == 1)
                .map(|i| &cand[i])
                .collect();
            if sub.len() > lcs && is_subsequence(&sub, r) {
                lcs = sub.len();
            }
        }
        if lcs == 0 {
            continue;
        }
        let p = lcs as f64 / cand.len() as f64;
        let rec = lcs as f64 / r.len() as f64;
        best = best.max((1.0 + beta * beta) * p * rec / (rec + beta * beta * p));
    }
    best
}

/// CIDEr from hash-map tabulated TF-IDF vectors.
pub fn cider(cand: &[String], refs: &[Vec<String>], corpus: &[Vec<String>]) -> f64 {
    let n_docs = corpus.len() as f64;
    let df = |g: &Vec<String>| -> f64 {
        corpus
            .iter()
            .filter(|d| (1..=4).any(|n| grams(d, n).contains(g)))
            .count()
            .max(1) as f64
    };
    let tfidf = |tokens: &[String], n: usize| -> HashMap<Vec<String>, f64> {
        let mut tf: HashMap<Vec<String>, f64> = HashMap::new();
        for g in grams(tokens, n) {
            *tf.entry(g).or_default() += 1.0;
        }
        tf.into_iter()
            .map(|(g, c)| {
                let w = c * ((n_docs + 1.0) / df(&g)).ln();
                (g, w)
            })
            .collect()
    };
    let mut total = 0.0;
    for n in 1..=4 {
        let a = tfidf(cand, n);
        let mut sum = 0.0;
        for r in refs {
            let b = tfidf(r, n);
            sum += if a.is_empty() && b.is_empty() {
                1.0
            } else {
                let dot: f64 = a
                    .iter()
                    .map(|(g, x)| x * b.get(g).copied().unwrap_or(0.0))
                    .sum();
                let na = a.values().map(|x| x * x).sum::<f64>().sqrt();
                let nb = b.values().map(|x| x * x).sum::<f64>().sqrt();
                if na == 0.0 || nb == 0.0 {
                    0.0
                } else {
                    (dot / (na * nb)).clamp(0.0, 1.0)
                }
            };
        }
        total += sum / refs.len() as f64;
    }
    total / 4.0
}
