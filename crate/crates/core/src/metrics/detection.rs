use serde::{Deserialize, Serialize};

use super::ranking::{auroc, average_precision_with_total};
use super::MetricError;
use crate::model::{HitRule, Lesion, ScoredPoint};

/// Operating points of the competition performance metric, in false
/// positives per scan.
pub const DEFAULT_FP_RATES: [f64; 7] = [0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl MatchCounts {
    pub fn new(tp: usize, fp: usize, fn_: usize) -> Self {
        MatchCounts { tp, fp, fn_ }
    }
}

impl std::ops::Add for MatchCounts {
    type Output = MatchCounts;

    fn add(self, o: MatchCounts) -> MatchCounts {
        MatchCounts::new(self.tp + o.tp, self.fp + o.fp, self.fn_ + o.fn_)
    }
}

impl std::iter::Sum for MatchCounts {
    fn sum<I: Iterator<Item = MatchCounts>>(iter: I) -> Self {
        iter.fold(MatchCounts::default(), |a, b| a + b)
    }
}

fn distance(a: &[f64], b: &[f64]) -> Result<f64, MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::InvalidValue(format!(
            "point dimensionality {} differs from {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

/// Binds each prediction, in the given order, to its nearest unclaimed hit
/// reference. Returns the bound reference per prediction, and whether the
/// prediction hit any reference at all.
fn greedy_bind<'a>(
    order: impl Iterator<Item = &'a [f64]>,
    refs: &[Vec<f64>],
    radii: &[f64],
) -> Result<Vec<(Option<usize>, bool)>, MetricError> {
    let mut claimed = vec![false; refs.len()];
    let mut out = Vec::new();
    for coord in order {
        let mut any_hit = false;
        let mut best: Option<(f64, usize)> = None;
        for (r, reference) in refs.iter().enumerate() {
            let d = distance(coord, reference)?;
            if d > radii[r] {
                continue;
            }
            any_hit = true;
            if claimed[r] {
                continue;
            }
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, r));
            }
        }
        if let Some((_, r)) = best {
            claimed[r] = true;
        }
        out.push((best.map(|b| b.1), any_hit));
    }
    Ok(out)
}

/// Counts hits with a fixed radius. See [`match_points_with_radii`].
pub fn match_points(
    preds: &[ScoredPoint],
    refs: &[Vec<f64>],
    radius: f64,
) -> Result<MatchCounts, MetricError> {
    match_points_with_radii(preds, refs, &vec![radius; refs.len()])
}

/// Counts true positives, false positives and false negatives.
///
/// A prediction hits a reference within that reference's radius. Predictions
/// are processed in input order, each claiming its nearest unclaimed hit
/// reference (lower index on ties). Several predictions on one reference
/// count as a single true positive; a prediction covering N references
/// claims one, leaving N-1 false negatives unless other predictions claim
/// them. Predictions that hit nothing are false positives.
pub fn match_points_with_radii(
    preds: &[ScoredPoint],
    refs: &[Vec<f64>],
    radii: &[f64],
) -> Result<MatchCounts, MetricError> {
    if radii.len() != refs.len() {
        return Err(MetricError::LengthMismatch(radii.len(), refs.len()));
    }
    if radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(MetricError::NonPositiveRadius);
    }
    let bound = greedy_bind(preds.iter().map(|p| p.coord.as_slice()), refs, radii)?;
    let tp = bound.iter().filter(|b| b.0.is_some()).count();
    let fp = bound.iter().filter(|b| !b.1).count();
    Ok(MatchCounts::new(tp, fp, refs.len() - tp))
}

/// F1 from match counts; 1.0 when there is nothing to find and nothing was
/// predicted.
pub fn detection_f1(counts: MatchCounts) -> f64 {
    let den = 2 * counts.tp + counts.fp + counts.fn_;
    if den == 0 {
        1.0
    } else {
        2.0 * counts.tp as f64 / den as f64
    }
}

fn radius_for(rule: HitRule, lesion: &Lesion) -> f64 {
    match rule {
        HitRule::FixedRadius { radius } => radius,
        HitRule::HalfEquivalentDiameter => lesion.equivalent_diameter_mm / 2.0,
    }
}

/// Labels each candidate as a true detection if it claims a lesion.
/// Candidates are processed by descending confidence (input order on ties),
/// each claiming its nearest unclaimed lesion within the hit radius.
pub fn lesion_hit_labels(
    candidates: &[ScoredPoint],
    lesions: &[Lesion],
    rule: HitRule,
) -> Result<Vec<bool>, MetricError> {
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| {
        candidates[b]
            .confidence
            .total_cmp(&candidates[a].confidence)
            .then(a.cmp(&b))
    });
    let refs: Vec<Vec<f64>> = lesions.iter().map(|l| l.coord.clone()).collect();
    let radii: Vec<f64> = lesions.iter().map(|l| radius_for(rule, l)).collect();
    let bound = greedy_bind(
        order.iter().map(|&i| candidates[i].coord.as_slice()),
        &refs,
        &radii,
    )?;
    let mut labels = vec![false; candidates.len()];
    for (k, &i) in order.iter().enumerate() {
        labels[i] = bound[k].0.is_some();
    }
    Ok(labels)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrocConfig {
    pub fp_rates: Vec<f64>,
    pub hit_rule: HitRule,
}

impl Default for FrocConfig {
    fn default() -> Self {
        FrocConfig {
            fp_rates: DEFAULT_FP_RATES.to_vec(),
            hit_rule: HitRule::HalfEquivalentDiameter,
        }
    }
}

impl FrocConfig {
    pub fn check(&self) -> Result<(), MetricError> {
        if self.fp_rates.is_empty() {
            return Err(MetricError::InvalidValue("no fp rates".into()));
        }
        if self.fp_rates.iter().any(|r| !(r.is_finite() && *r > 0.0))
            || self.fp_rates.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(MetricError::InvalidValue(
                "fp rates must be positive and strictly increasing".into(),
            ));
        }
        if let HitRule::FixedRadius { radius } = self.hit_rule {
            if !(radius.is_finite() && radius > 0.0) {
                return Err(MetricError::NonPositiveRadius);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrocResult {
    pub cpm: f64,
    /// Sensitivity at each configured fp rate.
    pub sensitivities: Vec<f64>,
    /// Operating points `(fp_per_scan, sensitivity)`, one per distinct
    /// confidence threshold, from the strictest threshold down.
    pub curve: Vec<(f64, f64)>,
}

/// FROC analysis and its competition performance metric.
///
/// A lesion counts as found at threshold `t` once any candidate with
/// confidence `>= t` lies within its hit radius. Candidates that hit no
/// lesion are false positives; extra hits on a found lesion are neither.
/// The sensitivity at a target rate is the best sensitivity among operating
/// points whose fp rate does not exceed it, or 0 if there are none.
pub fn froc_cpm(
    per_case_candidates: &[Vec<ScoredPoint>],
    per_case_refs: &[Vec<Lesion>],
    config: &FrocConfig,
) -> Result<FrocResult, MetricError> {
    config.check()?;
    if per_case_candidates.len() != per_case_refs.len() {
        return Err(MetricError::LengthMismatch(
            per_case_candidates.len(),
            per_case_refs.len(),
        ));
    }
    let n_cases = per_case_refs.len();
    let total_lesions: usize = per_case_refs.iter().map(Vec::len).sum();
    if total_lesions == 0 {
        return Err(MetricError::NoReferences);
    }

    // highest confidence at which each lesion is found, and the confidences
    // of false-positive candidates
    let mut lesion_found_at: Vec<f64> = Vec::with_capacity(total_lesions);
    let mut fp_confidences: Vec<f64> = Vec::new();
    let mut thresholds: Vec<f64> = Vec::new();
    for (cands, lesions) in per_case_candidates.iter().zip(per_case_refs) {
        let mut best = vec![f64::NEG_INFINITY; lesions.len()];
        for cand in cands {
            if !(0.0..=1.0).contains(&cand.confidence) {
                return Err(MetricError::InvalidValue(format!(
                    "confidence {} outside [0, 1]",
                    cand.confidence
                )));
            }
            thresholds.push(cand.confidence);
            let mut hit = false;
            for (l, lesion) in lesions.iter().enumerate() {
                if distance(&cand.coord, &lesion.coord)? <= radius_for(config.hit_rule, lesion) {
                    hit = true;
                    best[l] = best[l].max(cand.confidence);
                }
            }
            if !hit {
                fp_confidences.push(cand.confidence);
            }
        }
        lesion_found_at.extend(best);
    }
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();

    let curve: Vec<(f64, f64)> = thresholds
        .iter()
        .map(|&t| {
            let fps = fp_confidences.iter().filter(|&&c| c >= t).count();
            let found = lesion_found_at.iter().filter(|&&c| c >= t).count();
            (
                fps as f64 / n_cases as f64,
                found as f64 / total_lesions as f64,
            )
        })
        .collect();

    let sensitivities: Vec<f64> = config
        .fp_rates
        .iter()
        .map(|&rate| {
            curve
                .iter()
                .filter(|(fp, _)| *fp <= rate)
                .map(|&(_, s)| s)
                .fold(0.0, f64::max)
        })
        .collect();
    let cpm = sensitivities.iter().sum::<f64>() / sensitivities.len() as f64;
    Ok(FrocResult {
        cpm,
        sensitivities,
        curve,
    })
}

/// Mean of the case-level AUROC and the lesion-level average precision.
///
/// Lesion candidates are labeled with [`lesion_hit_labels`]; lesions that no
/// candidate claims still count in the AP denominator.
pub fn detection_auroc_ap(
    case_probs: &[(f64, bool)],
    lesion_candidates: &[Vec<ScoredPoint>],
    lesion_refs: &[Vec<Lesion>],
    rule: HitRule,
) -> Result<f64, MetricError> {
    if lesion_candidates.len() != lesion_refs.len() {
        return Err(MetricError::LengthMismatch(
            lesion_candidates.len(),
            lesion_refs.len(),
        ));
    }
    if case_probs.len() != lesion_refs.len() {
        return Err(MetricError::LengthMismatch(
            case_probs.len(),
            lesion_refs.len(),
        ));
    }
    let scores: Vec<f64> = case_probs.iter().map(|c| c.0).collect();
    let labels: Vec<bool> = case_probs.iter().map(|c| c.1).collect();
    let case_auc = auroc(&scores, &labels)?;

    let mut confidences = Vec::new();
    let mut hits = Vec::new();
    for (cands, lesions) in lesion_candidates.iter().zip(lesion_refs) {
        hits.extend(lesion_hit_labels(cands, lesions, rule)?);
        confidences.extend(cands.iter().map(|c| c.confidence));
    }
    let total: usize = lesion_refs.iter().map(Vec::len).sum();
    let ap = average_precision_with_total(&confidences, &hits, total)?;
    Ok(0.5 * case_auc + 0.5 * ap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(x: f64, y: f64) -> ScoredPoint {
        ScoredPoint::new(vec![x, y], 1.0)
    }

    fn lesion(coord: Vec<f64>, d: f64) -> Lesion {
        Lesion {
            coord,
            equivalent_diameter_mm: d,
        }
    }

    #[test]
    fn many_predictions_on_one_reference() {
        let counts = match_points(&[p(0.0, 0.0), p(1.0, 0.0)], &[vec![0.5, 0.0]], 2.0).unwrap();
        assert_eq!(counts, MatchCounts::new(1, 0, 0));
    }

    #[test]
    fn one_prediction_on_two_references() {
        let counts = match_points(&[p(0.0, 0.0)], &[vec![1.0, 0.0], vec![-1.0, 0.0]], 2.0).unwrap();
        assert_eq!(counts, MatchCounts::new(1, 0, 1));
    }

    #[test]
    fn no_predictions() {
        let refs = vec![vec![0.0, 0.0]; 3];
        assert_eq!(
            match_points(&[], &refs, 1.0).unwrap(),
            MatchCounts::new(0, 0, 3)
        );
        assert!(match_points(&[], &refs, 0.0).is_err());
    }

    #[test]
    fn f1_anchors() {
        assert!((detection_f1(MatchCounts::new(1, 0, 1)) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(detection_f1(MatchCounts::new(0, 0, 0)), 1.0);
        assert_eq!(detection_f1(MatchCounts::new(0, 5, 3)), 0.0);
    }

    #[test]
    fn cpm_perfect_and_zero() {
        let refs = vec![
            vec![lesion(vec![0.0, 0.0, 0.0], 4.0)],
            vec![lesion(vec![5.0, 5.0, 5.0], 2.0)],
        ];
        let perfect = vec![
            vec![ScoredPoint::new(vec![0.0, 0.0, 1.0], 1.0)],
            vec![ScoredPoint::new(vec![5.0, 5.0, 5.0], 1.0)],
        ];
        let r = froc_cpm(&perfect, &refs, &FrocConfig::default()).unwrap();
        assert_eq!(r.cpm, 1.0);
        let misses = vec![
            vec![ScoredPoint::new(vec![9.0, 9.0, 9.0], 0.9)],
            vec![ScoredPoint::new(vec![0.0, 0.0, 0.0], 0.4)],
        ];
        let r = froc_cpm(&misses, &refs, &FrocConfig::default()).unwrap();
        assert_eq!(r.cpm, 0.0);
        assert!(froc_cpm(&[vec![]], &[vec![]], &FrocConfig::default()).is_err());
    }

    #[test]
    fn cpm_hand_enumerated() {
        // four cases, four lesions; thresholds 0.9, 0.8, 0.6, 0.3
        let refs = vec![
            vec![lesion(vec![0.0, 0.0], 2.0)],
            vec![lesion(vec![0.0, 0.0], 2.0)],
            vec![lesion(vec![0.0, 0.0], 2.0), lesion(vec![10.0, 0.0], 2.0)],
            vec![],
        ];
        let c = |x: f64, conf: f64| ScoredPoint::new(vec![x, 0.0], conf);
        let cands = vec![
            vec![c(0.0, 0.9), c(5.0, 0.8)],
            vec![c(0.5, 0.6)],
            vec![c(10.0, 0.3), c(20.0, 0.6)],
            vec![c(3.0, 0.3)],
        ];
        let r = froc_cpm(&cands, &refs, &FrocConfig::default()).unwrap();
        assert_eq!(
            r.curve,
            vec![(0.0, 0.25), (0.25, 0.25), (0.5, 0.5), (0.75, 0.75)]
        );
        // rates 1/8, 1/4, 1/2, 1, 2, 4, 8
        assert_eq!(
            r.sensitivities,
            vec![0.25, 0.25, 0.5, 0.75, 0.75, 0.75, 0.75]
        );
        assert!((r.cpm - 4.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn auroc_ap_average() {
        let refs = vec![vec![lesion(vec![0.0, 0.0], 2.0)], vec![]];
        let cands = vec![vec![ScoredPoint::new(vec![0.0, 0.0], 0.9)], vec![]];
        let v = detection_auroc_ap(
            &[(0.8, true), (0.1, false)],
            &cands,
            &refs,
            HitRule::HalfEquivalentDiameter,
        )
        .unwrap();
        assert_eq!(v, 1.0);
    }

    proptest! {
        #[test]
        fn tp_plus_fn_is_reference_count(
            preds in prop::collection::vec((0.0f64..10.0, 0.0f64..10.0), 0..12),
            refs in prop::collection::vec((0.0f64..10.0, 0.0f64..10.0), 0..12),
            radius in 0.1f64..4.0,
        ) {
            let preds: Vec<ScoredPoint> = preds.iter().map(|&(x, y)| p(x, y)).collect();
            let refs: Vec<Vec<f64>> = refs.iter().map(|&(x, y)| vec![x, y]).collect();
            let c = match_points(&preds, &refs, radius).unwrap();
            prop_assert_eq!(c.tp + c.fn_, refs.len());
            prop_assert!(c.tp + c.fp <= preds.len());
            let f1 = detection_f1(c);
            prop_assert!((0.0..=1.0).contains(&f1));
        }

        #[test]
        fn froc_curve_is_monotone(
            cands in prop::collection::vec((0.0f64..10.0, 0u8..=10), 1..20),
            lesions in prop::collection::vec(0.0f64..10.0, 1..6),
        ) {
            let cands = vec![cands
                .iter()
                .map(|&(x, c)| ScoredPoint::new(vec![x], c as f64 / 10.0))
                .collect::<Vec<_>>()];
            let refs = vec![lesions.iter().map(|&x| lesion(vec![x], 1.0)).collect::<Vec<_>>()];
            let r = froc_cpm(&cands, &refs, &FrocConfig::default()).unwrap();
            for w in r.curve.windows(2) {
                prop_assert!(w[1].0 >= w[0].0 && w[1].1 >= w[0].1);
            }
            for w in r.sensitivities.windows(2) {
                prop_assert!(w[1] >= w[0]);
            }
            prop_assert!((0.0..=1.0).contains(&r.cpm));
        }
    }
}
