use std::collections::BTreeMap;

use super::{check_finite, check_lengths, MetricError};

/// Area under the ROC curve as the Mann–Whitney statistic, with half credit
/// for tied scores.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64, MetricError> {
    check_lengths(scores.len(), labels.len())?;
    check_finite(scores, "score")?;
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricError::AurocUndefined);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Twice the rank sum of the positives, with tied groups sharing the
    // average rank; kept in integers so the result is exact up to the final
    // division.
    let mut rank_sum_x2: u128 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let positives = order[start..end].iter().filter(|&&i| labels[i]).count() as u128;
        // ranks start+1 ..= end, average (start + 1 + end) / 2
        rank_sum_x2 += positives * (start as u128 + 1 + end as u128);
        start = end;
    }
    let p = n_pos as u128;
    let u_x2 = rank_sum_x2 - p * (p + 1);
    Ok(u_x2 as f64 / (2.0 * n_pos as f64 * n_neg as f64))
}

/// Average precision over descending score thresholds, treating each group
/// of tied scores as a single threshold.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> Result<f64, MetricError> {
    let positives = labels.iter().filter(|&&l| l).count();
    average_precision_with_total(scores, labels, positives)
}

/// Average precision where `total_positives` may exceed the positives among
/// the scored items; the missing ones are never recalled.
pub fn average_precision_with_total(
    scores: &[f64],
    labels: &[bool],
    total_positives: usize,
) -> Result<f64, MetricError> {
    if scores.len() != labels.len() {
        return Err(MetricError::LengthMismatch(scores.len(), labels.len()));
    }
    check_finite(scores, "score")?;
    let scored_positives = labels.iter().filter(|&&l| l).count();
    if total_positives == 0 {
        return Err(MetricError::NoPositives);
    }
    if scored_positives > total_positives {
        return Err(MetricError::InvalidValue(format!(
            "{scored_positives} scored positives exceed the declared total {total_positives}"
        )));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut tp = 0usize;
    let mut seen = 0usize;
    let mut ap = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let group_tp = order[start..end].iter().filter(|&&i| labels[i]).count();
        tp += group_tp;
        seen += end - start;
        if group_tp > 0 {
            ap += (group_tp as f64 / total_positives as f64) * (tp as f64 / seen as f64);
        }
        start = end;
    }
    Ok(ap)
}

/// Unweighted mean of per-label AUROC values.
pub fn macro_auroc(
    per_label: &BTreeMap<String, (Vec<f64>, Vec<bool>)>,
) -> Result<f64, MetricError> {
    if per_label.is_empty() {
        return Err(MetricError::Empty);
    }
    let mut sum = 0.0;
    for (name, (scores, labels)) in per_label {
        sum += auroc(scores, labels).map_err(|e| match e {
            MetricError::AurocUndefined => MetricError::DegenerateLabel(name.clone()),
            other => other,
        })?;
    }
    Ok(sum / per_label.len() as f64)
}
