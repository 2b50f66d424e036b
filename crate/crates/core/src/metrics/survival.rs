use super::{check_finite, check_lengths, MetricError};

/// Harrell's concordance index for right-censored outcomes. Higher risk is
/// taken to mean an earlier event.
///
/// A pair `(i, j)` is comparable when subject `i` had an event and
/// `time_i < time_j`. Two events at the same time are compared in both
/// directions when their risks differ; every other tied-time pair is
/// skipped.
pub fn concordance_index_censored(
    risks: &[f64],
    events: &[bool],
    times: &[f64],
) -> Result<f64, MetricError> {
    check_lengths(risks.len(), events.len())?;
    check_lengths(risks.len(), times.len())?;
    check_finite(risks, "risk")?;
    check_finite(times, "time")?;
    if times.iter().any(|&t| t < 0.0) {
        return Err(MetricError::InvalidValue("negative survival time".into()));
    }

    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]).then(a.cmp(&b)));

    let mut comparable = 0u64;
    let mut concordant_x2 = 0u64;
    for (pos, &i) in order.iter().enumerate() {
        if !events[i] {
            continue;
        }
        for &j in &order[pos + 1..] {
            if times[j] > times[i] {
                comparable += 1;
                concordant_x2 += credit_x2(risks[i], risks[j]);
            } else if events[j] && risks[i] != risks[j] {
                // tied event times: both directions, exactly one concordant
                comparable += 2;
                concordant_x2 += 2;
            }
        }
    }
    if comparable == 0 {
        return Err(MetricError::NoComparablePairs);
    }
    Ok(concordant_x2 as f64 / (2.0 * comparable as f64))
}

fn credit_x2(earlier: f64, later: f64) -> u64 {
    if earlier > later {
        2
    } else if earlier == later {
        1
    } else {
        0
    }
}
