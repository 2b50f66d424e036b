use serde::{Deserialize, Serialize};

use super::{check_finite, check_lengths, MetricError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RsmapesConfig {
    pub epsilon: f64,
}

impl RsmapesConfig {
    pub fn new(epsilon: f64) -> Result<Self, MetricError> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(MetricError::InvalidValue(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        Ok(RsmapesConfig { epsilon })
    }
}

/// Per-case error with a tolerance dead zone:
/// `max(0, |p - r| - eps) / ((|p| + |r|) / 2 + eps)`, clipped to `[0, 1]`.
pub fn rsmapes_case_error(pred: f64, reference: f64, epsilon: f64) -> f64 {
    let excess = ((pred - reference).abs() - epsilon).max(0.0);
    let scale = (pred.abs() + reference.abs()) / 2.0 + epsilon;
    (excess / scale).clamp(0.0, 1.0)
}

/// Robust symmetric mean absolute percentage error score, `1 - mean error`.
pub fn rsmapes(preds: &[f64], refs: &[f64], config: RsmapesConfig) -> Result<f64, MetricError> {
    check_lengths(preds.len(), refs.len())?;
    RsmapesConfig::new(config.epsilon)?;
    check_finite(preds, "prediction")?;
    check_finite(refs, "reference")?;
    if refs.iter().any(|&r| r < 0.0) {
        return Err(MetricError::InvalidValue("negative reference value".into()));
    }
    let total: f64 = preds
        .iter()
        .zip(refs)
        .map(|(&p, &r)| rsmapes_case_error(p, r, config.epsilon))
        .sum();
    Ok(1.0 - total / preds.len() as f64)
}

/// Unweighted mean of per-variable RSMAPES scores.
pub fn rsmapes_multi(per_variable: &[(Vec<f64>, Vec<f64>, f64)]) -> Result<f64, MetricError> {
    if per_variable.is_empty() {
        return Err(MetricError::Empty);
    }
    let mut sum = 0.0;
    for (preds, refs, eps) in per_variable {
        sum += rsmapes(preds, refs, RsmapesConfig::new(*eps)?)?;
    }
    Ok(sum / per_variable.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn anchors() {
        let c = RsmapesConfig::new(4.0).unwrap();
        assert_eq!(rsmapes(&[10.0, 20.0], &[10.0, 20.0], c).unwrap(), 1.0);
        assert_eq!(rsmapes(&[13.0, 16.5], &[10.0, 20.0], c).unwrap(), 1.0);
        assert!(rsmapes(&[], &[], c).is_err());
        assert!(RsmapesConfig::new(0.0).is_err());
    }

    #[test]
    fn multi_is_mean() {
        let v = rsmapes_multi(&[
            (vec![1.0], vec![1.0], 0.4),
            (vec![2.0, 3.0], vec![2.0, 3.0], 0.04),
        ])
        .unwrap();
        assert_eq!(v, 1.0);
    }

    proptest! {
        #[test]
        fn error_grows_with_distance(r in 0.0f64..100.0, d1 in 0.0f64..50.0, extra in 0.0f64..50.0, eps in 0.01f64..5.0) {
            let near = rsmapes_case_error(r + d1, r, eps);
            let far = rsmapes_case_error(r + d1 + extra, r, eps);
            prop_assert!(far >= near - 1e-15);
            prop_assert!((0.0..=1.0).contains(&near));
        }
    }
}
