use serde::{Deserialize, Serialize};

use super::{check_lengths, MetricError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaWeighting {
    None,
    Quadratic,
}

impl KappaWeighting {
    fn weight(self, i: usize, j: usize, categories: usize) -> f64 {
        match self {
            KappaWeighting::None => {
                if i == j {
                    0.0
                } else {
                    1.0
                }
            }
            KappaWeighting::Quadratic => {
                let d = (i as f64 - j as f64) / (categories as f64 - 1.0);
                d * d
            }
        }
    }
}

/// Cohen's kappa over `categories` labels `0..categories`.
///
/// When the expected disagreement is zero (both raters constant on the same
/// category) the result is 1.0 for identical ratings.
pub fn cohen_kappa(
    preds: &[i64],
    refs: &[i64],
    categories: usize,
    weighting: KappaWeighting,
) -> Result<f64, MetricError> {
    check_lengths(preds.len(), refs.len())?;
    if categories < 2 {
        return Err(MetricError::InvalidValue(format!(
            "kappa needs at least 2 categories, got {categories}"
        )));
    }
    let index = |label: i64| -> Result<usize, MetricError> {
        if label < 0 || label as usize >= categories {
            Err(MetricError::LabelOutOfRange { label, categories })
        } else {
            Ok(label as usize)
        }
    };

    let mut observed = vec![0u64; categories * categories];
    let mut row = vec![0u64; categories];
    let mut col = vec![0u64; categories];
    for (&p, &r) in preds.iter().zip(refs) {
        let (i, j) = (index(r)?, index(p)?);
        observed[i * categories + j] += 1;
        row[i] += 1;
        col[j] += 1;
    }

    let n = preds.len() as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..categories {
        for j in 0..categories {
            let w = weighting.weight(i, j, categories);
            if w == 0.0 {
                continue;
            }
            num += w * observed[i * categories + j] as f64;
            den += w * (row[i] as f64 * col[j] as f64) / n;
        }
    }
    if den == 0.0 {
        return if preds == refs {
            Ok(1.0)
        } else {
            Err(MetricError::DegenerateMarginals)
        };
    }
    Ok(1.0 - num / den)
}

/// Unweighted kappa over the pooled left and right label streams.
pub fn kappa_pooled_pairs(
    preds: &[(i64, i64)],
    refs: &[(i64, i64)],
    categories: usize,
) -> Result<f64, MetricError> {
    check_lengths(preds.len(), refs.len())?;
    let pooled = |pairs: &[(i64, i64)]| -> Vec<i64> {
        pairs
            .iter()
            .map(|p| p.0)
            .chain(pairs.iter().map(|p| p.1))
            .collect()
    };
    cohen_kappa(
        &pooled(preds),
        &pooled(refs),
        categories,
        KappaWeighting::None,
    )
}
