use serde::{Deserialize, Serialize};

use super::AdaptorError;

/// Per-dimension z-scoring fitted on few-shot features only. Dimensions that
/// are constant across the few-shot set are dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub dim: usize,
    pub kept: Vec<usize>,
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit<'a, I>(rows: I, dim: usize) -> Result<Self, AdaptorError>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let rows: Vec<&[f64]> = rows.into_iter().collect();
        if rows.is_empty() {
            return Err(AdaptorError::EmptyFewShot);
        }
        for row in &rows {
            if row.len() != dim {
                return Err(AdaptorError::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
        }
        let n = rows.len() as f64;
        let mut kept = Vec::new();
        let mut mean = Vec::new();
        let mut scale = Vec::new();
        for j in 0..dim {
            let first = rows[0][j];
            if rows.iter().all(|r| r[j] == first) {
                continue;
            }
            let m = rows.iter().map(|r| r[j]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r[j] - m) * (r[j] - m)).sum::<f64>() / n;
            let sd = var.sqrt();
            if !(sd.is_finite() && sd > 0.0) {
                continue;
            }
            kept.push(j);
            mean.push(m);
            scale.push(sd);
        }
        Ok(Standardizer {
            dim,
            kept,
            mean,
            scale,
        })
    }

    pub fn transform(&self, row: &[f64]) -> Result<Vec<f64>, AdaptorError> {
        if row.len() != self.dim {
            return Err(AdaptorError::DimensionMismatch {
                expected: self.dim,
                got: row.len(),
            });
        }
        Ok(self
            .kept
            .iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(&j, (m, s))| (row[j] - m) / s)
            .collect())
    }

    pub fn output_dim(&self) -> usize {
        self.kept.len()
    }
}
