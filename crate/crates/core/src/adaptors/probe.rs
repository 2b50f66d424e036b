use serde::{Deserialize, Serialize};

use super::standardize::Standardizer;
use super::target::{class_count, targets, Target};
use super::{argmax_smallest, AdaptorError, Hyperparams};
use crate::model::{OutputKind, Prediction, ReferenceLabel, Representation, TaskDefinition};

/// Loss optimized by the linear probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "loss", rename_all = "snake_case")]
pub enum ProbeObjective {
    /// Multinomial logistic loss. Parameters are `classes * dim` weights
    /// (row per class) followed by `classes` biases.
    Softmax { classes: usize },
    /// Half mean squared error of an affine map. Parameters are `dim`
    /// weights followed by one bias.
    Affine,
}

impl ProbeObjective {
    pub fn param_count(self, dim: usize) -> usize {
        match self {
            ProbeObjective::Softmax { classes } => classes * (dim + 1),
            ProbeObjective::Affine => dim + 1,
        }
    }
}

/// Mean loss over `(xs, ys)` plus `l2 / 2 * |weights|^2`, and its gradient.
/// For the softmax objective `ys` holds class indices.
pub fn probe_loss_and_grad(
    objective: ProbeObjective,
    params: &[f64],
    xs: &[Vec<f64>],
    ys: &[f64],
    l2: f64,
) -> (f64, Vec<f64>) {
    let n = xs.len() as f64;
    let dim = xs.first().map_or(0, |x| x.len());
    assert_eq!(params.len(), objective.param_count(dim), "parameter count");
    let mut grad = vec![0.0; params.len()];
    let mut loss = 0.0;
    match objective {
        ProbeObjective::Softmax { classes } => {
            let bias = classes * dim;
            let mut logits = vec![0.0; classes];
            for (x, &y) in xs.iter().zip(ys) {
                for (c, logit) in logits.iter_mut().enumerate() {
                    let w = &params[c * dim..(c + 1) * dim];
                    *logit = params[bias + c] + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                }
                let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let log_z = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
                let y = y as usize;
                loss += log_z - logits[y];
                for c in 0..classes {
                    let g = (logits[c] - log_z).exp() - if c == y { 1.0 } else { 0.0 };
                    for j in 0..dim {
                        grad[c * dim + j] += g * x[j] / n;
                    }
                    grad[bias + c] += g / n;
                }
            }
            loss /= n;
            for i in 0..bias {
                loss += 0.5 * l2 * params[i] * params[i];
                grad[i] += l2 * params[i];
            }
        }
        ProbeObjective::Affine => {
            for (x, &y) in xs.iter().zip(ys) {
                let r =
                    params[dim] + params[..dim].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() - y;
                loss += 0.5 * r * r;
                for j in 0..dim {
                    grad[j] += r * x[j] / n;
                }
                grad[dim] += r / n;
            }
            loss /= n;
            for i in 0..dim {
                loss += 0.5 * l2 * params[i] * params[i];
                grad[i] += l2 * params[i];
            }
        }
    }
    (loss, grad)
}

/// Linear model trained by full-batch gradient descent from zero weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeModel {
    pub objective: ProbeObjective,
    pub standardizer: Standardizer,
    pub params: Vec<f64>,
    /// Training loss before each update, one entry per epoch.
    pub loss_curve: Vec<f64>,
}

impl ProbeModel {
    pub fn fit(
        few_shot: &[(Representation, ReferenceLabel)],
        task: &TaskDefinition,
        hp: &Hyperparams,
    ) -> Result<Self, AdaptorError> {
        let features: Vec<&[f64]> = few_shot
            .iter()
            .map(|(r, _)| {
                r.case_features.as_deref().ok_or_else(|| {
                    AdaptorError::IncompatibleRepresentation(format!(
                        "{} is not case-level",
                        r.case_id
                    ))
                })
            })
            .collect::<Result<_, _>>()?;
        let standardizer = Standardizer::fit(features.iter().copied(), features[0].len())?;
        let xs: Vec<Vec<f64>> = features
            .iter()
            .map(|f| standardizer.transform(f))
            .collect::<Result<_, _>>()?;
        let mut ys = Vec::with_capacity(xs.len());
        for t in targets(few_shot, task)? {
            ys.push(match t {
                Target::Class { label } => label as f64,
                Target::Binary { positive } => positive as u8 as f64,
                Target::Scalar { value } => value,
                _ => {
                    return Err(AdaptorError::UnsupportedTask {
                        strategy: "linear_probe".into(),
                        output: task.output.as_str().into(),
                    })
                }
            });
        }
        let objective = match task.output {
            OutputKind::ContinuousValue => ProbeObjective::Affine,
            _ => ProbeObjective::Softmax {
                classes: class_count(task).unwrap_or(2),
            },
        };
        let mut params = vec![0.0; objective.param_count(standardizer.output_dim())];
        let mut loss_curve = Vec::with_capacity(hp.epochs);
        for _ in 0..hp.epochs {
            let (loss, grad) = probe_loss_and_grad(objective, &params, &xs, &ys, hp.l2);
            loss_curve.push(loss);
            for (p, g) in params.iter_mut().zip(&grad) {
                *p -= hp.learning_rate * g;
            }
        }
        Ok(ProbeModel {
            objective,
            standardizer,
            params,
            loss_curve,
        })
    }

    pub fn predict(
        &self,
        features: &[f64],
        task: &TaskDefinition,
    ) -> Result<(Prediction, Option<Vec<f64>>), AdaptorError> {
        let x = self.standardizer.transform(features)?;
        let dim = x.len();
        match self.objective {
            ProbeObjective::Affine => {
                let value = self.params[dim]
                    + self.params[..dim]
                        .iter()
                        .zip(&x)
                        .map(|(a, b)| a * b)
                        .sum::<f64>();
                Ok((Prediction::Continuous { value }, None))
            }
            ProbeObjective::Softmax { classes } => {
                let logits: Vec<f64> = (0..classes)
                    .map(|c| {
                        self.params[classes * dim + c]
                            + self.params[c * dim..(c + 1) * dim]
                                .iter()
                                .zip(&x)
                                .map(|(a, b)| a * b)
                                .sum::<f64>()
                    })
                    .collect();
                let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
                let total: f64 = e.iter().sum();
                let probs: Vec<f64> = e.into_iter().map(|v| v / total).collect();
                let prediction = if task.output == OutputKind::Probability {
                    Prediction::Probability { value: probs[1] }
                } else {
                    Prediction::ClassLabel {
                        label: argmax_smallest(&probs) as i64,
                    }
                };
                Ok((prediction, Some(probs)))
            }
        }
    }
}
