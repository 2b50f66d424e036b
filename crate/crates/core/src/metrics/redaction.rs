use serde::{Deserialize, Serialize};

use super::MetricError;
use crate::model::EntitySpan;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RedactionWeights {
    pub w_strict: f64,
    pub w_binary: f64,
}

impl Default for RedactionWeights {
    fn default() -> Self {
        RedactionWeights {
            w_strict: 0.7,
            w_binary: 0.3,
        }
    }
}

/// Character-level confusion counts for the strict (tag-aware) and binary
/// (redacted or not) views. Counts from several documents add up, giving a
/// micro average over the whole set.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RedactionCounts {
    pub strict_tp: u64,
    pub strict_fp: u64,
    pub strict_fn: u64,
    pub binary_tp: u64,
    pub binary_fp: u64,
    pub binary_fn: u64,
}

impl std::ops::AddAssign for RedactionCounts {
    fn add_assign(&mut self, o: Self) {
        self.strict_tp += o.strict_tp;
        self.strict_fp += o.strict_fp;
        self.strict_fn += o.strict_fn;
        self.binary_tp += o.binary_tp;
        self.binary_fp += o.binary_fp;
        self.binary_fn += o.binary_fn;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RedactionScore {
    pub strict: f64,
    pub binary: f64,
    pub blended: f64,
}

fn f1(tp: u64, fp: u64, fn_: u64) -> f64 {
    let den = 2 * tp + fp + fn_;
    if den == 0 {
        1.0
    } else {
        2.0 * tp as f64 / den as f64
    }
}

fn paint(
    spans: &[EntitySpan],
    text_len: usize,
    reject_overlap: bool,
) -> Result<Vec<Option<&str>>, MetricError> {
    let mut chars: Vec<Option<&str>> = vec![None; text_len];
    for span in spans {
        if span.start >= span.end || span.end > text_len {
            return Err(MetricError::SpanOutOfBounds {
                start: span.start,
                end: span.end,
                len: text_len,
            });
        }
        for slot in &mut chars[span.start..span.end] {
            match slot {
                Some(_) if reject_overlap => return Err(MetricError::OverlappingReference),
                Some(_) => {}
                None => *slot = Some(span.tag.as_str()),
            }
        }
    }
    Ok(chars)
}

impl RedactionCounts {
    /// Counts for one document. Overlapping predicted spans resolve in favour
    /// of the span listed first.
    pub fn from_spans(
        pred: &[EntitySpan],
        reference: &[EntitySpan],
        text_len: usize,
    ) -> Result<Self, MetricError> {
        let p = paint(pred, text_len, false)?;
        let r = paint(reference, text_len, true)?;
        let mut c = RedactionCounts::default();
        for (a, b) in p.iter().zip(&r) {
            match (a, b) {
                (Some(x), Some(y)) => {
                    c.binary_tp += 1;
                    if x == y {
                        c.strict_tp += 1;
                    } else {
                        c.strict_fp += 1;
                        c.strict_fn += 1;
                    }
                }
                (Some(_), None) => {
                    c.binary_fp += 1;
                    c.strict_fp += 1;
                }
                (None, Some(_)) => {
                    c.binary_fn += 1;
                    c.strict_fn += 1;
                }
                (None, None) => {}
            }
        }
        Ok(c)
    }

    pub fn score(&self, weights: RedactionWeights) -> RedactionScore {
        let strict = f1(self.strict_tp, self.strict_fp, self.strict_fn);
        let binary = f1(self.binary_tp, self.binary_fp, self.binary_fn);
        RedactionScore {
            strict,
            binary,
            blended: weights.w_strict * strict + weights.w_binary * binary,
        }
    }
}

/// Blend of strict (tag must match) and binary character-level F1 for one
/// document.
pub fn blended_redaction_f1(
    pred: &[EntitySpan],
    reference: &[EntitySpan],
    text_len: usize,
    weights: RedactionWeights,
) -> Result<RedactionScore, MetricError> {
    if text_len == 0 {
        return Err(MetricError::InvalidValue(
            "text length must be positive".into(),
        ));
    }
    Ok(RedactionCounts::from_spans(pred, reference, text_len)?.score(weights))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(start: usize, end: usize, tag: &str) -> EntitySpan {
        EntitySpan::new(start, end, tag)
    }

    #[test]
    fn anchors() {
        let w = RedactionWeights::default();
        let reference = vec![s(0, 5, "DATE"), s(10, 14, "AGE")];
        assert_eq!(
            blended_redaction_f1(&reference, &reference, 20, w)
                .unwrap()
                .blended,
            1.0
        );
        let retagged = vec![s(0, 5, "AGE"), s(10, 14, "DATE")];
        let r = blended_redaction_f1(&retagged, &reference, 20, w).unwrap();
        assert_eq!((r.strict, r.binary), (0.0, 1.0));
        assert_eq!(r.blended, 0.7 * 0.0 + 0.3 * 1.0);
    }

    #[test]
    fn earlier_span_wins() {
        let reference = vec![s(0, 4, "DATE")];
        let pred = vec![s(0, 4, "DATE"), s(2, 6, "AGE")];
        let c = RedactionCounts::from_spans(&pred, &reference, 8).unwrap();
        assert_eq!((c.strict_tp, c.strict_fp, c.strict_fn), (4, 2, 0));
    }

    #[test]
    fn bounds_and_overlap_errors() {
        let w = RedactionWeights::default();
        assert!(blended_redaction_f1(&[s(3, 9, "DATE")], &[], 8, w).is_err());
        assert_eq!(
            blended_redaction_f1(&[], &[s(0, 4, "DATE"), s(3, 5, "AGE")], 8, w),
            Err(MetricError::OverlappingReference)
        );
    }
}
