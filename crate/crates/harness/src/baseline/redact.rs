use std::collections::BTreeMap;

use fmbench_core::model::{EntitySpan, ReferenceLabel};

use super::BaselineError;

/// Character class pattern of a string: digits become `9`, uppercase
/// letters `A`, lowercase letters `a`, everything else stays.
pub fn shape(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_digit() {
                '9'
            } else if c.is_ascii_uppercase() {
                'A'
            } else if c.is_ascii_lowercase() {
                'a'
            } else {
                c
            }
        })
        .collect()
}

fn most_frequent(counts: &BTreeMap<String, usize>) -> Option<String> {
    let mut best: Option<(&String, usize)> = None;
    for (tag, &n) in counts {
        if best.is_none_or(|(_, b)| n > b) {
            best = Some((tag, n));
        }
    }
    best.map(|(t, _)| t.clone())
}

/// Rules learned from few-shot spans: every literal span text, and the
/// shape of spans that contain a digit.
#[derive(Debug, Clone, Default)]
pub struct SpanRules {
    /// Literal text to tag, longest literal first.
    pub literals: Vec<(String, String)>,
    pub shapes: BTreeMap<String, String>,
}

impl SpanRules {
    pub fn fit<'a>(
        examples: impl IntoIterator<Item = (&'a str, &'a ReferenceLabel)>,
    ) -> Result<Self, BaselineError> {
        let mut literal_counts: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
        let mut shape_counts: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
        for (text, label) in examples {
            let spans = match label {
                ReferenceLabel::EntitySpans { spans } => spans,
                other => return Err(BaselineError::UnexpectedLabel(other.variant_name())),
            };
            let chars: Vec<char> = text.chars().collect();
            for span in spans {
                if span.end > chars.len() || span.start >= span.end {
                    continue;
                }
                let piece: String = chars[span.start..span.end].iter().collect();
                if piece.chars().any(|c| c.is_ascii_digit()) {
                    *shape_counts
                        .entry(shape(&piece))
                        .or_default()
                        .entry(span.tag.clone())
                        .or_insert(0) += 1;
                } else {
                    *literal_counts
                        .entry(piece)
                        .or_default()
                        .entry(span.tag.clone())
                        .or_insert(0) += 1;
                }
            }
        }
        let mut literals: Vec<(String, String)> = literal_counts
            .iter()
            .filter_map(|(lit, tags)| most_frequent(tags).map(|t| (lit.clone(), t)))
            .collect();
        literals.sort_by(|a, b| {
            b.0.chars()
                .count()
                .cmp(&a.0.chars().count())
                .then(a.0.cmp(&b.0))
        });
        let shapes = shape_counts
            .iter()
            .filter_map(|(s, tags)| most_frequent(tags).map(|t| (s.clone(), t)))
            .collect();
        Ok(SpanRules { literals, shapes })
    }

    /// Non-overlapping spans over `text`, sorted by start. Literals are
    /// matched first at word boundaries; remaining tokens (runs of letters,
    /// digits, `-` and `:`) are tagged by shape.
    pub fn apply(&self, text: &str) -> Vec<EntitySpan> {
        let chars: Vec<char> = text.chars().collect();
        let mut taken = vec![false; chars.len()];
        let mut spans = Vec::new();
        let boundary = |i: usize| i == 0 || i >= chars.len() || !chars[i].is_ascii_alphanumeric();
        for (lit, tag) in &self.literals {
            let pat: Vec<char> = lit.chars().collect();
            let mut i = 0;
            while i + pat.len() <= chars.len() {
                let fits = chars[i..i + pat.len()] == pat[..]
                    && (i == 0 || boundary(i - 1))
                    && boundary(i + pat.len())
                    && !taken[i..i + pat.len()].iter().any(|&t| t);
                if fits {
                    taken[i..i + pat.len()].iter_mut().for_each(|t| *t = true);
                    spans.push(EntitySpan::new(i, i + pat.len(), tag.clone()));
                    i += pat.len();
                } else {
                    i += 1;
                }
            }
        }
        let token_char = |c: char| c.is_ascii_alphanumeric() || c == '-' || c == ':';
        let mut i = 0;
        while i < chars.len() {
            if !token_char(chars[i]) {
                i += 1;
                continue;
            }
            let start = i;
            while i < chars.len() && token_char(chars[i]) {
                i += 1;
            }
            let mut end = i;
            while end > start && !chars[end - 1].is_ascii_alphanumeric() {
                end -= 1;
            }
            if end == start || taken[start..end].iter().any(|&t| t) {
                continue;
            }
            let token: String = chars[start..end].iter().collect();
            if let Some(tag) = self.shapes.get(&shape(&token)) {
                spans.push(EntitySpan::new(start, end, tag.clone()));
            }
        }
        spans.sort_by_key(|s| s.start);
        spans
    }
}
