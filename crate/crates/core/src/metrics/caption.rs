//! Caption similarity: BLEU-4, ROUGE-L, CIDEr, a resource-free METEOR and a
//! greedy token-embedding score, averaged into one composite.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::MetricError;

/// Numerator used for n-gram orders with no clipped match.
pub const BLEU_SMOOTHING_EPSILON: f64 = 0.1;
pub const ROUGE_BETA: f64 = 1.2;
const MAX_ORDER: usize = 4;

/// Lowercased alphanumeric tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn ngrams(tokens: &[String], n: usize) -> BTreeMap<&[String], usize> {
    let mut out = BTreeMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *out.entry(w).or_insert(0) += 1;
        }
    }
    out
}

/// BLEU with modified n-gram precision up to order `min(4, |candidate|)`,
/// geometric mean, brevity penalty against the closest reference length
/// (shorter on ties), and epsilon smoothing of zero matches.
pub fn bleu4(cand: &[String], refs: &[Vec<String>]) -> f64 {
    if cand.is_empty() || refs.is_empty() {
        return 0.0;
    }
    let orders = MAX_ORDER.min(cand.len());
    let mut log_sum = 0.0;
    for n in 1..=orders {
        let counts = ngrams(cand, n);
        let ref_counts: Vec<_> = refs.iter().map(|r| ngrams(r, n)).collect();
        let mut clipped = 0usize;
        for (gram, &c) in &counts {
            let max_ref = ref_counts
                .iter()
                .map(|rc| rc.get(gram).copied().unwrap_or(0))
                .max()
                .unwrap_or(0);
            clipped += c.min(max_ref);
        }
        let total = cand.len() + 1 - n;
        let p = if clipped == 0 {
            BLEU_SMOOTHING_EPSILON / total as f64
        } else {
            clipped as f64 / total as f64
        };
        log_sum += p.ln();
    }
    let c = cand.len();
    let r = refs
        .iter()
        .map(Vec::len)
        .min_by_key(|&len| (len.abs_diff(c), len))
        .unwrap_or(c);
    let bp = if c > r {
        1.0
    } else {
        (1.0 - r as f64 / c as f64).exp()
    };
    (bp * (log_sum / orders as f64).exp()).clamp(0.0, 1.0)
}

fn lcs(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L F-measure, best over references.
pub fn rouge_l(cand: &[String], refs: &[Vec<String>]) -> f64 {
    let beta2 = ROUGE_BETA * ROUGE_BETA;
    refs.iter()
        .map(|r| {
            let l = lcs(cand, r);
            if l == 0 {
                return 0.0;
            }
            let p = l as f64 / cand.len() as f64;
            let rec = l as f64 / r.len() as f64;
            (1.0 + beta2) * p * rec / (rec + beta2 * p)
        })
        .fold(0.0, f64::max)
}

/// Document frequencies of every n-gram, order 1 to 4, over the corpus.
fn document_frequencies(corpus: &[Vec<String>]) -> BTreeMap<Vec<String>, usize> {
    let mut df = BTreeMap::new();
    for doc in corpus {
        let mut seen = BTreeSet::new();
        for n in 1..=MAX_ORDER {
            for gram in ngrams(doc, n).into_keys() {
                seen.insert(gram.to_vec());
            }
        }
        for gram in seen {
            *df.entry(gram).or_insert(0) += 1;
        }
    }
    df
}

/// CIDEr: mean over orders 1..4 of the TF-IDF cosine between candidate and
/// each reference, averaged over references. IDF is
/// `ln((N + 1) / max(df, 1))` for a corpus of N documents, so it stays
/// positive on tiny corpora. An order where neither side has n-grams counts
/// as a perfect match.
pub fn cider(
    cand: &[String],
    refs: &[Vec<String>],
    corpus: &[Vec<String>],
) -> Result<f64, MetricError> {
    if corpus.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    if refs.is_empty() {
        return Err(MetricError::Empty);
    }
    let df = document_frequencies(corpus);
    let n_docs = corpus.len() as f64;
    let idf = |gram: &[String]| -> f64 {
        let d = df.get(gram).copied().unwrap_or(0).max(1) as f64;
        ((n_docs + 1.0) / d).ln()
    };
    let vector = |tokens: &[String], n: usize| -> BTreeMap<Vec<String>, f64> {
        ngrams(tokens, n)
            .into_iter()
            .map(|(g, c)| (g.to_vec(), c as f64 * idf(g)))
            .collect()
    };

    let mut total = 0.0;
    for n in 1..=MAX_ORDER {
        let vc = vector(cand, n);
        let mut order_sum = 0.0;
        for r in refs {
            let vr = vector(r, n);
            order_sum += cosine(&vc, &vr);
        }
        total += order_sum / refs.len() as f64;
    }
    Ok(total / MAX_ORDER as f64)
}

fn cosine(a: &BTreeMap<Vec<String>, f64>, b: &BTreeMap<Vec<String>, f64>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let dot: f64 = a.iter().filter_map(|(g, x)| b.get(g).map(|y| x * y)).sum();
    let na: f64 = a.values().map(|x| x * x).sum();
    let nb: f64 = b.values().map(|y| y * y).sum();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb).sqrt()).clamp(0.0, 1.0)
}

/// METEOR on exact unigram matches only: recall-weighted harmonic mean
/// `10PR / (R + 9P)` times `1 - 0.5 * ((chunks - 1) / matches)^3`, best over
/// references. Candidate tokens align left to right with the earliest
/// unused equal reference token.
pub fn meteor_lite(cand: &[String], refs: &[Vec<String>]) -> f64 {
    refs.iter()
        .map(|r| {
            let mut used = vec![false; r.len()];
            let mut pairs = Vec::new();
            for (i, tok) in cand.iter().enumerate() {
                if let Some(j) = (0..r.len()).find(|&j| !used[j] && &r[j] == tok) {
                    used[j] = true;
                    pairs.push((i, j));
                }
            }
            let m = pairs.len();
            if m == 0 {
                return 0.0;
            }
            let mut chunks = 1;
            for w in pairs.windows(2) {
                if !(w[1].0 == w[0].0 + 1 && w[1].1 == w[0].1 + 1) {
                    chunks += 1;
                }
            }
            let p = m as f64 / cand.len() as f64;
            let rec = m as f64 / r.len() as f64;
            let fmean = 10.0 * p * rec / (rec + 9.0 * p);
            let frag = (chunks - 1) as f64 / m as f64;
            fmean * (1.0 - 0.5 * frag.powi(3))
        })
        .fold(0.0, f64::max)
}

/// Maps a token to a vector. Implementations must be deterministic.
pub trait TokenEmbedder: Send + Sync {
    fn embed(&self, token: &str) -> Vec<f64>;
}

/// Bag of hashed character trigrams of the token wrapped in `<` and `>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashedNgramEmbedder {
    pub dim: usize,
}

impl Default for HashedNgramEmbedder {
    fn default() -> Self {
        HashedNgramEmbedder { dim: 256 }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl TokenEmbedder for HashedNgramEmbedder {
    fn embed(&self, token: &str) -> Vec<f64> {
        let chars: Vec<char> = std::iter::once('<')
            .chain(token.chars())
            .chain(std::iter::once('>'))
            .collect();
        let mut v = vec![0.0; self.dim.max(1)];
        for w in chars.windows(3) {
            let s: String = w.iter().collect();
            let slot = (fnv1a(s.as_bytes()) % v.len() as u64) as usize;
            v[slot] += 1.0;
        }
        v
    }
}

/// Greedy token matching in embedding space, in the style of BERTScore.
pub struct EmbeddingScorer<'a> {
    embedder: &'a dyn TokenEmbedder,
}

impl<'a> EmbeddingScorer<'a> {
    pub fn new(embedder: &'a dyn TokenEmbedder) -> Self {
        EmbeddingScorer { embedder }
    }

    /// F1 of greedy precision and recall, best over references.
    pub fn score(&self, cand: &[String], refs: &[Vec<String>]) -> f64 {
        let ce: Vec<Vec<f64>> = cand.iter().map(|t| self.embedder.embed(t)).collect();
        refs.iter()
            .map(|r| {
                let re: Vec<Vec<f64>> = r.iter().map(|t| self.embedder.embed(t)).collect();
                let sim = |i: usize, j: usize| -> f64 {
                    if cand[i] == r[j] {
                        1.0
                    } else {
                        vec_cosine(&ce[i], &re[j])
                    }
                };
                if cand.is_empty() || r.is_empty() {
                    return 0.0;
                }
                let p = (0..cand.len())
                    .map(|i| (0..r.len()).map(|j| sim(i, j)).fold(0.0, f64::max))
                    .sum::<f64>()
                    / cand.len() as f64;
                let rec = (0..r.len())
                    .map(|j| (0..cand.len()).map(|i| sim(i, j)).fold(0.0, f64::max))
                    .sum::<f64>()
                    / r.len() as f64;
                if p + rec == 0.0 {
                    0.0
                } else {
                    2.0 * p * rec / (p + rec)
                }
            })
            .fold(0.0, f64::max)
    }
}

fn vec_cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum();
    let nb: f64 = b.iter().map(|x| x * x).sum();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb).sqrt()).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionScore {
    pub composite: f64,
    pub parts: BTreeMap<String, f64>,
}

/// Unweighted mean of BLEU-4, ROUGE-L, CIDEr, METEOR and the embedding
/// score. `corpus` supplies the CIDEr document frequencies.
pub fn caption_score(
    pred: &str,
    refs: &[String],
    corpus: &[String],
    embedder: &dyn TokenEmbedder,
) -> Result<CaptionScore, MetricError> {
    let cand = tokenize(pred);
    if cand.is_empty() {
        return Err(MetricError::EmptyPrediction);
    }
    if refs.is_empty() {
        return Err(MetricError::Empty);
    }
    let refs: Vec<Vec<String>> = refs.iter().map(|r| tokenize(r)).collect();
    if refs.iter().any(Vec::is_empty) {
        return Err(MetricError::InvalidValue(
            "reference caption has no tokens".into(),
        ));
    }
    let corpus: Vec<Vec<String>> = corpus.iter().map(|d| tokenize(d)).collect();

    let mut parts = BTreeMap::new();
    parts.insert("bleu4".to_string(), bleu4(&cand, &refs));
    parts.insert("rouge_l".to_string(), rouge_l(&cand, &refs));
    parts.insert("cider".to_string(), cider(&cand, &refs, &corpus)?);
    parts.insert("meteor".to_string(), meteor_lite(&cand, &refs));
    parts.insert(
        "embedding".to_string(),
        EmbeddingScorer::new(embedder).score(&cand, &refs),
    );
    let composite = parts.values().sum::<f64>() / parts.len() as f64;
    Ok(CaptionScore { composite, parts })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        tokenize(s)
    }

    #[test]
    fn identity_is_perfect() {
        let e = HashedNgramEmbedder::default();
        for text in [
            "adenocarcinoma of the colon",
            "biopsy",
            "low grade dysplasia, tubular adenoma with focal high grade dysplasia",
        ] {
            let s = caption_score(text, &[text.to_string()], &[text.to_string()], &e).unwrap();
            for (name, v) in &s.parts {
                assert_eq!(*v, 1.0, "{name} for {text:?}");
            }
            assert_eq!(s.composite, 1.0);
        }
    }

    #[test]
    fn disjoint_tokens() {
        let c = toks("alpha beta gamma delta");
        let r = vec![toks("one two three four")];
        assert!(bleu4(&c, &r) <= BLEU_SMOOTHING_EPSILON);
        assert_eq!(rouge_l(&c, &r), 0.0);
        assert_eq!(meteor_lite(&c, &r), 0.0);
    }

    #[test]
    fn cider_toy_corpus() {
        // corpus of three documents; candidate "a b", reference "a c"
        let corpus = vec![toks("a b"), toks("a c"), toks("d")];
        let c = toks("a b");
        let r = vec![toks("a c")];
        let ln = |x: f64| x.ln();
        // unigram idf: a -> ln(4/2), b -> ln(4/1), c -> ln(4/1)
        let (ia, ib, ic) = (ln(2.0), ln(4.0), ln(4.0));
        let cos1 = (ia * ia) / ((ia * ia + ib * ib).sqrt() * (ia * ia + ic * ic).sqrt());
        // bigrams differ, orders 3 and 4 are empty on both sides
        let expected = (cos1 + 0.0 + 1.0 + 1.0) / 4.0;
        assert!((cider(&c, &r, &corpus).unwrap() - expected).abs() < 1e-12);
        assert!(cider(&c, &r, &[]).is_err());
    }

    #[test]
    fn meteor_fragmentation() {
        let r = vec![toks("a b c d")];
        let ordered = meteor_lite(&toks("a b c d"), &r);
        let shuffled = meteor_lite(&toks("d c b a"), &r);
        assert_eq!(ordered, 1.0);
        assert!(shuffled < ordered);
    }

    #[test]
    fn empty_prediction_is_an_error() {
        let e = HashedNgramEmbedder::default();
        assert_eq!(
            caption_score("  ", &["x".into()], &["x".into()], &e),
            Err(MetricError::EmptyPrediction)
        );
    }
}
