//! Brute-force oracles for the metric library, random small instances, and
//! a driver that compares the two.

pub mod brute;
pub mod gen;

use std::collections::BTreeMap;

use fmbench_core::metrics::{
    self, DiceMode, FrocConfig, KappaWeighting, RedactionWeights, RsmapesConfig,
};
use fmbench_core::model::HitRule;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const TOLERANCE: f64 = 1e-9;

/// Outcome of comparing one metric against its oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleCheck {
    pub metric: &'static str,
    pub instances: usize,
    pub max_abs_error: f64,
    /// Instances outside tolerance or where the implementation errored.
    pub failures: usize,
    pub first_failure: Option<String>,
}

impl OracleCheck {
    pub fn passed(&self) -> bool {
        self.failures == 0 && self.instances > 0
    }
}

struct Tally {
    check: OracleCheck,
}

impl Tally {
    fn new(metric: &'static str) -> Self {
        Tally {
            check: OracleCheck {
                metric,
                instances: 0,
                max_abs_error: 0.0,
                failures: 0,
                first_failure: None,
            },
        }
    }

    fn fail(&mut self, msg: String) {
        self.check.failures += 1;
        self.check.first_failure.get_or_insert(msg);
    }

    fn compare<E: std::fmt::Display>(
        &mut self,
        got: Result<f64, E>,
        want: f64,
        what: impl Fn() -> String,
    ) {
        self.check.instances += 1;
        match got {
            Ok(v) => {
                let err = (v - want).abs();
                if !err.is_finite() || err > TOLERANCE {
                    self.fail(format!("{}: got {v}, oracle {want}", what()));
                }
                if err.is_finite() {
                    self.check.max_abs_error = self.check.max_abs_error.max(err);
                }
            }
            Err(e) => self.fail(format!("{}: error {e}", what())),
        }
    }
}

type CheckFn = fn(&mut ChaCha8Rng, usize) -> OracleCheck;

/// Every metric check, in a fixed order.
pub const CHECKS: [(&str, CheckFn); 20] = [
    ("kappa_unweighted", check_kappa_unweighted),
    ("kappa_quadratic", check_kappa_quadratic),
    ("kappa_pooled_pairs", check_kappa_pooled),
    ("auroc", check_auroc),
    ("average_precision", check_ap),
    ("macro_auroc", check_macro_auroc),
    ("concordance_index", check_concordance),
    ("point_matching_f1", check_point_matching),
    ("froc_cpm", check_froc),
    ("detection_auroc_ap", check_detection_auroc_ap),
    ("dice_binary", check_dice_binary),
    ("dice_multiclass", check_dice_multiclass),
    ("dice_instances", check_dice_instances),
    ("rsmapes", check_rsmapes),
    ("rsmapes_multi", check_rsmapes_multi),
    ("redaction_f1", check_redaction),
    ("bleu4", check_bleu),
    ("rouge_l", check_rouge),
    ("cider", check_cider),
    ("caption_identity", check_caption_identity),
];

/// Runs every check on `instances` random instances each. Each check gets
/// its own generator derived from `seed` so results do not depend on order.
pub fn run_all(seed: u64, instances: usize) -> Vec<OracleCheck> {
    CHECKS
        .iter()
        .enumerate()
        .map(|(i, (_, f))| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(1000).wrapping_add(i as u64));
            f(&mut rng, instances)
        })
        .collect()
}

fn check_kappa(rng: &mut ChaCha8Rng, n: usize, name: &'static str, quadratic: bool) -> OracleCheck {
    let mut t = Tally::new(name);
    let weighting = if quadratic {
        KappaWeighting::Quadratic
    } else {
        KappaWeighting::None
    };
    while t.check.instances < n {
        let (preds, refs, k) = gen::labels(rng, 60);
        let Some(want) = brute::kappa(&preds, &refs, k, quadratic) else {
            continue;
        };
        t.compare(
            metrics::cohen_kappa(&preds, &refs, k, weighting),
            want,
            || format!("k={k} preds={preds:?} refs={refs:?}"),
        );
    }
    t.check
}

fn check_kappa_unweighted(rng: &mut ChaCha8Rng, n: usize) -> OracleCheck {
    check_kappa(rng, n, "kappa_unweighted", false)
}

fn check_kappa_quadratic(rng: &mut ChaCha8Rng, n: usize) -> OracleCheck {
    check_kappa(rng, n, "kappa_quadratic", true)
}

fn check_kappa_pooled(rng: &mut ChaCha8Rng, n: usize) -> OracleCheck {
    let mut t = Tally::new("kappa_pooled_pairs");
    while t.check.instances < n {
        let (a, b, k) = gen::labels(rng, 40);
        let half = a.len() / 2;
        if half == 0 {
            continue;
        }
        let pair =
            |v: &[i64]| -> Vec<(i64, i64)> { (0..half).map(|i| (v[i], v[half + i])).collect() };
        let (pp, rp) = (pair(&a), pair(&b));
        let flat = |p: &[(i64, i64)]| -> Vec<i64> {
            p.iter().map(|x| x.0).chain(p.iter().map(|x| x.1)).collect()
        };
        let Some(want) = brute::kappa(&flat(&pp), &flat(&rp), k, false) else {
            continue;
        };
        t.compare(metrics::kappa_pooled_pairs(&pp, &rp, k), want, || {
            format!("{pp:?} {rp:?}")
        });
    }
    t.check
}

fn check_auroc(rng: &mut ChaCha8Rng, n: usize) -> OracleCheck {
    let mut t = Tally::new("auroc");
    for _ in 0..n {
        let (scores, labels) = gen::scored_labels(rng, 30, true);
        let want = brute::auroc(&scores, &labels);
        t.compare(metrics::auroc(&scores, &labels), want, || {
            format!("{scores:?} {labels:?}")
        });
    }
    t.check
}

fn check_ap(rng: &mut ChaCha8Rng, n: usize) -> OracleCheck {
    let mut t = Tally::new("average_precision");
    for _ in 0..n {
        let (scores, labels) = gen::scored_labels(rng, 25, false);
        let pos = labels.iter().filter(|&&l| l).count();
        let want = brute::average_precision(&scores, &labels, pos);
        t.compare(metrics::average_precision(&scores, &labels), want, || {
            format!("{scores:?} {labels:?}")
        });
    }
    t.check
}

fn check_macro_auroc(rng: &mut ChaCha8Rng, n: usize) -> OracleCheck {
    let mut t = Tally::new("macro_auroc");
    for _ in 0..n {
        let labels = rng.gen_range(1..=7);
        let per: BTreeMap<String, (Vec<f64>, Vec<bool>)> = (0..labels)
            .map(|l| (format!("label{l}"), gen::scored_labels(rng, 20, true)))
            .collect();
        let want = brute::macro_auroc(&per);
        t.compare(metrics::macro_auroc(&per), want, || format!("{per:?}"));
    }
    t.check
}

fn check_concordance(rng: &mut ChaCha8Rng, n: usize) -> OracleCheck {
    let mut t = Tally::new("concordance_index");
    while t.check.instances < n {
        let (risks, events, times) = gen::survival(rng, 40);
        let Some(want) = brute::concordance(&risks, &events, &times) else {
            continue;
        };
        t.compare(
            metrics::concordance_index_censored(&risks, &events, &times),
            want,
            || format!("{risks:?} {events:?} {times:?}"),
        );
    }
    t.check
}

fn check_point_matching(rng: &mut ChaCha8Rng, n: usize) -> OracleCheck {
    let mut t = Tally::new("point_matching_f1");
    for _ in 0..n {
        let preds = gen::scored_points(rng, 8, 10.0);
        let refs: Vec<Vec<f64>> = gen::scored_points(rng, 8, 10.0)
            .into_iter()
            .map(|p| p.coord)
            .collect();
        let radius = rng.gen_range(0.5..3.0);
        let ((tp, fp, fn_), want) = brute::point_matching(&preds, &refs, radius);
        let got = metrics::match_points(&preds, &refs, radius);
        if let Ok(c) = &got {
            if (c.tp, c.fp, c.fn_) != (tp, fp, fn_) {
                t.fail(format!("counts {c:?} vs oracle ({tp}, {fp}, {fn_})"));
            }
        }
        t.compare(got.map(metrics::detection_f1), want, || {
            format!("{preds:?} {refs:?} r={radius}")
        });
    }
    t.check
}

fn random_rule(rng: &mut ChaCha8Rng) -> HitRule {
    if rng.gen_bool(0.5) {
        HitRule::HalfEquivalentDiameter
    } else {
        HitRule::FixedRadius {
            radius: rng.gen_range(0.5..3.0),
        }
    }
}

fn check_froc(rng: &mut ChaCha8Rng, n: usize) -> OracleCheck {
    let mut t = Tally::new("froc_cpm");
    while t.check.instances < n {
        let (cands, lesions) = gen::detection_cases(rng, 4);
        if lesions.iter().all(Vec::is_empty) {
            continue;
        }
        let rule = random_rule(rng);
        let config = FrocConfig {
            hit_rule: rule,
            ..FrocConfig::default()
        };
        let (want, curve) = brute::froc(&cands, &lesions, &config.fp_rates, rule);
        let got = metrics::froc_cpm(&cands, &lesions, &config);
        if let Ok(r) = &got {
            let same = r.curve.len() == curve.len()
                && r.curve
                    .iter()
                    .zip(&curve)
                    .all(|(a, b)| (a.0 - b.0).abs() <= TOLERANCE && (a.1 - b.1).abs() <= TOLERANCE);
            if !same {
                t.fail(format!("curve {:?} vs oracle {curve:?}", r.curve));
            }
        }
        t.compare(got.map(|r| r.cpm), want, || {
            format!("{cands:?} {lesions:?}")
        });
    }
    t.check
}

fn check_detection_auroc_ap(rng: &mut ChaCha8Rng, n: usize) -> OracleCheck {
    let mut t = Tally::new("detection_auroc_ap");
    while t.check.instances < n {
        let (cands, lesions) = gen::detection_cases(rng, 6);
        if lesions.iter().all(Vec::is_empty) || lesions.iter().all(|l| !l.is_empty()) {
            continue;
        }
        let probs: Vec<(f64, bool)> = lesions
            .iter()
            .map(|l| (gen::quantized(rng, 5), !l.is_empty()))
            .collect();
        let rule = random_rule(rng);
        let want = brute::detection_auroc_ap(&probs, &cands, &lesions, rule);
        t.compare(
            metrics::detection_auroc_ap(&probs, &cands, &lesions, rule),
            want,
            || format!("{probs:?} {cands:?} {lesions:?}"),
        );
    }
    t.check
}

fn check_dice_binary(rng: &mut ChaCha8Rng, n: usize) -> OracleCheck {
    let mut t = Tally::new("dice_binary");
    for _ in 0..n {
        let shape = gen::shape(rng);
        let (p, r) = (gen::mask(rng, &shape, 2), gen::mask(rng, &shape, 2));
        t.compare(
            metrics::dice(&p, &r, &DiceMode::Binary),
            brute::dice_binary(&p, &r),
            || format!("{p:?} {r:?}"),
        );
    }
    t.check
}

fn check_dice_multiclass(rng: &mut ChaCha8Rng, n: usize) -> OracleCheck {
    let mut t = Tally::new("dice_multiclass");
    for _ in 0..n {
        let shape = if rng.gen_bool(0.5) {
            vec![16, 16]
        } else {
            gen::shape(rng)
        };
        let (p, r) = (gen::mask(rng, &shape, 4), gen::mask(rng, &shape, 4));
        let classes = vec![1, 2, 3];
        let mode = DiceMode::MulticlassMean {
            classes: classes.clone(),
        };
        t.compare(
            metrics::dice(&p, &r, &mode),
            brute::dice_multiclass(&p, &r, &classes),
            || format!("{p:?} {r:?}"),
        );
    }
    t.check
}

fn check_dice_instances(rng: &mut ChaCha8Rng, n: usize) -> OracleCheck {
    let mut t = Tally::new("dice_instances");
    while t.check.instances < n {
        let shape = if rng.gen_bool(0.5) {
            vec![8, 8, 8]
        } else {
            gen::shape(rng)
        };
        let (p, r) = (gen::mask(rng, &shape, 6), gen::mask(rng, &shape, 6));
        if r.data().iter().all(|&v| v == 0) {
            continue;
        }
        t.compare(
            metrics::instance_averaged_dice(&p, &r),
            brute::dice_instances(&p, &r),
            || format!("{p:?} {r:?}"),
        );
    }
    t.check
}

fn check_rsmapes(rng: &mut ChaCha8Rng, n: usize) -> OracleCheck {
    let mut t = Tally::new("rsmapes");
    for _ in 0..n {
        let (preds, refs) = gen::regression(rng, 10);
        let eps = rng.gen_range(0.04..5.0);
        let config = RsmapesConfig::new(eps).expect("positive epsilon");
        t.compare(
            metrics::rsmapes(&preds, &refs, config),
            brute::rsmapes(&preds, &refs, eps),
            || format!("{preds:?} {refs:?} eps={eps}"),
        );
    }
    t.check
}

fn check_rsmapes_multi(rng: &mut ChaCha8Rng, n: usize) -> OracleCheck {
    let mut t = Tally::new("rsmapes_multi");
    for _ in 0..n {
        let vars: Vec<(Vec<f64>, Vec<f64>, f64)> = [4.0, 0.4, 0.04]
            .iter()
            .map(|&eps| {
                let (p, r) = gen::regression(rng, 10);
                (p, r, eps)
            })
            .collect();
        let want = vars
            .iter()
            .map(|(p, r, e)| brute::rsmapes(p, r, *e))
            .sum::<f64>()
            / vars.len() as f64;
        t.compare(metrics::rsmapes_multi(&vars), want, || format!("{vars:?}"));
    }
    t.check
}

fn check_redaction(rng: &mut ChaCha8Rng, n: usize) -> OracleCheck {
    let mut t = Tally::new("redaction_f1");
    for _ in 0..n {
        let len = rng.gen_range(20..=200);
        let reference = gen::spans(rng, len, false);
        let pred = gen::spans(rng, len, true);
        let (strict, binary, blended) = brute::redaction(&pred, &reference, len);
        let got =
            metrics::blended_redaction_f1(&pred, &reference, len, RedactionWeights::default());
        if let Ok(s) = &got {
            if (s.strict - strict).abs() > TOLERANCE || (s.binary - binary).abs() > TOLERANCE {
                t.fail(format!("parts {s:?} vs oracle ({strict}, {binary})"));
            }
        }
        t.compare(got.map(|s| s.blended), blended, || {
            format!("{pred:?} {reference:?} len={len}")
        });
    }
    t.check
}

fn check_bleu(rng: &mut ChaCha8Rng, n: usize) -> OracleCheck {
    let mut t = Tally::new("bleu4");
    for _ in 0..n {
        let (cand, refs, _) = gen::captions(rng);
        let want = brute::bleu4(&cand, &refs, metrics::BLEU_SMOOTHING_EPSILON);
        t.compare(
            Ok::<f64, String>(metrics::bleu4(&cand, &refs)),
            want,
            || format!("{cand:?} {refs:?}"),
        );
    }
    t.check
}

fn check_rouge(rng: &mut ChaCha8Rng, n: usize) -> OracleCheck {
    let mut t = Tally::new("rouge_l");
    for _ in 0..n {
        let (cand, refs, _) = gen::captions(rng);
        let want = brute::rouge_l(&cand, &refs, metrics::ROUGE_BETA);
        t.compare(
            Ok::<f64, String>(metrics::rouge_l(&cand, &refs)),
            want,
            || format!("{cand:?} {refs:?}"),
        );
    }
    t.check
}

fn check_cider(rng: &mut ChaCha8Rng, n: usize) -> OracleCheck {
    let mut t = Tally::new("cider");
    for _ in 0..n {
        let (cand, refs, corpus) = gen::captions(rng);
        let want = brute::cider(&cand, &refs, &corpus);
        t.compare(metrics::cider(&cand, &refs, &corpus), want, || {
            format!("{cand:?} {refs:?} {corpus:?}")
        });
    }
    t.check
}

/// A caption compared with itself scores 1 on every part.
fn check_caption_identity(rng: &mut ChaCha8Rng, n: usize) -> OracleCheck {
    let mut t = Tally::new("caption_identity");
    let embedder = metrics::HashedNgramEmbedder::default();
    for _ in 0..n {
        let (cand, _, corpus) = gen::captions(rng);
        let text = cand.join(" ");
        let corpus: Vec<String> = corpus.iter().map(|d| d.join(" ")).collect();
        match metrics::caption_score(&text, std::slice::from_ref(&text), &corpus, &embedder) {
            Ok(s) => {
                for (name, v) in &s.parts {
                    t.compare(Ok::<f64, String>(*v), 1.0, || format!("{name} on {text:?}"));
                }
                t.compare(Ok::<f64, String>(s.composite), 1.0, || {
                    format!("composite on {text:?}")
                });
            }
            Err(e) => {
                t.check.instances += 1;
                t.fail(format!("{text:?}: {e}"));
            }
        }
    }
    t.check
}
