use std::collections::BTreeMap;

use fmbench_core::model::{
    CasePayload, EntitySpan, ReferenceLabel, ReportPayload, TaskDefinition, COLON_LABELS,
};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{balanced, Draft, Part, SyntheticBenchmarkSpec};

const FILLER: [&str; 40] = [
    "clinical",
    "history",
    "reviewed",
    "prior",
    "imaging",
    "available",
    "request",
    "routine",
    "follow",
    "comparison",
    "technique",
    "standard",
    "protocol",
    "contrast",
    "administered",
    "patient",
    "tolerated",
    "procedure",
    "well",
    "quality",
    "adequate",
    "indication",
    "screening",
    "referral",
    "general",
    "practitioner",
    "examination",
    "performed",
    "according",
    "departmental",
    "guidelines",
    "additional",
    "remarks",
    "none",
    "reported",
    "consent",
    "obtained",
    "verbal",
    "documentation",
    "complete",
];

const ORIGIN_CUES: [&str; 7] = [
    "lung wedge",
    "lymph node",
    "bronchial mucosa",
    "liver core",
    "brain tissue",
    "bone trephine",
    "skin excision",
];

const HIP_CUES: [&str; 7] = [
    "no signs of osteoarthritis",
    "doubtful joint space narrowing",
    "definite osteophytes with possible narrowing",
    "moderate narrowing with multiple osteophytes",
    "severe narrowing with bone deformity",
    "a total hip prosthesis in situ",
    "an image not assessable on this projection",
];

const COLON_CUES: [&str; 7] = [
    "biopsy specimen",
    "invasive adenocarcinoma",
    "high grade dysplasia",
    "hyperplastic polyp",
    "low grade dysplasia",
    "non informative material",
    "sessile serrated lesion",
];

const LESION_SIZES: [(f64, &str); 5] = [
    (6.0, "tiny"),
    (12.0, "small"),
    (20.0, "moderate"),
    (32.0, "large"),
    (48.0, "bulky"),
];
const GLAND_SIZES: [(f64, &str); 4] = [
    (25.0, "small"),
    (40.0, "normal"),
    (60.0, "enlarged"),
    (90.0, "massive"),
];
const PSA_LEVELS: [(f64, &str); 4] = [
    (2.0, "low"),
    (5.0, "borderline"),
    (9.0, "elevated"),
    (16.0, "high"),
];

pub const REPORT_LOCATIONS: [&str; 6] = [
    "Riverside Clinic",
    "North Valley Hospital",
    "Lakeside Medical Center",
    "Harbor General",
    "Westfield Hospital",
    "Oakridge Clinic",
];
pub const REPORT_TRIALS: [&str; 5] = [
    "ALPHA-PROSTATE",
    "LUNGSCREEN",
    "HORIZON",
    "ORION-2",
    "PRISM-LUNG",
];

/// A sentence of four distinct filler words.
fn filler(rng: &mut ChaCha8Rng) -> String {
    let words: Vec<&str> = FILLER.choose_multiple(rng, 4).copied().collect();
    let mut s = words.join(" ");
    if let Some(first) = s.get_mut(0..1) {
        first.make_ascii_uppercase();
    }
    s.push('.');
    s
}

fn report(text: String) -> CasePayload {
    CasePayload::ReportText(ReportPayload {
        text,
        preamble: None,
    })
}

fn dropped(spec: &SyntheticBenchmarkSpec, rng: &mut ChaCha8Rng) -> bool {
    spec.report_noise > 0.0 && rng.gen_bool(spec.report_noise)
}

fn sample_origin(spec: &SyntheticBenchmarkSpec, rng: &mut ChaCha8Rng, n: usize) -> Vec<Draft> {
    balanced(rng, n, ORIGIN_CUES.len())
        .into_iter()
        .map(|label| {
            let cue = if dropped(spec, rng) { "unspecified site" } else { ORIGIN_CUES[label] };
            let text = format!(
                "Specimen received from the {cue}. {} Microscopy of the {cue} shows tissue suitable for assessment.",
                filler(rng)
            );
            Draft {
                payload: report(text),
                reference: ReferenceLabel::ClassLabel { label: label as i64 },
            }
        })
        .collect()
}

fn binary_findings(
    spec: &SyntheticBenchmarkSpec,
    rng: &mut ChaCha8Rng,
    n: usize,
    positive: impl Fn(&mut ChaCha8Rng) -> String,
    negative: &str,
    neutral: &str,
) -> Vec<Draft> {
    balanced(rng, n, 2)
        .into_iter()
        .map(|label| {
            let finding = if dropped(spec, rng) {
                neutral.to_string()
            } else if label == 1 {
                positive(rng)
            } else {
                negative.to_string()
            };
            Draft {
                payload: report(format!("{} {finding} {}", filler(rng), filler(rng))),
                reference: ReferenceLabel::ClassLabel {
                    label: label as i64,
                },
            }
        })
        .collect()
}

fn nodule_presence(spec: &SyntheticBenchmarkSpec, rng: &mut ChaCha8Rng, n: usize) -> Vec<Draft> {
    binary_findings(
        spec,
        rng,
        n,
        |rng| {
            let lobe = ["upper", "middle", "lower"][rng.gen_range(0..3)];
            format!(
                "A solid nodule of {} mm is present in the {lobe} lobe. Nodule follow up advised.",
                rng.gen_range(4..=20)
            )
        },
        "No pulmonary nodules are seen. Lungs are clear.",
        "Lung parenchyma is partially obscured.",
    )
}

fn kidney_abnormality(spec: &SyntheticBenchmarkSpec, rng: &mut ChaCha8Rng, n: usize) -> Vec<Draft> {
    binary_findings(
        spec,
        rng,
        n,
        |rng| {
            let finding =
                ["A simple cyst", "A solid mass", "Marked hydronephrosis"][rng.gen_range(0..3)];
            let side = ["left", "right"][rng.gen_range(0..2)];
            format!("{finding} of the {side} kidney. Renal abnormality noted.")
        },
        "Both kidneys are normal in size and aspect.",
        "Kidneys are only partially included.",
    )
}

fn hip_grades(spec: &SyntheticBenchmarkSpec, rng: &mut ChaCha8Rng, n: usize) -> Vec<Draft> {
    let lefts = balanced(rng, n, HIP_CUES.len());
    lefts
        .into_iter()
        .map(|left| {
            let right = rng.gen_range(0..HIP_CUES.len());
            let cue = |rng: &mut ChaCha8Rng, c: usize| {
                if dropped(spec, rng) {
                    "findings that are hard to grade"
                } else {
                    HIP_CUES[c]
                }
            };
            let (l, r) = (cue(rng, left), cue(rng, right));
            let text = format!(
                "Pelvis radiograph. Left hip shows {l}. Right hip shows {r}. {}",
                filler(rng)
            );
            Draft {
                payload: report(text),
                reference: ReferenceLabel::PairedLabels {
                    left: left as i64,
                    right: right as i64,
                },
            }
        })
        .collect()
}

/// Multi-label colon reports. Evaluation splits get every label both
/// present and absent at least once.
fn colon_findings(
    spec: &SyntheticBenchmarkSpec,
    rng: &mut ChaCha8Rng,
    part: Part,
    n: usize,
) -> Vec<Draft> {
    let mut sets: Vec<Vec<bool>> = (0..n)
        .map(|_| (0..COLON_LABELS.len()).map(|_| rng.gen_bool(0.3)).collect())
        .collect();
    if part != Part::FewShot && n >= 2 {
        for j in 0..COLON_LABELS.len() {
            let positives = sets.iter().filter(|s| s[j]).count();
            if positives == 0 || positives == n {
                let i = (j * 7 + 3) % n;
                sets[i][j] = !sets[i][j];
            }
        }
    }
    sets.into_iter()
        .map(|set| {
            let phrases: Vec<&str> = set
                .iter()
                .zip(COLON_CUES)
                .filter(|(p, _)| **p)
                .map(|(_, c)| {
                    if dropped(spec, rng) {
                        "unclear changes"
                    } else {
                        c
                    }
                })
                .collect();
            let conclusion = if phrases.is_empty() {
                "no abnormalities".to_string()
            } else {
                phrases.join(", ")
            };
            let values: BTreeMap<String, f64> = COLON_LABELS
                .iter()
                .zip(&set)
                .map(|(l, &p)| (l.to_string(), if p { 1.0 } else { 0.0 }))
                .collect();
            Draft {
                payload: report(format!("{} Conclusion: {conclusion}.", filler(rng))),
                reference: ReferenceLabel::MultiLabel { values },
            }
        })
        .collect()
}

fn round(v: f64, digits: i32) -> f64 {
    let f = 10f64.powi(digits);
    (v * f).round() / f
}

fn lesion_sizes(spec: &SyntheticBenchmarkSpec, rng: &mut ChaCha8Rng, n: usize) -> Vec<Draft> {
    (0..n)
        .map(|_| {
            let (center, word) = LESION_SIZES[rng.gen_range(0..LESION_SIZES.len())];
            let value = round(center + rng.gen_range(-2.0..2.0), 1);
            let word = if dropped(spec, rng) { "solitary" } else { word };
            let organ = ["liver", "lung", "kidney", "spleen"][rng.gen_range(0..4)];
            let text = format!(
                "{} A {word} lesion is seen in the {organ}, measuring {value:.1} mm. The {word} lesion is unchanged.",
                filler(rng)
            );
            Draft {
                payload: report(text),
                reference: ReferenceLabel::Continuous { value },
            }
        })
        .collect()
}

fn prostate_values(spec: &SyntheticBenchmarkSpec, rng: &mut ChaCha8Rng, n: usize) -> Vec<Draft> {
    (0..n)
        .map(|_| {
            let (vc, vword) = GLAND_SIZES[rng.gen_range(0..GLAND_SIZES.len())];
            let (pc, pword) = PSA_LEVELS[rng.gen_range(0..PSA_LEVELS.len())];
            let volume = round(vc + rng.gen_range(-1.0..1.0), 1);
            let psa = round(pc + rng.gen_range(-0.15..0.15), 2);
            let density = round(psa / volume, 4);
            let vword = if dropped(spec, rng) { "unremarkable" } else { vword };
            let pword = if dropped(spec, rng) { "reported" } else { pword };
            let text = format!(
                "Prostate gland {vword} with a volume of {volume:.1} ml. PSA {pword} at {psa:.2} ng/ml. {}",
                filler(rng)
            );
            let values = [("prostate_volume", volume), ("psa", psa), ("psa_density", density)]
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect();
            Draft {
                payload: report(text),
                reference: ReferenceLabel::MultiLabel { values },
            }
        })
        .collect()
}

/// Accumulates report text and the character spans of tagged pieces.
#[derive(Default)]
struct Tagged {
    text: String,
    spans: Vec<EntitySpan>,
}

impl Tagged {
    fn push(&mut self, s: &str) {
        self.text.push_str(s);
    }

    fn tag(&mut self, s: &str, tag: &str) {
        let start = self.text.chars().count();
        self.text.push_str(s);
        self.spans
            .push(EntitySpan::new(start, start + s.chars().count(), tag));
    }
}

fn digits(rng: &mut ChaCha8Rng, n: usize) -> String {
    (0..n)
        .map(|_| char::from(b'0' + rng.gen_range(0..10u8)))
        .collect()
}

/// Reports with one identifier per sentence; sentence choice and order vary.
fn anonymization(rng: &mut ChaCha8Rng, n: usize) -> Vec<Draft> {
    (0..n)
        .map(|_| {
            let mut pieces: Vec<usize> = (0..7).collect();
            pieces.shuffle(rng);
            pieces.truncate(rng.gen_range(4..=7));
            let mut t = Tagged::default();
            t.push(&filler(rng));
            for p in pieces {
                t.push(" ");
                match p {
                    0 => {
                        t.push("Report ");
                        t.tag(&format!("RP-{}", digits(rng, 6)), "REPORT_ID");
                        t.push(" was finalized.");
                    }
                    1 => {
                        t.push("Examination date ");
                        let date = format!(
                            "{:02}-{:02}-{}",
                            rng.gen_range(1..=28),
                            rng.gen_range(1..=12),
                            rng.gen_range(1990..=2024)
                        );
                        t.tag(&date, "DATE");
                        t.push(".");
                    }
                    2 => {
                        t.push("Images acquired at ");
                        t.tag(
                            &format!("{:02}:{:02}", rng.gen_range(0..24), rng.gen_range(0..60)),
                            "TIME",
                        );
                        t.push(".");
                    }
                    3 => {
                        t.push("Patient number ");
                        t.tag(&digits(rng, 9), "PERSONAL_ID");
                        t.push(" was referred.");
                    }
                    4 => {
                        t.push("The patient is ");
                        t.tag(&rng.gen_range(18..=95).to_string(), "AGE");
                        t.push(" years old.");
                    }
                    5 => {
                        t.push("Referred by ");
                        t.tag(REPORT_LOCATIONS.choose(rng).expect("locations"), "LOCATION");
                        t.push(".");
                    }
                    _ => {
                        t.push("Included in the ");
                        t.tag(REPORT_TRIALS.choose(rng).expect("trials"), "TRIAL_NAME");
                        t.push(" trial.");
                    }
                }
            }
            Draft {
                payload: report(t.text),
                reference: ReferenceLabel::EntitySpans { spans: t.spans },
            }
        })
        .collect()
}

pub(super) fn drafts(
    spec: &SyntheticBenchmarkSpec,
    task: &TaskDefinition,
    rng: &mut ChaCha8Rng,
    part: Part,
    n: usize,
) -> Result<Vec<Draft>, String> {
    Ok(match task.task_id.0 {
        12 => sample_origin(spec, rng, n),
        13 => nodule_presence(spec, rng, n),
        14 => kidney_abnormality(spec, rng, n),
        15 => hip_grades(spec, rng, n),
        16 => colon_findings(spec, rng, part, n),
        17 => lesion_sizes(spec, rng, n),
        18 => prostate_values(spec, rng, n),
        19 => anonymization(rng, n),
        other => return Err(format!("T{other} is not a language task")),
    })
}
