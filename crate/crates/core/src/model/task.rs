use std::fmt;

use serde::{Deserialize, Serialize};

use super::ModelError;

/// Identifier of a registered task, `1..=20`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TaskId(pub u8);

impl TaskId {
    pub const MIN: u8 = 1;
    pub const MAX: u8 = 20;

    pub fn new(id: u8) -> Result<Self, ModelError> {
        if (Self::MIN..=Self::MAX).contains(&id) {
            Ok(TaskId(id))
        } else {
            Err(ModelError::UnknownTask(id as i64))
        }
    }

    pub fn all() -> impl Iterator<Item = TaskId> {
        (Self::MIN..=Self::MAX).map(TaskId)
    }

    pub fn get(self) -> u8 {
        self.0
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "T{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskType {
    Classification,
    Regression,
    Detection,
    Segmentation,
    NamedEntityRecognition,
    CaptionGeneration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Pathology,
    Radiology,
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Vision,
    Language,
    VisionLanguage,
}

/// How cases reach the algorithm: one at a time, or all reports of a task
/// (labeled few-shot plus unlabeled evaluation) in a single batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeliveryMode {
    PerCase,
    Batched,
}

impl Modality {
    pub fn delivery_mode(self) -> DeliveryMode {
        match self {
            Modality::Language => DeliveryMode::Batched,
            Modality::Vision | Modality::VisionLanguage => DeliveryMode::PerCase,
        }
    }
}

/// Metric identifier for a task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricSpec {
    QuadraticWeightedKappa,
    Auroc,
    CensoredConcordanceIndex,
    DetectionF1,
    AurocApAverage,
    FrocCpm,
    Dice,
    UlsComposite,
    InstanceDice,
    UnweightedKappa,
    PooledPairKappa,
    MacroAuroc,
    Rsmapes,
    RsmapesMulti,
    BlendedRedactionF1,
    CaptionComposite,
}

/// Expected per-case output shape, as announced to algorithms in the task
/// configuration file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OutputKind {
    #[serde(rename = "class_label_per_case")]
    ClassLabel,
    #[serde(rename = "probability_per_case")]
    Probability,
    #[serde(rename = "time_to_event_per_case")]
    TimeToEvent,
    #[serde(rename = "point_set")]
    PointSet,
    #[serde(rename = "point_set_with_confidence")]
    PointSetWithConfidence,
    #[serde(rename = "point_set_with_confidence+case_probability")]
    PointSetWithCaseProbability,
    #[serde(rename = "segmentation_mask")]
    SegmentationMask,
    #[serde(rename = "paired_class_labels_per_case")]
    PairedClassLabels,
    #[serde(rename = "multi_label_probabilities")]
    MultiLabelProbabilities,
    #[serde(rename = "continuous_value_per_case")]
    ContinuousValue,
    #[serde(rename = "named_continuous_values_per_case")]
    NamedContinuousValues,
    #[serde(rename = "entity_spans")]
    EntitySpans,
    #[serde(rename = "caption_text")]
    CaptionText,
}

impl OutputKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OutputKind::ClassLabel => "class_label_per_case",
            OutputKind::Probability => "probability_per_case",
            OutputKind::TimeToEvent => "time_to_event_per_case",
            OutputKind::PointSet => "point_set",
            OutputKind::PointSetWithConfidence => "point_set_with_confidence",
            OutputKind::PointSetWithCaseProbability => "point_set_with_confidence+case_probability",
            OutputKind::SegmentationMask => "segmentation_mask",
            OutputKind::PairedClassLabels => "paired_class_labels_per_case",
            OutputKind::MultiLabelProbabilities => "multi_label_probabilities",
            OutputKind::ContinuousValue => "continuous_value_per_case",
            OutputKind::NamedContinuousValues => "named_continuous_values_per_case",
            OutputKind::EntitySpans => "entity_spans",
            OutputKind::CaptionText => "caption_text",
        }
    }

    /// Dense outputs need spatially resolved (patch-level) representations.
    pub fn is_dense(self) -> bool {
        matches!(
            self,
            OutputKind::PointSet
                | OutputKind::PointSetWithConfidence
                | OutputKind::PointSetWithCaseProbability
                | OutputKind::SegmentationMask
        )
    }
}

/// When a predicted point counts as hitting a reference point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum HitRule {
    /// Within a fixed Euclidean radius, in physical units.
    FixedRadius { radius: f64 },
    /// Within half the lesion's equivalent diameter.
    HalfEquivalentDiameter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarVariable {
    pub name: String,
    pub epsilon: f64,
}

/// The label space a task's references and predictions live in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LabelSpace {
    Classes { count: u32, names: Vec<String> },
    Binary,
    Survival,
    Points { rank: usize, hit_rule: HitRule },
    MaskClasses { rank: usize, foreground: Vec<i32> },
    Instances { rank: usize, max_label: i32 },
    PairedClasses { count: u32, names: Vec<String> },
    MultiLabel { labels: Vec<String> },
    Scalar { epsilon: f64 },
    Scalars { variables: Vec<ScalarVariable> },
    Entities { tags: Vec<String> },
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseCounts {
    pub few_shot: u32,
    pub validation: u32,
    pub test: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeLimits {
    pub validation: u32,
    pub test: u32,
}

/// Reference-model score and metric maximum used to map a raw score onto
/// the common scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationConstants {
    pub s_ref: f64,
    pub s_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskDefinition {
    pub task_id: TaskId,
    pub name: String,
    pub task_type: TaskType,
    pub domain: Domain,
    pub modality: Modality,
    pub metric_spec: MetricSpec,
    /// Metric column of the task overview table, verbatim.
    pub metric_name: String,
    pub output: OutputKind,
    pub label_space: LabelSpace,
    pub counts: CaseCounts,
    pub time_limit_minutes: TimeLimits,
    pub norm: NormalizationConstants,
}

impl TaskDefinition {
    pub fn delivery_mode(&self) -> DeliveryMode {
        self.modality.delivery_mode()
    }

    /// Grid rank of vision payloads, when the task has one.
    pub fn grid_rank(&self) -> Option<usize> {
        match self.modality {
            Modality::Language => None,
            Modality::VisionLanguage => Some(2),
            Modality::Vision => Some(match self.domain {
                Domain::Radiology => 3,
                _ => 2,
            }),
        }
    }

    pub fn config_document(&self) -> TaskConfigDocument {
        emit_task_config(self)
    }
}

/// The task configuration file handed to algorithms alongside every archive
/// item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfigDocument {
    pub task_id: TaskId,
    pub domain: Domain,
    pub modality: Modality,
    pub task_type: TaskType,
    pub output: OutputKind,
}

impl TaskConfigDocument {
    pub fn to_json_bytes(&self) -> Vec<u8> {
        let mut bytes = serde_json::to_vec_pretty(self).expect("config document serializes");
        bytes.push(b'\n');
        bytes
    }
}

pub fn emit_task_config(task: &TaskDefinition) -> TaskConfigDocument {
    TaskConfigDocument {
        task_id: task.task_id,
        domain: task.domain,
        modality: task.modality,
        task_type: task.task_type,
        output: task.output,
    }
}

/// The 20 registered tasks, ordered by id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<TaskDefinition>", into = "Vec<TaskDefinition>")]
pub struct TaskRegistry {
    tasks: Vec<TaskDefinition>,
}

impl TryFrom<Vec<TaskDefinition>> for TaskRegistry {
    type Error = ModelError;

    fn try_from(tasks: Vec<TaskDefinition>) -> Result<Self, Self::Error> {
        let registry = TaskRegistry { tasks };
        registry.check()?;
        Ok(registry)
    }
}

impl From<TaskRegistry> for Vec<TaskDefinition> {
    fn from(registry: TaskRegistry) -> Self {
        registry.tasks
    }
}

impl TaskRegistry {
    pub fn get(&self, id: TaskId) -> &TaskDefinition {
        &self.tasks[(id.0 - 1) as usize]
    }

    pub fn lookup(&self, id: u8) -> Result<&TaskDefinition, ModelError> {
        Ok(self.get(TaskId::new(id)?))
    }

    pub fn tasks(&self) -> &[TaskDefinition] {
        &self.tasks
    }

    pub fn iter(&self) -> impl Iterator<Item = &TaskDefinition> {
        self.tasks.iter()
    }

    fn check(&self) -> Result<(), ModelError> {
        if self.tasks.len() != TaskId::MAX as usize {
            return Err(ModelError::Registry(format!(
                "expected 20 tasks, found {}",
                self.tasks.len()
            )));
        }
        for (i, task) in self.tasks.iter().enumerate() {
            if task.task_id.0 as usize != i + 1 {
                return Err(ModelError::Registry(format!(
                    "task at position {} has id {}",
                    i + 1,
                    task.task_id.0
                )));
            }
            if !(task.norm.s_max > task.norm.s_ref) {
                return Err(ModelError::Registry(format!(
                    "{}: s_max must exceed s_ref",
                    task.task_id
                )));
            }
            if task.time_limit_minutes.validation == 0 || task.time_limit_minutes.test == 0 {
                return Err(ModelError::Registry(format!(
                    "{}: time limits must be positive",
                    task.task_id
                )));
            }
        }
        Ok(())
    }
}

fn names(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

/// Organ of origin classes for the sample-origin task.
pub const SAMPLE_ORIGIN_CLASSES: [&str; 7] = [
    "lung",
    "lymph node",
    "bronchus",
    "liver",
    "brain",
    "bone",
    "other",
];

/// Per-hip categories: Kellgren-Lawrence grades 0..4, prosthesis, not applicable.
pub const HIP_CATEGORIES: [&str; 7] = [
    "kl_0",
    "kl_1",
    "kl_2",
    "kl_3",
    "kl_4",
    "prosthesis",
    "not_applicable",
];

/// Colon histopathology properties. The task text also mentions "eight
/// characteristics"; seven binary labels are enumerated and modeled here.
pub const COLON_LABELS: [&str; 7] = [
    "biopsy",
    "cancer",
    "high_grade_dysplasia",
    "hyperplastic_polyps",
    "low_grade_dysplasia",
    "non_informative",
    "serrated_polyps",
];

pub const PII_TAGS: [&str; 7] = [
    "DATE",
    "PERSONAL_ID",
    "REPORT_ID",
    "LOCATION",
    "TRIAL_NAME",
    "TIME",
    "AGE",
];

/// Fixed hit radius for cell-detection tasks, in physical units of the grid
/// spacing.
pub const CELL_HIT_RADIUS: f64 = 4.0;

#[allow(clippy::too_many_arguments)]
fn task(
    id: u8,
    name: &str,
    task_type: TaskType,
    domain: Domain,
    modality: Modality,
    metric_spec: MetricSpec,
    metric_name: &str,
    output: OutputKind,
    label_space: LabelSpace,
    counts: (u32, u32, u32),
    limits: (u32, u32),
    s_ref: f64,
) -> TaskDefinition {
    TaskDefinition {
        task_id: TaskId(id),
        name: name.to_string(),
        task_type,
        domain,
        modality,
        metric_spec,
        metric_name: metric_name.to_string(),
        output,
        label_space,
        counts: CaseCounts {
            few_shot: counts.0,
            validation: counts.1,
            test: counts.2,
        },
        time_limit_minutes: TimeLimits {
            validation: limits.0,
            test: limits.1,
        },
        norm: NormalizationConstants { s_ref, s_max: 1.0 },
    }
}

/// Builds the compiled-in registry of the 20 benchmark tasks.
pub fn load_task_registry() -> TaskRegistry {
    use Domain::*;
    use MetricSpec as M;
    use Modality::*;
    use OutputKind as O;
    use TaskType::*;

    let cells = HitRule::FixedRadius {
        radius: CELL_HIT_RADIUS,
    };
    let tasks = vec![
        task(
            1,
            "ISUP scoring in H&E prostate biopsies",
            Classification,
            Pathology,
            Vision,
            M::QuadraticWeightedKappa,
            "Quadratic weighted kappa",
            O::ClassLabel,
            LabelSpace::Classes {
                count: 6,
                names: names(&["benign", "isup_1", "isup_2", "isup_3", "isup_4", "isup_5"]),
            },
            (48, 195, 113),
            (10, 10),
            0.0,
        ),
        task(
            2,
            "Lung nodule malignancy in CT",
            Classification,
            Radiology,
            Vision,
            M::Auroc,
            "AUROC",
            O::Probability,
            LabelSpace::Binary,
            (64, 108, 533),
            (5, 5),
            0.5,
        ),
        task(
            3,
            "Time to biochemical recurrence in H&E prostatectomies",
            Regression,
            Pathology,
            Vision,
            M::CensoredConcordanceIndex,
            "Censored c-index",
            O::TimeToEvent,
            LabelSpace::Survival,
            (48, 49, 521),
            (25, 25),
            0.5,
        ),
        task(
            4,
            "Tumor proportion score in NSCLC IHC WSI",
            Classification,
            Pathology,
            Vision,
            M::QuadraticWeightedKappa,
            "Quadratic weighted kappa",
            O::ClassLabel,
            LabelSpace::Classes {
                count: 3,
                names: names(&["tps_below_1", "tps_1_to_49", "tps_50_plus"]),
            },
            (48, 116, 474),
            (10, 10),
            0.0,
        ),
        task(
            5,
            "Signet ring cells in H&E ROIs of gastric cancer",
            Detection,
            Pathology,
            Vision,
            M::DetectionF1,
            "F1 score",
            O::PointSet,
            LabelSpace::Points {
                rank: 2,
                hit_rule: cells,
            },
            (48, 79, 348),
            (10, 10),
            0.0,
        ),
        task(
            6,
            "Clinically significant prostate cancer in MRI",
            Detection,
            Radiology,
            Vision,
            M::AurocApAverage,
            "Average of AUROC and AP",
            O::PointSetWithCaseProbability,
            LabelSpace::Points {
                rank: 3,
                hit_rule: HitRule::HalfEquivalentDiameter,
            },
            (48, 100, 400),
            (10, 10),
            0.25,
        ),
        task(
            7,
            "Lung nodule detection in thoracic CT",
            Detection,
            Radiology,
            Vision,
            M::FrocCpm,
            "Sensitivity",
            O::PointSetWithConfidence,
            LabelSpace::Points {
                rank: 3,
                hit_rule: HitRule::HalfEquivalentDiameter,
            },
            (48, 83, 83),
            (5, 5),
            0.0,
        ),
        task(
            8,
            "Mitotic figures in breast cancer H&E ROIs",
            Detection,
            Pathology,
            Vision,
            M::DetectionF1,
            "F1 score",
            O::PointSet,
            LabelSpace::Points {
                rank: 2,
                hit_rule: cells,
            },
            (48, 180, 400),
            (10, 10),
            0.0,
        ),
        task(
            9,
            "Tumor and stroma segmentation in breast H&E",
            Segmentation,
            Pathology,
            Vision,
            M::Dice,
            "Dice",
            O::SegmentationMask,
            LabelSpace::MaskClasses {
                rank: 2,
                foreground: vec![1, 2, 3],
            },
            (48, 24, 33),
            (5, 5),
            0.2548,
        ),
        task(
            10,
            "Universal lesion segmentation in CT ROIs",
            Segmentation,
            Radiology,
            Vision,
            M::UlsComposite,
            "Dice, long- and short-axis errors",
            O::SegmentationMask,
            LabelSpace::MaskClasses {
                rank: 3,
                foreground: vec![1],
            },
            (48, 50, 725),
            (10, 10),
            0.0,
        ),
        task(
            11,
            "Anatomical segmentation in lumbar spine MRI",
            Segmentation,
            Radiology,
            Vision,
            M::InstanceDice,
            "Dice",
            O::SegmentationMask,
            LabelSpace::Instances {
                rank: 3,
                max_label: 255,
            },
            (48, 48, 97),
            (10, 10),
            0.0,
        ),
        task(
            12,
            "Histopathology sample origin",
            Classification,
            Pathology,
            Language,
            M::UnweightedKappa,
            "Unweighted kappa",
            O::ClassLabel,
            LabelSpace::Classes {
                count: 7,
                names: names(&SAMPLE_ORIGIN_CLASSES),
            },
            (48, 215, 297),
            (240, 240),
            0.0,
        ),
        task(
            13,
            "Pulmonary nodule presence",
            Classification,
            Radiology,
            Language,
            M::Auroc,
            "AUROC",
            O::Probability,
            LabelSpace::Binary,
            (48, 300, 200),
            (120, 240),
            0.5,
        ),
        task(
            14,
            "Kidney abnormality",
            Classification,
            Radiology,
            Language,
            M::Auroc,
            "AUROC",
            O::Probability,
            LabelSpace::Binary,
            (48, 125, 183),
            (120, 240),
            0.5,
        ),
        task(
            15,
            "Hip Kellgren-Lawrence scoring",
            Classification,
            Radiology,
            Language,
            M::PooledPairKappa,
            "Unweighted kappa",
            O::PairedClassLabels,
            LabelSpace::PairedClasses {
                count: 7,
                names: names(&HIP_CATEGORIES),
            },
            (32, 100, 108),
            (120, 240),
            0.0,
        ),
        task(
            16,
            "Colon histopathology diagnosis",
            Classification,
            Pathology,
            Language,
            M::MacroAuroc,
            "Macro AUROC",
            O::MultiLabelProbabilities,
            LabelSpace::MultiLabel {
                labels: names(&COLON_LABELS),
            },
            (48, 250, 500),
            (120, 240),
            0.5,
        ),
        task(
            17,
            "Lesion size measurements",
            Regression,
            Radiology,
            Language,
            M::Rsmapes,
            "RSMAPE",
            O::ContinuousValue,
            LabelSpace::Scalar { epsilon: 4.0 },
            (48, 242, 298),
            (120, 240),
            0.7580,
        ),
        task(
            18,
            "Prostate volume and PSA (density)",
            Regression,
            Radiology,
            Language,
            M::RsmapesMulti,
            "RSMAPE",
            O::NamedContinuousValues,
            LabelSpace::Scalars {
                variables: vec![
                    ScalarVariable {
                        name: "prostate_volume".into(),
                        epsilon: 4.0,
                    },
                    ScalarVariable {
                        name: "psa".into(),
                        epsilon: 0.4,
                    },
                    ScalarVariable {
                        name: "psa_density".into(),
                        epsilon: 0.04,
                    },
                ],
            },
            (48, 250, 500),
            (120, 240),
            0.7668,
        ),
        task(
            19,
            "Report anonymization",
            NamedEntityRecognition,
            Mixed,
            Language,
            M::BlendedRedactionF1,
            "Weighted F1",
            O::EntitySpans,
            LabelSpace::Entities {
                tags: names(&PII_TAGS),
            },
            (48, 200, 400),
            (120, 240),
            0.0,
        ),
        task(
            20,
            "WSI captioning",
            CaptionGeneration,
            Pathology,
            VisionLanguage,
            M::CaptionComposite,
            "BLEU-4, ROUGE-L, METEOR, CIDER, BERTscore",
            O::CaptionText,
            LabelSpace::Text,
            (0, 81, 310),
            (25, 25),
            0.0,
        ),
    ];
    TaskRegistry::try_from(tasks).expect("compiled-in registry is consistent")
}
