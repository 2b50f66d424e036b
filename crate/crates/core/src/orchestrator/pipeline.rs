use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{mpsc, Arc, Mutex};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::algorithm::{Algorithm, CasePrediction, LabeledCase, LanguageBatch};
use super::submission::{Phase, Submission, SubmissionStatus};
use super::OrchestratorError;
use crate::adaptors::{adaptor_fit, adaptor_predict, AdaptorSpec};
use crate::metrics::evaluate_task;
use crate::model::{
    payload_from_files, validate_prediction, AlgorithmCase, AlgorithmView, ArchiveItem,
    DeliveryMode, Modality, Prediction, Representation, SequesteredStore, SplitIndex,
    TaskDefinition, TaskId, TaskRegistry,
};
use crate::scoring::{normalize_task_score, Membership, TaskScore};

/// Wall-clock allowance per task run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunBudget {
    /// Table limits are divided by this factor.
    pub divisor: f64,
    /// Overrides the table limit for every task when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed: Option<Duration>,
}

impl Default for RunBudget {
    fn default() -> Self {
        RunBudget {
            divisor: 60.0,
            fixed: None,
        }
    }
}

impl RunBudget {
    pub fn fixed(limit: Duration) -> Self {
        RunBudget {
            divisor: 1.0,
            fixed: Some(limit),
        }
    }

    /// Check runs get the validation allowance.
    pub fn limit(&self, task: &TaskDefinition, phase: Phase) -> Duration {
        if let Some(d) = self.fixed {
            return d;
        }
        let minutes = match phase {
            Phase::Test => task.time_limit_minutes.test,
            Phase::Check | Phase::Validation => task.time_limit_minutes.validation,
        };
        Duration::from_secs_f64(minutes as f64 * 60.0 / self.divisor)
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOptions {
    /// Directory for this run's inputs, outputs and logs.
    pub workspace: PathBuf,
    pub budget: RunBudget,
    /// Number of tasks evaluated at once.
    pub parallelism: usize,
    pub membership: Membership,
}

impl PipelineOptions {
    pub fn new(workspace: impl Into<PathBuf>) -> Self {
        PipelineOptions {
            workspace: workspace.into(),
            budget: RunBudget::default(),
            parallelism: 1,
            membership: Membership::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum TaskStatus {
    Succeeded,
    Failed { reason: String },
    TimedOut,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRun {
    pub task_id: TaskId,
    pub status: TaskStatus,
    /// Adaptor strategy used in the evaluation step, for vision tasks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adaptor: Option<String>,
    pub evaluated_cases: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<TaskScore>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub details: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub submission_id: String,
    pub phase: Phase,
    pub target: crate::scoring::LeaderboardTarget,
    pub algorithm_ref: String,
    pub adaptor: AdaptorSpec,
    pub tasks: Vec<TaskRun>,
    pub status: SubmissionStatus,
}

impl PipelineReport {
    pub fn raw_scores(&self) -> BTreeMap<TaskId, f64> {
        self.tasks
            .iter()
            .filter_map(|t| t.score.map(|s| (t.task_id, s.raw)))
            .collect()
    }
}

/// Written to `run.json` at the workspace root; the audit reads the
/// benchmark location from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub submission_id: String,
    pub team_id: String,
    pub phase: Phase,
    pub target: crate::scoring::LeaderboardTarget,
    pub algorithm_ref: String,
    pub benchmark_root: PathBuf,
    pub adaptor: AdaptorSpec,
    /// Strategy actually used per vision task after resolving dense outputs.
    pub resolved_adaptors: BTreeMap<String, String>,
}

pub fn algorithm_dir(workspace: &Path, task: TaskId) -> PathBuf {
    workspace.join("algorithm").join(task.to_string())
}

fn evaluation_dir(workspace: &Path, task: TaskId) -> PathBuf {
    workspace.join("evaluation").join(task.to_string())
}

fn log_path(workspace: &Path, task: TaskId) -> PathBuf {
    workspace.join("logs").join(format!("{task}.log"))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), OrchestratorError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| OrchestratorError::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| OrchestratorError::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), OrchestratorError> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("value serializes");
    bytes.push(b'\n');
    write_file(path, &bytes)
}

/// Runs both steps for every task of the submission's target. Task runs
/// may proceed concurrently; results are merged in task order.
pub fn run_pipeline(
    submission: &Submission,
    benchmark_root: &Path,
    adaptor: &AdaptorSpec,
    algorithm: Arc<dyn Algorithm>,
    registry: &TaskRegistry,
    options: &PipelineOptions,
) -> Result<PipelineReport, OrchestratorError> {
    adaptor.check()?;
    let tasks: Vec<&TaskDefinition> = options
        .membership
        .tasks(submission.target)
        .into_iter()
        .map(|id| registry.get(id))
        .collect();
    fs::create_dir_all(&options.workspace)
        .map_err(|e| OrchestratorError::io(&options.workspace, e))?;
    let metadata = RunMetadata {
        submission_id: submission.submission_id.clone(),
        team_id: submission.team_id.clone(),
        phase: submission.phase,
        target: submission.target,
        algorithm_ref: submission.algorithm_ref.clone(),
        benchmark_root: benchmark_root.to_path_buf(),
        adaptor: adaptor.clone(),
        resolved_adaptors: tasks
            .iter()
            .filter(|t| t.modality == Modality::Vision)
            .map(|t| {
                (
                    t.task_id.to_string(),
                    adaptor.resolve_for(t).strategy.as_str().to_string(),
                )
            })
            .collect(),
    };
    write_json(&options.workspace.join("run.json"), &metadata)?;

    let results: Mutex<Vec<Option<TaskRun>>> = Mutex::new(vec![None; tasks.len()]);
    let next = AtomicUsize::new(0);
    let workers = options.parallelism.clamp(1, tasks.len().max(1));
    thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= tasks.len() {
                    break;
                }
                let run = run_task(
                    tasks[i],
                    submission.phase,
                    benchmark_root,
                    adaptor,
                    Arc::clone(&algorithm),
                    options,
                );
                results.lock().expect("results lock")[i] = Some(run);
            });
        }
    });
    let runs: Vec<TaskRun> = results
        .into_inner()
        .expect("results lock")
        .into_iter()
        .map(|r| r.expect("every task ran"))
        .collect();

    let status = if runs.iter().any(|r| r.status == TaskStatus::TimedOut) {
        SubmissionStatus::TimedOut
    } else if let Some((id, reason)) = runs.iter().find_map(|r| match &r.status {
        TaskStatus::Failed { reason } => Some((r.task_id, reason)),
        _ => None,
    }) {
        SubmissionStatus::Failed {
            reason: format!("{id}: {reason}"),
        }
    } else {
        SubmissionStatus::Succeeded
    };
    let report = PipelineReport {
        submission_id: submission.submission_id.clone(),
        phase: submission.phase,
        target: submission.target,
        algorithm_ref: submission.algorithm_ref.clone(),
        adaptor: adaptor.clone(),
        tasks: runs,
        status,
    };
    write_json(&options.workspace.join("report.json"), &report)?;
    Ok(report)
}

enum StepOutcome<T> {
    Done(T),
    Error(String),
    TimedOut,
}

fn panic_message(payload: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        s.to_string()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "unknown panic".into()
    }
}

/// Runs `f` on its own thread and stops waiting after `limit`. A thread
/// that overruns is abandoned; its result is discarded.
fn run_with_timeout<T, F>(limit: Duration, f: F) -> StepOutcome<T>
where
    T: Send + 'static,
    F: FnOnce() -> Result<T, String> + Send + 'static,
{
    let (tx, rx) = mpsc::channel();
    let spawned = thread::Builder::new()
        .name("algorithm".into())
        .spawn(move || {
            let result = catch_unwind(AssertUnwindSafe(f))
                .map_err(|p| format!("algorithm crashed: {}", panic_message(p)));
            let _ = tx.send(result);
        });
    if let Err(e) = spawned {
        return StepOutcome::Error(format!("could not start algorithm: {e}"));
    }
    match rx.recv_timeout(limit) {
        Ok(Ok(Ok(v))) => StepOutcome::Done(v),
        Ok(Ok(Err(e))) | Ok(Err(e)) => StepOutcome::Error(e),
        Err(mpsc::RecvTimeoutError::Timeout) => StepOutcome::TimedOut,
        Err(mpsc::RecvTimeoutError::Disconnected) => {
            StepOutcome::Error("algorithm exited without a result".into())
        }
    }
}

/// Per-task log lines, flushed to `logs/<task>.log` when the run ends.
struct TaskLog(Vec<String>);

impl TaskLog {
    fn line(&mut self, s: impl Into<String>) {
        self.0.push(s.into());
    }
}

fn run_task(
    task: &TaskDefinition,
    phase: Phase,
    benchmark_root: &Path,
    adaptor: &AdaptorSpec,
    algorithm: Arc<dyn Algorithm>,
    options: &PipelineOptions,
) -> TaskRun {
    let mut log = TaskLog(Vec::new());
    log.line(format!(
        "task {} ({}), phase {phase}",
        task.task_id, task.name
    ));
    let mut run = TaskRun {
        task_id: task.task_id,
        status: TaskStatus::Succeeded,
        adaptor: None,
        evaluated_cases: 0,
        score: None,
        details: BTreeMap::new(),
    };
    match evaluate_one(
        task,
        phase,
        benchmark_root,
        adaptor,
        algorithm,
        options,
        &mut log,
        &mut run,
    ) {
        Ok(()) => log.line(format!(
            "succeeded: raw {}",
            run.score.map(|s| s.raw.to_string()).unwrap_or_default()
        )),
        Err(status) => {
            match &status {
                TaskStatus::Failed { reason } => log.line(format!("failed: {reason}")),
                TaskStatus::TimedOut => log.line("timed out"),
                TaskStatus::Succeeded => {}
            }
            run.status = status;
            run.score = None;
        }
    }
    let mut text = log.0.join("\n");
    text.push('\n');
    let _ = write_file(&log_path(&options.workspace, task.task_id), text.as_bytes());
    run
}

fn fail(reason: impl Into<String>) -> TaskStatus {
    TaskStatus::Failed {
        reason: reason.into(),
    }
}

/// Cases delivered in this phase: the few-shot set plus the phase's
/// evaluation split. Check runs use the validation split.
fn phase_cases(splits: &SplitIndex, phase: Phase) -> (Vec<String>, Vec<String>) {
    let mut few = splits.few_shot.clone();
    few.sort();
    let mut eval = match phase {
        Phase::Test => splits.test.clone(),
        Phase::Check | Phase::Validation => splits.validation.clone(),
    };
    eval.sort();
    (few, eval)
}

#[allow(clippy::too_many_arguments)]
fn evaluate_one(
    task: &TaskDefinition,
    phase: Phase,
    benchmark_root: &Path,
    adaptor: &AdaptorSpec,
    algorithm: Arc<dyn Algorithm>,
    options: &PipelineOptions,
    log: &mut TaskLog,
    run: &mut TaskRun,
) -> Result<(), TaskStatus> {
    let store = SequesteredStore::open(benchmark_root);
    let view = AlgorithmView::open(benchmark_root);
    let splits = store
        .splits(task.task_id)
        .map_err(|e| fail(e.to_string()))?;
    let (few_ids, eval_ids) = phase_cases(&splits, phase);
    let alg_dir = algorithm_dir(&options.workspace, task.task_id);
    let limit = options.budget.limit(task, phase);
    log.line(format!(
        "{} few-shot and {} evaluation cases, limit {:.3} s",
        few_ids.len(),
        eval_ids.len(),
        limit.as_secs_f64()
    ));

    let mut delivered: Vec<String> = few_ids.iter().chain(&eval_ids).cloned().collect();
    delivered.sort();
    let eval_items: Vec<ArchiveItem> = eval_ids
        .iter()
        .map(|id| store.load_item(task.task_id, id, &splits))
        .collect::<Result<_, _>>()
        .map_err(|e| fail(e.to_string()))?;

    let predictions: Vec<Prediction> = match task.delivery_mode() {
        DeliveryMode::PerCase => {
            for id in &delivered {
                let files = view
                    .case_files(task.task_id, id)
                    .map_err(|e| fail(e.to_string()))?;
                for (name, bytes) in files {
                    write_file(&alg_dir.join("cases").join(id).join(name), &bytes)
                        .map_err(|e| fail(e.to_string()))?;
                }
            }
            if task.modality == Modality::Vision {
                let reps = vision_step(task, &alg_dir, &delivered, algorithm, limit)?;
                write_json(&alg_dir.join("outputs.json"), &reps)
                    .map_err(|e| fail(e.to_string()))?;
                log.line(format!(
                    "algorithm step produced {} representations",
                    reps.len()
                ));
                adapt(task, adaptor, &store, &few_ids, &eval_ids, reps, run)?
            } else {
                let preds = per_case_prediction_step(task, &alg_dir, &eval_ids, algorithm, limit)?;
                write_json(&alg_dir.join("outputs.json"), &preds)
                    .map_err(|e| fail(e.to_string()))?;
                preds.into_iter().map(|p| p.prediction).collect()
            }
        }
        DeliveryMode::Batched => {
            let mut few_shot = Vec::new();
            for id in &few_ids {
                let item = store
                    .load_item(task.task_id, id, &splits)
                    .map_err(|e| fail(e.to_string()))?;
                few_shot.push(LabeledCase {
                    case_id: item.case_id,
                    payload: item.payload,
                    label: item.reference,
                });
            }
            let batch = LanguageBatch {
                task_id: task.task_id,
                few_shot,
                cases: eval_items
                    .iter()
                    .map(|i| AlgorithmCase {
                        case_id: i.case_id.clone(),
                        payload: i.payload.clone(),
                    })
                    .collect(),
            };
            write_json(&alg_dir.join("batch.json"), &batch).map_err(|e| fail(e.to_string()))?;
            let task_copy = task.clone();
            let outcome =
                run_with_timeout(limit, move || algorithm.predict_batch(&task_copy, &batch));
            let preds = match outcome {
                StepOutcome::Done(p) => p,
                StepOutcome::Error(e) => return Err(fail(e)),
                StepOutcome::TimedOut => return Err(TaskStatus::TimedOut),
            };
            write_json(&alg_dir.join("outputs.json"), &preds).map_err(|e| fail(e.to_string()))?;
            order_predictions(&eval_ids, preds)?
        }
    };

    let eval_dir = evaluation_dir(&options.workspace, task.task_id);
    let named: Vec<CasePrediction> = eval_ids
        .iter()
        .zip(&predictions)
        .map(|(id, p)| CasePrediction {
            case_id: id.clone(),
            prediction: p.clone(),
        })
        .collect();
    write_json(&eval_dir.join("predictions.json"), &named).map_err(|e| fail(e.to_string()))?;

    for (item, pred) in eval_items.iter().zip(&predictions) {
        let report = validate_prediction(task, pred, item);
        if let Some(v) = report.violations.first() {
            return Err(fail(format!(
                "invalid prediction for {}: {v}",
                item.case_id
            )));
        }
    }
    let metric =
        evaluate_task(task, &eval_items, &predictions).map_err(|e| fail(format!("metric: {e}")))?;
    let score = normalize_task_score(task, metric.raw).map_err(|e| fail(e.to_string()))?;
    run.evaluated_cases = eval_items.len();
    run.score = Some(score);
    run.details = metric.details;
    write_json(&eval_dir.join("score.json"), &*run).map_err(|e| fail(e.to_string()))?;
    Ok(())
}

fn load_workspace_case(alg_dir: &Path, id: &str) -> Result<AlgorithmCase, String> {
    let dir = alg_dir.join("cases").join(id);
    let mut entries: Vec<PathBuf> = fs::read_dir(&dir)
        .map_err(|e| format!("{}: {e}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    entries.sort();
    let mut files = Vec::new();
    for path in entries {
        let bytes = fs::read(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        files.push((
            path.file_name()
                .unwrap_or_default()
                .to_string_lossy()
                .into_owned(),
            bytes,
        ));
    }
    let payload = payload_from_files(&files).map_err(|e| e.to_string())?;
    Ok(AlgorithmCase {
        case_id: id.to_string(),
        payload,
    })
}

fn vision_step(
    task: &TaskDefinition,
    alg_dir: &Path,
    ids: &[String],
    algorithm: Arc<dyn Algorithm>,
    limit: Duration,
) -> Result<Vec<Representation>, TaskStatus> {
    let task = task.clone();
    let dir = alg_dir.to_path_buf();
    let ids = ids.to_vec();
    let outcome = run_with_timeout(limit, move || {
        let mut reps = Vec::with_capacity(ids.len());
        for id in &ids {
            let case = load_workspace_case(&dir, id)?;
            let rep = algorithm
                .encode(&task, &case)
                .map_err(|e| format!("case {id}: {e}"))?;
            if rep.case_id != *id {
                return Err(format!(
                    "representation for {id} is labeled {}",
                    rep.case_id
                ));
            }
            reps.push(rep);
        }
        Ok(reps)
    });
    match outcome {
        StepOutcome::Done(r) => Ok(r),
        StepOutcome::Error(e) => Err(fail(e)),
        StepOutcome::TimedOut => Err(TaskStatus::TimedOut),
    }
}

fn per_case_prediction_step(
    task: &TaskDefinition,
    alg_dir: &Path,
    ids: &[String],
    algorithm: Arc<dyn Algorithm>,
    limit: Duration,
) -> Result<Vec<CasePrediction>, TaskStatus> {
    let task = task.clone();
    let dir = alg_dir.to_path_buf();
    let ids = ids.to_vec();
    let outcome = run_with_timeout(limit, move || {
        let mut preds = Vec::with_capacity(ids.len());
        for id in &ids {
            let case = load_workspace_case(&dir, id)?;
            let prediction = algorithm
                .predict_case(&task, &case)
                .map_err(|e| format!("case {id}: {e}"))?;
            preds.push(CasePrediction {
                case_id: id.clone(),
                prediction,
            });
        }
        Ok(preds)
    });
    match outcome {
        StepOutcome::Done(p) => Ok(p),
        StepOutcome::Error(e) => Err(fail(e)),
        StepOutcome::TimedOut => Err(TaskStatus::TimedOut),
    }
}

/// Puts batch predictions in evaluation-case order, requiring exactly one
/// per case.
fn order_predictions(
    eval_ids: &[String],
    preds: Vec<CasePrediction>,
) -> Result<Vec<Prediction>, TaskStatus> {
    let mut by_id: BTreeMap<String, Prediction> = BTreeMap::new();
    for p in preds {
        if by_id.insert(p.case_id.clone(), p.prediction).is_some() {
            return Err(fail(format!("duplicate prediction for {}", p.case_id)));
        }
    }
    let wanted: BTreeSet<&String> = eval_ids.iter().collect();
    if let Some(extra) = by_id.keys().find(|k| !wanted.contains(k)) {
        return Err(fail(format!("prediction for unknown case {extra}")));
    }
    eval_ids
        .iter()
        .map(|id| {
            by_id
                .remove(id)
                .ok_or_else(|| fail(format!("no prediction for {id}")))
        })
        .collect()
}

/// Evaluation step for vision tasks: fit the adaptor on labeled few-shot
/// representations and predict the evaluation cases.
fn adapt(
    task: &TaskDefinition,
    adaptor: &AdaptorSpec,
    store: &SequesteredStore,
    few_ids: &[String],
    eval_ids: &[String],
    reps: Vec<Representation>,
    run: &mut TaskRun,
) -> Result<Vec<Prediction>, TaskStatus> {
    let mut by_id: BTreeMap<String, Representation> =
        reps.into_iter().map(|r| (r.case_id.clone(), r)).collect();
    let mut few_shot = Vec::with_capacity(few_ids.len());
    for id in few_ids {
        let rep = by_id
            .remove(id)
            .ok_or_else(|| fail(format!("no representation for {id}")))?;
        let label = store
            .label(task.task_id, id)
            .map_err(|e| fail(e.to_string()))?;
        few_shot.push((rep, label));
    }
    let eval_reps: Vec<Representation> = eval_ids
        .iter()
        .map(|id| {
            by_id
                .remove(id)
                .ok_or_else(|| fail(format!("no representation for {id}")))
        })
        .collect::<Result<_, _>>()?;
    let spec = adaptor.resolve_for(task);
    run.adaptor = Some(spec.strategy.as_str().to_string());
    let fitted = adaptor_fit(&spec, &few_shot, task).map_err(|e| fail(format!("adaptor: {e}")))?;
    adaptor_predict(&fitted, &eval_reps, task).map_err(|e| fail(format!("adaptor: {e}")))
}
