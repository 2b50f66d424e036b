use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use fmbench_core::adaptors::{AdaptorSpec, AdaptorStrategy};
use fmbench_core::load_task_registry;
use fmbench_core::model::{
    AlgorithmCase, ArchiveItem, BenchmarkLayout, CasePayload, Grid, Prediction, ReferenceLabel,
    ReportPayload, Representation, Split, SplitIndex, TaskDefinition, TaskId, VisionPayload,
};
use fmbench_core::orchestrator::{
    algorithm_dir, audit_information_flow, run_pipeline, Algorithm, AlgorithmRegistry,
    CasePrediction, LanguageBatch, Orchestrator, Phase, PipelineOptions, RunBudget, RunRequest,
    Submission, SubmissionStatus, TaskStatus,
};
use fmbench_core::scoring::{LeaderboardTarget, Membership};

#[derive(Clone, Copy, PartialEq)]
enum Mode {
    Good,
    Sleep,
    Panic,
    BadLabel,
}

struct Toy(Mode);

impl Algorithm for Toy {
    fn name(&self) -> &str {
        match self.0 {
            Mode::Good => "toy",
            Mode::Sleep => "sleepy",
            Mode::Panic => "crashy",
            Mode::BadLabel => "bad-label",
        }
    }

    fn encode(
        &self,
        _task: &TaskDefinition,
        case: &AlgorithmCase,
    ) -> Result<Representation, String> {
        match self.0 {
            Mode::Sleep => std::thread::sleep(Duration::from_secs(3)),
            Mode::Panic => panic!("boom"),
            _ => {}
        }
        let image = &case.payload.vision().ok_or("not a vision case")?.image;
        let mean = image.data().iter().sum::<f64>() / image.data().len() as f64;
        Ok(Representation::case_level(
            case.case_id.clone(),
            vec![mean, 1.0],
        ))
    }

    fn predict_batch(
        &self,
        _task: &TaskDefinition,
        batch: &LanguageBatch,
    ) -> Result<Vec<CasePrediction>, String> {
        batch
            .cases
            .iter()
            .map(|c| {
                let text = &c.payload.report().ok_or("not a report")?.text;
                let label = if self.0 == Mode::BadLabel {
                    9
                } else {
                    text.trim_start_matches("grade ")
                        .parse::<i64>()
                        .map_err(|e| e.to_string())?
                };
                Ok(CasePrediction {
                    case_id: c.case_id.clone(),
                    prediction: Prediction::ClassLabel { label },
                })
            })
            .collect()
    }

    fn predict_case(
        &self,
        _task: &TaskDefinition,
        _case: &AlgorithmCase,
    ) -> Result<Prediction, String> {
        Err("no per-case tasks here".into())
    }
}

fn split_items(
    task: TaskId,
    n: usize,
    make: impl Fn(usize) -> (CasePayload, i64),
) -> (Vec<ArchiveItem>, SplitIndex) {
    let mut items = Vec::new();
    let mut splits = SplitIndex::default();
    for i in 0..n {
        let id = format!("c{i:03}");
        let split = match i % 3 {
            0 => {
                splits.few_shot.push(id.clone());
                Split::FewShot
            }
            1 => {
                splits.validation.push(id.clone());
                Split::Evaluation
            }
            _ => {
                splits.test.push(id.clone());
                Split::Evaluation
            }
        };
        let (payload, label) = make(i);
        items.push(
            ArchiveItem::new(
                id,
                task,
                split,
                payload,
                ReferenceLabel::ClassLabel { label },
            )
            .unwrap(),
        );
    }
    (items, splits)
}

/// T1 cases whose mean intensity equals their label, and T12 reports that
/// state their label.
fn tiny_benchmark(root: &Path) {
    let reg = load_task_registry();
    let layout = BenchmarkLayout::new(root);
    let (items, splits) = split_items(TaskId(1), 36, |i| {
        let label = (i / 3 % 6) as i64;
        let v = label as f64;
        let image = Grid::new(vec![2, 2], vec![1.0, 1.0], vec![v, v + 0.1, v - 0.1, v]).unwrap();
        (
            CasePayload::VisionGrid(VisionPayload::new(image, None).unwrap()),
            label,
        )
    });
    layout
        .write_task(reg.get(TaskId(1)), &items, &splits)
        .unwrap();
    let (items, splits) = split_items(TaskId(12), 21, |i| {
        let label = (i / 3 % 7) as i64;
        let report = ReportPayload {
            text: format!("grade {label}"),
            preamble: None,
        };
        (CasePayload::ReportText(report), label)
    });
    layout
        .write_task(reg.get(TaskId(12)), &items, &splits)
        .unwrap();
}

fn submission(target: LeaderboardTarget, phase: Phase) -> Submission {
    Submission {
        submission_id: "sub-000001".into(),
        team_id: "team".into(),
        phase,
        target,
        algorithm_ref: "toy".into(),
        timestamp: 1,
        status: SubmissionStatus::Pending,
    }
}

fn knn1() -> AdaptorSpec {
    let mut spec = AdaptorSpec::new(AdaptorStrategy::Knn);
    spec.hyperparams.k = 1;
    spec
}

fn two_task_membership() -> Membership {
    Membership {
        all_tasks: vec![TaskId(1), TaskId(12)],
        ..Membership::default()
    }
}

#[test]
fn clean_run_scores_perfectly_and_passes_audit() {
    let bench = tempfile::tempdir().unwrap();
    let work = tempfile::tempdir().unwrap();
    tiny_benchmark(bench.path());
    let mut options = PipelineOptions::new(work.path());
    options.membership = two_task_membership();
    let report = run_pipeline(
        &submission(LeaderboardTarget::AllTasks, Phase::Validation),
        bench.path(),
        &knn1(),
        Arc::new(Toy(Mode::Good)),
        &load_task_registry(),
        &options,
    )
    .unwrap();
    assert_eq!(report.status, SubmissionStatus::Succeeded);
    for run in &report.tasks {
        assert_eq!(run.score.unwrap().raw, 1.0, "{}", run.task_id);
        assert_eq!(
            run.evaluated_cases,
            if run.task_id == TaskId(1) { 12 } else { 7 }
        );
    }
    assert_eq!(report.tasks[0].adaptor.as_deref(), Some("knn"));
    assert!(audit_information_flow(work.path()).is_clean());
    assert!(work.path().join("evaluation/T1/score.json").exists());
    assert!(work.path().join("algorithm/T12/batch.json").exists());
}

#[test]
fn parallel_and_sequential_runs_agree() {
    let bench = tempfile::tempdir().unwrap();
    tiny_benchmark(bench.path());
    let reg = load_task_registry();
    let mut reports = Vec::new();
    for parallelism in [1, 4] {
        let work = tempfile::tempdir().unwrap();
        let mut options = PipelineOptions::new(work.path());
        options.membership = two_task_membership();
        options.parallelism = parallelism;
        let report = run_pipeline(
            &submission(LeaderboardTarget::AllTasks, Phase::Test),
            bench.path(),
            &AdaptorSpec::new(AdaptorStrategy::NearestCentroid),
            Arc::new(Toy(Mode::Good)),
            &reg,
            &options,
        )
        .unwrap();
        let predictions = fs::read(work.path().join("evaluation/T1/predictions.json")).unwrap();
        reports.push((serde_json::to_string(&report).unwrap(), predictions));
    }
    assert_eq!(reports[0], reports[1]);
}

fn run_single(
    mode: Mode,
    task: u8,
    budget: RunBudget,
) -> (
    fmbench_core::orchestrator::PipelineReport,
    tempfile::TempDir,
) {
    let bench = tempfile::tempdir().unwrap();
    let work = tempfile::tempdir().unwrap();
    tiny_benchmark(bench.path());
    let mut options = PipelineOptions::new(work.path());
    options.budget = budget;
    let report = run_pipeline(
        &submission(
            LeaderboardTarget::TaskSpecific(TaskId(task)),
            Phase::Validation,
        ),
        bench.path(),
        &AdaptorSpec::new(AdaptorStrategy::Knn),
        Arc::new(Toy(mode)),
        &load_task_registry(),
        &options,
    )
    .unwrap();
    (report, work)
}

#[test]
fn slow_algorithm_times_out() {
    let (report, _work) = run_single(Mode::Sleep, 1, RunBudget::fixed(Duration::from_millis(200)));
    assert_eq!(report.status, SubmissionStatus::TimedOut);
    assert_eq!(report.tasks[0].status, TaskStatus::TimedOut);
    assert!(report.raw_scores().is_empty());
}

#[test]
fn out_of_range_label_fails_the_task() {
    let (report, _work) = run_single(Mode::BadLabel, 12, RunBudget::default());
    match &report.status {
        SubmissionStatus::Failed { reason } => {
            assert!(reason.contains("label out of range"), "{reason}")
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn crash_is_captured_in_the_task_log() {
    let (report, work) = run_single(Mode::Panic, 1, RunBudget::default());
    assert!(matches!(report.status, SubmissionStatus::Failed { .. }));
    let log = fs::read_to_string(work.path().join("logs/T1.log")).unwrap();
    assert!(log.contains("algorithm crashed: boom"), "{log}");
}

#[test]
fn audit_flags_planted_label_and_split_metadata() {
    let bench = tempfile::tempdir().unwrap();
    let work = tempfile::tempdir().unwrap();
    tiny_benchmark(bench.path());
    run_pipeline(
        &submission(
            LeaderboardTarget::TaskSpecific(TaskId(1)),
            Phase::Validation,
        ),
        bench.path(),
        &AdaptorSpec::new(AdaptorStrategy::Knn),
        Arc::new(Toy(Mode::Good)),
        &load_task_registry(),
        &PipelineOptions::new(work.path()),
    )
    .unwrap();
    assert!(audit_information_flow(work.path()).is_clean());

    let dir = algorithm_dir(work.path(), TaskId(1));
    let label = BenchmarkLayout::new(bench.path()).label_path(TaskId(1), "c001");
    fs::copy(label, dir.join("stolen.json")).unwrap();
    let audit = audit_information_flow(work.path());
    assert_eq!(audit.violations.len(), 1, "{audit:?}");
    assert!(audit.violations[0].path.ends_with("stolen.json"));

    fs::write(
        dir.join("meta.json"),
        r#"{"case":"c001","split":"few_shot"}"#,
    )
    .unwrap();
    assert_eq!(audit_information_flow(work.path()).violations.len(), 2);
}

#[test]
fn execute_records_succeeded_runs_only() {
    let bench = tempfile::tempdir().unwrap();
    let state = tempfile::tempdir().unwrap();
    tiny_benchmark(bench.path());
    let reg = load_task_registry();
    let mut algorithms = AlgorithmRegistry::new();
    algorithms.register(Arc::new(Toy(Mode::Good)));
    algorithms.register(Arc::new(Toy(Mode::Panic)));
    let mut orch = Orchestrator::open(state.path()).unwrap();
    let request = |phase, alg: &str| RunRequest {
        team_id: "team".into(),
        phase,
        target: LeaderboardTarget::TaskSpecific(TaskId(1)),
        algorithm_ref: alg.into(),
        benchmark_root: bench.path().to_path_buf(),
        adaptor: knn1(),
        workspaces: state.path().join("runs"),
        budget: RunBudget::default(),
        parallelism: 1,
    };
    let check = orch
        .execute(&reg, &algorithms, &request(Phase::Check, "toy"))
        .unwrap();
    assert!(check.snapshot.is_none());
    let crashed = orch
        .execute(&reg, &algorithms, &request(Phase::Validation, "crashy"))
        .unwrap();
    assert!(crashed.snapshot.is_none());
    let ok = orch
        .execute(&reg, &algorithms, &request(Phase::Validation, "toy"))
        .unwrap();
    let snap = ok.snapshot.unwrap();
    assert_eq!(snap.entries.len(), 1);
    assert_eq!(snap.entries[0].aggregate, 1.0);
    assert!(ok.audit.is_clean());
    assert!(matches!(
        orch.execute(&reg, &algorithms, &request(Phase::Validation, "missing")),
        Err(fmbench_core::orchestrator::OrchestratorError::UnknownAlgorithm(_))
    ));
}
