use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use fmbench::synth::{generate_benchmark, SyntheticBenchmarkSpec};
use fmbench::BaselineAlgorithm;
use fmbench_core::adaptors::{AdaptorSpec, AdaptorStrategy};
use fmbench_core::load_task_registry;
use fmbench_core::orchestrator::{
    AlgorithmRegistry, Orchestrator, Phase, RunBudget, RunRequest, SubmissionStatus,
};
use fmbench_core::scoring::LeaderboardTarget;

/// Mean normalized score of a check run over the target's tasks.
fn check_score(
    spec: &SyntheticBenchmarkSpec,
    dir: &Path,
    target: LeaderboardTarget,
    adaptor: AdaptorSpec,
) -> f64 {
    let bench = dir.join("bench");
    generate_benchmark(spec, &bench).unwrap();
    let mut algs = AlgorithmRegistry::new();
    algs.register(Arc::new(BaselineAlgorithm));
    let mut orch = Orchestrator::open(dir.join("state")).unwrap();
    let exec = orch
        .execute(
            &load_task_registry(),
            &algs,
            &RunRequest {
                team_id: "t".into(),
                phase: Phase::Check,
                target,
                algorithm_ref: "baseline".into(),
                benchmark_root: bench,
                adaptor,
                workspaces: dir.join("runs"),
                budget: RunBudget::fixed(Duration::from_secs(600)),
                parallelism: 2,
            },
        )
        .unwrap();
    assert_eq!(exec.submission.status, SubmissionStatus::Succeeded);
    assert!(exec.audit.is_clean());
    let scores: Vec<f64> = exec
        .report
        .tasks
        .iter()
        .map(|t| t.score.as_ref().unwrap().normalized)
        .collect();
    assert_eq!(scores.len(), target.tasks().len());
    scores.iter().sum::<f64>() / scores.len() as f64
}

#[test]
fn clearer_data_scores_higher() {
    let mut previous = f64::NEG_INFINITY;
    for (separation, report_noise) in [(0.0, 0.9), (0.3, 0.4), (1.0, 0.05)] {
        let dir = tempfile::tempdir().unwrap();
        let spec = SyntheticBenchmarkSpec {
            scale: 0.05,
            separation,
            report_noise,
            ..SyntheticBenchmarkSpec::new(21)
        };
        let score = check_score(
            &spec,
            dir.path(),
            LeaderboardTarget::AllTasks,
            AdaptorSpec::new(AdaptorStrategy::Knn),
        );
        assert!(
            score > previous,
            "separation {separation}: {score} after {previous}"
        );
        previous = score;
    }
    assert!(previous > 0.5);
}

#[test]
fn local_neighbors_beat_the_majority_vote() {
    let spec = SyntheticBenchmarkSpec::new(8);
    let knn = |k: usize| {
        let mut a = AdaptorSpec::new(AdaptorStrategy::Knn);
        a.hyperparams.k = k;
        a
    };
    let mut scores = Vec::new();
    for k in [5, 48] {
        let dir = tempfile::tempdir().unwrap();
        scores.push(check_score(
            &spec,
            dir.path(),
            LeaderboardTarget::PathologyVision,
            knn(k),
        ));
    }
    assert!(scores[0] > scores[1], "{scores:?}");
}
