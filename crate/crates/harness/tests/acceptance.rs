//! Acceptance checks, one line per criterion. Exits nonzero if any fails.

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use fmbench::synth::{generate_benchmark, SyntheticBenchmarkSpec};
use fmbench::BaselineAlgorithm;
use fmbench_core::adaptors::{
    adaptor_fit, adaptor_predict, probe_loss_and_grad, AdaptorSpec, AdaptorStrategy, ProbeObjective,
};
use fmbench_core::metrics::blended_redaction_f1;
use fmbench_core::metrics::{
    caption_score, cohen_kappa, concordance_index_censored, detection_f1, dice, froc_cpm,
    match_points, uls_case_score, CompositeWeights, DiceMode, FrocConfig, HashedNgramEmbedder,
    KappaWeighting, MatchCounts, RedactionWeights,
};
use fmbench_core::model::{
    BenchmarkLayout, EntitySpan, Grid, HitRule, Lesion, Prediction, ReferenceLabel, Representation,
    ScoredPoint, TaskDefinition, TaskType,
};
use fmbench_core::orchestrator::{
    audit_information_flow, AlgorithmRegistry, Execution, Orchestrator, Phase, QuotaLedger,
    Rejection, RunBudget, RunRequest, SubmissionStatus,
};
use fmbench_core::scoring::{unicorn_score, LeaderboardTarget};
use fmbench_core::{load_task_registry, TaskId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

/// Task id, metric name, task type, (few-shot, validation, test), (validation, test) minutes.
type RegistryRow = (u8, &'static str, TaskType, (u32, u32, u32), (u32, u32));
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// (s_ref, s_max) per task, T1 first.
const NORMALIZATION: [(f64, f64); 20] = [
    (0.0, 1.0),
    (0.5, 1.0),
    (0.5, 1.0),
    (0.0, 1.0),
    (0.0, 1.0),
    (0.25, 1.0),
    (0.0, 1.0),
    (0.0, 1.0),
    (0.2548, 1.0),
    (0.0, 1.0),
    (0.0, 1.0),
    (0.0, 1.0),
    (0.5, 1.0),
    (0.5, 1.0),
    (0.0, 1.0),
    (0.5, 1.0),
    (0.7580, 1.0),
    (0.7668, 1.0),
    (0.0, 1.0),
    (0.0, 1.0),
];

fn literal_all_tasks(s: &[f64; 20]) -> f64 {
    ((s[0] - 0.0) / (1.0 - 0.0)
        + (s[1] - 0.5) / (1.0 - 0.5)
        + (s[2] - 0.5) / (1.0 - 0.5)
        + (s[3] - 0.0) / (1.0 - 0.0)
        + (s[4] - 0.0) / (1.0 - 0.0)
        + (s[5] - 0.25) / (1.0 - 0.25)
        + (s[6] - 0.0) / (1.0 - 0.0)
        + (s[7] - 0.0) / (1.0 - 0.0)
        + (s[8] - 0.2548) / (1.0 - 0.2548)
        + (s[9] - 0.0) / (1.0 - 0.0)
        + (s[10] - 0.0) / (1.0 - 0.0)
        + (s[11] - 0.0) / (1.0 - 0.0)
        + (s[12] - 0.5) / (1.0 - 0.5)
        + (s[13] - 0.5) / (1.0 - 0.5)
        + (s[14] - 0.0) / (1.0 - 0.0)
        + (s[15] - 0.5) / (1.0 - 0.5)
        + (s[16] - 0.7580) / (1.0 - 0.7580)
        + (s[17] - 0.7668) / (1.0 - 0.7668)
        + (s[18] - 0.0) / (1.0 - 0.0)
        + (s[19] - 0.0) / (1.0 - 0.0))
        / 20.0
}

fn as_map(s: &[f64]) -> BTreeMap<TaskId, f64> {
    s.iter()
        .enumerate()
        .map(|(i, &v)| (TaskId(i as u8 + 1), v))
        .collect()
}

fn criterion_1() -> Outcome {
    let reg = load_task_registry();
    for (task, (s_ref, s_max)) in reg.iter().zip(NORMALIZATION) {
        ensure(task.norm.s_ref == s_ref && task.norm.s_max == s_max, || {
            format!("{} constants {:?}", task.task_id, task.norm)
        })?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let mut s = [0.0; 20];
        s.iter_mut().for_each(|v| *v = rng.gen_range(0.0..=1.0));
        let got = unicorn_score(&reg, &as_map(&s), LeaderboardTarget::AllTasks)
            .map_err(|e| e.to_string())?;
        worst = worst.max((got.value - literal_all_tasks(&s)).abs());
    }
    ensure(worst <= 1e-12, || format!("max deviation {worst:e}"))?;
    Ok(format!(
        "20 constant pairs exact, 1000 vectors, max deviation {worst:.1e}"
    ))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let checks = fmbench_oracle::run_all(2024, 100);
    let elapsed = start.elapsed();
    let failed: Vec<&str> = checks
        .iter()
        .filter(|c| !c.passed())
        .map(|c| c.metric)
        .collect();
    let fewest = checks.iter().map(|c| c.instances).min().unwrap_or(0);
    ensure(failed.is_empty(), || format!("mismatch: {failed:?}"))?;
    ensure(fewest >= 100, || format!("only {fewest} instances"))?;
    ensure(elapsed < Duration::from_secs(60), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!(
        "{} metrics, >= {fewest} instances each, tolerance 1e-9, {:.1} s",
        checks.len(),
        elapsed.as_secs_f64()
    ))
}

fn criterion_3() -> Outcome {
    let pt = |c: &[f64]| ScoredPoint::new(c.to_vec(), 1.0);
    let two_on_one = match_points(
        &[pt(&[10.0, 10.0]), pt(&[11.0, 10.0])],
        &[vec![10.0, 10.5]],
        4.0,
    )
    .map_err(|e| e.to_string())?;
    ensure(two_on_one == MatchCounts::new(1, 0, 0), || {
        format!("two on one: {two_on_one:?}")
    })?;
    let one_on_two = match_points(
        &[pt(&[10.0, 10.0])],
        &[vec![9.0, 10.0], vec![11.0, 10.0]],
        4.0,
    )
    .map_err(|e| e.to_string())?;
    ensure(one_on_two == MatchCounts::new(1, 0, 1), || {
        format!("one on two: {one_on_two:?}")
    })?;
    let lesion = Lesion {
        coord: vec![5.0, 5.0, 5.0],
        equivalent_diameter_mm: 4.0,
    };
    let miss = vec![ScoredPoint::new(vec![50.0, 50.0, 50.0], 0.9)];
    let froc = froc_cpm(
        &[miss, vec![]],
        &[vec![lesion.clone()], vec![lesion]],
        &FrocConfig {
            hit_rule: HitRule::HalfEquivalentDiameter,
            ..FrocConfig::default()
        },
    )
    .map_err(|e| e.to_string())?;
    ensure(froc.cpm == 0.0, || format!("cpm without hits {}", froc.cpm))?;
    Ok("(1,0,0), (1,0,1) and CPM 0 without hits".into())
}

fn criterion_4() -> Outcome {
    let mask = |data: Vec<i32>| {
        Grid::new(vec![1, 4, 4], vec![1.0, 1.0, 1.0], data).map_err(|e| e.to_string())
    };
    let mut reference = vec![0; 16];
    for i in [5, 6, 9, 10, 13, 14] {
        reference[i] = 1;
    }
    let mut pred = vec![0; 16];
    for i in [5, 6, 9, 10, 11] {
        pred[i] = 1;
    }
    let parts = uls_case_score(
        &mask(pred)?,
        &mask(reference)?,
        &CompositeWeights::default(),
    )
    .map_err(|e| e.to_string())?;
    let uls = 0.888 * parts.sp + 0.056 * parts.lae + 0.056 * parts.sae;
    ensure(parts.cs == uls, || {
        format!("composite {} vs {uls}", parts.cs)
    })?;

    let text_len = 40;
    let reference = vec![
        EntitySpan::new(0, 10, "DATE"),
        EntitySpan::new(20, 30, "AGE"),
    ];
    let pred = vec![
        EntitySpan::new(0, 8, "DATE"),
        EntitySpan::new(20, 30, "TIME"),
    ];
    let s = blended_redaction_f1(&pred, &reference, text_len, RedactionWeights::default())
        .map_err(|e| e.to_string())?;
    ensure(s.blended == 0.7 * s.strict + 0.3 * s.binary, || {
        format!("{s:?}")
    })?;
    ensure(s.strict != s.binary, || "degenerate example".into())?;
    Ok(format!(
        "composite {:.6}, blended F1 {:.6}",
        parts.cs, s.blended
    ))
}

fn criterion_5() -> Outcome {
    let e = HashedNgramEmbedder::default();
    for text in [
        "H&E stained section of colon tissue with moderate cellularity.",
        "biopsy",
    ] {
        let s = caption_score(text, &[text.to_string()], &[text.to_string()], &e)
            .map_err(|x| x.to_string())?;
        ensure(
            s.parts.values().all(|&v| v == 1.0) && s.composite == 1.0,
            || format!("caption {s:?}"),
        )?;
    }
    let m =
        Grid::new(vec![2, 3], vec![1.0, 1.0], vec![0, 1, 2, 3, 1, 0]).map_err(|x| x.to_string())?;
    ensure(dice(&m, &m, &DiceMode::Binary) == Ok(1.0), || {
        "binary dice".into()
    })?;
    ensure(
        dice(
            &m,
            &m,
            &DiceMode::MulticlassMean {
                classes: vec![1, 2, 3],
            },
        ) == Ok(1.0),
        || "multiclass dice".into(),
    )?;
    ensure(detection_f1(MatchCounts::new(4, 0, 0)) == 1.0, || {
        "f1".into()
    })?;
    let labels = [0, 1, 2, 3, 4, 5, 2];
    for w in [KappaWeighting::Quadratic, KappaWeighting::None] {
        ensure(cohen_kappa(&labels, &labels, 6, w) == Ok(1.0), || {
            format!("kappa {w:?}")
        })?;
    }
    let times = [1.0, 2.0, 3.0, 4.0];
    let risks: Vec<f64> = times.iter().map(|t| -t).collect();
    ensure(
        concordance_index_censored(&risks, &[true, true, false, true], &times) == Ok(1.0),
        || "c-index".into(),
    )?;
    let reg = load_task_registry();
    let refs: Vec<f64> = reg.iter().map(|t| t.norm.s_ref).collect();
    let at_ref = unicorn_score(&reg, &as_map(&refs), LeaderboardTarget::AllTasks)
        .map_err(|x| x.to_string())?;
    let perfect = unicorn_score(&reg, &as_map(&[1.0; 20]), LeaderboardTarget::AllTasks)
        .map_err(|x| x.to_string())?;
    ensure(at_ref.value == 0.0, || {
        format!("at reference {}", at_ref.value)
    })?;
    ensure(perfect.value == 1.0, || {
        format!("perfect {}", perfect.value)
    })?;
    Ok(
        "caption, Dice, F1, kappa, c-index at 1; aggregate 0 at reference and 1 when perfect"
            .into(),
    )
}

fn random_target(rng: &mut ChaCha8Rng) -> LeaderboardTarget {
    match rng.gen_range(0..6) {
        0 => LeaderboardTarget::TaskSpecific(TaskId(rng.gen_range(1..=3))),
        1 => LeaderboardTarget::PathologyVision,
        2 => LeaderboardTarget::RadiologyVision,
        3 => LeaderboardTarget::Language,
        _ => LeaderboardTarget::AllTasks,
    }
}

fn ledger_trial(seed: u64, steps: usize) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let teams = ["a", "b", "c"];
    let mut ledger = QuotaLedger::new();
    for t in teams {
        ledger.register_team(t);
    }
    let mut open: Vec<String> = Vec::new();
    let mut submissions = 0;
    for _ in 0..steps {
        if !open.is_empty() && rng.gen_bool(0.5) {
            let id = open.swap_remove(rng.gen_range(0..open.len()));
            let status = match rng.gen_range(0..3) {
                0 => SubmissionStatus::Succeeded,
                1 => SubmissionStatus::Failed { reason: "r".into() },
                _ => SubmissionStatus::TimedOut,
            };
            ledger.complete(&id, status).map_err(|e| e.to_string())?;
        } else {
            submissions += 1;
            let team = teams[rng.gen_range(0..teams.len())];
            let phase = Phase::ALL[rng.gen_range(0..3)];
            if let Ok(s) = ledger.submit(team, phase, random_target(&mut rng), "alg") {
                open.push(s.submission_id);
            }
        }
        ledger.check_invariants()?;
    }
    Ok(submissions)
}

fn succeed(
    ledger: &mut QuotaLedger,
    phase: Phase,
    target: LeaderboardTarget,
) -> Result<(), String> {
    let s = ledger
        .submit("a", phase, target, "alg")
        .map_err(|e| e.to_string())?;
    ledger
        .complete(&s.submission_id, SubmissionStatus::Succeeded)
        .map(|_| ())
        .map_err(|e| e.to_string())
}

fn criterion_6() -> Outcome {
    let mut attempts = 0;
    let mut seed = 0;
    while attempts < 10_000 {
        attempts += ledger_trial(seed, 1000)?;
        seed += 1;
    }
    let t1 = LeaderboardTarget::TaskSpecific(TaskId(1));
    let mut ledger = QuotaLedger::new();
    ledger.register_team("a");
    ensure(
        ledger.submit("a", Phase::Validation, t1, "alg").err() == Some(Rejection::CheckNotPassed),
        || "validation before check accepted".into(),
    )?;
    succeed(&mut ledger, Phase::Check, t1)?;
    for _ in 0..3 {
        succeed(&mut ledger, Phase::Validation, t1)?;
    }
    ensure(
        matches!(
            ledger.submit("a", Phase::Validation, t1, "alg"),
            Err(Rejection::QuotaExhausted { limit: 3, .. })
        ),
        || "fourth task-specific validation accepted".into(),
    )?;
    for _ in 0..2 {
        succeed(&mut ledger, Phase::Validation, LeaderboardTarget::Language)?;
    }
    ensure(
        matches!(
            ledger.submit("a", Phase::Validation, LeaderboardTarget::Language, "alg"),
            Err(Rejection::QuotaExhausted { limit: 2, .. })
        ),
        || "third combined validation accepted".into(),
    )?;
    succeed(&mut ledger, Phase::Validation, LeaderboardTarget::AllTasks)?;
    ensure(
        matches!(
            ledger.submit("a", Phase::Validation, LeaderboardTarget::AllTasks, "alg"),
            Err(Rejection::QuotaExhausted { limit: 1, .. })
        ),
        || "second all-tasks validation accepted".into(),
    )?;
    succeed(&mut ledger, Phase::Test, LeaderboardTarget::AllTasks)?;
    ensure(
        matches!(
            ledger.submit("a", Phase::Test, LeaderboardTarget::AllTasks, "alg"),
            Err(Rejection::TestAlreadySubmitted { .. })
        ),
        || "second all-tasks test accepted".into(),
    )?;
    ensure(
        matches!(
            ledger.submit("a", Phase::Test, LeaderboardTarget::Language, "alg"),
            Err(Rejection::TestExclusive { .. })
        ),
        || "combined test after all-tasks test accepted".into(),
    )?;
    ledger.check_invariants()?;
    Ok(format!(
        "{attempts} random submissions over {seed} trials, 6 rejection cases"
    ))
}

fn algorithms() -> AlgorithmRegistry {
    let mut reg = AlgorithmRegistry::new();
    reg.register(std::sync::Arc::new(BaselineAlgorithm));
    reg
}

fn request(bench: &Path, state: &Path, phase: Phase) -> RunRequest {
    RunRequest {
        team_id: "team".into(),
        phase,
        target: LeaderboardTarget::AllTasks,
        algorithm_ref: "baseline".into(),
        benchmark_root: bench.to_path_buf(),
        adaptor: AdaptorSpec::new(AdaptorStrategy::Knn),
        workspaces: state.join("runs"),
        budget: RunBudget::fixed(Duration::from_secs(600)),
        parallelism: 1,
    }
}

/// Generates a benchmark and runs the baseline on all tasks after a check
/// run.
fn e2e(
    spec: &SyntheticBenchmarkSpec,
    dir: &Path,
) -> Result<(Execution, std::path::PathBuf), String> {
    let bench = dir.join("bench");
    let state = dir.join("state");
    generate_benchmark(spec, &bench).map_err(|e| e.to_string())?;
    let reg = load_task_registry();
    let algs = algorithms();
    let mut orch = Orchestrator::open(&state).map_err(|e| e.to_string())?;
    let check = orch
        .execute(&reg, &algs, &request(&bench, &state, Phase::Check))
        .map_err(|e| e.to_string())?;
    ensure(
        check.submission.status == SubmissionStatus::Succeeded,
        || format!("check run {:?}", check.submission.status),
    )?;
    let exec = orch
        .execute(&reg, &algs, &request(&bench, &state, Phase::Validation))
        .map_err(|e| e.to_string())?;
    ensure(
        exec.submission.status == SubmissionStatus::Succeeded,
        || format!("seed {}: run {:?}", spec.seed, exec.submission.status),
    )?;
    Ok((exec, bench))
}

fn criterion_7() -> Outcome {
    let mut clean = 0;
    let mut caught = 0;
    for seed in 0..50u64 {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let spec = SyntheticBenchmarkSpec {
            scale: 0.02,
            ..SyntheticBenchmarkSpec::new(seed)
        };
        let (exec, bench) = e2e(&spec, dir.path())?;
        if exec.audit.is_clean() && audit_information_flow(&exec.workspace).is_clean() {
            clean += 1;
        }
        let task = TaskId((seed % 20) as u8 + 1);
        let splits = fmbench_core::model::SequesteredStore::open(&bench)
            .splits(task)
            .map_err(|e| e.to_string())?;
        let case = splits
            .test
            .first()
            .or(splits.validation.first())
            .ok_or("no cases")?;
        let canary = BenchmarkLayout::new(&bench).label_path(task, case);
        let out = exec.workspace.join("algorithm").join(task.to_string());
        fs::create_dir_all(&out).map_err(|e| e.to_string())?;
        fs::copy(&canary, out.join("cache.bin")).map_err(|e| e.to_string())?;
        if !audit_information_flow(&exec.workspace).is_clean() {
            caught += 1;
        }
    }
    ensure(clean == 50, || format!("{clean}/50 clean"))?;
    ensure(caught == 50, || format!("canary caught {caught}/50"))?;
    Ok("50/50 runs clean, canary caught 50/50".into())
}

fn fmbench(state: &Path, args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_fmbench"))
        .arg("--state")
        .arg(state)
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr).trim()
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn criterion_8() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut boards = Vec::new();
    let mut slowest = Duration::ZERO;
    for i in 0..2 {
        let run = dir.path().join(format!("run{i}"));
        let bench = run.join("bench");
        let state = run.join("state");
        let (bench, state) = (bench.to_str().ok_or("path")?, state.as_path());
        let start = Instant::now();
        fmbench(state, &["generate", "--seed", "7", "--out", bench])?;
        fmbench(
            state,
            &[
                "run",
                "--benchmark",
                bench,
                "--algorithm",
                "baseline",
                "--adaptor",
                "knn",
                "--target",
                "all_tasks",
            ],
        )?;
        slowest = slowest.max(start.elapsed());
        boards.push(fmbench(
            state,
            &[
                "leaderboard",
                "--target",
                "all_tasks",
                "--format",
                "structured",
            ],
        )?);
    }
    ensure(slowest < Duration::from_secs(300), || {
        format!("took {slowest:?}")
    })?;
    ensure(boards[0] == boards[1], || {
        "leaderboards differ between runs".into()
    })?;

    let mut lowest = f64::INFINITY;
    for seed in 0..10u64 {
        let d = tempfile::tempdir().map_err(|e| e.to_string())?;
        let (exec, _) = e2e(&SyntheticBenchmarkSpec::new(seed), d.path())?;
        let entry = exec
            .snapshot
            .as_ref()
            .and_then(|s| {
                s.entries
                    .iter()
                    .find(|e| e.submission_id == exec.submission.submission_id)
            })
            .ok_or("run missing from leaderboard")?;
        lowest = lowest.min(entry.aggregate);
    }
    ensure(lowest > 0.0, || format!("lowest aggregate {lowest}"))?;
    Ok(format!(
        "{:.1} s per CLI run, identical leaderboards, lowest aggregate over 10 seeds {lowest:.4}",
        slowest.as_secs_f64()
    ))
}

fn random_features(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..dim).map(|_| rng.gen_range(-3.0..3.0)).collect())
        .collect()
}

fn labeled(xs: &[Vec<f64>], ys: &[i64]) -> Vec<(Representation, ReferenceLabel)> {
    xs.iter()
        .zip(ys)
        .enumerate()
        .map(|(i, (x, &y))| {
            (
                Representation::case_level(format!("f{i}"), x.clone()),
                ReferenceLabel::ClassLabel { label: y },
            )
        })
        .collect()
}

fn queries(xs: &[Vec<f64>]) -> Vec<Representation> {
    xs.iter()
        .enumerate()
        .map(|(i, x)| Representation::case_level(format!("q{i}"), x.clone()))
        .collect()
}

fn knn(k: usize) -> AdaptorSpec {
    let mut s = AdaptorSpec::new(AdaptorStrategy::Knn);
    s.hyperparams.k = k;
    s
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let n = rng.gen_range(2..8);
        let dim = rng.gen_range(1..5);
        let xs = random_features(&mut rng, n, dim);
        let objective = if i % 2 == 0 {
            ProbeObjective::Softmax {
                classes: rng.gen_range(2..5),
            }
        } else {
            ProbeObjective::Affine
        };
        let ys: Vec<f64> = (0..n)
            .map(|_| match objective {
                ProbeObjective::Softmax { classes } => rng.gen_range(0..classes) as f64,
                ProbeObjective::Affine => rng.gen_range(-5.0..5.0),
            })
            .collect();
        let params: Vec<f64> = (0..objective.param_count(dim))
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let l2 = rng.gen_range(0.0..0.1);
        let (_, grad) = probe_loss_and_grad(objective, &params, &xs, &ys, l2);
        let h = 1e-5;
        for (j, g) in grad.iter().enumerate() {
            let (mut plus, mut minus) = (params.clone(), params.clone());
            plus[j] += h;
            minus[j] -= h;
            let fd = (probe_loss_and_grad(objective, &plus, &xs, &ys, l2).0
                - probe_loss_and_grad(objective, &minus, &xs, &ys, l2).0)
                / (2.0 * h);
            worst = worst.max((g - fd).abs() / g.abs().max(fd.abs()).max(1.0));
        }
    }
    ensure(worst < 1e-5, || format!("gradient error {worst:e}"))?;

    let reg = load_task_registry();
    let t1 = reg.get(TaskId(1));
    for _ in 0..100 {
        let n = rng.gen_range(3..20);
        let xs = random_features(&mut rng, n, 3);
        let ys: Vec<i64> = (0..n).map(|_| rng.gen_range(0..6)).collect();
        let mut counts = [0usize; 6];
        ys.iter().for_each(|&y| counts[y as usize] += 1);
        let majority =
            (0..6).fold(0, |best, c| if counts[c] > counts[best] { c } else { best }) as i64;
        let fitted = adaptor_fit(&knn(n), &labeled(&xs, &ys), t1).map_err(|e| e.to_string())?;
        let preds = adaptor_predict(&fitted, &queries(&random_features(&mut rng, 5, 3)), t1)
            .map_err(|e| e.to_string())?;
        ensure(
            preds
                .iter()
                .all(|p| *p == Prediction::ClassLabel { label: majority }),
            || format!("k = {n} did not give majority {majority}: {preds:?}"),
        )?;
    }
    for _ in 0..100 {
        let scale = 10f64.powf(rng.gen_range(-3.0..3.0));
        let xs = random_features(&mut rng, 15, 4);
        let ys: Vec<i64> = (0..15).map(|_| rng.gen_range(0..6)).collect();
        let qs = random_features(&mut rng, 5, 4);
        let scaled = |rows: &[Vec<f64>]| -> Vec<Vec<f64>> {
            rows.iter()
                .map(|r| r.iter().map(|v| v * scale).collect())
                .collect()
        };
        let a = adaptor_fit(&knn(5), &labeled(&xs, &ys), t1).map_err(|e| e.to_string())?;
        let b = adaptor_fit(&knn(5), &labeled(&scaled(&xs), &ys), t1).map_err(|e| e.to_string())?;
        let pa = adaptor_predict(&a, &queries(&qs), t1).map_err(|e| e.to_string())?;
        let pb = adaptor_predict(&b, &queries(&scaled(&qs)), t1).map_err(|e| e.to_string())?;
        ensure(pa == pb, || {
            format!("scaling by {scale} changed predictions")
        })?;
    }
    Ok(format!(
        "gradient error {worst:.1e}, majority and scaling checks on 100 instances each"
    ))
}

fn criterion_10() -> Outcome {
    #[rustfmt::skip]
    let table: [RegistryRow; 20] = [
        (1, "Quadratic weighted kappa", TaskType::Classification, (48, 195, 113), (10, 10)),
        (2, "AUROC", TaskType::Classification, (64, 108, 533), (5, 5)),
        (3, "Censored c-index", TaskType::Regression, (48, 49, 521), (25, 25)),
        (4, "Quadratic weighted kappa", TaskType::Classification, (48, 116, 474), (10, 10)),
        (5, "F1 score", TaskType::Detection, (48, 79, 348), (10, 10)),
        (6, "Average of AUROC and AP", TaskType::Detection, (48, 100, 400), (10, 10)),
        (7, "Sensitivity", TaskType::Detection, (48, 83, 83), (5, 5)),
        (8, "F1 score", TaskType::Detection, (48, 180, 400), (10, 10)),
        (9, "Dice", TaskType::Segmentation, (48, 24, 33), (5, 5)),
        (10, "Dice, long- and short-axis errors", TaskType::Segmentation, (48, 50, 725), (10, 10)),
        (11, "Dice", TaskType::Segmentation, (48, 48, 97), (10, 10)),
        (12, "Unweighted kappa", TaskType::Classification, (48, 215, 297), (240, 240)),
        (13, "AUROC", TaskType::Classification, (48, 300, 200), (120, 240)),
        (14, "AUROC", TaskType::Classification, (48, 125, 183), (120, 240)),
        (15, "Unweighted kappa", TaskType::Classification, (32, 100, 108), (120, 240)),
        (16, "Macro AUROC", TaskType::Classification, (48, 250, 500), (120, 240)),
        (17, "RSMAPE", TaskType::Regression, (48, 242, 298), (120, 240)),
        (18, "RSMAPE", TaskType::Regression, (48, 250, 500), (120, 240)),
        (19, "Weighted F1", TaskType::NamedEntityRecognition, (48, 200, 400), (120, 240)),
        (20, "BLEU-4, ROUGE-L, METEOR, CIDER, BERTscore", TaskType::CaptionGeneration, (0, 81, 310), (25, 25)),
    ];
    let reg = load_task_registry();
    ensure(reg.iter().count() == 20, || "registry size".into())?;
    for (id, metric, kind, (few, val, test), (lv, lt)) in table {
        let t: &TaskDefinition = reg.get(TaskId(id));
        let c = t.counts;
        let l = t.time_limit_minutes;
        ensure(
            t.metric_name == metric
                && t.task_type == kind
                && (c.few_shot, c.validation, c.test) == (few, val, test)
                && (l.validation, l.test) == (lv, lt),
            || {
                format!(
                    "T{id} differs: {} {:?} {c:?} {l:?}",
                    t.metric_name, t.task_type
                )
            },
        )?;
    }
    Ok("20 rows: metric, type, counts and time limits".into())
}

fn main() {
    let criteria: [Criterion; 10] = [
        (
            "normalization constants and all-tasks aggregate",
            criterion_1,
        ),
        ("metric oracle equivalence", criterion_2),
        ("point matching and FROC counting", criterion_3),
        (
            "composite segmentation and blended redaction weights",
            criterion_4,
        ),
        ("identity anchors", criterion_5),
        ("quota invariants and rejections", criterion_6),
        ("information-flow audit and canary", criterion_7),
        ("end-to-end CLI run", criterion_8),
        ("adaptor gradient, majority and scaling", criterion_9),
        ("task registry table", criterion_10),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(msg)
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!(
                "PASS criterion {:>2}: {name}: {detail} [{secs:.1} s]",
                i + 1
            ),
            Err(detail) => {
                failures += 1;
                println!(
                    "FAIL criterion {:>2}: {name}: {detail} [{secs:.1} s]",
                    i + 1
                );
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
