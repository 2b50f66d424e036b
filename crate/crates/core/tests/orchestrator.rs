use std::collections::BTreeMap;

use fmbench_core::orchestrator::{
    replay, EventKind, Orchestrator, OrchestratorError, Phase, QuotaLedger, Rejection,
    SubmissionStatus,
};
use fmbench_core::scoring::LeaderboardTarget;
use fmbench_core::{load_task_registry, TaskId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const T1: LeaderboardTarget = LeaderboardTarget::TaskSpecific(TaskId(1));

fn passed_check(team: &str) -> QuotaLedger {
    let mut ledger = QuotaLedger::new();
    ledger.register_team(team);
    let s = ledger.submit(team, Phase::Check, T1, "alg").unwrap();
    ledger
        .complete(&s.submission_id, SubmissionStatus::Succeeded)
        .unwrap();
    ledger
}

fn succeed(
    ledger: &mut QuotaLedger,
    team: &str,
    phase: Phase,
    target: LeaderboardTarget,
) -> Result<(), Rejection> {
    let s = ledger.submit(team, phase, target, "alg")?;
    ledger
        .complete(&s.submission_id, SubmissionStatus::Succeeded)
        .unwrap();
    Ok(())
}

#[test]
fn fourth_task_specific_validation_is_rejected() {
    let mut ledger = passed_check("a");
    for _ in 0..3 {
        succeed(&mut ledger, "a", Phase::Validation, T1).unwrap();
    }
    let err = ledger
        .submit("a", Phase::Validation, T1, "alg")
        .unwrap_err();
    assert_eq!(err.to_string(), "quota 3 exhausted for T1");
    ledger.check_invariants().unwrap();
}

#[test]
fn combined_and_all_tasks_validation_limits() {
    let mut ledger = passed_check("a");
    for target in LeaderboardTarget::COMBINED {
        succeed(&mut ledger, "a", Phase::Validation, target).unwrap();
        succeed(&mut ledger, "a", Phase::Validation, target).unwrap();
        assert!(matches!(
            ledger.submit("a", Phase::Validation, target, "alg"),
            Err(Rejection::QuotaExhausted { limit: 2, .. })
        ));
    }
    succeed(
        &mut ledger,
        "a",
        Phase::Validation,
        LeaderboardTarget::AllTasks,
    )
    .unwrap();
    assert!(matches!(
        ledger.submit("a", Phase::Validation, LeaderboardTarget::AllTasks, "alg"),
        Err(Rejection::QuotaExhausted { limit: 1, .. })
    ));
}

#[test]
fn failed_validation_runs_do_not_count() {
    let mut ledger = passed_check("a");
    for _ in 0..10 {
        let s = ledger
            .submit("a", Phase::Validation, LeaderboardTarget::AllTasks, "alg")
            .unwrap();
        ledger
            .complete(
                &s.submission_id,
                SubmissionStatus::Failed {
                    reason: "crash".into(),
                },
            )
            .unwrap();
    }
    succeed(
        &mut ledger,
        "a",
        Phase::Validation,
        LeaderboardTarget::AllTasks,
    )
    .unwrap();
    ledger.check_invariants().unwrap();
}

#[test]
fn pending_runs_hold_their_reservation() {
    let mut ledger = passed_check("a");
    let _pending = ledger
        .submit("a", Phase::Validation, LeaderboardTarget::AllTasks, "alg")
        .unwrap();
    assert!(ledger
        .submit("a", Phase::Validation, LeaderboardTarget::AllTasks, "alg")
        .is_err());
}

#[test]
fn test_phase_is_all_tasks_xor_combined() {
    let mut ledger = passed_check("a");
    succeed(&mut ledger, "a", Phase::Test, LeaderboardTarget::Language).unwrap();
    let err = ledger
        .submit("a", Phase::Test, LeaderboardTarget::AllTasks, "alg")
        .unwrap_err();
    assert!(matches!(err, Rejection::TestExclusive { .. }));
    assert!(matches!(
        ledger.submit("a", Phase::Test, LeaderboardTarget::Language, "alg"),
        Err(Rejection::TestAlreadySubmitted { .. })
    ));
    succeed(
        &mut ledger,
        "a",
        Phase::Test,
        LeaderboardTarget::PathologyVision,
    )
    .unwrap();

    let mut other = passed_check("b");
    succeed(&mut other, "b", Phase::Test, LeaderboardTarget::AllTasks).unwrap();
    assert!(matches!(
        other.submit("b", Phase::Test, LeaderboardTarget::AllTasks, "alg"),
        Err(Rejection::TestAlreadySubmitted { .. })
    ));
    assert!(matches!(
        other.submit("b", Phase::Test, LeaderboardTarget::RadiologyVision, "alg"),
        Err(Rejection::TestExclusive { .. })
    ));
    assert!(matches!(
        other.submit("b", Phase::Test, T1, "alg"),
        Err(Rejection::TestTargetNotAllowed { .. })
    ));
}

#[test]
fn crashed_test_run_can_be_resubmitted() {
    let mut ledger = passed_check("a");
    let s = ledger
        .submit("a", Phase::Test, LeaderboardTarget::AllTasks, "alg")
        .unwrap();
    ledger
        .complete(&s.submission_id, SubmissionStatus::TimedOut)
        .unwrap();
    succeed(&mut ledger, "a", Phase::Test, LeaderboardTarget::AllTasks).unwrap();
    ledger.check_invariants().unwrap();
}

#[test]
fn check_gates_later_phases_and_is_unlimited() {
    let mut ledger = QuotaLedger::new();
    assert!(matches!(
        ledger.submit("x", Phase::Check, T1, "alg"),
        Err(Rejection::UnknownTeam { .. })
    ));
    ledger.register_team("a");
    assert_eq!(
        ledger
            .submit("a", Phase::Validation, T1, "alg")
            .unwrap_err(),
        Rejection::CheckNotPassed
    );
    for i in 0..200 {
        let s = ledger
            .submit("a", Phase::Check, LeaderboardTarget::AllTasks, "alg")
            .unwrap();
        let status = if i % 2 == 0 {
            SubmissionStatus::Failed { reason: "x".into() }
        } else {
            SubmissionStatus::Succeeded
        };
        ledger.complete(&s.submission_id, status).unwrap();
    }
    succeed(&mut ledger, "a", Phase::Validation, T1).unwrap();
    ledger.check_invariants().unwrap();
}

#[test]
fn completion_rules() {
    let mut ledger = passed_check("a");
    let s = ledger.submit("a", Phase::Validation, T1, "alg").unwrap();
    assert!(ledger
        .complete(&s.submission_id, SubmissionStatus::Running)
        .is_err());
    ledger
        .complete(&s.submission_id, SubmissionStatus::Succeeded)
        .unwrap();
    assert!(ledger
        .complete(&s.submission_id, SubmissionStatus::Succeeded)
        .is_err());
    assert!(ledger
        .complete("nope", SubmissionStatus::Succeeded)
        .is_err());
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

/// Random interleavings of submissions and completions; the invariants
/// must hold after every step.
pub fn randomized_ledger_trial(seed: u64, steps: usize) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let teams = ["a", "b", "c"];
    let mut ledger = QuotaLedger::new();
    for t in teams {
        ledger.register_team(t);
    }
    let mut open: Vec<String> = Vec::new();
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
            let team = teams[rng.gen_range(0..teams.len())];
            let phase = Phase::ALL[rng.gen_range(0..3)];
            if let Ok(s) = ledger.submit(team, phase, random_target(&mut rng), "alg") {
                open.push(s.submission_id);
            }
        }
        ledger.check_invariants()?;
    }
    Ok(())
}

#[test]
fn ten_thousand_random_submissions_keep_invariants() {
    for seed in 0..10 {
        randomized_ledger_trial(seed, 1000).unwrap();
    }
}

fn raw_all(v: f64) -> BTreeMap<TaskId, f64> {
    TaskId::all().map(|t| (t, v)).collect()
}

fn pass_check(orch: &mut Orchestrator, team: &str) {
    orch.register_team(team).unwrap();
    let s = orch
        .submit(team, Phase::Check, LeaderboardTarget::AllTasks, "alg")
        .unwrap();
    orch.complete(&s.submission_id, SubmissionStatus::Succeeded)
        .unwrap();
}

#[test]
fn leaderboard_reorders_replays_and_ignores_duplicates() {
    let dir = tempfile::tempdir().unwrap();
    let reg = load_task_registry();
    let mut orch = Orchestrator::open(dir.path()).unwrap();
    pass_check(&mut orch, "a");
    pass_check(&mut orch, "b");

    let first = orch
        .submit("a", Phase::Validation, LeaderboardTarget::AllTasks, "alg")
        .unwrap();
    orch.complete(&first.submission_id, SubmissionStatus::Succeeded)
        .unwrap();
    let snap = orch
        .record_and_rank(&reg, &first.submission_id, &raw_all(0.6))
        .unwrap();
    assert_eq!(snap.entries.len(), 1);

    let second = orch
        .submit("b", Phase::Validation, LeaderboardTarget::AllTasks, "alg")
        .unwrap();
    orch.complete(&second.submission_id, SubmissionStatus::Succeeded)
        .unwrap();
    let snap = orch
        .record_and_rank(&reg, &second.submission_id, &raw_all(0.9))
        .unwrap();
    let order: Vec<&str> = snap.entries.iter().map(|e| e.team_id.as_str()).collect();
    assert_eq!(order, ["b", "a"]);
    assert_eq!(snap.entries[0].per_task.len(), 20);

    let again = orch
        .record_and_rank(&reg, &second.submission_id, &raw_all(0.9))
        .unwrap();
    assert_eq!(again, snap);
    let recorded = orch
        .log()
        .read_all()
        .unwrap()
        .iter()
        .filter(|e| e.kind == EventKind::ResultRecorded)
        .count();
    assert_eq!(recorded, 2);

    let on_disk =
        std::fs::read_to_string(orch.snapshot_path(Phase::Validation, LeaderboardTarget::AllTasks))
            .unwrap();
    let replayed = replay(&orch.log().read_all().unwrap()).unwrap();
    assert_eq!(
        replayed
            .snapshot(Phase::Validation, LeaderboardTarget::AllTasks)
            .to_json(),
        on_disk
    );
    let reopened = Orchestrator::open(dir.path()).unwrap();
    assert_eq!(reopened.ledger(), orch.ledger());
    assert_eq!(
        reopened
            .snapshot(Phase::Validation, LeaderboardTarget::AllTasks)
            .to_json(),
        on_disk
    );
}

#[test]
fn unsucceeded_and_check_runs_are_not_ranked() {
    let dir = tempfile::tempdir().unwrap();
    let reg = load_task_registry();
    let mut orch = Orchestrator::open(dir.path()).unwrap();
    pass_check(&mut orch, "a");
    let s = orch.submit("a", Phase::Validation, T1, "alg").unwrap();
    let one: BTreeMap<TaskId, f64> = [(TaskId(1), 0.5)].into_iter().collect();
    assert!(matches!(
        orch.record_and_rank(&reg, &s.submission_id, &one),
        Err(OrchestratorError::NotSucceeded(_))
    ));
    let c = orch.submit("a", Phase::Check, T1, "alg").unwrap();
    orch.complete(&c.submission_id, SubmissionStatus::Succeeded)
        .unwrap();
    assert!(matches!(
        orch.record_and_rank(&reg, &c.submission_id, &one),
        Err(OrchestratorError::NoLeaderboard(Phase::Check))
    ));
}

#[test]
fn all_tasks_test_entries_also_rank_on_combined_boards() {
    let dir = tempfile::tempdir().unwrap();
    let reg = load_task_registry();
    let mut orch = Orchestrator::open(dir.path()).unwrap();
    pass_check(&mut orch, "a");
    let s = orch
        .submit("a", Phase::Test, LeaderboardTarget::AllTasks, "alg")
        .unwrap();
    orch.complete(&s.submission_id, SubmissionStatus::Succeeded)
        .unwrap();
    orch.record_and_rank(&reg, &s.submission_id, &raw_all(1.0))
        .unwrap();
    for target in LeaderboardTarget::COMBINED {
        let snap = orch.snapshot(Phase::Test, target);
        assert_eq!(snap.entries.len(), 1);
        assert_eq!(snap.entries[0].aggregate, 1.0);
        assert_eq!(snap.entries[0].per_task.len(), target.tasks().len());
    }
}

#[test]
fn rejections_are_logged_with_quota_category() {
    let dir = tempfile::tempdir().unwrap();
    let mut orch = Orchestrator::open(dir.path()).unwrap();
    pass_check(&mut orch, "a");
    let s = orch
        .submit("a", Phase::Test, LeaderboardTarget::AllTasks, "alg")
        .unwrap();
    orch.complete(&s.submission_id, SubmissionStatus::Succeeded)
        .unwrap();
    let err = orch
        .submit("a", Phase::Test, LeaderboardTarget::AllTasks, "alg")
        .unwrap_err();
    assert_eq!(err.category(), "quota");
    let last = orch.log().read_all().unwrap().pop().unwrap();
    assert_eq!(last.kind, EventKind::SubmissionRejected);
    let events = orch.log().read_all().unwrap();
    for (i, e) in events.iter().enumerate() {
        assert_eq!(e.seq, i as u64 + 1);
    }
}
