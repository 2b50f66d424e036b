//! Command-line front end. Failures print one line,
//! `error[<category>]: <message>`, to stderr and exit nonzero.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use fmbench_core::adaptors::{AdaptorSpec, AdaptorStrategy};
use fmbench_core::load_task_registry;
use fmbench_core::metrics::evaluate_task;
use fmbench_core::model::{SequesteredStore, TaskId};
use fmbench_core::orchestrator::{
    audit_information_flow, AlgorithmRegistry, CasePrediction, LeaderboardSnapshot, Orchestrator,
    OrchestratorError, Phase, RunBudget, RunRequest, SubmissionStatus,
};
use fmbench_core::scoring::{normalize_task_score, score_report, LeaderboardTarget};

use crate::baseline::BaselineAlgorithm;
use crate::synth::{generate_benchmark, SyntheticBenchmarkSpec};

pub const BENCHMARK_ENV: &str = "FMBENCH_BENCHMARK";
pub const STATE_ENV: &str = "FMBENCH_STATE";

#[derive(Debug, Parser)]
#[command(
    name = "fmbench",
    version,
    about = "Synthetic multi-task benchmark driver"
)]
pub struct Cli {
    /// Orchestrator state: event log, leaderboards and run workspaces.
    #[arg(long, global = true, env = STATE_ENV, default_value = "fmbench-state")]
    pub state: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PhaseArg {
    Check,
    Validation,
    Test,
}

impl From<PhaseArg> for Phase {
    fn from(p: PhaseArg) -> Phase {
        match p {
            PhaseArg::Check => Phase::Check,
            PhaseArg::Validation => Phase::Validation,
            PhaseArg::Test => Phase::Test,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Structured,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic benchmark.
    Generate {
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 0.1)]
        scale: f64,
        #[arg(long, default_value_t = 64)]
        feature_dim: usize,
        #[arg(long, default_value_t = 1.0)]
        separation: f64,
        #[arg(long, default_value_t = 0.05)]
        report_noise: f64,
        #[arg(long, env = BENCHMARK_ENV, default_value = "benchmark")]
        out: PathBuf,
    },
    /// Submit and evaluate one run. Validation and test runs first pass the
    /// check phase when the team has not done so yet.
    Run {
        #[arg(long, env = BENCHMARK_ENV, default_value = "benchmark")]
        benchmark: PathBuf,
        #[arg(long, default_value = "team")]
        team: String,
        #[arg(long, value_enum, default_value_t = PhaseArg::Validation)]
        phase: PhaseArg,
        #[arg(long, default_value = "all_tasks")]
        target: String,
        #[arg(long, default_value = "baseline")]
        algorithm: String,
        /// Strategy name, or `@file.json` holding a full adaptor spec.
        #[arg(long, default_value = "knn")]
        adaptor: String,
        /// Overrides the adaptor's k.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value_t = 1)]
        parallelism: usize,
        /// Per-task wall-clock limit in seconds, instead of the scaled
        /// table limits.
        #[arg(long)]
        time_limit: Option<f64>,
        /// Fail instead of running the check phase automatically.
        #[arg(long)]
        no_auto_check: bool,
    },
    /// Recompute a finished submission's scores from its stored predictions.
    Score {
        #[arg(long, env = BENCHMARK_ENV, default_value = "benchmark")]
        benchmark: PathBuf,
        #[arg(long)]
        submission: String,
    },
    /// Print a leaderboard.
    Leaderboard {
        #[arg(long, default_value = "all_tasks")]
        target: String,
        #[arg(long, value_enum, default_value_t = PhaseArg::Validation)]
        phase: PhaseArg,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Check a run workspace for reference data the algorithm could see.
    Audit {
        #[arg(long)]
        workspace: PathBuf,
    },
    /// Run every metric against its brute-force oracle.
    Selftest {
        #[arg(long, default_value_t = 20240)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        instances: usize,
    },
}

/// An error with its machine-readable category.
#[derive(Debug)]
pub struct Failure {
    pub category: &'static str,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn new(category: &'static str, error: impl Into<anyhow::Error>) -> Self {
        Failure {
            category,
            error: error.into(),
        }
    }

    /// `error[<category>]: <message>` on a single line.
    pub fn line(&self) -> String {
        let message = format!("{:#}", self.error).replace(['\n', '\r'], " ");
        format!("error[{}]: {message}", self.category)
    }
}

fn orchestrator_failure(e: OrchestratorError) -> Failure {
    Failure::new(e.category(), e)
}

fn io_failure(e: anyhow::Error) -> Failure {
    Failure::new("io", e)
}

fn parse_target(s: &str) -> Result<LeaderboardTarget, Failure> {
    s.parse()
        .map_err(|e| Failure::new("usage", anyhow::Error::new(e)))
}

fn adaptor_spec(arg: &str, k: Option<usize>) -> Result<AdaptorSpec, Failure> {
    let mut spec = match arg.strip_prefix('@') {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading adaptor spec {path}"))
                .map_err(io_failure)?;
            AdaptorSpec::from_json(&text).map_err(|e| Failure::new("adaptor", e))?
        }
        None => AdaptorSpec::new(
            AdaptorStrategy::parse(arg)
                .ok_or_else(|| Failure::new("usage", anyhow::anyhow!("unknown adaptor {arg:?}")))?,
        ),
    };
    if let Some(k) = k {
        spec.hyperparams.k = k;
    }
    spec.check().map_err(|e| Failure::new("adaptor", e))?;
    Ok(spec)
}

pub fn algorithms() -> AlgorithmRegistry {
    let mut registry = AlgorithmRegistry::new();
    registry.register(Arc::new(BaselineAlgorithm));
    registry
}

/// Runs a parsed command, returning what it prints on success.
pub fn execute(cli: Cli) -> Result<String, Failure> {
    match cli.command {
        Command::Generate {
            seed,
            scale,
            feature_dim,
            separation,
            report_noise,
            out,
        } => {
            let spec = SyntheticBenchmarkSpec {
                seed,
                scale,
                feature_dim,
                separation,
                report_noise,
            };
            let manifest = generate_benchmark(&spec, &out).map_err(|e| {
                let category = match e {
                    crate::synth::GenerateError::InvalidSpec(_) => "usage",
                    crate::synth::GenerateError::Degenerate { .. } => "data",
                    crate::synth::GenerateError::Model(_) => "io",
                };
                Failure::new(category, e)
            })?;
            let cases: usize = manifest
                .tasks
                .iter()
                .map(|t| t.few_shot + t.validation + t.test)
                .sum();
            Ok(format!(
                "generated {} tasks ({cases} cases) with seed {seed} in {}\n",
                manifest.tasks.len(),
                out.display()
            ))
        }
        Command::Run {
            benchmark,
            team,
            phase,
            target,
            algorithm,
            adaptor,
            k,
            parallelism,
            time_limit,
            no_auto_check,
        } => {
            let request = RunRequest {
                team_id: team,
                phase: phase.into(),
                target: parse_target(&target)?,
                algorithm_ref: algorithm,
                benchmark_root: benchmark,
                adaptor: adaptor_spec(&adaptor, k)?,
                workspaces: cli.state.join("runs"),
                budget: match time_limit {
                    Some(s) if s.is_finite() && s > 0.0 => {
                        RunBudget::fixed(Duration::from_secs_f64(s))
                    }
                    Some(s) => {
                        return Err(Failure::new(
                            "usage",
                            anyhow::anyhow!("invalid time limit {s}"),
                        ))
                    }
                    None => RunBudget::default(),
                },
                parallelism: parallelism.max(1),
            };
            run(&cli.state, request, !no_auto_check)
        }
        Command::Score {
            benchmark,
            submission,
        } => score(&cli.state, &benchmark, &submission),
        Command::Leaderboard {
            target,
            phase,
            format,
        } => {
            let phase: Phase = phase.into();
            if !phase.has_leaderboard() {
                return Err(orchestrator_failure(OrchestratorError::NoLeaderboard(
                    phase,
                )));
            }
            let orch = Orchestrator::open(&cli.state).map_err(orchestrator_failure)?;
            let snapshot = orch.snapshot(phase, parse_target(&target)?);
            Ok(match format {
                Format::Structured => snapshot.to_json(),
                Format::Table => leaderboard_table(&snapshot),
            })
        }
        Command::Audit { workspace } => {
            if !workspace.is_dir() {
                return Err(Failure::new(
                    "not_found",
                    anyhow::anyhow!("no workspace at {}", workspace.display()),
                ));
            }
            let report = audit_information_flow(&workspace);
            if report.is_clean() {
                Ok(format!("audit clean: {}\n", workspace.display()))
            } else {
                let paths: Vec<String> = report.violations.iter().map(|v| v.path.clone()).collect();
                Err(Failure::new(
                    "audit",
                    anyhow::anyhow!(
                        "{} violations: {}",
                        report.violations.len(),
                        paths.join(", ")
                    ),
                ))
            }
        }
        Command::Selftest { seed, instances } => {
            let results = fmbench_oracle::run_all(seed, instances);
            let mut out = String::new();
            let mut failed = Vec::new();
            for r in &results {
                let verdict = if r.passed() { "ok" } else { "FAIL" };
                writeln!(
                    out,
                    "{verdict:4} {:20} {} instances, max error {:.1e}",
                    r.metric, r.instances, r.max_abs_error
                )
                .expect("string write");
                if !r.passed() {
                    failed.push(r.metric);
                }
            }
            if failed.is_empty() {
                Ok(out)
            } else {
                eprint!("{out}");
                Err(Failure::new(
                    "selftest",
                    anyhow::anyhow!("oracle mismatch for {}", failed.join(", ")),
                ))
            }
        }
    }
}

fn passed_check(orch: &Orchestrator, team: &str) -> bool {
    orch.ledger()
        .team(team)
        .is_some_and(|t| t.check_passed_at.is_some())
}

fn run(state: &Path, request: RunRequest, auto_check: bool) -> Result<String, Failure> {
    let registry = load_task_registry();
    let algorithms = algorithms();
    let mut orch = Orchestrator::open(state).map_err(orchestrator_failure)?;
    let mut out = String::new();
    if request.phase != Phase::Check && auto_check && !passed_check(&orch, &request.team_id) {
        let check = RunRequest {
            phase: Phase::Check,
            ..request.clone()
        };
        let exec = orch
            .execute(&registry, &algorithms, &check)
            .map_err(orchestrator_failure)?;
        writeln!(
            out,
            "check {} {}",
            exec.submission.submission_id,
            status_word(&exec.submission.status)
        )
        .expect("string write");
        if exec.submission.status != SubmissionStatus::Succeeded {
            return Err(status_failure(
                &exec.submission.submission_id,
                &exec.submission.status,
            ));
        }
    }
    let exec = orch
        .execute(&registry, &algorithms, &request)
        .map_err(orchestrator_failure)?;
    for t in &exec.report.tasks {
        match &t.score {
            Some(s) => writeln!(
                out,
                "  {:4} raw {:.6} normalized {:.6}",
                t.task_id.to_string(),
                s.raw,
                s.normalized
            ),
            None => writeln!(out, "  {:4} {:?}", t.task_id.to_string(), t.status),
        }
        .expect("string write");
    }
    if exec.submission.status != SubmissionStatus::Succeeded {
        eprint!("{out}");
        return Err(status_failure(
            &exec.submission.submission_id,
            &exec.submission.status,
        ));
    }
    let aggregate = exec
        .snapshot
        .as_ref()
        .and_then(|s| {
            s.entries
                .iter()
                .find(|e| e.submission_id == exec.submission.submission_id)
        })
        .map(|e| format!(" aggregate {:.6}", e.aggregate))
        .unwrap_or_default();
    writeln!(
        out,
        "{} {} {} {}{aggregate}",
        request.phase.as_str(),
        exec.submission.submission_id,
        request.target,
        status_word(&exec.submission.status)
    )
    .expect("string write");
    Ok(out)
}

fn status_word(status: &SubmissionStatus) -> &'static str {
    match status {
        SubmissionStatus::Pending => "pending",
        SubmissionStatus::Running => "running",
        SubmissionStatus::Succeeded => "succeeded",
        SubmissionStatus::Failed { .. } => "failed",
        SubmissionStatus::TimedOut => "timed_out",
    }
}

fn status_failure(id: &str, status: &SubmissionStatus) -> Failure {
    match status {
        SubmissionStatus::TimedOut => {
            Failure::new("timeout", anyhow::anyhow!("submission {id} timed out"))
        }
        SubmissionStatus::Failed { reason } => Failure::new(
            "failed",
            anyhow::anyhow!("submission {id} failed: {reason}"),
        ),
        other => Failure::new("state", anyhow::anyhow!("submission {id} ended {other:?}")),
    }
}

fn leaderboard_table(snapshot: &LeaderboardSnapshot) -> String {
    let mut out = format!(
        "{} leaderboard, {} phase\n",
        snapshot.target,
        snapshot.phase.as_str()
    );
    writeln!(
        out,
        "{:>4}  {:<12}  {:<16}  {:>10}",
        "rank", "submission", "team", "aggregate"
    )
    .expect("string write");
    for e in &snapshot.entries {
        writeln!(
            out,
            "{:>4}  {:<12}  {:<16}  {:>10.6}",
            e.rank, e.submission_id, e.team_id, e.aggregate
        )
        .expect("string write");
    }
    out
}

fn score(state: &Path, benchmark: &Path, submission_id: &str) -> Result<String, Failure> {
    let registry = load_task_registry();
    let orch = Orchestrator::open(state).map_err(orchestrator_failure)?;
    let submission = orch
        .ledger()
        .submission(submission_id)
        .cloned()
        .ok_or_else(|| {
            orchestrator_failure(OrchestratorError::UnknownSubmission(submission_id.into()))
        })?;
    let workspace = state.join("runs").join(submission_id);
    let store = SequesteredStore::open(benchmark);
    let mut raw: BTreeMap<TaskId, f64> = BTreeMap::new();
    for id in orch.membership().tasks(submission.target) {
        let task = registry.get(id);
        let path = workspace
            .join("evaluation")
            .join(id.to_string())
            .join("predictions.json");
        let text = fs::read_to_string(&path)
            .with_context(|| format!("no stored predictions for {id} at {}", path.display()))
            .map_err(|e| Failure::new("not_found", e))?;
        let preds: Vec<CasePrediction> = serde_json::from_str(&text)
            .with_context(|| format!("parsing {}", path.display()))
            .map_err(|e| Failure::new("data", e))?;
        let splits = store.splits(id).map_err(|e| Failure::new("data", e))?;
        let items = preds
            .iter()
            .map(|p| store.load_item(id, &p.case_id, &splits))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| Failure::new("data", e))?;
        let predictions: Vec<_> = preds.into_iter().map(|p| p.prediction).collect();
        let metric = evaluate_task(task, &items, &predictions)
            .with_context(|| format!("scoring {id}"))
            .map_err(|e| Failure::new("scoring", e))?;
        normalize_task_score(task, metric.raw).map_err(|e| Failure::new("scoring", e))?;
        raw.insert(id, metric.raw);
    }
    let report = score_report(&registry, &raw, submission.target, orch.membership())
        .map_err(|e| Failure::new("scoring", e))?;
    let mut out = report.to_json();
    out.push('\n');
    Ok(out)
}

/// Parses `argv` and runs it. Returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let first = e
                .to_string()
                .lines()
                .next()
                .unwrap_or("invalid arguments")
                .to_string();
            let first = first.trim_start_matches("error: ").to_string();
            eprintln!("{}", Failure::new("usage", anyhow::anyhow!(first)).line());
            return 2;
        }
    };
    match execute(cli) {
        Ok(out) => {
            print!("{out}");
            0
        }
        Err(f) => {
            eprintln!("{}", f.line());
            1
        }
    }
}
