//! Subcommand bodies. Each returns a summary value so tests can check the
//! outcome without scraping stdout.

use std::path::{Path, PathBuf};

use infodensity_core::analysis::{self, AnalysisSummary};
use infodensity_core::ingest::{
    load_jsonl, save_jsonl, LabeledTraceRecord, RewardRecord, RolloutRecord, Strictness,
};
use infodensity_core::judge::{BackendKind, JudgeClient, JudgeConfig, MockFixture, MockJudgeTable};
use infodensity_core::synthetic::{bundled_labeled, bundled_rollouts};
use infodensity_core::{Exec, ScoringEngine};
use serde::Serialize;

use crate::cli::{AnalyzeArgs, MockDemoArgs, ScoreArgs};
use crate::config::EngineConfig;
use crate::CliError;

pub const REWARDS_FILE: &str = "rewards.jsonl";

/// JSON-lines logs on stderr; stdout stays free for summaries.
pub fn init_logging(level: tracing::Level) {
    let _ = tracing_subscriber::fmt()
        .json()
        .with_max_level(level)
        .with_writer(std::io::stderr)
        .try_init();
}

pub fn build_engine(cfg: &EngineConfig) -> Result<ScoringEngine, CliError> {
    let judge = JudgeClient::from_config(&cfg.judge).map_err(|e| CliError::Config(e.to_string()))?;
    engine_with(judge, cfg)
}

fn engine_with(judge: JudgeClient, cfg: &EngineConfig) -> Result<ScoringEngine, CliError> {
    ScoringEngine::new(judge, cfg.reward, &cfg.segmentation).map_err(|e| CliError::Config(e.to_string()))
}

fn mock_engine(fixture: &MockFixture, cfg: &EngineConfig) -> Result<ScoringEngine, CliError> {
    let table = MockJudgeTable::from_fixture(fixture).map_err(|e| CliError::Config(e.to_string()))?;
    engine_with(JudgeClient::from_mock(table, &cfg.judge), cfg)
}

async fn ensure_reachable(engine: &ScoringEngine, judge: &JudgeConfig) -> Result<(), CliError> {
    if judge.backend == BackendKind::Http && !engine.judge().reachable().await {
        return Err(CliError::Judge(format!(
            "judge endpoint {} is unreachable (connection failed)",
            judge.endpoint_url
        )));
    }
    Ok(())
}

fn required(value: &Option<PathBuf>, what: &str) -> Result<PathBuf, CliError> {
    value
        .clone()
        .ok_or_else(|| CliError::Config(format!("no {what} given (flag or config file)")))
}

fn strictness(strict: bool) -> Strictness {
    if strict {
        Strictness::Strict
    } else {
        Strictness::Lenient
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ScoreSummary {
    pub groups: usize,
    pub groups_skipped: usize,
    pub lines_skipped: usize,
    pub traces: usize,
    pub correct: usize,
    pub mean_reward: Option<f64>,
    pub mean_length: Option<f64>,
}

impl ScoreSummary {
    fn from_records(records: &[RewardRecord], groups: usize, groups_skipped: usize, lines_skipped: usize) -> Self {
        let n = records.len();
        let mean = |f: &dyn Fn(&RewardRecord) -> f64| (n > 0).then(|| records.iter().map(f).sum::<f64>() / n as f64);
        Self {
            groups,
            groups_skipped,
            lines_skipped,
            traces: n,
            correct: records.iter().filter(|r| r.breakdown.correct).count(),
            mean_reward: mean(&|r| r.breakdown.final_reward),
            mean_length: mean(&|r| r.length_tokens as f64),
        }
    }

    pub fn render(&self) -> String {
        let fmt = |x: Option<f64>| x.map_or("n/a".to_owned(), |v| format!("{v:.6}"));
        format!(
            "groups scored: {} (skipped {}, malformed lines {})\ntraces: {} ({} correct)\nmean final reward: {}\nmean length (tokens): {}",
            self.groups,
            self.groups_skipped,
            self.lines_skipped,
            self.traces,
            self.correct,
            fmt(self.mean_reward),
            fmt(self.mean_length),
        )
    }
}

/// Scores already-loaded groups. Judge transport failures are always fatal;
/// other per-group failures are skipped unless `strict`.
pub async fn score_loaded(
    engine: &ScoringEngine,
    records: &[RolloutRecord],
    strict: bool,
) -> Result<(Vec<RewardRecord>, usize), CliError> {
    let mut out = Vec::new();
    let mut skipped = 0;
    for (rec, result) in records.iter().zip(engine.score_records(records).await) {
        match result {
            Ok(rows) => out.extend(rows),
            Err(e) if e.is_transport() => return Err(CliError::Judge(format!("group {:?}: {e}", rec.group_id))),
            Err(e) if strict => return Err(CliError::Input(format!("group {:?}: {e}", rec.group_id))),
            Err(e) => {
                tracing::warn!(group_id = %rec.group_id, error = %e, "skipping group");
                skipped += 1;
            }
        }
    }
    Ok((out, skipped))
}

pub async fn score(cfg: &EngineConfig, args: &ScoreArgs) -> Result<ScoreSummary, CliError> {
    let mut cfg = cfg.clone();
    if let Some(a) = args.alpha {
        cfg.reward.alpha = a;
    }
    if let Some(l) = args.lambda {
        cfg.reward.lambda = l;
    }
    cfg.validate()?;
    let rollouts = args.rollouts.clone().or(cfg.paths.rollouts.clone());
    let rollouts = required(&rollouts, "rollouts path")?;
    let out = args.out.clone().or(cfg.paths.out.clone());
    let out = required(&out, "output path")?;

    let loaded = load_jsonl::<RolloutRecord>(&rollouts, strictness(args.strict))
        .map_err(|e| CliError::Input(e.to_string()))?;
    if loaded.records.is_empty() {
        tracing::warn!(path = %rollouts.display(), "no rollout groups to score");
        save_jsonl::<RewardRecord>(&out, &[]).map_err(|e| CliError::Output(e.to_string()))?;
        return Ok(ScoreSummary {
            lines_skipped: loaded.skipped.len(),
            ..ScoreSummary::default()
        });
    }

    let engine = build_engine(&cfg)?;
    ensure_reachable(&engine, &cfg.judge).await?;
    let (rows, groups_skipped) = score_loaded(&engine, &loaded.records, args.strict).await?;
    save_jsonl(&out, &rows).map_err(|e| CliError::Output(e.to_string()))?;
    let summary = ScoreSummary::from_records(
        &rows,
        loaded.records.len() - groups_skipped,
        groups_skipped,
        loaded.skipped.len(),
    );
    tracing::info!(
        groups = summary.groups,
        traces = summary.traces,
        out = %out.display(),
        "scoring finished"
    );
    Ok(summary)
}

async fn analyze_records(
    engine: &ScoringEngine,
    records: &[LabeledTraceRecord],
    interp_points: usize,
    out_dir: Option<&Path>,
) -> Result<AnalysisSummary, CliError> {
    let trajectories = engine.labeled_trajectories(records).await.map_err(|e| {
        if e.is_judge_failure() {
            CliError::Judge(e.to_string())
        } else {
            CliError::Input(e.to_string())
        }
    })?;
    let report = analysis::analyze(records, &trajectories, interp_points, Exec::default())
        .map_err(|e| CliError::Input(e.to_string()))?;
    if let Some(reason) = &report.summary.roc_skipped {
        tracing::warn!(reason = %reason, "roc.csv not written");
    }
    if let Some(dir) = out_dir {
        analysis::write_report(dir, &report).map_err(|e| CliError::Output(e.to_string()))?;
    }
    Ok(report.summary)
}

pub async fn analyze(cfg: &EngineConfig, args: &AnalyzeArgs) -> Result<AnalysisSummary, CliError> {
    let mut cfg = cfg.clone();
    if let Some(n) = args.interp_n {
        cfg.analysis.interp_points = n;
    }
    cfg.validate()?;
    let labeled = args.labeled.clone().or(cfg.paths.labeled.clone());
    let labeled = required(&labeled, "labeled traces path")?;
    let out_dir = args.out_dir.clone().or(cfg.paths.out_dir.clone());
    let out_dir = required(&out_dir, "output directory")?;

    let loaded = load_jsonl::<LabeledTraceRecord>(&labeled, strictness(args.strict))
        .map_err(|e| CliError::Input(e.to_string()))?;
    // precomputed trajectories make the judge unnecessary
    let engine = if loaded.records.iter().all(|r| r.trajectory.is_some()) {
        engine_with(JudgeClient::from_mock(MockJudgeTable::default(), &cfg.judge), &cfg)?
    } else {
        let engine = build_engine(&cfg)?;
        ensure_reachable(&engine, &cfg.judge).await?;
        engine
    };
    analyze_records(&engine, &loaded.records, cfg.analysis.interp_points, Some(&out_dir)).await
}

pub fn render_analysis(s: &AnalysisSummary) -> String {
    let fmt = |x: Option<f64>| x.map_or("n/a".to_owned(), |v| format!("{v:.6}"));
    let c = &s.counts;
    let mut lines = vec![
        format!(
            "questions: {}, traces: {} ({:.1}% correct), avg steps: {:.2}",
            c.questions, c.traces, c.percent_correct, c.avg_steps
        ),
        format!(
            "mean final entropy: correct {}, incorrect {}",
            fmt(s.mean_final_entropy_correct),
            fmt(s.mean_final_entropy_incorrect)
        ),
        format!("roc auc: {}", fmt(s.roc_auc)),
        format!("cohen's d: {}", fmt(s.cohens_d)),
        format!("first-error marker: {}", fmt(s.first_error_marker)),
    ];
    lines.extend(s.roc_skipped.iter().cloned());
    lines.extend(s.cohens_d_skipped.iter().cloned());
    lines.join("\n")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemoOutput {
    pub rewards: Vec<RewardRecord>,
    pub score: ScoreSummary,
    pub analysis: AnalysisSummary,
}

/// Runs the bundled synthetic fixtures through scoring and analysis.
pub async fn mock_demo(cfg: &EngineConfig, args: &MockDemoArgs) -> Result<DemoOutput, CliError> {
    cfg.validate()?;
    let rollouts = bundled_rollouts();
    let engine = mock_engine(&rollouts.fixture, cfg)?;
    let (rewards, skipped) = score_loaded(&engine, &rollouts.records, true).await?;
    let score = ScoreSummary::from_records(&rewards, rollouts.records.len() - skipped, skipped, 0);

    let labeled = bundled_labeled();
    let engine = mock_engine(&labeled.fixture, cfg)?;
    if let Some(dir) = &args.out_dir {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Output(format!("{}: {e}", dir.display())))?;
        save_jsonl(&dir.join(REWARDS_FILE), &rewards).map_err(|e| CliError::Output(e.to_string()))?;
    }
    let analysis = analyze_records(
        &engine,
        &labeled.records,
        cfg.analysis.interp_points,
        args.out_dir.as_deref(),
    )
    .await?;
    Ok(DemoOutput {
        rewards,
        score,
        analysis,
    })
}

pub fn render_demo(d: &DemoOutput) -> String {
    let mut lines = vec![format!(
        "{:<10} {:<8} {:>7} {:>7} {:>7} {:>7} {:>9}",
        "group", "trace", "correct", "r_auc", "r_mono", "r_len", "reward"
    )];
    for r in &d.rewards {
        let b = &r.breakdown;
        lines.push(format!(
            "{:<10} {:<8} {:>7} {:>7.4} {:>7.4} {:>7.4} {:>9.6}",
            r.group_id, b.trace_id, b.correct, b.r_auc, b.r_mono, b.r_length, b.final_reward
        ));
    }
    lines.push(String::new());
    lines.push(d.score.render());
    lines.push(String::new());
    lines.push(render_analysis(&d.analysis));
    lines.join("\n")
}
