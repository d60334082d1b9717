//! Plot-ready CSV files and the JSON summary.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::stats::RocResult;
use super::trajectory::GroupTrajectoryStats;
use super::{AnalysisError, StepClass, StepIgSample};
use crate::ingest::LabeledTraceRecord;

pub const TRAJECTORY_STATS_CSV: &str = "trajectory_stats.csv";
pub const IG_SAMPLES_CSV: &str = "ig_samples.csv";
pub const ROC_CSV: &str = "roc.csv";
pub const SUMMARY_JSON: &str = "summary.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counts {
    pub questions: usize,
    pub traces: usize,
    pub correct_traces: usize,
    pub incorrect_traces: usize,
    pub percent_correct: f64,
    pub avg_steps: f64,
    pub avg_steps_correct: Option<f64>,
    pub avg_steps_incorrect: Option<f64>,
    pub correct_step_samples: usize,
    pub first_incorrect_step_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSummary {
    pub roc_auc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub roc_skipped: Option<String>,
    pub cohens_d: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cohens_d_skipped: Option<String>,
    pub first_error_marker: Option<f64>,
    pub mean_final_entropy_correct: Option<f64>,
    pub mean_final_entropy_incorrect: Option<f64>,
    pub interp_points: usize,
    pub counts: Counts,
}

fn mean_of(it: impl Iterator<Item = usize>) -> Option<f64> {
    let (sum, n) = it.fold((0usize, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum as f64 / n as f64)
}

impl AnalysisSummary {
    pub(super) fn build(
        records: &[LabeledTraceRecord],
        samples: &[StepIgSample],
        interp_points: usize,
        roc: &Result<RocResult, AnalysisError>,
        d: &Result<f64, AnalysisError>,
        correct: Option<&GroupTrajectoryStats>,
        incorrect: Option<&GroupTrajectoryStats>,
    ) -> Self {
        let questions = records
            .iter()
            .map(|r| r.question.as_str())
            .collect::<HashSet<_>>()
            .len();
        let correct_traces = records.iter().filter(|r| r.trace_correct).count();
        let traces = records.len();
        let first_bad = samples
            .iter()
            .filter(|s| s.label == StepClass::FirstIncorrectStep)
            .count();
        let counts = Counts {
            questions,
            traces,
            correct_traces,
            incorrect_traces: traces - correct_traces,
            percent_correct: if traces == 0 {
                0.0
            } else {
                100.0 * correct_traces as f64 / traces as f64
            },
            avg_steps: mean_of(records.iter().map(|r| r.steps.len())).unwrap_or(0.0),
            avg_steps_correct: mean_of(records.iter().filter(|r| r.trace_correct).map(|r| r.steps.len())),
            avg_steps_incorrect: mean_of(
                records.iter().filter(|r| !r.trace_correct).map(|r| r.steps.len()),
            ),
            correct_step_samples: samples.len() - first_bad,
            first_incorrect_step_samples: first_bad,
        };
        let final_mean = |s: Option<&GroupTrajectoryStats>| s.and_then(|s| s.mean.last().copied());
        Self {
            roc_auc: roc.as_ref().ok().map(|r| r.auc),
            roc_skipped: roc.as_ref().err().map(|e| format!("roc not computed: {e}")),
            cohens_d: d.as_ref().ok().copied(),
            cohens_d_skipped: d.as_ref().err().map(|e| format!("cohens_d not computed: {e}")),
            first_error_marker: incorrect.and_then(|s| s.mean_first_error_position),
            mean_final_entropy_correct: final_mean(correct),
            mean_final_entropy_incorrect: final_mean(incorrect),
            interp_points,
            counts,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisReport {
    pub correct: Option<GroupTrajectoryStats>,
    pub incorrect: Option<GroupTrajectoryStats>,
    pub samples: Vec<StepIgSample>,
    /// Absent when one of the two step classes is empty.
    pub roc: Option<RocResult>,
    pub summary: AnalysisSummary,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> AnalysisError {
    AnalysisError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_trajectory_stats(
    path: &Path,
    correct: Option<&GroupTrajectoryStats>,
    incorrect: Option<&GroupTrajectoryStats>,
) -> Result<(), AnalysisError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record([
        "position",
        "mean_correct",
        "std_correct",
        "mean_incorrect",
        "std_incorrect",
        "first_error_marker",
    ])
    .map_err(|e| io_err(path, e))?;
    let width = correct.or(incorrect).map_or(0, |s| s.mean.len());
    let marker = fmt_opt(incorrect.and_then(|s| s.mean_first_error_position));
    for i in 0..width {
        let position = if width > 1 { i as f64 / (width - 1) as f64 } else { 0.0 };
        let col = |s: Option<&GroupTrajectoryStats>, std: bool| {
            fmt_opt(s.map(|s| if std { s.std[i] } else { s.mean[i] }))
        };
        w.write_record([
            position.to_string(),
            col(correct, false),
            col(correct, true),
            col(incorrect, false),
            col(incorrect, true),
            marker.clone(),
        ])
        .map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn write_ig_samples(path: &Path, samples: &[StepIgSample]) -> Result<(), AnalysisError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(["ig", "label"]).map_err(|e| io_err(path, e))?;
    for s in samples {
        let label = match s.label {
            StepClass::CorrectStep => "correct_step",
            StepClass::FirstIncorrectStep => "first_incorrect_step",
        };
        w.write_record([s.ig.to_string(), label.to_owned()])
            .map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Rows in decreasing-threshold order; thresholds are negated information gains.
pub fn write_roc(path: &Path, roc: &RocResult) -> Result<(), AnalysisError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(["threshold", "fpr", "tpr"]).map_err(|e| io_err(path, e))?;
    for p in &roc.points {
        w.write_record([p.threshold.to_string(), p.fpr.to_string(), p.tpr.to_string()])
            .map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Writes all artifacts into `out_dir`. `roc.csv` is omitted (and any stale
/// copy removed) when the ROC could not be computed.
pub fn write_report(out_dir: &Path, report: &AnalysisReport) -> Result<(), AnalysisError> {
    std::fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    write_trajectory_stats(
        &out_dir.join(TRAJECTORY_STATS_CSV),
        report.correct.as_ref(),
        report.incorrect.as_ref(),
    )?;
    write_ig_samples(&out_dir.join(IG_SAMPLES_CSV), &report.samples)?;
    let roc_path = out_dir.join(ROC_CSV);
    match &report.roc {
        Some(roc) => write_roc(&roc_path, roc)?,
        None if roc_path.exists() => std::fs::remove_file(&roc_path).map_err(|e| io_err(&roc_path, e))?,
        None => {}
    }
    let summary_path = out_dir.join(SUMMARY_JSON);
    let json = serde_json::to_string_pretty(&report.summary).map_err(|e| io_err(&summary_path, e))?;
    std::fs::write(&summary_path, json + "\n").map_err(|e| io_err(&summary_path, e))
}
