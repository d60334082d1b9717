//! Step-level and trajectory-level statistics over labelled traces.
//!
//! Step-level: information gain of correct steps against first incorrect
//! steps, summarised by Cohen's d and a ROC curve with the negated gain as
//! the error score. Trajectory-level: fixed-length resampled entropy curves
//! averaged per correctness group, with the mean first-error position.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::entropy::EntropyTrajectory;
use crate::ingest::LabeledTraceRecord;
use crate::par::Exec;

pub mod report;
pub mod stats;
pub mod trajectory;

pub use report::{write_report, AnalysisReport, AnalysisSummary, Counts};
pub use stats::{cohens_d, curve_area, roc_auc, RocPoint, RocResult};
pub use trajectory::{
    aggregate_group, first_error_fraction, interpolate_all, interpolate_trajectory, interpolate_values,
    BandAccumulator, GroupTrajectoryStats, NormalizedTrajectory, DEFAULT_INTERP_POINTS,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("interpolation needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("{0} is empty")]
    Empty(&'static str),
    #[error("trajectories have mixed lengths ({expected} vs {found})")]
    MixedLengths { expected: usize, found: usize },
    #[error("each sample needs at least 2 values (got {a} and {b})")]
    TooFewSamples { a: usize, b: usize },
    #[error("degenerate samples: pooled variance is zero")]
    DegenerateSamples,
    #[error("one score class is empty")]
    EmptyClass,
    #[error("scores must not be NaN")]
    NonFinite,
    #[error("record {index}: {message}")]
    Misaligned { index: usize, message: String },
    #[error("writing {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepClass {
    CorrectStep,
    FirstIncorrectStep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepIgSample {
    pub ig: f64,
    pub label: StepClass,
    pub trace_id: String,
    pub step_index: usize,
}

/// Per-step information gains. Steps after a trace's first error are
/// dropped, so a trace with first error `e` yields exactly `e + 1` samples.
pub fn build_step_ig_dataset(
    records: &[LabeledTraceRecord],
    trajectories: &[EntropyTrajectory],
) -> Result<Vec<StepIgSample>, AnalysisError> {
    if records.len() != trajectories.len() {
        return Err(AnalysisError::Misaligned {
            index: records.len().min(trajectories.len()),
            message: format!("{} records but {} trajectories", records.len(), trajectories.len()),
        });
    }
    let mut out = Vec::new();
    for (index, (rec, traj)) in records.iter().zip(trajectories).enumerate() {
        if rec.step_labels.len() != rec.steps.len() || traj.steps() != rec.steps.len() {
            return Err(AnalysisError::Misaligned {
                index,
                message: format!(
                    "{} steps, {} labels, trajectory with {} steps",
                    rec.steps.len(),
                    rec.step_labels.len(),
                    traj.steps()
                ),
            });
        }
        let first_error = rec.first_error();
        if first_error.is_some_and(|e| e >= rec.steps.len()) {
            return Err(AnalysisError::Misaligned {
                index,
                message: "first_error_index is past the last step".into(),
            });
        }
        let keep = first_error.map_or(rec.steps.len(), |e| e + 1);
        for (step_index, ig) in traj.information_gains().take(keep).enumerate() {
            let label = if Some(step_index) == first_error {
                StepClass::FirstIncorrectStep
            } else {
                StepClass::CorrectStep
            };
            out.push(StepIgSample {
                ig,
                label,
                trace_id: traj.trace_id().to_owned(),
                step_index,
            });
        }
    }
    Ok(out)
}

/// Runs the full analysis over labelled records and their trajectories.
pub fn analyze(
    records: &[LabeledTraceRecord],
    trajectories: &[EntropyTrajectory],
    interp_points: usize,
    exec: Exec,
) -> Result<AnalysisReport, AnalysisError> {
    let samples = build_step_ig_dataset(records, trajectories)?;
    let normalized = interpolate_all(trajectories, interp_points, exec)?;

    let mut correct = Vec::new();
    let mut incorrect = Vec::new();
    let mut fracs = Vec::new();
    for (rec, nt) in records.iter().zip(normalized) {
        if rec.trace_correct {
            correct.push(nt);
        } else {
            if let Some(e) = rec.first_error() {
                fracs.push(first_error_fraction(e, rec.steps.len()));
            }
            incorrect.push(nt);
        }
    }
    let correct_stats = (!correct.is_empty())
        .then(|| aggregate_group(&correct, None, exec))
        .transpose()?;
    let incorrect_stats = (!incorrect.is_empty())
        .then(|| aggregate_group(&incorrect, Some(&fracs), exec))
        .transpose()?;

    let good: Vec<f64> = samples
        .iter()
        .filter(|s| s.label == StepClass::CorrectStep)
        .map(|s| s.ig)
        .collect();
    let bad: Vec<f64> = samples
        .iter()
        .filter(|s| s.label == StepClass::FirstIncorrectStep)
        .map(|s| s.ig)
        .collect();

    // error detector: a low (negative) gain signals a wrong step
    let err_scores = |xs: &[f64]| xs.iter().map(|x| -x).collect::<Vec<_>>();
    let roc = roc_auc(&err_scores(&bad), &err_scores(&good));
    let d = cohens_d(&good, &bad);

    let summary = AnalysisSummary::build(
        records,
        &samples,
        interp_points,
        &roc,
        &d,
        correct_stats.as_ref(),
        incorrect_stats.as_ref(),
    );
    Ok(AnalysisReport {
        correct: correct_stats,
        incorrect: incorrect_stats,
        samples,
        roc: roc.ok(),
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::build_trajectory;
    use crate::ingest::StepLabel;

    fn record(steps: usize, first_error: Option<usize>) -> LabeledTraceRecord {
        LabeledTraceRecord {
            trace_id: None,
            question: "q".into(),
            ground_truth: "1".into(),
            steps: (0..steps).map(|i| format!("s{i}")).collect(),
            step_labels: (0..steps)
                .map(|i| match first_error {
                    Some(e) if i >= e => StepLabel::Incorrect,
                    _ => StepLabel::Correct,
                })
                .collect(),
            trace_correct: first_error.is_none(),
            source_dataset: "t".into(),
            first_error_index: None,
            length_tokens: None,
            trajectory: None,
            extra: Default::default(),
        }
    }

    fn traj(steps: usize) -> EntropyTrajectory {
        build_trajectory("t", (0..=steps).map(|i| 3.0 - i as f64 * 0.5).collect()).unwrap()
    }

    #[test]
    fn correct_trace_contributes_every_step() {
        let s = build_step_ig_dataset(&[record(3, None)], &[traj(3)]).unwrap();
        assert_eq!(s.len(), 3);
        assert!(s.iter().all(|x| x.label == StepClass::CorrectStep && x.ig == 0.5));
    }

    #[test]
    fn steps_after_first_error_are_dropped() {
        let s = build_step_ig_dataset(&[record(4, Some(1))], &[traj(4)]).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].label, StepClass::CorrectStep);
        assert_eq!(s[1].label, StepClass::FirstIncorrectStep);
        assert_eq!(s[1].step_index, 1);

        let s = build_step_ig_dataset(&[record(4, Some(0))], &[traj(4)]).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].label, StepClass::FirstIncorrectStep);
    }

    #[test]
    fn misalignment_is_reported() {
        assert!(build_step_ig_dataset(&[record(3, None)], &[traj(2)]).is_err());
        assert!(build_step_ig_dataset(&[record(3, None)], &[]).is_err());
        let mut r = record(3, None);
        r.step_labels.pop();
        assert!(build_step_ig_dataset(&[r], &[traj(3)]).is_err());
    }

    #[test]
    fn all_correct_dataset_skips_roc() {
        let recs = vec![record(3, None), record(2, None)];
        let trajs = vec![traj(3), traj(2)];
        let rep = analyze(&recs, &trajs, 5, Exec::Sequential).unwrap();
        assert!(rep.roc.is_none());
        assert!(rep.summary.roc_skipped.is_some());
        assert!(rep.incorrect.is_none());
        assert_eq!(rep.summary.counts.traces, 2);
    }
}
