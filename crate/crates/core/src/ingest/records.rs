//! JSONL record schemas.
//!
//! Every record keeps unknown fields in `extra` so files written back out
//! carry them unchanged.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::answer::{check_correctness, extract_boxed_answer};
use super::segment::Segmenter;
use super::IngestError;
use crate::reward::RewardBreakdown;

/// Validation applied to each record after it parses.
pub trait Validate {
    fn validate(&self) -> Result<(), IngestError>;
}

fn require_non_empty(field: &'static str, value: &str) -> Result<(), IngestError> {
    if value.trim().is_empty() {
        Err(IngestError::Schema {
            field: field.to_owned(),
            message: "must not be empty".into(),
        })
    } else {
        Ok(())
    }
}

/// One trace of a rollout group as submitted by a trainer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutTrace {
    pub trace_id: String,
    pub text: String,
    pub length_tokens: u64,
    /// Precomputed correctness; overrides the built-in answer check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correct: Option<bool>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

/// A line of `rollouts.jsonl`, also the body of `POST /v1/score`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutRecord {
    pub group_id: String,
    pub question: String,
    pub ground_truth: String,
    pub traces: Vec<RolloutTrace>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl Validate for RolloutRecord {
    fn validate(&self) -> Result<(), IngestError> {
        require_non_empty("question", &self.question)?;
        require_non_empty("ground_truth", &self.ground_truth)?;
        if self.traces.is_empty() {
            return Err(IngestError::Schema {
                field: "traces".into(),
                message: "a rollout group needs at least one trace".into(),
            });
        }
        let mut ids = std::collections::HashSet::new();
        for t in &self.traces {
            if !ids.insert(t.trace_id.as_str()) {
                return Err(IngestError::Schema {
                    field: "traces.trace_id".into(),
                    message: format!("duplicate trace id {:?}", t.trace_id),
                });
            }
        }
        Ok(())
    }
}

/// A reasoning trace parsed into steps with its extracted final answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub trace_id: String,
    pub question: String,
    pub raw_text: String,
    pub steps: Vec<String>,
    pub extracted_answer: Option<String>,
    pub length_tokens: u64,
}

impl TraceRecord {
    pub fn parse(
        trace_id: impl Into<String>,
        question: impl Into<String>,
        raw_text: impl Into<String>,
        length_tokens: u64,
        segmenter: &Segmenter,
    ) -> Self {
        let raw_text = raw_text.into();
        let regions = segmenter.regions(&raw_text);
        let steps = segmenter.segment(regions.reasoning);
        // prefer a box in the answer region; fall back to the whole trace
        let extracted_answer = regions
            .answer
            .and_then(extract_boxed_answer)
            .or_else(|| extract_boxed_answer(&raw_text));
        Self {
            trace_id: trace_id.into(),
            question: question.into(),
            raw_text,
            steps,
            extracted_answer,
            length_tokens,
        }
    }

    pub fn is_correct(&self, ground_truth: &str) -> bool {
        check_correctness(self.extracted_answer.as_deref(), ground_truth)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepLabel {
    Correct,
    Incorrect,
}

/// A line of `labeled.jsonl`: a trace with step-level correctness labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledTraceRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_id: Option<String>,
    pub question: String,
    pub ground_truth: String,
    pub steps: Vec<String>,
    pub step_labels: Vec<StepLabel>,
    pub trace_correct: bool,
    pub source_dataset: String,
    /// Derived from `step_labels` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_error_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length_tokens: Option<u64>,
    /// Precomputed entropies H_0..H_T; when present the judge is not queried.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<Vec<f64>>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl LabeledTraceRecord {
    /// Index of the first step labelled incorrect.
    pub fn first_error(&self) -> Option<usize> {
        self.first_error_index.or_else(|| {
            self.step_labels
                .iter()
                .position(|l| *l == StepLabel::Incorrect)
        })
    }

    pub fn id_or(&self, fallback: usize) -> String {
        self.trace_id
            .clone()
            .unwrap_or_else(|| format!("labeled-{fallback}"))
    }
}

impl Validate for LabeledTraceRecord {
    fn validate(&self) -> Result<(), IngestError> {
        require_non_empty("question", &self.question)?;
        require_non_empty("ground_truth", &self.ground_truth)?;
        if self.step_labels.len() != self.steps.len() {
            return Err(IngestError::Schema {
                field: "step_labels".into(),
                message: format!(
                    "{} labels for {} steps",
                    self.step_labels.len(),
                    self.steps.len()
                ),
            });
        }
        let derived = self
            .step_labels
            .iter()
            .position(|l| *l == StepLabel::Incorrect);
        if let Some(given) = self.first_error_index {
            if Some(given) != derived {
                return Err(IngestError::Schema {
                    field: "first_error_index".into(),
                    message: format!("is {given} but labels give {derived:?}"),
                });
            }
        }
        if let Some(traj) = &self.trajectory {
            if traj.len() != self.steps.len() + 1 {
                return Err(IngestError::Schema {
                    field: "trajectory".into(),
                    message: format!("{} values for {} steps", traj.len(), self.steps.len()),
                });
            }
            if traj.iter().any(|h| !(h.is_finite() && *h >= 0.0)) {
                return Err(IngestError::Schema {
                    field: "trajectory".into(),
                    message: "entropies must be finite and non-negative".into(),
                });
            }
        }
        Ok(())
    }
}

/// A line of `rewards.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardRecord {
    pub group_id: String,
    #[serde(flatten)]
    pub breakdown: RewardBreakdown,
    pub length_tokens: u64,
    pub num_steps: usize,
    pub extracted_answer: Option<String>,
    pub trajectory: Vec<f64>,
}

impl Validate for RewardRecord {
    fn validate(&self) -> Result<(), IngestError> {
        if self.trajectory.len() != self.num_steps + 1 {
            return Err(IngestError::Schema {
                field: "trajectory".into(),
                message: "length must be num_steps + 1".into(),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::segment::SegmentationConfig;

    #[test]
    fn rollout_keeps_unknown_fields() {
        let line = r#"{"group_id":"g","question":"q","ground_truth":"4","traces":[{"trace_id":"a","text":"t","length_tokens":3,"policy":"p1"}],"epoch":7}"#;
        let r: RolloutRecord = serde_json::from_str(line).unwrap();
        assert_eq!(r.extra["epoch"], 7);
        assert_eq!(r.traces[0].extra["policy"], "p1");
        assert_eq!(serde_json::to_string(&r).unwrap(), line);
    }

    #[test]
    fn rollout_validation() {
        let missing = r#"{"group_id":"g","question":"q","traces":[]}"#;
        let err = serde_json::from_str::<RolloutRecord>(missing).unwrap_err();
        assert!(err.to_string().contains("ground_truth"));

        let mut r: RolloutRecord = serde_json::from_str(
            r#"{"group_id":"g","question":"q","ground_truth":"4","traces":[]}"#,
        )
        .unwrap();
        assert!(matches!(r.validate(), Err(IngestError::Schema { field, .. }) if field == "traces"));
        r.ground_truth = " ".into();
        assert!(matches!(r.validate(), Err(IngestError::Schema { field, .. }) if field == "ground_truth"));
    }

    #[test]
    fn trace_record_parse() {
        let seg = Segmenter::new(&SegmentationConfig::default()).unwrap();
        let t = TraceRecord::parse(
            "t",
            "q",
            "<think>2+2\n\nis 4</think>\\boxed{4}",
            12,
            &seg,
        );
        assert_eq!(t.steps, ["2+2", "is 4"]);
        assert_eq!(t.extracted_answer.as_deref(), Some("4"));
        assert!(t.is_correct("4"));

        let plain = TraceRecord::parse("t", "q", "a\n\nso \\boxed{5}", 4, &seg);
        assert_eq!(plain.steps, ["a", "so \\boxed{5}"]);
        assert!(!plain.is_correct("4"));
    }

    #[test]
    fn labeled_first_error() {
        let line = r#"{"question":"q","ground_truth":"1","steps":["a","b","c"],"step_labels":["correct","incorrect","incorrect"],"trace_correct":false,"source_dataset":"gsm8k"}"#;
        let r: LabeledTraceRecord = serde_json::from_str(line).unwrap();
        r.validate().unwrap();
        assert_eq!(r.first_error(), Some(1));

        let mut bad = r.clone();
        bad.first_error_index = Some(2);
        assert!(bad.validate().is_err());
        let mut bad = r.clone();
        bad.step_labels.pop();
        assert!(bad.validate().is_err());
        let mut bad = r;
        bad.trajectory = Some(vec![1.0, 0.5]);
        assert!(bad.validate().is_err());
    }
}
