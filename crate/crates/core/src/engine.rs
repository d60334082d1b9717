//! End-to-end scoring of rollout groups: parse traces, query the judge for
//! entropy trajectories and compute rewards. The CLI and the HTTP service
//! both go through [`ScoringEngine`], so they produce identical records.

use std::time::Instant;

use futures::stream::{self, StreamExt};
use thiserror::Error;

use crate::entropy::{build_trajectory, EntropyTrajectory};
use crate::ingest::{
    IngestError, LabeledTraceRecord, RewardRecord, RolloutRecord, SegmentationConfig, Segmenter,
    TraceRecord, Validate,
};
use crate::judge::{JudgeClient, JudgeError};
use crate::par::{self, Exec};
use crate::reward::{self, GroupTrace, RewardError, RewardParams, RolloutGroup};

/// Groups whose trajectories are fetched concurrently in batch mode.
const GROUPS_IN_FLIGHT: usize = 8;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid input: {0}")]
    Invalid(#[from] IngestError),
    #[error("trace {trace_id:?}: {source}")]
    Judge {
        trace_id: String,
        #[source]
        source: JudgeError,
    },
    #[error(transparent)]
    Reward(#[from] RewardError),
}

impl EngineError {
    pub fn is_judge_failure(&self) -> bool {
        matches!(self, EngineError::Judge { .. })
    }

    /// The judge could not be reached even after retries.
    pub fn is_transport(&self) -> bool {
        matches!(self, EngineError::Judge { source, .. } if source.is_transport())
    }
}

/// A rollout group after segmentation and answer checking.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedGroup {
    pub group_id: String,
    pub question: String,
    pub ground_truth: String,
    pub traces: Vec<TraceRecord>,
    pub correctness: Vec<bool>,
}

#[derive(Debug, Clone)]
pub struct ScoringEngine {
    judge: JudgeClient,
    params: RewardParams,
    segmenter: Segmenter,
    exec: Exec,
}

impl ScoringEngine {
    pub fn new(
        judge: JudgeClient,
        params: RewardParams,
        segmentation: &SegmentationConfig,
    ) -> Result<Self, EngineError> {
        params.validate()?;
        Ok(Self {
            judge,
            params,
            segmenter: Segmenter::new(segmentation)?,
            exec: Exec::default(),
        })
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn judge(&self) -> &JudgeClient {
        &self.judge
    }

    pub fn params(&self) -> &RewardParams {
        &self.params
    }

    /// Segments each trace and resolves correctness, preferring a
    /// caller-supplied flag over the built-in answer check.
    pub fn prepare(&self, record: &RolloutRecord) -> Result<PreparedGroup, EngineError> {
        record.validate()?;
        let traces: Vec<TraceRecord> = record
            .traces
            .iter()
            .map(|t| {
                TraceRecord::parse(
                    t.trace_id.clone(),
                    record.question.clone(),
                    t.text.clone(),
                    t.length_tokens,
                    &self.segmenter,
                )
            })
            .collect();
        let correctness = record
            .traces
            .iter()
            .zip(&traces)
            .map(|(raw, parsed)| raw.correct.unwrap_or_else(|| parsed.is_correct(&record.ground_truth)))
            .collect();
        Ok(PreparedGroup {
            group_id: record.group_id.clone(),
            question: record.question.clone(),
            ground_truth: record.ground_truth.clone(),
            traces,
            correctness,
        })
    }

    pub async fn trajectory(
        &self,
        trace_id: &str,
        question: &str,
        steps: &[String],
        answer: &str,
    ) -> Result<EntropyTrajectory, EngineError> {
        let started = Instant::now();
        let result = self
            .judge
            .trajectory_for_trace(trace_id, question, steps, answer)
            .await;
        let judge_ms = started.elapsed().as_secs_f64() * 1e3;
        match &result {
            Ok(_) => tracing::info!(trace_id, queries = steps.len() + 1, judge_ms, "trajectory computed"),
            Err(e) => tracing::warn!(trace_id, judge_ms, error = %e, "trajectory failed"),
        }
        result.map_err(|source| EngineError::Judge {
            trace_id: trace_id.to_owned(),
            source,
        })
    }

    async fn group_trajectories(
        &self,
        group: &PreparedGroup,
    ) -> Result<Vec<EntropyTrajectory>, EngineError> {
        let futs = group.traces.iter().map(|t| {
            self.trajectory(&t.trace_id, &group.question, &t.steps, &group.ground_truth)
        });
        futures::future::try_join_all(futs).await
    }

    fn assemble(group: PreparedGroup, trajectories: Vec<EntropyTrajectory>) -> (RolloutGroup, Vec<bool>) {
        let traces = group
            .traces
            .into_iter()
            .zip(trajectories)
            .map(|(t, trajectory)| GroupTrace {
                trace_id: t.trace_id,
                steps: t.steps,
                extracted_answer: t.extracted_answer,
                length_tokens: t.length_tokens,
                trajectory,
            })
            .collect();
        (
            RolloutGroup {
                question_id: group.group_id,
                ground_truth: group.ground_truth,
                traces,
            },
            group.correctness,
        )
    }

    fn records(group: &RolloutGroup, breakdowns: Vec<reward::RewardBreakdown>) -> Vec<RewardRecord> {
        group
            .traces
            .iter()
            .zip(breakdowns)
            .map(|(t, breakdown)| RewardRecord {
                group_id: group.question_id.clone(),
                breakdown,
                length_tokens: t.length_tokens,
                num_steps: t.steps.len(),
                extracted_answer: t.extracted_answer.clone(),
                trajectory: t.trajectory.values().to_vec(),
            })
            .collect()
    }

    /// Scores one group; output order matches `record.traces`.
    pub async fn score_record(&self, record: &RolloutRecord) -> Result<Vec<RewardRecord>, EngineError> {
        let prepared = self.prepare(record)?;
        let trajectories = self.group_trajectories(&prepared).await?;
        let (group, correctness) = Self::assemble(prepared, trajectories);
        let breakdowns = reward::score_group(&group, &self.params, &correctness)?;
        Ok(Self::records(&group, breakdowns))
    }

    /// Scores many groups. Each entry of the result corresponds to the
    /// record at the same index; one failing group does not affect others.
    pub async fn score_records(
        &self,
        records: &[RolloutRecord],
    ) -> Vec<Result<Vec<RewardRecord>, EngineError>> {
        let prepared = par::map(self.exec, records, |r| self.prepare(r));
        let fetched: Vec<Result<(RolloutGroup, Vec<bool>), EngineError>> = stream::iter(prepared)
            .map(|p| async move {
                let p = p?;
                let trajectories = self.group_trajectories(&p).await?;
                Ok(Self::assemble(p, trajectories))
            })
            .buffered(GROUPS_IN_FLIGHT)
            .collect()
            .await;

        let (ok_idx, ok_groups): (Vec<usize>, Vec<(RolloutGroup, Vec<bool>)>) = fetched
            .iter()
            .enumerate()
            .filter_map(|(i, r)| r.as_ref().ok().map(|g| (i, g.clone())))
            .unzip();
        let scored = par::map(self.exec, &ok_groups, |(g, c)| {
            reward::score_group(g, &self.params, c).map(|b| Self::records(g, b))
        });

        let mut scored = ok_idx.into_iter().zip(scored).peekable();
        fetched
            .into_iter()
            .enumerate()
            .map(|(i, r)| match r {
                Err(e) => Err(e),
                Ok(_) => {
                    let (j, s) = scored.next().expect("one score per fetched group");
                    debug_assert_eq!(i, j);
                    s.map_err(EngineError::from)
                }
            })
            .collect()
    }

    /// Trajectories for labelled analysis records. Records that carry a
    /// precomputed trajectory skip the judge.
    pub async fn labeled_trajectories(
        &self,
        records: &[LabeledTraceRecord],
    ) -> Result<Vec<EntropyTrajectory>, EngineError> {
        let futs = records.iter().enumerate().map(|(i, r)| async move {
            let id = r.id_or(i);
            match &r.trajectory {
                Some(values) => build_trajectory(id.clone(), values.clone()).map_err(|e| {
                    EngineError::Invalid(IngestError::Schema {
                        field: "trajectory".into(),
                        message: format!("{id}: {e}"),
                    })
                }),
                None => self.trajectory(&id, &r.question, &r.steps, &r.ground_truth).await,
            }
        });
        stream::iter(futs).buffered(GROUPS_IN_FLIGHT * 4).collect::<Vec<_>>().await.into_iter().collect()
    }
}
