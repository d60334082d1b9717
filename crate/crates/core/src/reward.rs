//! InfoDensity reward over entropy trajectories and rollout groups.
//!
//! Quality is a convex mix of an area-under-curve reward and a monotonicity
//! reward. It is multiplied by a group-relative length factor and the product
//! is only paid out for traces whose final answer is correct.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::entropy::EntropyTrajectory;
use crate::par::{self, Exec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RewardError {
    #[error("trajectory has no steps")]
    NoSteps,
    #[error("invalid reward parameter {name}: {value}")]
    InvalidParam { name: &'static str, value: f64 },
    #[error("correctness list has {got} entries for {expected} traces")]
    MisalignedCorrectness { expected: usize, got: usize },
    #[error("rollout group {0:?} has no traces")]
    EmptyGroup(String),
    #[error("trace {trace_id:?}: trajectory length {trajectory_len} does not match {steps} steps")]
    TrajectoryMismatch {
        trace_id: String,
        steps: usize,
        trajectory_len: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardParams {
    /// Weight of the AUC reward against the monotonicity reward.
    pub alpha: f64,
    /// Length-scaling intensity.
    pub lambda: f64,
    /// Lower bound on H_0 used as the AUC normaliser.
    pub h0_floor: f64,
    pub clamp_auc: bool,
}

impl Default for RewardParams {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            lambda: 0.05,
            h0_floor: 1e-6,
            clamp_auc: true,
        }
    }
}

impl RewardParams {
    pub fn validate(&self) -> Result<(), RewardError> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(RewardError::InvalidParam {
                name: "alpha",
                value: self.alpha,
            });
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(RewardError::InvalidParam {
                name: "lambda",
                value: self.lambda,
            });
        }
        if !(self.h0_floor.is_finite() && self.h0_floor > 0.0) {
            return Err(RewardError::InvalidParam {
                name: "h0_floor",
                value: self.h0_floor,
            });
        }
        Ok(())
    }
}

/// Conditions noted while scoring a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardFlag {
    /// T = 0: the trace has no reasoning steps and is paid nothing.
    NoSteps,
    /// H_0 was below the floor and the floor was used as the normaliser.
    H0Floored,
    /// The raw AUC exceeded 1 (entropy rose above H_0) and was clamped.
    AucClamped,
}

struct AucDetail {
    auc: f64,
    floored: bool,
    clamped: bool,
}

fn auc_detail(traj: &EntropyTrajectory, params: &RewardParams) -> Result<AucDetail, RewardError> {
    let steps = traj.steps();
    if steps == 0 {
        return Err(RewardError::NoSteps);
    }
    let h0 = traj.initial();
    let floored = h0 < params.h0_floor;
    let norm = h0.max(params.h0_floor);
    let area: f64 = traj.values()[1..].iter().sum();
    let raw = area / (steps as f64 * norm);
    let (auc, clamped) = if params.clamp_auc && raw > 1.0 {
        (1.0, true)
    } else {
        (raw, false)
    };
    Ok(AucDetail {
        auc,
        floored,
        clamped,
    })
}

/// Normalised area under the trajectory: sum of H_1..H_T over T * H_0.
pub fn auc_score(traj: &EntropyTrajectory, params: &RewardParams) -> Result<f64, RewardError> {
    auc_detail(traj, params).map(|d| d.auc)
}

pub fn auc_reward(traj: &EntropyTrajectory, params: &RewardParams) -> Result<f64, RewardError> {
    Ok(1.0 - auc_score(traj, params)?)
}

/// Fraction of steps whose entropy is strictly below the previous one.
pub fn monotonicity_reward(traj: &EntropyTrajectory) -> Result<f64, RewardError> {
    let steps = traj.steps();
    if steps == 0 {
        return Err(RewardError::NoSteps);
    }
    let decreasing = traj.values().windows(2).filter(|w| w[1] < w[0]).count();
    Ok(decreasing as f64 / steps as f64)
}

pub fn quality_reward(r_auc: f64, r_mono: f64, params: &RewardParams) -> f64 {
    params.alpha * r_auc + (1.0 - params.alpha) * r_mono
}

/// Group-relative length factors exp(-lambda * z) with z the population
/// z-score of each length. A group with zero spread (or a single member)
/// gets 1 everywhere.
pub fn length_scaling(lengths: &[u64], lambda: f64) -> Vec<f64> {
    let n = lengths.len();
    if n <= 1 {
        return vec![1.0; n];
    }
    // z is shift invariant; measuring from the minimum keeps the integer
    // sums small and the float fallback accurate
    let min = lengths.iter().copied().min().unwrap_or(0);
    let shifted: Vec<u64> = lengths.iter().map(|&l| l - min).collect();
    let zs = match exact_z_scores(&shifted) {
        Some(zs) => zs,
        None => float_z_scores(&shifted),
    };
    zs.into_iter()
        .map(|z| match z {
            Some(z) => (-lambda * z).exp(),
            None => 1.0,
        })
        .collect()
}

// z = (G*L - S) / sqrt(G*Q - S^2) with S, Q the sum and sum of squares.
// Every term is an exact integer, so permuting the lengths yields
// bit-identical results.
fn exact_z_scores(lengths: &[u64]) -> Option<Vec<Option<f64>>> {
    let g = lengths.len() as i128;
    let mut s: i128 = 0;
    let mut q: i128 = 0;
    for &l in lengths {
        let l = l as i128;
        s = s.checked_add(l)?;
        q = q.checked_add(l.checked_mul(l)?)?;
    }
    let spread = g.checked_mul(q)?.checked_sub(s.checked_mul(s)?)?;
    if spread == 0 {
        return Some(vec![None; lengths.len()]);
    }
    let denom = (spread as f64).sqrt();
    lengths
        .iter()
        .map(|&l| {
            let num = g.checked_mul(l as i128)?.checked_sub(s)?;
            Some(Some(num as f64 / denom))
        })
        .collect()
}

fn float_z_scores(lengths: &[u64]) -> Vec<Option<f64>> {
    let n = lengths.len() as f64;
    let mean = lengths.iter().map(|&l| l as f64).sum::<f64>() / n;
    let var = lengths
        .iter()
        .map(|&l| (l as f64 - mean).powi(2))
        .sum::<f64>()
        / n;
    let sd = var.sqrt();
    lengths
        .iter()
        .map(|&l| (sd > 0.0).then(|| (l as f64 - mean) / sd))
        .collect()
}

/// One candidate trace inside a rollout group, ready to be scored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupTrace {
    pub trace_id: String,
    pub steps: Vec<String>,
    pub extracted_answer: Option<String>,
    pub length_tokens: u64,
    pub trajectory: EntropyTrajectory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutGroup {
    pub question_id: String,
    pub ground_truth: String,
    pub traces: Vec<GroupTrace>,
}

impl RolloutGroup {
    pub fn validate(&self) -> Result<(), RewardError> {
        if self.traces.is_empty() {
            return Err(RewardError::EmptyGroup(self.question_id.clone()));
        }
        for t in &self.traces {
            if t.trajectory.values().len() != t.steps.len() + 1 {
                return Err(RewardError::TrajectoryMismatch {
                    trace_id: t.trace_id.clone(),
                    steps: t.steps.len(),
                    trajectory_len: t.trajectory.values().len(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub trace_id: String,
    pub auc: f64,
    pub r_auc: f64,
    pub r_mono: f64,
    pub r_quality: f64,
    pub r_length: f64,
    pub r_infodensity: f64,
    pub correct: bool,
    pub final_reward: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<RewardFlag>,
}

/// Scores a single trajectory given its precomputed length factor.
pub fn score_trace(
    trace_id: &str,
    traj: &EntropyTrajectory,
    r_length: f64,
    correct: bool,
    params: &RewardParams,
) -> RewardBreakdown {
    let detail = match auc_detail(traj, params) {
        Ok(d) => d,
        Err(_) => {
            return RewardBreakdown {
                trace_id: trace_id.to_owned(),
                auc: 0.0,
                r_auc: 0.0,
                r_mono: 0.0,
                r_quality: 0.0,
                r_length,
                r_infodensity: 0.0,
                correct,
                final_reward: 0.0,
                flags: vec![RewardFlag::NoSteps],
            }
        }
    };
    let mut flags = Vec::new();
    if detail.floored {
        flags.push(RewardFlag::H0Floored);
    }
    if detail.clamped {
        flags.push(RewardFlag::AucClamped);
    }
    let r_auc = 1.0 - detail.auc;
    // steps > 0 was checked by auc_detail
    let r_mono = monotonicity_reward(traj).unwrap_or(0.0);
    let r_quality = quality_reward(r_auc, r_mono, params);
    let r_infodensity = r_quality * r_length;
    RewardBreakdown {
        trace_id: trace_id.to_owned(),
        auc: detail.auc,
        r_auc,
        r_mono,
        r_quality,
        r_length,
        r_infodensity,
        correct,
        final_reward: if correct { r_infodensity } else { 0.0 },
        flags,
    }
}

/// Scores every trace of a group. Output order mirrors `group.traces`.
pub fn score_group(
    group: &RolloutGroup,
    params: &RewardParams,
    correctness: &[bool],
) -> Result<Vec<RewardBreakdown>, RewardError> {
    params.validate()?;
    group.validate()?;
    if correctness.len() != group.traces.len() {
        return Err(RewardError::MisalignedCorrectness {
            expected: group.traces.len(),
            got: correctness.len(),
        });
    }
    let lengths: Vec<u64> = group.traces.iter().map(|t| t.length_tokens).collect();
    let factors = length_scaling(&lengths, params.lambda);
    Ok(group
        .traces
        .iter()
        .zip(factors)
        .zip(correctness)
        .map(|((t, r_length), &correct)| {
            score_trace(&t.trace_id, &t.trajectory, r_length, correct, params)
        })
        .collect())
}

/// Scores many independent groups, in parallel when `exec` allows.
pub fn score_groups(
    groups: &[(RolloutGroup, Vec<bool>)],
    params: &RewardParams,
    exec: Exec,
) -> Result<Vec<Vec<RewardBreakdown>>, RewardError> {
    par::try_map(exec, groups, |(g, c)| score_group(g, params, c))
}
