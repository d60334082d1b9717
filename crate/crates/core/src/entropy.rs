//! Token-level entropy, answer conditional entropy and entropy trajectories.
//!
//! All quantities are in nats. A [`TokenDistribution`] may be truncated to
//! the top-k tokens returned by a logprob API; the uncovered probability is
//! kept as a single aggregate tail symbol, which makes the computed entropy a
//! lower bound of the full-vocabulary entropy.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance on `sum(entries) + tail_mass == 1`.
pub const MASS_TOLERANCE: f64 = 1e-6;

/// Probabilities below this contribute nothing to the entropy.
pub const MIN_PROBABILITY: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EntropyError {
    #[error("probability for token {token:?} is invalid: {value}")]
    InvalidProbability { token: String, value: f64 },
    #[error("tail mass is invalid: {0}")]
    InvalidTail(f64),
    #[error("duplicate token id {0:?}")]
    DuplicateToken(String),
    #[error("probability mass sums to {total}, expected 1 within {MASS_TOLERANCE}")]
    MassMismatch { total: f64 },
    #[error("answer position set is empty")]
    EmptyPositions,
    #[error("entropy trajectory is empty")]
    EmptyTrajectory,
    #[error("entropy value at index {index} is invalid: {value}")]
    InvalidEntropy { index: usize, value: f64 },
}

/// Probability distribution over judge vocabulary tokens for one answer position.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TokenDistribution {
    entries: Vec<(String, f64)>,
    tail_mass: f64,
}

impl TokenDistribution {
    pub fn new(entries: Vec<(String, f64)>, tail_mass: f64) -> Result<Self, EntropyError> {
        if !tail_mass.is_finite() || !(0.0..=1.0).contains(&tail_mass) {
            return Err(EntropyError::InvalidTail(tail_mass));
        }
        let mut seen = HashSet::with_capacity(entries.len());
        let mut total = tail_mass;
        for (token, p) in &entries {
            if !p.is_finite() || !(0.0..=1.0).contains(p) {
                return Err(EntropyError::InvalidProbability {
                    token: token.clone(),
                    value: *p,
                });
            }
            if !seen.insert(token.as_str()) {
                return Err(EntropyError::DuplicateToken(token.clone()));
            }
            total += p;
        }
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(EntropyError::MassMismatch { total });
        }
        Ok(Self { entries, tail_mass })
    }

    /// Full-vocabulary distribution; token ids are the vector indices.
    pub fn from_probabilities(probs: &[f64]) -> Result<Self, EntropyError> {
        let entries = probs
            .iter()
            .enumerate()
            .map(|(i, &p)| (i.to_string(), p))
            .collect();
        Self::new(entries, 0.0)
    }

    /// Builds a top-k distribution from natural-log probabilities. The mass
    /// not covered by the entries becomes the tail bucket.
    pub fn from_logprobs<I, S>(logprobs: I) -> Result<Self, EntropyError>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let entries: Vec<(String, f64)> = logprobs
            .into_iter()
            .map(|(t, lp)| (t.into(), lp.exp()))
            .collect();
        let covered: f64 = entries.iter().map(|(_, p)| p).sum();
        if !covered.is_finite() {
            return Err(EntropyError::MassMismatch { total: covered });
        }
        // Rounded logprobs can push the covered mass marginally above one.
        let tail = (1.0 - covered).max(0.0);
        Self::new(entries, tail)
    }

    pub fn entries(&self) -> &[(String, f64)] {
        &self.entries
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn entropy(&self) -> f64 {
        distribution_entropy(self)
    }
}

impl<'de> Deserialize<'de> for TokenDistribution {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            entries: Vec<(String, f64)>,
            #[serde(default)]
            tail_mass: f64,
        }
        let raw = Raw::deserialize(d)?;
        TokenDistribution::new(raw.entries, raw.tail_mass).map_err(serde::de::Error::custom)
    }
}

#[inline]
fn plogp(p: f64) -> f64 {
    if p < MIN_PROBABILITY {
        0.0
    } else {
        -p * p.ln()
    }
}

/// Shannon entropy in nats, treating the tail as one aggregate symbol.
pub fn distribution_entropy(dist: &TokenDistribution) -> f64 {
    let head: f64 = dist.entries.iter().map(|&(_, p)| plogp(p)).sum();
    // -1 * ln(1) is -0.0; normalise so one-hot distributions return +0.0
    (head + plogp(dist.tail_mass)) + 0.0
}

/// Per-token distributions for answer tokens z_1..z_K, in teacher-forced order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<TokenDistribution>", into = "Vec<TokenDistribution>")]
pub struct AnswerPositionSet {
    positions: Vec<TokenDistribution>,
}

impl AnswerPositionSet {
    pub fn new(positions: Vec<TokenDistribution>) -> Result<Self, EntropyError> {
        if positions.is_empty() {
            return Err(EntropyError::EmptyPositions);
        }
        Ok(Self { positions })
    }

    pub fn positions(&self) -> &[TokenDistribution] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

impl TryFrom<Vec<TokenDistribution>> for AnswerPositionSet {
    type Error = EntropyError;

    fn try_from(v: Vec<TokenDistribution>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<AnswerPositionSet> for Vec<TokenDistribution> {
    fn from(s: AnswerPositionSet) -> Self {
        s.positions
    }
}

/// Mean of the per-position token entropies.
pub fn answer_conditional_entropy(positions: &AnswerPositionSet) -> f64 {
    let sum: f64 = positions.positions.iter().map(distribution_entropy).sum();
    sum / positions.positions.len() as f64
}

fn check_entropy(index: usize, value: f64) -> Result<f64, EntropyError> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(EntropyError::InvalidEntropy { index, value })
    }
}

/// Entropy drop from one reasoning prefix to the next. Negative when a step
/// increases uncertainty.
pub fn information_gain(h_prev: f64, h_curr: f64) -> Result<f64, EntropyError> {
    check_entropy(0, h_prev)?;
    check_entropy(1, h_curr)?;
    Ok(h_prev - h_curr)
}

/// Answer conditional entropies H_0..H_T over successive reasoning prefixes.
/// Index 0 is the bare question with no reasoning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTrajectory")]
pub struct EntropyTrajectory {
    trace_id: String,
    values: Vec<f64>,
}

#[derive(Deserialize)]
struct RawTrajectory {
    trace_id: String,
    values: Vec<f64>,
}

impl TryFrom<RawTrajectory> for EntropyTrajectory {
    type Error = EntropyError;

    fn try_from(raw: RawTrajectory) -> Result<Self, Self::Error> {
        build_trajectory(raw.trace_id, raw.values)
    }
}

pub fn build_trajectory(
    trace_id: impl Into<String>,
    entropies: Vec<f64>,
) -> Result<EntropyTrajectory, EntropyError> {
    if entropies.is_empty() {
        return Err(EntropyError::EmptyTrajectory);
    }
    for (i, &h) in entropies.iter().enumerate() {
        check_entropy(i, h)?;
    }
    Ok(EntropyTrajectory {
        trace_id: trace_id.into(),
        values: entropies,
    })
}

impl EntropyTrajectory {
    pub fn trace_id(&self) -> &str {
        &self.trace_id
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Number of reasoning steps T.
    pub fn steps(&self) -> usize {
        self.values.len() - 1
    }

    pub fn initial(&self) -> f64 {
        self.values[0]
    }

    pub fn last(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Per-step information gains H_{t-1} - H_t for t = 1..T.
    pub fn information_gains(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.windows(2).map(|w| w[0] - w[1])
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}
