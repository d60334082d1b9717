//! Information-density rewards for multi-step reasoning traces.
//!
//! A judge model scores how uncertain it is about the ground-truth answer
//! after each reasoning prefix. The resulting conditional-entropy trajectory
//! drives both the reward ([`reward`]) and the diagnostic statistics
//! ([`analysis`]).

pub mod analysis;
pub mod engine;
pub mod entropy;
pub mod ingest;
pub mod judge;
pub mod par;
pub mod reward;
pub mod synthetic;

pub use engine::{EngineError, ScoringEngine};
pub use entropy::{EntropyTrajectory, TokenDistribution};
pub use par::Exec;
pub use reward::{RewardBreakdown, RewardParams};
