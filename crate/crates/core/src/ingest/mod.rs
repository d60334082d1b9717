//! Trace parsing, answer checking and JSONL datasets.

use std::path::PathBuf;

use thiserror::Error;

pub mod answer;
pub mod jsonl;
pub mod records;
pub mod segment;

pub use answer::{check_correctness, extract_boxed_answer, normalize_answer};
pub use jsonl::{load_jsonl, save_jsonl, Loaded, Strictness};
pub use records::{
    LabeledTraceRecord, RewardRecord, RolloutRecord, RolloutTrace, StepLabel, TraceRecord, Validate,
};
pub use segment::{segment_steps, Delimiter, SegmentationConfig, Segmenter};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Line {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("field `{field}`: {message}")]
    Schema { field: String, message: String },
    #[error("invalid step delimiter: {0}")]
    BadDelimiter(String),
}
