//! Answer-distribution queries against a fixed judge model.
//!
//! [`JudgeClient`] wraps a backend (HTTP or mock) with a global limit on
//! in-flight requests and bounded retries, and assembles entropy
//! trajectories from one query per reasoning prefix.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use futures::future::try_join_all;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::Semaphore;

pub mod http;
pub mod mock;
pub mod prompt;

pub use http::HttpJudge;
pub use mock::{MockEntry, MockFixture, MockJudgeTable, MockTokenization};
pub use prompt::{build_continuation_prompt, PromptContext, CONTINUATION, DEFAULT_STEP_SEPARATOR};

use crate::entropy::{answer_conditional_entropy, build_trajectory, AnswerPositionSet, EntropyTrajectory};

/// Failure reported by a backend for a single attempt.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("{0}")]
    Retryable(String),
    #[error("{0}")]
    Fatal(String),
    #[error("{0}")]
    NoLogprobs(String),
    #[error("no mock table entry for this context")]
    MockMiss,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JudgeError {
    #[error("judge transport failed after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("judge returned no usable logprobs: {0}")]
    NoLogprobs(String),
    #[error("judge request failed: {0}")]
    Request(String),
    #[error("mock judge has no entry for question {question:?} with {prefix_len} steps")]
    MockMiss { question: String, prefix_len: usize },
    #[error("judge configuration: {0}")]
    Config(String),
    #[error("invalid judge context: question and answer must be non-empty")]
    InvalidContext,
    #[error("prefix length {prefix_len}: {source}")]
    Prefix {
        prefix_len: usize,
        #[source]
        source: Box<JudgeError>,
    },
}

impl JudgeError {
    /// True when the failure came from the transport after retries.
    pub fn is_transport(&self) -> bool {
        match self {
            JudgeError::Transport { .. } => true,
            JudgeError::Prefix { source, .. } => source.is_transport(),
            _ => false,
        }
    }
}

#[async_trait]
pub trait JudgeBackend: Send + Sync {
    /// One distribution per answer token, teacher-forced after `prompt`.
    async fn answer_distributions(
        &self,
        ctx: &PromptContext,
        prompt: &str,
    ) -> Result<AnswerPositionSet, BackendError>;

    async fn reachable(&self) -> bool;
}

#[async_trait]
impl JudgeBackend for HttpJudge {
    async fn answer_distributions(
        &self,
        ctx: &PromptContext,
        prompt: &str,
    ) -> Result<AnswerPositionSet, BackendError> {
        HttpJudge::answer_distributions(self, prompt, &ctx.answer).await
    }

    async fn reachable(&self) -> bool {
        HttpJudge::reachable(self).await
    }
}

#[async_trait]
impl JudgeBackend for MockJudgeTable {
    async fn answer_distributions(
        &self,
        ctx: &PromptContext,
        _prompt: &str,
    ) -> Result<AnswerPositionSet, BackendError> {
        self.lookup(ctx).cloned().ok_or(BackendError::MockMiss)
    }

    async fn reachable(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Http,
    #[default]
    Mock,
}

#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct JudgeConfig {
    pub backend: BackendKind,
    /// Full completions URL, e.g. `http://127.0.0.1:8000/v1/completions`.
    pub endpoint_url: String,
    pub model_name: String,
    pub top_k: u32,
    pub request_timeout_ms: u64,
    pub max_parallel_requests: usize,
    pub auth_token: Option<String>,
    pub mock_fixture: Option<PathBuf>,
    pub step_separator: String,
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
}

impl Default for JudgeConfig {
    fn default() -> Self {
        Self {
            backend: BackendKind::Mock,
            endpoint_url: "http://127.0.0.1:8000/v1/completions".into(),
            model_name: String::new(),
            top_k: 20,
            request_timeout_ms: 60_000,
            max_parallel_requests: 16,
            auth_token: None,
            mock_fixture: None,
            step_separator: DEFAULT_STEP_SEPARATOR.into(),
            max_retries: 3,
            initial_backoff_ms: 250,
        }
    }
}

impl std::fmt::Debug for JudgeConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("JudgeConfig")
            .field("backend", &self.backend)
            .field("endpoint_url", &self.endpoint_url)
            .field("model_name", &self.model_name)
            .field("top_k", &self.top_k)
            .field("request_timeout_ms", &self.request_timeout_ms)
            .field("max_parallel_requests", &self.max_parallel_requests)
            .field("auth_token", &self.auth_token.as_ref().map(|_| "<redacted>"))
            .field("mock_fixture", &self.mock_fixture)
            .field("max_retries", &self.max_retries)
            .field("initial_backoff_ms", &self.initial_backoff_ms)
            .finish()
    }
}

impl JudgeConfig {
    pub fn validate(&self) -> Result<(), JudgeError> {
        if self.top_k < 1 {
            return Err(JudgeError::Config("top_k must be at least 1".into()));
        }
        if self.max_parallel_requests < 1 {
            return Err(JudgeError::Config("max_parallel_requests must be at least 1".into()));
        }
        match self.backend {
            BackendKind::Http if self.endpoint_url.is_empty() => {
                Err(JudgeError::Config("http backend needs endpoint_url".into()))
            }
            BackendKind::Mock if self.mock_fixture.is_none() => {
                Err(JudgeError::Config("mock backend needs mock_fixture".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct RetryPolicy {
    max_retries: u32,
    initial_backoff: Duration,
}

/// Shareable judge handle. Clones share the same request limiter.
#[derive(Clone)]
pub struct JudgeClient {
    backend: Arc<dyn JudgeBackend>,
    limiter: Arc<Semaphore>,
    retry: RetryPolicy,
    separator: Arc<str>,
}

impl std::fmt::Debug for JudgeClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("JudgeClient")
            .field("available_permits", &self.limiter.available_permits())
            .field("retry", &self.retry)
            .finish()
    }
}

impl JudgeClient {
    pub fn new(backend: Arc<dyn JudgeBackend>, cfg: &JudgeConfig) -> Self {
        Self {
            backend,
            limiter: Arc::new(Semaphore::new(cfg.max_parallel_requests.max(1))),
            retry: RetryPolicy {
                max_retries: cfg.max_retries,
                initial_backoff: Duration::from_millis(cfg.initial_backoff_ms),
            },
            separator: cfg.step_separator.as_str().into(),
        }
    }

    /// Builds the configured backend, loading the mock fixture from disk.
    pub fn from_config(cfg: &JudgeConfig) -> Result<Self, JudgeError> {
        cfg.validate()?;
        let backend: Arc<dyn JudgeBackend> = match cfg.backend {
            BackendKind::Http => Arc::new(
                HttpJudge::new(
                    cfg.endpoint_url.clone(),
                    cfg.model_name.clone(),
                    cfg.top_k,
                    Duration::from_millis(cfg.request_timeout_ms),
                    cfg.auth_token.clone(),
                )
                .map_err(|e| JudgeError::Config(e.to_string()))?,
            ),
            BackendKind::Mock => {
                // validate() guarantees the path is set
                let path = cfg.mock_fixture.as_deref().unwrap_or_else(|| std::path::Path::new(""));
                Arc::new(MockJudgeTable::from_fixture(&MockFixture::load(path)?)?)
            }
        };
        Ok(Self::new(backend, cfg))
    }

    pub fn from_mock(table: MockJudgeTable, cfg: &JudgeConfig) -> Self {
        Self::new(Arc::new(table), cfg)
    }

    pub fn separator(&self) -> &str {
        &self.separator
    }

    pub async fn reachable(&self) -> bool {
        self.backend.reachable().await
    }

    /// Distributions for each answer token of `ctx.answer`, conditioned on
    /// the continuation prompt.
    pub async fn query_answer_distributions(
        &self,
        ctx: &PromptContext,
    ) -> Result<AnswerPositionSet, JudgeError> {
        if !ctx.is_valid() {
            return Err(JudgeError::InvalidContext);
        }
        let prompt = build_continuation_prompt(ctx, &self.separator);
        let mut attempt = 0u32;
        let mut backoff = self.retry.initial_backoff;
        loop {
            attempt += 1;
            let result = {
                let _permit = self
                    .limiter
                    .acquire()
                    .await
                    .map_err(|_| JudgeError::Config("judge limiter closed".into()))?;
                self.backend.answer_distributions(ctx, &prompt).await
            };
            match result {
                Ok(set) => return Ok(set),
                Err(BackendError::Retryable(message)) => {
                    if attempt > self.retry.max_retries {
                        return Err(JudgeError::Transport {
                            attempts: attempt,
                            message,
                        });
                    }
                    tracing::debug!(attempt, error = %message, "retrying judge request");
                    tokio::time::sleep(backoff).await;
                    backoff *= 2;
                }
                Err(BackendError::Fatal(m)) => return Err(JudgeError::Request(m)),
                Err(BackendError::NoLogprobs(m)) => return Err(JudgeError::NoLogprobs(m)),
                Err(BackendError::MockMiss) => {
                    return Err(JudgeError::MockMiss {
                        question: ctx.question.clone(),
                        prefix_len: ctx.step_prefix.len(),
                    })
                }
            }
        }
    }

    pub async fn conditional_entropy(&self, ctx: &PromptContext) -> Result<f64, JudgeError> {
        self.query_answer_distributions(ctx)
            .await
            .map(|set| answer_conditional_entropy(&set))
    }

    /// H_0..H_T for a trace, one query per prefix length 0..=T. Queries run
    /// concurrently (bounded by the shared limiter); any failure fails the
    /// whole trajectory.
    pub async fn trajectory_for_trace(
        &self,
        trace_id: &str,
        question: &str,
        steps: &[String],
        answer: &str,
    ) -> Result<EntropyTrajectory, JudgeError> {
        let queries = (0..=steps.len()).map(|t| {
            let ctx = PromptContext::new(question, steps[..t].to_vec(), answer);
            async move {
                self.conditional_entropy(&ctx)
                    .await
                    .map_err(|e| JudgeError::Prefix {
                        prefix_len: t,
                        source: Box::new(e),
                    })
            }
        });
        let values = try_join_all(queries).await?;
        build_trajectory(trace_id, values).map_err(|e| JudgeError::Request(e.to_string()))
    }
}
