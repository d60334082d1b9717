//! OpenAI-compatible completions backend.
//!
//! The prompt and the ground-truth answer are sent as one text with
//! `echo: true`, so the server scores the answer tokens under teacher
//! forcing and returns the top-k alternatives at each position. Answer
//! tokens are located through `text_offset`.

use std::time::Duration;

use reqwest::StatusCode;
use serde::Deserialize;
use serde_json::{json, Map, Value};

use super::BackendError;
use crate::entropy::{AnswerPositionSet, TokenDistribution};

#[derive(Debug, Clone)]
pub struct HttpJudge {
    client: reqwest::Client,
    endpoint: String,
    model: String,
    top_k: u32,
    auth_token: Option<String>,
}

#[derive(Debug, Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

#[derive(Debug, Deserialize)]
struct Choice {
    #[serde(default)]
    logprobs: Option<Logprobs>,
}

#[derive(Debug, Deserialize)]
struct Logprobs {
    #[serde(default)]
    tokens: Vec<String>,
    #[serde(default)]
    top_logprobs: Vec<Option<Map<String, Value>>>,
    #[serde(default)]
    text_offset: Vec<usize>,
}

impl HttpJudge {
    pub fn new(
        endpoint: impl Into<String>,
        model: impl Into<String>,
        top_k: u32,
        timeout: Duration,
        auth_token: Option<String>,
    ) -> Result<Self, BackendError> {
        let client = reqwest::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| BackendError::Fatal(format!("building http client: {e}")))?;
        Ok(Self {
            client,
            endpoint: endpoint.into(),
            model: model.into(),
            top_k,
            auth_token,
        })
    }

    pub fn request_body(&self, prompt: &str, answer: &str) -> Value {
        json!({
            "model": self.model,
            "prompt": format!("{prompt}{answer}"),
            "max_tokens": 1,
            "temperature": 0.0,
            "echo": true,
            "logprobs": self.top_k,
        })
    }

    pub async fn answer_distributions(
        &self,
        prompt: &str,
        answer: &str,
    ) -> Result<AnswerPositionSet, BackendError> {
        let mut req = self
            .client
            .post(&self.endpoint)
            .json(&self.request_body(prompt, answer));
        if let Some(token) = &self.auth_token {
            req = req.bearer_auth(token);
        }
        let resp = req
            .send()
            .await
            .map_err(|e| BackendError::Retryable(format!("request failed: {e}")))?;
        let status = resp.status();
        let body = resp
            .text()
            .await
            .map_err(|e| BackendError::Retryable(format!("reading response: {e}")))?;
        if status == StatusCode::TOO_MANY_REQUESTS || status.is_server_error() {
            return Err(BackendError::Retryable(format!("judge returned {status}: {body}")));
        }
        if !status.is_success() {
            return Err(BackendError::Fatal(format!("judge returned {status}: {body}")));
        }
        parse_completion(&body, prompt.chars().count(), answer.chars().count())
    }

    /// Any HTTP response counts as reachable.
    pub async fn reachable(&self) -> bool {
        self.client.get(&self.endpoint).send().await.is_ok()
    }
}

/// Extracts the answer-token distributions from an echoed completion.
/// `prompt_chars` and `answer_chars` are lengths in characters, matching
/// the server's `text_offset` convention.
pub fn parse_completion(
    body: &str,
    prompt_chars: usize,
    answer_chars: usize,
) -> Result<AnswerPositionSet, BackendError> {
    let resp: CompletionResponse = serde_json::from_str(body)
        .map_err(|e| BackendError::Fatal(format!("malformed completion response: {e}")))?;
    let logprobs = resp
        .choices
        .into_iter()
        .next()
        .and_then(|c| c.logprobs)
        .ok_or_else(|| BackendError::NoLogprobs("response carries no logprobs".into()))?;
    let n = logprobs.tokens.len();
    if logprobs.text_offset.len() != n || logprobs.top_logprobs.len() != n {
        return Err(BackendError::NoLogprobs(
            "echoed prompt logprobs are missing or misaligned (does the server support echo?)".into(),
        ));
    }
    let answer_end = prompt_chars + answer_chars;
    let mut positions = Vec::new();
    for i in 0..n {
        let start = logprobs.text_offset[i];
        let end = logprobs
            .text_offset
            .get(i + 1)
            .copied()
            .unwrap_or(start + logprobs.tokens[i].chars().count());
        if start < prompt_chars && end > prompt_chars {
            return Err(BackendError::Fatal(format!(
                "token {:?} straddles the prompt/answer boundary",
                logprobs.tokens[i]
            )));
        }
        if start < prompt_chars || start >= answer_end {
            continue;
        }
        let top = logprobs.top_logprobs[i].as_ref().ok_or_else(|| {
            BackendError::NoLogprobs(format!("no top logprobs at answer position {}", positions.len()))
        })?;
        let mut entries = Vec::with_capacity(top.len());
        for (tok, lp) in top {
            let lp = lp.as_f64().ok_or_else(|| {
                BackendError::Fatal(format!("non-numeric logprob for token {tok:?}"))
            })?;
            entries.push((tok.clone(), lp));
        }
        let dist = TokenDistribution::from_logprobs(entries)
            .map_err(|e| BackendError::Fatal(format!("invalid distribution from judge: {e}")))?;
        positions.push(dist);
    }
    AnswerPositionSet::new(positions)
        .map_err(|_| BackendError::Fatal("no answer tokens found in the echoed completion".into()))
}
