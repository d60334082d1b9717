use serde::{Deserialize, Serialize};

/// Text appended after the reasoning prefix. The answer tokens are
/// teacher-forced after it; the closing brace is never scored.
pub const CONTINUATION: &str = "Therefore, the answer is \\boxed{";

pub const DEFAULT_STEP_SEPARATOR: &str = "\n\n";

/// Question, reasoning prefix and ground-truth answer for one judge query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptContext {
    pub question: String,
    pub step_prefix: Vec<String>,
    pub answer: String,
}

impl PromptContext {
    pub fn new(question: impl Into<String>, step_prefix: Vec<String>, answer: impl Into<String>) -> Self {
        Self {
            question: question.into(),
            step_prefix,
            answer: answer.into(),
        }
    }

    pub fn is_valid(&self) -> bool {
        !self.question.is_empty() && !self.answer.is_empty()
    }
}

/// Question, then each step, then the continuation, joined by `separator`.
/// Step text is inserted verbatim.
pub fn build_continuation_prompt(ctx: &PromptContext, separator: &str) -> String {
    let mut out = String::with_capacity(
        ctx.question.len()
            + ctx.step_prefix.iter().map(|s| s.len() + separator.len()).sum::<usize>()
            + separator.len()
            + CONTINUATION.len(),
    );
    out.push_str(&ctx.question);
    for step in &ctx.step_prefix {
        out.push_str(separator);
        out.push_str(step);
    }
    out.push_str(separator);
    out.push_str(CONTINUATION);
    out
}
