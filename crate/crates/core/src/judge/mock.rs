//! Deterministic table-driven judge for tests, demos and offline analysis.
//!
//! A fixture declares a small vocabulary and, for each trace, one row of
//! per-answer-token probability vectors per reasoning-prefix length.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::prompt::PromptContext;
use super::JudgeError;
use crate::entropy::{AnswerPositionSet, TokenDistribution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MockTokenization {
    /// The whole answer string is a single token.
    #[default]
    Whole,
    /// One token per Unicode scalar.
    PerCharacter,
}

impl MockTokenization {
    pub fn tokenize(self, answer: &str) -> Vec<String> {
        match self {
            MockTokenization::Whole => vec![answer.to_owned()],
            MockTokenization::PerCharacter => answer.chars().map(String::from).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockEntry {
    pub question: String,
    pub steps: Vec<String>,
    pub answer: String,
    /// Overrides the fixture-level tokenization.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer_tokens: Option<Vec<String>>,
    /// `rows[t][k]` is the distribution over the vocabulary at answer
    /// position `k` after the first `t` steps.
    pub rows: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockFixture {
    pub vocabulary: Vec<String>,
    #[serde(default)]
    pub tokenization: MockTokenization,
    pub entries: Vec<MockEntry>,
}

impl MockFixture {
    pub fn load(path: &Path) -> Result<Self, JudgeError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| JudgeError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| JudgeError::Config(format!("{}: {e}", path.display())))
    }
}

/// Key of a judge context: question, reasoning prefix and answer.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ContextFingerprint(String);

impl ContextFingerprint {
    pub fn of(ctx: &PromptContext) -> Self {
        Self::from_parts(&ctx.question, &ctx.step_prefix, &ctx.answer)
    }

    fn from_parts(question: &str, steps: &[String], answer: &str) -> Self {
        // unit/record separators cannot collide with ordinary text joins
        let mut s = String::from(question);
        for step in steps {
            s.push('\u{1e}');
            s.push_str(step);
        }
        s.push('\u{1f}');
        s.push_str(answer);
        Self(s)
    }
}

/// Read-only lookup table from context to answer-token distributions.
#[derive(Debug, Clone, Default)]
pub struct MockJudgeTable {
    table: HashMap<ContextFingerprint, AnswerPositionSet>,
}

impl MockJudgeTable {
    pub fn from_fixture(fixture: &MockFixture) -> Result<Self, JudgeError> {
        let vocab = &fixture.vocabulary;
        if vocab.is_empty() {
            return Err(JudgeError::Config("mock fixture has an empty vocabulary".into()));
        }
        let mut table = Self::default();
        for (e_idx, entry) in fixture.entries.iter().enumerate() {
            let tokens = entry
                .answer_tokens
                .clone()
                .unwrap_or_else(|| fixture.tokenization.tokenize(&entry.answer));
            if tokens.is_empty() {
                return Err(JudgeError::Config(format!("entry {e_idx}: answer has no tokens")));
            }
            if entry.rows.len() != entry.steps.len() + 1 {
                return Err(JudgeError::Config(format!(
                    "entry {e_idx}: {} rows for {} steps",
                    entry.rows.len(),
                    entry.steps.len()
                )));
            }
            for (t, row) in entry.rows.iter().enumerate() {
                if row.len() != tokens.len() {
                    return Err(JudgeError::Config(format!(
                        "entry {e_idx}, prefix {t}: {} positions for {} answer tokens",
                        row.len(),
                        tokens.len()
                    )));
                }
                let positions = row
                    .iter()
                    .map(|probs| {
                        if probs.len() != vocab.len() {
                            return Err(JudgeError::Config(format!(
                                "entry {e_idx}, prefix {t}: row has {} probabilities for {} vocabulary tokens",
                                probs.len(),
                                vocab.len()
                            )));
                        }
                        let entries = vocab.iter().cloned().zip(probs.iter().copied()).collect();
                        TokenDistribution::new(entries, 0.0).map_err(|e| {
                            JudgeError::Config(format!("entry {e_idx}, prefix {t}: {e}"))
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let set = AnswerPositionSet::new(positions)
                    .map_err(|e| JudgeError::Config(e.to_string()))?;
                let key = ContextFingerprint::from_parts(&entry.question, &entry.steps[..t], &entry.answer);
                table.insert_checked(key, set, e_idx, t)?;
            }
        }
        Ok(table)
    }

    fn insert_checked(
        &mut self,
        key: ContextFingerprint,
        set: AnswerPositionSet,
        entry: usize,
        prefix: usize,
    ) -> Result<(), JudgeError> {
        match self.table.get(&key) {
            Some(existing) if *existing != set => Err(JudgeError::Config(format!(
                "entry {entry}, prefix {prefix}: conflicts with an earlier row for the same context"
            ))),
            Some(_) => Ok(()),
            None => {
                self.table.insert(key, set);
                Ok(())
            }
        }
    }

    pub fn insert(&mut self, ctx: &PromptContext, positions: AnswerPositionSet) {
        self.table.insert(ContextFingerprint::of(ctx), positions);
    }

    pub fn lookup(&self, ctx: &PromptContext) -> Option<&AnswerPositionSet> {
        self.table.get(&ContextFingerprint::of(ctx))
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}
