//! Splitting raw reasoning text into steps.

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::IngestError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind", content = "pattern")]
pub enum Delimiter {
    #[default]
    BlankLine,
    SingleNewline,
    CustomRegex(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentationConfig {
    pub delimiter: Delimiter,
    /// Pieces with fewer characters than this are merged into the previous step.
    pub min_step_chars: usize,
    /// Opening and closing markers of a thinking span. When both are present
    /// in a trace, only the text between them is segmented into steps.
    pub think_markers: Option<(String, String)>,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        Self {
            delimiter: Delimiter::BlankLine,
            min_step_chars: 0,
            think_markers: Some(("<think>".into(), "</think>".into())),
        }
    }
}

/// A compiled segmentation config.
#[derive(Debug, Clone)]
pub struct Segmenter {
    splitter: Regex,
    min_step_chars: usize,
    think_markers: Option<(String, String)>,
}

/// A trace split into its step-bearing region and its answer region.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRegions<'a> {
    pub reasoning: &'a str,
    pub answer: Option<&'a str>,
}

impl Segmenter {
    pub fn new(cfg: &SegmentationConfig) -> Result<Self, IngestError> {
        let pattern = match &cfg.delimiter {
            // blank line: a newline, optional horizontal whitespace, then a newline
            Delimiter::BlankLine => r"\r?\n[ \t]*\r?\n",
            Delimiter::SingleNewline => r"\r?\n",
            Delimiter::CustomRegex(p) => p.as_str(),
        };
        let splitter = Regex::new(pattern).map_err(|e| IngestError::BadDelimiter(e.to_string()))?;
        Ok(Self {
            splitter,
            min_step_chars: cfg.min_step_chars,
            think_markers: cfg.think_markers.clone(),
        })
    }

    /// Splits `raw` into trimmed, non-empty steps. Short pieces are joined to
    /// their predecessor with a single space; a short first piece stays as is.
    pub fn segment(&self, raw: &str) -> Vec<String> {
        let mut steps: Vec<String> = Vec::new();
        for piece in self.splitter.split(raw) {
            let piece = piece.trim();
            if piece.is_empty() {
                continue;
            }
            match steps.last_mut() {
                Some(prev) if piece.chars().count() < self.min_step_chars => {
                    prev.push(' ');
                    prev.push_str(piece);
                }
                _ => steps.push(piece.to_owned()),
            }
        }
        steps
    }

    /// Locates the thinking span when markers are configured and present.
    pub fn regions<'a>(&self, raw: &'a str) -> TraceRegions<'a> {
        if let Some((open, close)) = &self.think_markers {
            if let Some(end) = raw.find(close.as_str()) {
                let start = raw[..end]
                    .find(open.as_str())
                    .map(|i| i + open.len())
                    .unwrap_or(0);
                return TraceRegions {
                    reasoning: &raw[start..end],
                    answer: Some(&raw[end + close.len()..]),
                };
            }
        }
        TraceRegions {
            reasoning: raw,
            answer: None,
        }
    }

    /// Steps of a full trace, honouring think markers.
    pub fn trace_steps(&self, raw: &str) -> Vec<String> {
        self.segment(self.regions(raw).reasoning)
    }
}

pub fn segment_steps(raw: &str, cfg: &SegmentationConfig) -> Result<Vec<String>, IngestError> {
    Ok(Segmenter::new(cfg)?.segment(raw))
}
