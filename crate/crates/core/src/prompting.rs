//! Prompt templates for direct answering and step-by-step reasoning.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::retrieval::{EvidenceBundle, OPTION_COUNT};

pub const DIRECT_INSTRUCTION: &str = "Based on the following context, answer the question.";
pub const COT_INSTRUCTION: &str = "Based on the following context, think step-by-step to determine the answer.";
pub const COT_DIRECTIVE: &str = "End your response with 'Final answer: <letter>'.";
pub const NO_CONTEXT: &str = "(none)";
pub const OPTION_LABELS: [char; OPTION_COUNT] = ['A', 'B', 'C', 'D'];

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("expected {OPTION_COUNT} options, got {0}")]
    OptionCount(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptStyle {
    DirectQa,
    Cot,
}

impl PromptStyle {
    pub const ALL: [PromptStyle; 2] = [Self::DirectQa, Self::Cot];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::DirectQa => "direct_qa",
            Self::Cot => "cot",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::DirectQa => "Q&A",
            Self::Cot => "CoT",
        }
    }
}

impl fmt::Display for PromptStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for PromptStyle {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "qa" | "direct_qa" | "direct" => Ok(Self::DirectQa),
            "cot" => Ok(Self::Cot),
            other => Err(format!("unknown prompt style `{other}` (expected qa or cot)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssembledPrompt {
    pub text: String,
    pub style: PromptStyle,
    /// Length of `text` in characters.
    pub char_count: usize,
}

pub fn build_prompt(
    style: PromptStyle,
    bundle: &EvidenceBundle,
    question: &str,
    options: &[String],
) -> Result<AssembledPrompt, PromptError> {
    if options.len() != OPTION_COUNT {
        return Err(PromptError::OptionCount(options.len()));
    }
    let context = if bundle.context_text.is_empty() {
        NO_CONTEXT
    } else {
        bundle.context_text.as_str()
    };
    let instruction = match style {
        PromptStyle::DirectQa => DIRECT_INSTRUCTION,
        PromptStyle::Cot => COT_INSTRUCTION,
    };
    let mut text = format!("{instruction}\nContext: {context}\nQuestion: {question}\n");
    for (label, option) in OPTION_LABELS.iter().zip(options) {
        text.push_str(&format!("{label}) {option}\n"));
    }
    text.push_str(match style {
        PromptStyle::DirectQa => "Answer:",
        PromptStyle::Cot => COT_DIRECTIVE,
    });
    Ok(AssembledPrompt {
        char_count: text.chars().count(),
        text,
        style,
    })
}
