//! Proxies that answer comparison queries on a student's behalf: a
//! simulated oracle with configurable accuracy, and an LLM-backed proxy
//! driven by the student's free-text preference narrative.

mod backend;
mod llm;
mod narrative;
mod parse;
mod prompts;
mod simulated;
mod transcript;

pub use backend::{
    BackendError, ChatBackend, ChatMessage, ChatRequest, ChatResponse, HttpChatBackend,
    RecordingBackend, ReplayBackend, ScriptedChoiceBackend, StubBackend,
};
pub use llm::{llm_answer, LlmQueryConfig};
pub use narrative::{generate_narrative, rule_based_narrative, Brevity, Narrative, NarrativeBackend};
pub use parse::parse_choice;
pub use prompts::{format_bundle, render_cq_prompt, render_narrative_prompt};
pub use simulated::simulated_answer;
pub use transcript::{TranscriptEntry, TranscriptStore, TRANSCRIPT_SCHEMA_VERSION};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::Bundle;

#[derive(Debug, Error)]
pub enum ProxyError {
    #[error("narrative text is empty")]
    EmptyNarrative,
    #[error("no CHOICE tag naming Bundle A or Bundle B found in response")]
    ParseFailure,
    #[error("backend error: {0}")]
    Backend(#[from] BackendError),
    #[error("transcript store error: {0}")]
    Transcript(#[from] std::io::Error),
    #[error(transparent)]
    Domain(#[from] crate::domain::DomainError),
    #[error("record invariant violated: {0}")]
    InvalidRecord(String),
}

/// Which bundle the proxy picked.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Choice {
    A,
    B,
}

impl Choice {
    pub fn other(self) -> Choice {
        match self {
            Choice::A => Choice::B,
            Choice::B => Choice::A,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerSource {
    Simulated,
    Llm,
}

/// One answered comparison query, with provenance and, for LLM answers, the
/// raw transcript.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComparisonRecord {
    pub bundle_a: Bundle,
    pub bundle_b: Bundle,
    pub answer: Choice,
    pub source: AnswerSource,
    /// Whether the answer matches the true valuation, when ground truth is
    /// known (always known in experiments).
    pub correct: Option<bool>,
    /// Raw response text; present iff the source is an LLM.
    pub transcript: Option<String>,
    pub latency_ms: Option<u64>,
    pub prompt_tokens: Option<u32>,
    pub completion_tokens: Option<u32>,
    /// True when the answer fell back to a coin flip after repeated parse
    /// failures; such records are excluded from accuracy statistics.
    pub fallback_random: bool,
}

impl ComparisonRecord {
    pub fn simulated(
        bundle_a: Bundle,
        bundle_b: Bundle,
        answer: Choice,
        correct: bool,
    ) -> Self {
        ComparisonRecord {
            bundle_a,
            bundle_b,
            answer,
            source: AnswerSource::Simulated,
            correct: Some(correct),
            transcript: None,
            latency_ms: None,
            prompt_tokens: None,
            completion_tokens: None,
            fallback_random: false,
        }
    }

    /// The invariant "transcript present iff source is llm" is enforced by
    /// the two constructors; this checks records from external sources.
    pub fn validate(&self) -> Result<(), ProxyError> {
        match (self.source, self.transcript.is_some()) {
            (AnswerSource::Llm, false) => Err(ProxyError::InvalidRecord(
                "llm record without transcript".into(),
            )),
            (AnswerSource::Simulated, true) => Err(ProxyError::InvalidRecord(
                "simulated record with transcript".into(),
            )),
            _ => Ok(()),
        }
    }

    /// The winning bundle under this record's answer.
    pub fn chosen_bundle(&self) -> Bundle {
        match self.answer {
            Choice::A => self.bundle_a,
            Choice::B => self.bundle_b,
        }
    }
}
