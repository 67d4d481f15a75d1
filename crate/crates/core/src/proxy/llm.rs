//! The LLM proxy: render the comparison prompt, call the backend, parse
//! the tagged answer, retrying on parse failures.

use rand::Rng;

use crate::domain::Bundle;

use super::backend::{ChatBackend, ChatRequest};
use super::parse::parse_choice;
use super::transcript::{TranscriptEntry, TranscriptStore, TRANSCRIPT_SCHEMA_VERSION};
use super::{AnswerSource, Choice, ComparisonRecord, Narrative, ProxyError};

/// Per-query settings for the LLM proxy.
#[derive(Clone, Debug)]
pub struct LlmQueryConfig {
    pub model: String,
    pub temperature: f64,
    pub cot_enabled: bool,
    /// Parse-failure retries before answering uniformly at random.
    pub max_retries: usize,
    pub student: usize,
    pub query_index: usize,
}

impl Default for LlmQueryConfig {
    fn default() -> Self {
        LlmQueryConfig {
            model: "default".to_string(),
            temperature: 0.0,
            cot_enabled: true,
            max_retries: 3,
            student: 0,
            query_index: 0,
        }
    }
}

/// Asks the backend which bundle the student prefers. Every
/// request/response pair is persisted to the transcript store before the
/// answer is returned; after `max_retries` parse failures the record is
/// answered by coin flip and flagged.
pub fn llm_answer<R: Rng + ?Sized>(
    narrative: &Narrative,
    bundle_a: Bundle,
    bundle_b: Bundle,
    cfg: &LlmQueryConfig,
    backend: &dyn ChatBackend,
    transcripts: &TranscriptStore,
    rng: &mut R,
) -> Result<ComparisonRecord, ProxyError> {
    let prompt = super::prompts::render_cq_prompt(
        &narrative.text,
        bundle_a,
        bundle_b,
        cfg.cot_enabled,
    )?;
    let request = ChatRequest::user_prompt(&cfg.model, &prompt, cfg.temperature);

    let mut last_response = None;
    for attempt in 0..cfg.max_retries.max(1) {
        let response = backend.complete(&request)?;
        transcripts.append(TranscriptEntry {
            version: TRANSCRIPT_SCHEMA_VERSION,
            student: cfg.student,
            query_index: cfg.query_index,
            attempt,
            prompt: prompt.clone(),
            response: response.content.clone(),
            latency_ms: response.latency_ms,
            prompt_tokens: response.prompt_tokens,
            completion_tokens: response.completion_tokens,
        })?;
        match parse_choice(&response.content) {
            Ok(answer) => {
                return Ok(ComparisonRecord {
                    bundle_a,
                    bundle_b,
                    answer,
                    source: AnswerSource::Llm,
                    correct: None,
                    transcript: Some(response.content),
                    latency_ms: response.latency_ms,
                    prompt_tokens: response.prompt_tokens,
                    completion_tokens: response.completion_tokens,
                    fallback_random: false,
                })
            }
            Err(_) => {
                log::debug!(
                    "parse failure on attempt {attempt} for query {}",
                    cfg.query_index
                );
                last_response = Some(response);
            }
        }
    }

    // All attempts failed to parse: answer uniformly at random and flag the
    // record so it is excluded from accuracy statistics.
    let response = last_response.expect("at least one attempt was made");
    let answer = if rng.random_range(0.0..1.0) < 0.5 {
        Choice::A
    } else {
        Choice::B
    };
    Ok(ComparisonRecord {
        bundle_a,
        bundle_b,
        answer,
        source: AnswerSource::Llm,
        correct: None,
        transcript: Some(response.content),
        latency_ms: response.latency_ms,
        prompt_tokens: response.prompt_tokens,
        completion_tokens: response.completion_tokens,
        fallback_random: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::proxy::backend::StubBackend;
    use crate::proxy::narrative::Brevity;
    use crate::seeds::rng_from;

    fn narrative() -> Narrative {
        Narrative {
            text: "I care most about Course 1.".to_string(),
            brevity: Brevity::Baseline,
            student: 0,
        }
    }

    #[test]
    fn stub_answer_parses_and_records() {
        let backend = StubBackend::fixed("<CHOICE>Bundle A</CHOICE>");
        let store = TranscriptStore::in_memory();
        let mut rng = rng_from(1);
        let rec = llm_answer(
            &narrative(),
            Bundle::from_ids(&[1]),
            Bundle::from_ids(&[2]),
            &LlmQueryConfig::default(),
            &backend,
            &store,
            &mut rng,
        )
        .unwrap();
        assert_eq!(rec.answer, Choice::A);
        assert_eq!(rec.source, AnswerSource::Llm);
        assert!(!rec.fallback_random);
        assert_eq!(rec.transcript.as_deref(), Some("<CHOICE>Bundle A</CHOICE>"));
        rec.validate().unwrap();
        assert_eq!(store.entries().len(), 1);
    }

    #[test]
    fn garbage_retries_then_falls_back_flagged() {
        let backend = StubBackend::fixed("no tags here");
        let store = TranscriptStore::in_memory();
        let mut rng = rng_from(7);
        let cfg = LlmQueryConfig {
            max_retries: 3,
            ..LlmQueryConfig::default()
        };
        let rec = llm_answer(
            &narrative(),
            Bundle::from_ids(&[1]),
            Bundle::from_ids(&[2]),
            &cfg,
            &backend,
            &store,
            &mut rng,
        )
        .unwrap();
        assert!(rec.fallback_random);
        assert_eq!(store.entries().len(), 3);
        // Transcript still present even on the fallback path.
        assert!(rec.transcript.is_some());
    }

    #[test]
    fn recovery_on_second_attempt() {
        let backend = StubBackend::new(vec![
            "still thinking".to_string(),
            "<CHOICE>Bundle B</CHOICE>".to_string(),
        ]);
        let store = TranscriptStore::in_memory();
        let mut rng = rng_from(3);
        let rec = llm_answer(
            &narrative(),
            Bundle::from_ids(&[1]),
            Bundle::from_ids(&[2]),
            &LlmQueryConfig::default(),
            &backend,
            &store,
            &mut rng,
        )
        .unwrap();
        assert_eq!(rec.answer, Choice::B);
        assert!(!rec.fallback_random);
        assert_eq!(store.entries().len(), 2);
        let entries = store.entries();
        assert_eq!(entries[0].attempt, 0);
        assert_eq!(entries[1].attempt, 1);
    }

    #[test]
    fn empty_narrative_is_an_error() {
        let backend = StubBackend::fixed("<CHOICE>Bundle A</CHOICE>");
        let store = TranscriptStore::in_memory();
        let empty = Narrative {
            text: "".to_string(),
            brevity: Brevity::Baseline,
            student: 0,
        };
        let err = llm_answer(
            &empty,
            Bundle::from_ids(&[1]),
            Bundle::from_ids(&[2]),
            &LlmQueryConfig::default(),
            &backend,
            &store,
            &mut rng_from(1),
        );
        assert!(matches!(err, Err(ProxyError::EmptyNarrative)));
    }
}
