//! Free-text preference narratives: the one-shot student input the LLM
//! proxy reads. Generated either by a surrogate language model from the
//! rendered profile prompt, or by a deterministic rule-based verbalizer
//! for offline runs.

use serde::{Deserialize, Serialize};

use crate::domain::{InteractionKind, StudentProfile, Tier};

use super::backend::{ChatBackend, ChatRequest};
use super::prompts::render_narrative_prompt;
use super::ProxyError;

/// How long the narrative is asked to be.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Brevity {
    Baseline,
    /// About 180 words.
    Moderate,
    /// About 80 words.
    Brief,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Narrative {
    pub text: String,
    pub brevity: Brevity,
    pub student: usize,
}

/// Who writes the narrative.
pub enum NarrativeBackend<'a> {
    /// A surrogate student: a chat model prompted with the profile.
    Chat {
        backend: &'a dyn ChatBackend,
        model: String,
        temperature: f64,
    },
    /// Deterministic verbalization of the profile, no model involved.
    RuleBased,
}

pub fn generate_narrative(
    profile: &StudentProfile,
    student: usize,
    brevity: Brevity,
    backend: &NarrativeBackend<'_>,
) -> Result<Narrative, ProxyError> {
    let text = match backend {
        NarrativeBackend::RuleBased => rule_based_narrative(profile, brevity),
        NarrativeBackend::Chat {
            backend,
            model,
            temperature,
        } => {
            let prompt = render_narrative_prompt(profile, brevity);
            let response = backend.complete(&ChatRequest::user_prompt(model, &prompt, *temperature))?;
            response.content
        }
    };
    if text.trim().is_empty() {
        return Err(ProxyError::EmptyNarrative);
    }
    Ok(Narrative {
        text,
        brevity,
        student,
    })
}

fn list_courses(courses: &[crate::domain::CourseId]) -> String {
    match courses.len() {
        0 => String::new(),
        1 => courses[0].to_string(),
        _ => {
            let mut head: Vec<String> = courses[..courses.len() - 1]
                .iter()
                .map(|c| c.to_string())
                .collect();
            let last = courses[courses.len() - 1];
            head.push(format!("and {last}"));
            head.join(", ")
        }
    }
}

/// Verbalizes the profile without stating any values: tiered course
/// interests in value order, one sentence per interaction group naming all
/// of its members. Word counts stay within the brevity target.
pub fn rule_based_narrative(profile: &StudentProfile, brevity: Brevity) -> String {
    let high = profile.tier_courses(Tier::High);
    let medium = profile.tier_courses(Tier::Medium);
    let low = profile.tier_courses(Tier::Low);

    let mut sentences: Vec<String> = Vec::new();
    if !high.is_empty() {
        sentences.push(format!(
            "This semester I absolutely want {}, in that order of importance.",
            list_courses(&high)
        ));
    }
    match brevity {
        Brevity::Brief => {
            if !medium.is_empty() {
                sentences.push(format!("I would also like {}.", list_courses(&medium)));
            }
        }
        Brevity::Moderate => {
            if !medium.is_empty() {
                sentences.push(format!(
                    "Next in line come {}, which I care about moderately.",
                    list_courses(&medium)
                ));
            }
            if !low.is_empty() {
                let top_low: Vec<_> = low.iter().copied().take(5).collect();
                sentences.push(format!(
                    "Among the rest my ordering starts with {}.",
                    list_courses(&top_low)
                ));
            }
        }
        Brevity::Baseline => {
            if !medium.is_empty() {
                sentences.push(format!(
                    "Next in line come {}, which I care about moderately, again listed from most to least preferred.",
                    list_courses(&medium)
                ));
            }
            if !low.is_empty() {
                sentences.push(format!(
                    "The remaining courses interest me much less; ranked from most to least appealing they are {}.",
                    list_courses(&low)
                ));
            }
        }
    }

    for group in profile.groups() {
        let members: Vec<_> = group.members().courses().collect();
        let names = list_courses(&members);
        let sentence = match (group.kind, brevity) {
            (InteractionKind::Substitute, Brevity::Brief) => {
                format!("{names} overlap, so combining them hurts, more so with each one added.")
            }
            (InteractionKind::Complement, Brevity::Brief) => {
                format!("{names} reinforce each other, so combining them helps, more so with each one added.")
            }
            (InteractionKind::Substitute, _) => format!(
                "{names} overlap in content, so taking any two of them together hurts me, and each additional one from that set makes it worse."
            ),
            (InteractionKind::Complement, _) => format!(
                "{names} build on each other, so taking any two of them together helps me, and each additional one from that set makes it better."
            ),
        };
        sentences.push(sentence);
    }

    if brevity == Brevity::Baseline {
        sentences.push(
            "Overall I want my strongest picks first while stacking the courses that reinforce each other and avoiding overlapping ones."
                .to_string(),
        );
    }
    sentences.join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{CourseCatalog, CourseId, InteractionGroup, StudentProfile};
    use crate::proxy::backend::StubBackend;

    fn profile_with_group() -> StudentProfile {
        let groups = vec![
            InteractionGroup::new(
                [CourseId(19), CourseId(13), CourseId(16)],
                InteractionKind::Substitute,
                0.4,
            )
            .unwrap(),
            InteractionGroup::new(
                [CourseId(2), CourseId(5)],
                InteractionKind::Complement,
                0.4,
            )
            .unwrap(),
        ];
        let mut base = vec![45.0; 25];
        base[0] = 117.0;
        base[3] = 115.0;
        let mut tiers = vec![Tier::Low; 25];
        tiers[0] = Tier::High;
        tiers[3] = Tier::High;
        StudentProfile::new(base, groups, tiers).unwrap()
    }

    #[test]
    fn substitute_group_members_share_one_sentence() {
        let profile = profile_with_group();
        let text = rule_based_narrative(&profile, Brevity::Baseline);
        let sentence = text
            .split(". ")
            .find(|s| s.contains("overlap in content"))
            .expect("overlap sentence present");
        for id in [19, 13, 16] {
            assert!(
                sentence.contains(&format!("Course {id}")),
                "course {id} missing from: {sentence}"
            );
        }
    }

    #[test]
    fn brief_narrative_stays_under_word_budget() {
        let catalog = CourseCatalog::default();
        for seed in 0..20 {
            let profile = crate::domain::generate_profile(
                &catalog,
                &crate::domain::InstanceParams::default(),
                &mut crate::seeds::rng_from(seed),
            );
            let text = rule_based_narrative(&profile, Brevity::Brief);
            let words = text.split_whitespace().count();
            assert!(words <= 120, "brief narrative has {words} words: {text}");
        }
    }

    #[test]
    fn narrative_never_states_values() {
        let profile = profile_with_group();
        for brevity in [Brevity::Baseline, Brevity::Moderate, Brevity::Brief] {
            let text = rule_based_narrative(&profile, brevity);
            assert!(!text.contains("117"), "value leaked: {text}");
            assert!(!text.contains("0.4"), "strength leaked: {text}");
        }
    }

    #[test]
    fn chat_backend_narrative_roundtrip() {
        let profile = profile_with_group();
        let backend = StubBackend::fixed("I am a student who loves Course 1.");
        let source = NarrativeBackend::Chat {
            backend: &backend,
            model: "m".into(),
            temperature: 0.7,
        };
        let narrative = generate_narrative(&profile, 4, Brevity::Moderate, &source).unwrap();
        assert_eq!(narrative.student, 4);
        assert_eq!(narrative.text, "I am a student who loves Course 1.");

        let empty = StubBackend::fixed("   ");
        let source = NarrativeBackend::Chat {
            backend: &empty,
            model: "m".into(),
            temperature: 0.0,
        };
        assert!(matches!(
            generate_narrative(&profile, 4, Brevity::Brief, &source),
            Err(ProxyError::EmptyNarrative)
        ));
    }

    #[test]
    fn rule_based_is_deterministic() {
        let profile = profile_with_group();
        assert_eq!(
            rule_based_narrative(&profile, Brevity::Moderate),
            rule_based_narrative(&profile, Brevity::Moderate)
        );
    }
}
