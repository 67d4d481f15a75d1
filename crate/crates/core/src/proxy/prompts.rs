//! Prompt rendering from the shipped template files.

use crate::domain::{Bundle, CourseId, StudentProfile, Tier};

use super::narrative::Brevity;
use super::ProxyError;

const CQ_PROMPT_COT: &str = include_str!("../../templates/cq_prompt_cot.txt");
const CQ_PROMPT_DIRECT: &str = include_str!("../../templates/cq_prompt_direct.txt");
const NARRATIVE_PROMPT: &str = include_str!("../../templates/narrative_prompt.txt");

/// "Course 1, Course 9, Course 12" course list for prompt bodies.
pub fn format_bundle(bundle: Bundle) -> String {
    if bundle.is_empty() {
        return "(no courses)".to_string();
    }
    bundle
        .courses()
        .map(|c| c.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

/// Renders the comparison-query prompt for a pair of bundles. With
/// chain-of-thought the full five-section tagged template is used;
/// without, a reduced template asking only for the CHOICE tag.
pub fn render_cq_prompt(
    narrative: &str,
    bundle_a: Bundle,
    bundle_b: Bundle,
    cot_enabled: bool,
) -> Result<String, ProxyError> {
    if narrative.trim().is_empty() {
        return Err(ProxyError::EmptyNarrative);
    }
    let template = if cot_enabled {
        CQ_PROMPT_COT
    } else {
        CQ_PROMPT_DIRECT
    };
    Ok(template
        .replace("{student_preferences_text}", narrative)
        .replace("{bundle_a}", &format_bundle(bundle_a))
        .replace("{bundle_b}", &format_bundle(bundle_b)))
}

fn tier_section(profile: &StudentProfile, tier: Tier) -> String {
    let courses = profile.tier_courses(tier);
    if courses.is_empty() {
        return String::new();
    }
    courses
        .iter()
        .enumerate()
        .map(|(i, &c)| format!("   {}. {} (value: {:.2})", i + 1, c, profile.base_value(c)))
        .collect::<Vec<_>>()
        .join("\n")
}

fn group_line(members: &[CourseId], strength: f64, substitute: bool) -> String {
    let ids = members
        .iter()
        .map(|c| c.0.to_string())
        .collect::<Vec<_>>()
        .join(", ");
    let pct = (strength * 100.0).round() as i64;
    if substitute {
        format!("- Courses {ids} overlap in content. Taking any two reduces their combined value by {pct}%")
    } else {
        format!("- Courses {ids} complement each other. Taking any two increases their combined value by {pct}%")
    }
}

/// Renders the surrogate-student prompt that asks a language model to
/// describe the profile qualitatively, without numbers, at the requested
/// brevity.
pub fn render_narrative_prompt(profile: &StudentProfile, brevity: Brevity) -> String {
    let mut substitutes = Vec::new();
    let mut complements = Vec::new();
    for g in profile.groups() {
        let members: Vec<CourseId> = g.members().courses().collect();
        match g.kind {
            crate::domain::InteractionKind::Substitute => {
                substitutes.push(group_line(&members, g.strength, true))
            }
            crate::domain::InteractionKind::Complement => {
                complements.push(group_line(&members, g.strength, false))
            }
        }
    }
    let brevity_instruction = match brevity {
        Brevity::Baseline => String::new(),
        Brevity::Moderate => {
            " Limit your response to approximately 180 words.".to_string()
        }
        Brevity::Brief => " Limit your response to approximately 80 words.".to_string(),
    };
    NARRATIVE_PROMPT
        .replace("{high_courses}", &tier_section(profile, Tier::High))
        .replace("{medium_courses}", &tier_section(profile, Tier::Medium))
        .replace("{low_courses}", &tier_section(profile, Tier::Low))
        .replace("{substitute_lines}", &substitutes.join("\n"))
        .replace("{complement_lines}", &complements.join("\n"))
        .replace("{budget}", "1.00")
        .replace("{brevity_instruction}", &brevity_instruction)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{generate_profile, CourseCatalog, InstanceParams};
    use crate::seeds::rng_from;

    fn count_occurrences(haystack: &str, needle: &str) -> usize {
        haystack.matches(needle).count()
    }

    #[test]
    fn cot_prompt_contains_all_tag_pairs_once() {
        let prompt =
            render_cq_prompt("I like courses.", Bundle::from_ids(&[1, 2]), Bundle::from_ids(&[3]), true)
                .unwrap();
        for tag in ["PREFERENCES", "COMPLEMENTS", "SUBSTITUTES", "REASONING", "CHOICE"] {
            assert_eq!(count_occurrences(&prompt, &format!("<{tag}>")), 1, "{tag} open");
            assert_eq!(count_occurrences(&prompt, &format!("</{tag}>")), 1, "{tag} close");
        }
        assert!(prompt.contains("Please ignore budget constraint"));
    }

    #[test]
    fn direct_prompt_has_choice_but_no_reasoning() {
        let prompt =
            render_cq_prompt("I like courses.", Bundle::from_ids(&[1]), Bundle::from_ids(&[2]), false)
                .unwrap();
        assert!(prompt.contains("<CHOICE>"));
        assert!(!prompt.contains("<REASONING>"));
        assert!(prompt.contains("Please ignore budget constraint"));
    }

    #[test]
    fn bundle_course_ids_appear_in_prompt() {
        let a = Bundle::from_ids(&[3, 7, 11]);
        let b = Bundle::from_ids(&[2, 14]);
        let prompt = render_cq_prompt("prefs", a, b, true).unwrap();
        for id in [3, 7, 11, 2, 14] {
            assert!(prompt.contains(&format!("Course {id}")), "missing course {id}");
        }
        assert!(prompt.contains("Bundle A: Course 3, Course 7, Course 11"));
        assert!(prompt.contains("Bundle B: Course 2, Course 14"));
    }

    #[test]
    fn empty_narrative_rejected() {
        assert!(matches!(
            render_cq_prompt("  \n", Bundle::from_ids(&[1]), Bundle::from_ids(&[2]), true),
            Err(ProxyError::EmptyNarrative)
        ));
    }

    #[test]
    fn empty_bundle_renders_placeholder() {
        assert_eq!(format_bundle(Bundle::EMPTY), "(no courses)");
        assert_eq!(format_bundle(Bundle::from_ids(&[5])), "Course 5");
    }

    #[test]
    fn narrative_prompt_structure() {
        let catalog = CourseCatalog::default();
        let profile = generate_profile(&catalog, &InstanceParams::default(), &mut rng_from(1));
        let prompt = render_narrative_prompt(&profile, Brevity::Baseline);
        assert!(prompt.contains("High Priority Courses"));
        assert!(prompt.contains("HARMS YOU"));
        assert!(prompt.contains("BENEFITS YOU"));
        assert!(prompt.contains("Budget Constraint: 1.00"));
        assert!(prompt.contains("avoid saying exact numerical values"));
        // Every group member appears in a relationship line.
        for g in profile.groups() {
            for c in g.members().courses() {
                assert!(prompt.contains(&c.0.to_string()));
            }
        }
        // Brevity suffixes.
        let moderate = render_narrative_prompt(&profile, Brevity::Moderate);
        assert!(moderate.contains("approximately 180 words"));
        let brief = render_narrative_prompt(&profile, Brevity::Brief);
        assert!(brief.contains("approximately 80 words"));
    }
}
