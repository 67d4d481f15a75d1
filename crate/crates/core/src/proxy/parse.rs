//! Extracting the proxy's choice from a raw response.

use regex::Regex;
use std::sync::LazyLock;

use super::{Choice, ProxyError};

// Chain-of-thought bodies mention "Bundle A"/"Bundle B" freely before
// committing, so the last well-formed CHOICE tag wins. Case-insensitive,
// whitespace-tolerant inside the element.
static CHOICE_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?is)<CHOICE>\s*Bundle\s+([AB])\s*</CHOICE>").expect("valid regex")
});

/// Scans a response for the last well-formed `<CHOICE>Bundle A|B</CHOICE>`
/// tag. Anything else is a parse failure and the caller retries.
pub fn parse_choice(response: &str) -> Result<Choice, ProxyError> {
    let last = CHOICE_RE
        .captures_iter(response)
        .last()
        .ok_or(ProxyError::ParseFailure)?;
    match last
        .get(1)
        .expect("capture group present")
        .as_str()
        .to_ascii_uppercase()
        .as_str()
    {
        "A" => Ok(Choice::A),
        _ => Ok(Choice::B),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_tags_parse() {
        assert_eq!(parse_choice("<CHOICE>Bundle B</CHOICE>").unwrap(), Choice::B);
        assert_eq!(parse_choice("<CHOICE>Bundle A</CHOICE>").unwrap(), Choice::A);
    }

    #[test]
    fn last_tag_wins_after_cot_sections() {
        let response = "<PREFERENCES>Bundle A contains Courses 1, 2. Bundle B contains \
                        Courses 3, 4.</PREFERENCES>\n<REASONING>Bundle A looks strong but \
                        Bundle B has complements.</REASONING>\n<CHOICE>Bundle A</CHOICE>\n\
                        <CHOICE>Bundle B</CHOICE>";
        assert_eq!(parse_choice(response).unwrap(), Choice::B);
    }

    #[test]
    fn tolerant_of_case_and_whitespace() {
        assert_eq!(
            parse_choice("<choice>  bundle   a\n</CHOICE>").unwrap(),
            Choice::A
        );
        assert_eq!(
            parse_choice("text before <Choice>BUNDLE B</choice> text after").unwrap(),
            Choice::B
        );
    }

    #[test]
    fn malformed_responses_fail() {
        for bad in [
            "I pick bundle b!",
            "<CHOICE>Bundle C</CHOICE>",
            "<CHOICE>Bundle AB</CHOICE>",
            "<CHOICE>Bundle A",
            "Bundle A </CHOICE>",
            "",
        ] {
            assert!(parse_choice(bad).is_err(), "should fail: {bad:?}");
        }
    }
}
