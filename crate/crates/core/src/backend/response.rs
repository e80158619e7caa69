//! Template extraction from model output.

use std::collections::HashMap;
use std::sync::OnceLock;

use regex::Regex;
use thiserror::Error;

use crate::template::{normalize_template_text, replace_brackets, Template};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawResponse {
    pub text: String,
    pub usage: Option<Usage>,
}

impl RawResponse {
    pub fn new(text: impl Into<String>) -> Self {
        RawResponse {
            text: text.into(),
            usage: None,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("no `LogTemplate[idx]` entry with a backticked template in response")]
pub struct ExtractionError;

fn labeled_template() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"LogTemplate\[\d*\]\s*:?\s*`([^`\n]*)`").unwrap())
}

/// Backticked spans labeled `LogTemplate[idx]`, in order of appearance.
pub fn extract_templates(resp: &RawResponse) -> Result<Vec<String>, ExtractionError> {
    let found: Vec<String> = labeled_template()
        .captures_iter(&resp.text)
        .map(|c| c[1].trim().to_owned())
        .filter(|t| !t.is_empty())
        .collect();
    if found.is_empty() {
        Err(ExtractionError)
    } else {
        Ok(found)
    }
}

/// Majority vote over the extracted strings (compared in placeholder form;
/// ties go to the first to appear), then placeholder substitution.
pub fn aggregate_and_normalize(raw: &[String]) -> Template {
    let mut counts: HashMap<String, (usize, usize)> = HashMap::new();
    for (i, r) in raw.iter().enumerate() {
        let key = normalize_template_text(&replace_brackets(r));
        counts.entry(key).or_insert((0, i)).0 += 1;
    }
    let winner = counts
        .into_iter()
        .max_by(|a, b| a.1 .0.cmp(&b.1 .0).then(b.1 .1.cmp(&a.1 .1)))
        .map(|(k, _)| k)
        .unwrap_or_default();
    Template::parse(&winner)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn single_extraction() {
        let r = RawResponse::new("LogTemplate[1]: `session opened for user {username}`");
        assert_eq!(
            extract_templates(&r).unwrap(),
            vec!["session opened for user {username}"]
        );
    }

    #[test]
    fn several_in_order() {
        let r = RawResponse::new(
            "Sure!\nLogTemplate[1]: `a {x}`\nLogTemplate[2]: `b {y}`\nsome prose\nLogTemplate[3]:`c`\n",
        );
        assert_eq!(extract_templates(&r).unwrap(), strings(&["a {x}", "b {y}", "c"]));
    }

    #[test]
    fn unlabeled_backticks_ignored() {
        let r = RawResponse::new("Here is `something` without the label.");
        assert_eq!(extract_templates(&r), Err(ExtractionError));
        let r = RawResponse::new("I could not find any template in these logs.");
        assert_eq!(extract_templates(&r), Err(ExtractionError));
    }

    #[test]
    fn majority_then_substitution() {
        let t = aggregate_and_normalize(&strings(&["t {x} a", "t {x} a", "t b a"]));
        assert_eq!(t.tokens(), &strings(&["t", "<*>", "a"])[..]);
    }

    #[test]
    fn username_parameter() {
        let t = aggregate_and_normalize(&strings(&["session opened for user {username}"]));
        assert_eq!(t.text(), "session opened for user <*>");
    }

    #[test]
    fn adjacent_placeholders_merge() {
        let t = aggregate_and_normalize(&strings(&["a {p}{q} b"]));
        assert_eq!(t.tokens(), &strings(&["a", "<*>", "b"])[..]);
    }

    #[test]
    fn tie_goes_to_first() {
        let t = aggregate_and_normalize(&strings(&["x {a}", "y {b}", "y {c}", "x {d}"]));
        assert_eq!(t.text(), "x <*>");
    }

    #[test]
    fn normalized_input_is_fixed_point() {
        for s in ["a <*> b", "<*>:<*> port <*>", "plain text only"] {
            assert_eq!(aggregate_and_normalize(&strings(&[s])).text(), s);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn embedded_templates_round_trip(
                templates in proptest::collection::vec("[a-z]{1,5}( [a-z{}<*>=]{1,6}){0,5}", 1..5)
            ) {
                let body: String = templates
                    .iter()
                    .enumerate()
                    .map(|(i, t)| format!("LogTemplate[{}]: `{}`\n", i + 1, t))
                    .collect();
                let got = extract_templates(&RawResponse::new(body)).unwrap();
                prop_assert_eq!(got, templates);
            }
        }
    }
}
