//! Log templates, placeholder normalization and template/log matching.

use std::fmt;

use crate::ingest::{tokenize, LogRecord};

pub const PLACEHOLDER: &str = "<*>";

/// Ordered token list; parameter positions hold [`PLACEHOLDER`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Template {
    tokens: Vec<String>,
}

impl Template {
    /// Parses text that is already in placeholder form. Directly adjacent
    /// placeholders collapse into one.
    pub fn parse(text: &str) -> Self {
        Template {
            tokens: tokenize(&collapse_placeholders(text)),
        }
    }

    /// Takes raw model output: every `{name}` span becomes a placeholder.
    pub fn from_bracketed(text: &str) -> Self {
        Self::parse(&replace_brackets(text))
    }

    /// All-constant template reproducing a log verbatim.
    pub fn verbatim(record: &LogRecord) -> Self {
        Template {
            tokens: record.tokens.clone(),
        }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }

    pub fn matches(&self, record: &LogRecord) -> bool {
        match_tokens(&self.tokens, &record.tokens)
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.tokens.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            f.write_str(t)?;
        }
        Ok(())
    }
}

/// Replaces `{name}` spans with the placeholder. Spans that are blank, nest
/// braces or already hold a placeholder are kept as literal text, as are
/// unbalanced braces.
pub fn replace_brackets(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        match after.find(['{', '}']) {
            Some(close)
                if after.as_bytes()[close] == b'}'
                    && !after[..close].trim().is_empty()
                    && !after[..close].contains(PLACEHOLDER) =>
            {
                out.push_str(PLACEHOLDER);
                rest = &after[close + 1..];
            }
            _ => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

/// Collapses runs of directly adjacent placeholders (`<*><*>` -> `<*>`).
pub fn collapse_placeholders(text: &str) -> String {
    let doubled = "<*><*>";
    let mut s = text.to_owned();
    while s.contains(doubled) {
        s = s.replace(doubled, PLACEHOLDER);
    }
    s
}

/// Canonical comparison form: whitespace collapsed, adjacent placeholders merged.
pub fn normalize_template_text(text: &str) -> String {
    tokenize(&collapse_placeholders(text)).join(" ")
}

fn is_wildcard(token: &str) -> bool {
    token == PLACEHOLDER
}

/// Matches a single template token against a single log token. A token that
/// mixes placeholders and literal text (`<*>:<*>`, `id=<*>`) is a glob where
/// each placeholder covers one or more characters.
fn token_matches(pattern: &str, token: &str) -> bool {
    if !pattern.contains(PLACEHOLDER) {
        return pattern == token;
    }
    let parts: Vec<&str> = pattern.split(PLACEHOLDER).collect();
    let (first, last) = (parts[0], parts[parts.len() - 1]);
    if !token.starts_with(first) {
        return false;
    }
    let mut pos = first.len();
    for mid in &parts[1..parts.len() - 1] {
        // each wildcard before `mid` consumes at least one char
        let search_from = next_char_boundary(token, pos);
        if search_from > token.len() {
            return false;
        }
        match token[search_from..].find(mid) {
            Some(off) => pos = search_from + off + mid.len(),
            None => return false,
        }
    }
    let tail_start = next_char_boundary(token, pos);
    tail_start <= token.len()
        && token.len() >= last.len()
        && token.len() - last.len() >= tail_start
        && token.ends_with(last)
}

fn next_char_boundary(s: &str, pos: usize) -> usize {
    match s[pos.min(s.len())..].chars().next() {
        Some(c) => pos + c.len_utf8(),
        None => pos + 1,
    }
}

/// Left-to-right matcher with backtracking over the most recent wildcard.
/// A whole-token placeholder consumes one or more log tokens.
pub fn match_tokens(template: &[String], log: &[String]) -> bool {
    let (m, n) = (template.len(), log.len());
    let (mut ti, mut li) = (0usize, 0usize);
    // (template index of the wildcard, log index right after what it consumed)
    let mut star: Option<(usize, usize)> = None;

    while li < n {
        if ti < m && is_wildcard(&template[ti]) {
            star = Some((ti, li + 1));
            ti += 1;
            li += 1;
        } else if ti < m && token_matches(&template[ti], &log[li]) {
            ti += 1;
            li += 1;
        } else if let Some((st, consumed)) = star {
            if consumed >= n {
                return false;
            }
            star = Some((st, consumed + 1));
            ti = st + 1;
            li = consumed + 1;
        } else {
            return false;
        }
    }
    ti == m
}
