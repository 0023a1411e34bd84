//! Whitespace normalization, sentence splitting and citation markers.

use std::sync::LazyLock;

use regex::Regex;

static CITATION: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\[(\d+)\]").unwrap());
static CITATION_RUN: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\s*(?:\[\d+\])+").unwrap());
static PURE_CITATION_TOKEN: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(?:\[\d+\])+[.!?]?$").unwrap());
static TRAILING_CITATIONS: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?:\[\d+\])+$").unwrap());

const ABBREVIATIONS: &[&str] = &[
    "mr", "mrs", "ms", "dr", "prof", "jr", "sr", "st", "mt", "vs", "etc", "inc", "co", "ltd",
    "no", "gen", "col", "lt", "sgt", "capt", "rev", "hon", "gov", "sen", "rep", "jan", "feb",
    "mar", "apr", "aug", "sept", "sep", "oct", "nov", "dec", "ft", "approx", "e.g", "i.e",
];

/// Collapse every whitespace run to a single space and trim.
pub fn normalize_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Bracketed citation indices in order of appearance, e.g. `[1][3]` → `[1, 3]`.
pub fn citation_indices(text: &str) -> Vec<usize> {
    CITATION
        .captures_iter(text)
        .filter_map(|c| c[1].parse().ok())
        .collect()
}

pub fn strip_citations(text: &str) -> String {
    normalize_whitespace(&CITATION_RUN.replace_all(text, ""))
}

fn ends_sentence(token: &str, next: Option<&str>) -> bool {
    let core = TRAILING_CITATIONS.replace(token, "");
    let core = core.trim_end_matches(['"', '\'', ')', ']', '\u{201d}', '\u{2019}']);
    let Some(last) = core.chars().last() else { return false };
    if !matches!(last, '.' | '!' | '?') {
        return false;
    }
    if next.and_then(|n| n.chars().next()).is_some_and(|c| c.is_lowercase()) {
        return false;
    }
    if last == '.' {
        let word = core[..core.len() - 1].trim_start_matches(['"', '\'', '(', '\u{201c}']);
        let mut chars = word.chars();
        // Single initial such as the "F." in "Joseph F. Smith".
        if let (Some(c), None) = (chars.next(), chars.next()) {
            if c.is_uppercase() {
                return false;
            }
        }
        if ABBREVIATIONS.contains(&word.to_lowercase().as_str()) {
            return false;
        }
    }
    true
}

/// Split text into sentences. Citation markers that follow a sentence
/// terminator (`He swam. [2]`) stay with the sentence they follow.
pub fn split_sentences(text: &str) -> Vec<String> {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    let mut sentences: Vec<Vec<&str>> = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for (i, &tok) in tokens.iter().enumerate() {
        if current.is_empty() && PURE_CITATION_TOKEN.is_match(tok) {
            if let Some(prev) = sentences.last_mut() {
                prev.push(tok);
                continue;
            }
        }
        current.push(tok);
        if ends_sentence(tok, tokens.get(i + 1).copied()) {
            sentences.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        sentences.push(current);
    }
    sentences.into_iter().map(|s| s.join(" ")).collect()
}
