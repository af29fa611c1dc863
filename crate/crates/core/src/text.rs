//! Tokenization shared by the signal classifier, the stub embedder, and the
//! stub generator: lowercase, split on non-alphanumeric characters.

use std::collections::BTreeSet;

/// Lowercased alphanumeric tokens in order of appearance.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

/// Default stopword list used to pick "content words" in stub outputs.
pub fn default_stopwords() -> BTreeSet<String> {
    parse_word_list(include_str!("../data/stopwords.txt"))
}

/// One word per line; blank lines ignored; lowercased.
pub fn parse_word_list(raw: &str) -> BTreeSet<String> {
    raw.lines()
        .map(|l| l.trim().to_lowercase())
        .filter(|l| !l.is_empty())
        .collect()
}

/// Up to `limit` tokens of `text` that are not stopwords, joined by spaces.
/// Falls back to a fixed phrase when nothing survives the filter.
pub fn content_words(text: &str, stopwords: &BTreeSet<String>, limit: usize) -> String {
    let words: Vec<String> = tokenize(text)
        .into_iter()
        .filter(|t| !stopwords.contains(t))
        .take(limit)
        .collect();
    if words.is_empty() {
        "the question as stated".to_string()
    } else {
        words.join(" ")
    }
}
