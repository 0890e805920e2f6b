use serde::{Deserialize, Serialize};

use super::lexicon::Lexicon;
use crate::tokenizer::{split_words, WordKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermKind {
    Noun,
    Verb,
    NounPhrase,
    Negation,
    NamedEntity,
}

/// A term located by byte span in the text it was extracted from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TermSpan {
    pub surface: String,
    pub kind: TermKind,
    pub start: usize,
    pub end: usize,
}

const VERB_SUFFIXES: &[&str] = &["ing", "ed", "ize", "ise", "ify", "ate"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Class {
    /// Breaks runs: punctuation, stopwords, negations, lone letters.
    Other,
    Number,
    Noun,
    Verb,
}

fn classify(word: &str, lexicon: &Lexicon) -> Class {
    if word.chars().all(|c| c.is_ascii_digit()) {
        return Class::Number;
    }
    if lexicon.is_stopword(word) || lexicon.is_negation(word) || word.chars().count() < 2 {
        return Class::Other;
    }
    let lower = word.to_lowercase();
    let verb = VERB_SUFFIXES
        .iter()
        .any(|s| lower.len() >= s.len() + 3 && lower.ends_with(s));
    if verb {
        Class::Verb
    } else {
        Class::Noun
    }
}

fn is_capitalized(word: &str) -> bool {
    word.chars().next().is_some_and(char::is_uppercase)
}

/// Substantive terms of one sentence-level fragment, with byte spans relative
/// to `text`.
///
/// Extracted, in order: negation words; runs of two or more capitalized
/// content words (named entities); single content words, labelled verb by
/// suffix and noun otherwise; a number together with the following content
/// word (a quantity phrase); and runs of two or more adjacent non-verb
/// content words (noun phrases). Stopwords and punctuation break every run.
/// Duplicate (surface, span) pairs are dropped.
pub fn term_spans(text: &str, lexicon: &Lexicon) -> Vec<TermSpan> {
    struct W<'a> {
        text: &'a str,
        start: usize,
        end: usize,
        class: Class,
    }
    let words: Vec<W> = split_words(text)
        .into_iter()
        .map(|w| {
            let s = &text[w.start..w.end];
            let class = match w.kind {
                WordKind::Punct => Class::Other,
                WordKind::Word => classify(s, lexicon),
            };
            W {
                text: s,
                start: w.start,
                end: w.end,
                class,
            }
        })
        .collect();
    let mut out: Vec<TermSpan> = Vec::new();
    let mut push = |kind: TermKind, start: usize, end: usize| {
        let t = TermSpan {
            surface: text[start..end].to_string(),
            kind,
            start,
            end,
        };
        if !out.iter().any(|o| o.surface == t.surface && o.start == t.start && o.end == t.end) {
            out.push(t);
        }
    };
    let content = |w: &W| matches!(w.class, Class::Noun | Class::Verb);

    for w in &words {
        if w.class == Class::Other && lexicon.is_negation(w.text) {
            push(TermKind::Negation, w.start, w.end);
        }
    }

    let mut i = 0;
    while i < words.len() {
        let mut j = i;
        while j < words.len() && content(&words[j]) && is_capitalized(words[j].text) {
            j += 1;
        }
        if j - i >= 2 {
            push(TermKind::NamedEntity, words[i].start, words[j - 1].end);
        }
        i = j.max(i + 1);
    }

    for (k, w) in words.iter().enumerate() {
        match w.class {
            Class::Noun => push(TermKind::Noun, w.start, w.end),
            Class::Verb => push(TermKind::Verb, w.start, w.end),
            Class::Number => match words.get(k + 1) {
                Some(next) if content(next) => push(TermKind::NounPhrase, w.start, next.end),
                _ => push(TermKind::Noun, w.start, w.end),
            },
            Class::Other => {}
        }
    }

    let mut i = 0;
    while i < words.len() {
        let mut j = i;
        while j < words.len() && matches!(words[j].class, Class::Noun | Class::Number) {
            j += 1;
        }
        if j - i >= 2 {
            push(TermKind::NounPhrase, words[i].start, words[j - 1].end);
        }
        i = j.max(i + 1);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn surfaces(text: &str) -> Vec<(String, TermKind)> {
        term_spans(text, &Lexicon::default())
            .into_iter()
            .map(|t| (t.surface, t.kind))
            .collect()
    }

    fn has(terms: &[(String, TermKind)], s: &str, k: TermKind) -> bool {
        terms.iter().any(|(t, tk)| t == s && *tk == k)
    }

    #[test]
    fn quantity_phrase_and_nouns() {
        let t = surfaces("The 15 minute guideline starts");
        assert!(has(&t, "15 minute", TermKind::NounPhrase));
        assert!(has(&t, "guideline", TermKind::Noun));
        assert!(has(&t, "starts", TermKind::Noun));
        assert!(!t.iter().any(|(s, _)| s == "The"));
    }

    #[test]
    fn stopwords_only() {
        assert!(surfaces("of the and").is_empty());
    }

    #[test]
    fn negation_and_content() {
        let t = surfaces("do not preheat");
        assert!(has(&t, "not", TermKind::Negation));
        assert!(has(&t, "preheat", TermKind::Noun));
        let t = surfaces("It doesn't rain");
        assert!(has(&t, "doesn't", TermKind::Negation));
    }

    #[test]
    fn named_entities_and_verbs() {
        let t = surfaces("The Eiffel Tower attracted visitors.");
        assert!(has(&t, "Eiffel Tower", TermKind::NamedEntity));
        assert!(has(&t, "attracted", TermKind::Verb));
        // same surface and span as the entity, so deduplicated
        assert!(!has(&t, "Eiffel Tower", TermKind::NounPhrase));
        assert!(!t.iter().any(|(s, _)| s.contains("attracted visitors")));
    }

    #[test]
    fn spans_map_back_to_text() {
        let text = "Paris hosts 3 large museums, not 2.";
        for t in term_spans(text, &Lexicon::default()) {
            assert_eq!(&text[t.start..t.end], t.surface);
        }
    }

    #[test]
    fn no_duplicates() {
        let terms = term_spans("Red Red Red.", &Lexicon::default());
        for (i, a) in terms.iter().enumerate() {
            for b in &terms[i + 1..] {
                assert!(!(a.surface == b.surface && a.start == b.start && a.end == b.end));
            }
        }
    }
}
