use std::collections::BTreeSet;

use crate::segment::{fragment_spans, term_spans, Lexicon};

/// Lowercased surfaces of the terms of every fragment of `text`.
pub fn term_set(text: &str, lexicon: &Lexicon) -> BTreeSet<String> {
    fragment_spans(text, lexicon)
        .into_iter()
        .flat_map(|(s, e)| term_spans(&text[s..e], lexicon))
        .map(|t| t.surface.to_lowercase())
        .collect()
}

/// Fraction of the hypothesis terms that also occur as premise terms;
/// 1.0 when the hypothesis has no terms.
pub fn lexical_alignment_score(premise: &str, hypothesis: &str, lexicon: &Lexicon) -> f64 {
    let hyp = term_set(hypothesis, lexicon);
    if hyp.is_empty() {
        return 1.0;
    }
    let prem = term_set(premise, lexicon);
    hyp.intersection(&prem).count() as f64 / hyp.len() as f64
}
