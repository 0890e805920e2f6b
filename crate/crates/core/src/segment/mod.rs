//! Semantic fragments of a prompt and answer, their substantive terms, and
//! their alignment to token positions.

mod document;
mod lexicon;
mod split;
mod terms;

pub use document::{
    align_tokens, extract_substantive_terms, prompt_text, split_fragments, Document, Fragment,
    Role, Term,
};
pub use lexicon::{Lexicon, ABBREVIATIONS_FILE, NEGATIONS_FILE, STOPWORDS_FILE};
pub use split::fragment_spans;
pub use terms::{term_spans, TermKind, TermSpan};
