use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::lexicon::Lexicon;
use super::split::fragment_spans;
use super::terms::{term_spans, TermKind};
use crate::error::{Error, Result};
use crate::tokenizer::{split_words, TokenSequence, Tokenizer, WordKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Context,
    Answer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub surface: String,
    pub kind: TermKind,
    /// Absolute token positions, inside the owning fragment's token span.
    pub positions: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fragment {
    pub id: usize,
    pub role: Role,
    pub text: String,
    /// Byte span in the document text.
    pub char_span: (usize, usize),
    /// Half-open token range.
    pub token_span: (usize, usize),
    pub terms: Vec<Term>,
    /// Positions standing in for the terms when none were found: the
    /// non-stopword tokens, or every token when all are stopwords.
    pub fallback_positions: Vec<usize>,
}

impl Fragment {
    pub fn tokens(&self) -> Range<usize> {
        self.token_span.0..self.token_span.1
    }

    /// Token positions of each term, or the fallback positions as one-token terms.
    pub fn term_positions(&self) -> Vec<Vec<usize>> {
        if self.terms.is_empty() {
            self.fallback_positions.iter().map(|&p| vec![p]).collect()
        } else {
            self.terms.iter().map(|t| t.positions.clone()).collect()
        }
    }

    /// Union of the term positions (or fallback positions), sorted.
    pub fn substantive_positions(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self.term_positions().into_iter().flatten().collect();
        all.sort_unstable();
        all.dedup();
        all
    }
}

/// Fragments of `text` with byte spans offset by `offset`; ids start at
/// `first_id`. Token spans and terms are left empty.
pub fn split_fragments(
    text: &str,
    role: Role,
    offset: usize,
    first_id: usize,
    lexicon: &Lexicon,
) -> Vec<Fragment> {
    fragment_spans(text, lexicon)
        .into_iter()
        .enumerate()
        .map(|(i, (s, e))| Fragment {
            id: first_id + i,
            role,
            text: text[s..e].to_string(),
            char_span: (s + offset, e + offset),
            token_span: (0, 0),
            terms: Vec::new(),
            fallback_positions: Vec::new(),
        })
        .collect()
}

/// Assigns every token to the fragment containing its start byte.
pub fn align_tokens(fragments: &mut [Fragment], tokens: &TokenSequence, text: &str) -> Result<()> {
    if tokens.source_len != text.len() {
        return Err(Error::TokenizationMismatch {
            tokenized: tokens.source_len,
            text: text.len(),
        });
    }
    for f in fragments.iter_mut() {
        let (s, e) = f.char_span;
        if e > text.len() || s > e {
            return Err(Error::Shape(format!(
                "fragment {} span {s}..{e} outside text of {} bytes",
                f.id,
                text.len()
            )));
        }
        f.token_span = (tokens.first_at_or_after(s), tokens.first_at_or_after(e));
    }
    Ok(())
}

/// Terms of an aligned fragment, mapped to token positions, plus the
/// fallback positions used when no term is found.
pub fn extract_substantive_terms(
    fragment: &Fragment,
    tokens: &TokenSequence,
    lexicon: &Lexicon,
) -> (Vec<Term>, Vec<usize>) {
    let base = fragment.char_span.0;
    let range = fragment.tokens();
    let positions_in = |start: usize, end: usize| -> Vec<usize> {
        range
            .clone()
            .filter(|&p| {
                let s = tokens.spans[p].0;
                s >= start && s < end
            })
            .collect()
    };
    let mut terms: Vec<Term> = Vec::new();
    for t in term_spans(&fragment.text, lexicon) {
        let positions = positions_in(base + t.start, base + t.end);
        if positions.is_empty() {
            continue;
        }
        if !terms.iter().any(|o| o.surface == t.surface && o.positions == positions) {
            terms.push(Term {
                surface: t.surface,
                kind: t.kind,
                positions,
            });
        }
    }
    let mut fallback = Vec::new();
    if terms.is_empty() {
        for w in split_words(&fragment.text) {
            let word = &fragment.text[w.start..w.end];
            if w.kind == WordKind::Word && !lexicon.is_stopword(word) {
                fallback.extend(positions_in(base + w.start, base + w.end));
            }
        }
        if fallback.is_empty() {
            fallback = range.collect();
        }
    }
    (terms, fallback)
}

/// Prompt preceding the answer: passages joined by newlines, then the
/// question, then a newline.
pub fn prompt_text(passages: &[String], question: &str) -> String {
    let mut text = passages.join("\n");
    text.push('\n');
    text.push_str(question);
    text.push('\n');
    text
}

/// A prompt and answer, tokenized, segmented and aligned.
#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub text: String,
    pub tokens: TokenSequence,
    /// Number of tokens before the first answer token.
    pub context_len: usize,
    /// Context fragments (passages and question) first, then answer fragments.
    pub fragments: Vec<Fragment>,
    pub n_context: usize,
}

impl Document {
    /// Tokenizes `prompt` and `answer` and concatenates them.
    pub fn from_text(prompt: &str, answer: &str, tokenizer: &Tokenizer, lexicon: &Lexicon) -> Result<Self> {
        let p = tokenizer.encode(prompt);
        let a = tokenizer.encode(answer);
        Document::assemble(prompt, p, answer, a, lexicon)
    }

    /// Builds a document from separately tokenized prompt and answer; the
    /// answer's spans are relative to `answer`.
    pub fn assemble(
        prompt: &str,
        prompt_tokens: TokenSequence,
        answer: &str,
        answer_tokens: TokenSequence,
        lexicon: &Lexicon,
    ) -> Result<Self> {
        for (seq, text) in [(&prompt_tokens, prompt), (&answer_tokens, answer)] {
            if seq.source_len != text.len() {
                return Err(Error::TokenizationMismatch {
                    tokenized: seq.source_len,
                    text: text.len(),
                });
            }
        }
        let offset = prompt.len();
        let text = format!("{prompt}{answer}");
        let context_len = prompt_tokens.len();
        let mut tokens = prompt_tokens;
        tokens.ids.extend(&answer_tokens.ids);
        tokens
            .spans
            .extend(answer_tokens.spans.iter().map(|&(s, e)| (s + offset, e + offset)));
        tokens.source_len = text.len();

        let mut fragments = split_fragments(prompt, Role::Context, 0, 0, lexicon);
        let n_context = fragments.len();
        fragments.extend(split_fragments(answer, Role::Answer, offset, n_context, lexicon));
        align_tokens(&mut fragments, &tokens, &text)?;
        for f in fragments.iter_mut() {
            if f.token_span.0 == f.token_span.1 {
                return Err(Error::UncoveredFragment { fragment: f.id });
            }
            let (terms, fallback) = extract_substantive_terms(f, &tokens, lexicon);
            f.terms = terms;
            f.fallback_positions = fallback;
        }
        Ok(Document {
            text,
            tokens,
            context_len,
            fragments,
            n_context,
        })
    }

    pub fn context_fragments(&self) -> &[Fragment] {
        &self.fragments[..self.n_context]
    }

    pub fn answer_fragments(&self) -> &[Fragment] {
        &self.fragments[self.n_context..]
    }

    /// Token positions of the answer.
    pub fn answer_positions(&self) -> Range<usize> {
        self.context_len..self.tokens.len()
    }
}
