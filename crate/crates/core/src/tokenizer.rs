//! Longest-match word/punctuation tokenizer over a fixed vocabulary.
//!
//! Text is first cut into words (alphanumeric runs, with internal apostrophes)
//! and single punctuation characters; whitespace is skipped. Each word is then
//! covered left to right by the longest vocabulary entry that matches its
//! prefix, first case-sensitively and then lowercased. A remainder with no
//! matching prefix becomes one `<unk>` token.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const UNK: &str = "<unk>";

/// Token ids plus the byte span of every token in the source text.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenSequence {
    pub ids: Vec<u32>,
    pub spans: Vec<(usize, usize)>,
    /// Byte length of the tokenized text.
    pub source_len: usize,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Index of the first token starting at or after byte `offset`.
    pub fn first_at_or_after(&self, offset: usize) -> usize {
        self.spans.partition_point(|&(s, _)| s < offset)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WordKind {
    Word,
    Punct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WordSpan {
    pub start: usize,
    pub end: usize,
    pub kind: WordKind,
}

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}'
}

/// Cut `text` into words and punctuation marks, skipping whitespace.
pub fn split_words(text: &str) -> Vec<WordSpan> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (start, c) = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_alphanumeric() {
            let mut j = i + 1;
            while j < chars.len() {
                let cj = chars[j].1;
                if cj.is_alphanumeric() {
                    j += 1;
                } else if is_apostrophe(cj) && j + 1 < chars.len() && chars[j + 1].1.is_alphanumeric() {
                    j += 2;
                } else {
                    break;
                }
            }
            let end = chars.get(j).map_or(text.len(), |&(b, _)| b);
            out.push(WordSpan {
                start,
                end,
                kind: WordKind::Word,
            });
            i = j;
        } else {
            out.push(WordSpan {
                start,
                end: start + c.len_utf8(),
                kind: WordKind::Punct,
            });
            i += 1;
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct Tokenizer {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
    unk: u32,
}

impl Tokenizer {
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            index.entry(t.clone()).or_insert(i as u32);
        }
        let unk = *index
            .get(UNK)
            .ok_or_else(|| Error::Config(format!("vocabulary lacks `{UNK}`")))?;
        Ok(Tokenizer { tokens, index, unk })
    }

    /// Load `vocab.txt`: one token per line, line number = id.
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_tokens(text.lines().map(|l| l.trim_end_matches('\r').to_string()).collect())
    }

    pub fn vocab_size(&self) -> usize {
        self.tokens.len()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn unk_id(&self) -> u32 {
        self.unk
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> &str {
        self.tokens.get(id as usize).map_or(UNK, String::as_str)
    }

    fn lookup(&self, piece: &str) -> Option<u32> {
        self.index
            .get(piece)
            .or_else(|| self.index.get(&piece.to_lowercase()))
            .copied()
    }

    pub fn encode(&self, text: &str) -> TokenSequence {
        let mut seq = TokenSequence {
            source_len: text.len(),
            ..Default::default()
        };
        for w in split_words(text) {
            let mut pos = w.start;
            while pos < w.end {
                let word = &text[pos..w.end];
                let hit = word
                    .char_indices()
                    .map(|(i, c)| i + c.len_utf8())
                    .rev()
                    .find_map(|len| self.lookup(&word[..len]).map(|id| (id, len)));
                let (id, len) = hit.unwrap_or((self.unk, word.len()));
                seq.ids.push(id);
                seq.spans.push((pos, pos + len));
                pos += len;
            }
        }
        seq
    }

    /// Space-joined token strings; punctuation attaches to the previous token.
    pub fn decode(&self, ids: &[u32]) -> String {
        self.decode_with_spans(ids).0
    }

    /// Decoded text together with the span of every token in it.
    pub fn decode_with_spans(&self, ids: &[u32]) -> (String, TokenSequence) {
        let mut out = String::new();
        let mut spans = Vec::with_capacity(ids.len());
        for &id in ids {
            let t = self.token(id);
            let punct = t.chars().all(|c| !c.is_alphanumeric()) && t != UNK;
            if !out.is_empty() && !punct {
                out.push(' ');
            }
            spans.push((out.len(), out.len() + t.len()));
            out.push_str(t);
        }
        let seq = TokenSequence {
            ids: ids.to_vec(),
            spans,
            source_len: out.len(),
        };
        (out, seq)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tok(words: &[&str]) -> Tokenizer {
        let mut v: Vec<String> = vec![UNK.into()];
        v.extend(words.iter().map(|s| s.to_string()));
        Tokenizer::from_tokens(v).unwrap()
    }

    #[test]
    fn words_and_punctuation() {
        let text = "Don't stop, 15 min.";
        let spans: Vec<&str> = split_words(text).iter().map(|w| &text[w.start..w.end]).collect();
        assert_eq!(spans, vec!["Don't", "stop", ",", "15", "min", "."]);
    }

    #[test]
    fn longest_match_with_unk_remainder() {
        let t = tok(&["pre", "preheat", "heat", "ed", "oven", "."]);
        let seq = t.encode("Preheated ovenx.");
        let pieces: Vec<&str> = seq.ids.iter().map(|&i| t.token(i)).collect();
        // "ovenx" has prefix "oven" then an unmatched "x"
        assert_eq!(pieces, vec!["preheat", "ed", "oven", UNK, "."]);
        assert_eq!(seq.spans, vec![(0, 7), (7, 9), (10, 14), (14, 15), (15, 16)]);
        assert_eq!(seq.source_len, 16);
    }

    #[test]
    fn spans_are_monotone_and_inside_text() {
        let t = tok(&["a", "b"]);
        let text = "a  b\nc ä!";
        let seq = t.encode(text);
        for w in seq.spans.windows(2) {
            assert!(w[0].1 <= w[1].0);
        }
        assert!(seq.spans.iter().all(|&(s, e)| s < e && e <= text.len()));
        assert_eq!(seq.len(), 5);
    }

    #[test]
    fn missing_unk_is_an_error() {
        assert!(Tokenizer::from_tokens(vec!["a".into()]).is_err());
    }

    #[test]
    fn decode_attaches_punctuation() {
        let t = tok(&["hello", "world", "."]);
        let ids = t.encode("hello world.").ids;
        assert_eq!(t.decode(&ids), "hello world.");
    }

    #[test]
    fn decode_spans_cover_tokens() {
        let t = tok(&["paris", "is", "."]);
        let ids = t.encode("paris is.").ids;
        let (text, seq) = t.decode_with_spans(&ids);
        assert_eq!(text, "paris is.");
        assert_eq!(seq.spans, vec![(0, 5), (6, 8), (8, 9)]);
        assert_eq!(seq.source_len, text.len());
    }
}
