use std::collections::HashSet;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const STOPWORDS_FILE: &str = "stopwords.txt";
pub const ABBREVIATIONS_FILE: &str = "abbreviations.txt";
pub const NEGATIONS_FILE: &str = "negations.txt";

const STOPWORDS: &str = include_str!("../../data/stopwords.txt");
const ABBREVIATIONS: &str = include_str!("../../data/abbreviations.txt");
const NEGATIONS: &str = include_str!("../../data/negations.txt");

/// Word lists driving sentence splitting and term extraction.
///
/// One entry per line, matched case-insensitively. Blank lines and lines
/// starting with `#` are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    stopwords: HashSet<String>,
    abbreviations: HashSet<String>,
    negations: HashSet<String>,
}

fn parse_list(text: &str) -> HashSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

impl Default for Lexicon {
    fn default() -> Self {
        Lexicon::from_lists(STOPWORDS, ABBREVIATIONS, NEGATIONS)
    }
}

impl Lexicon {
    pub fn from_lists(stopwords: &str, abbreviations: &str, negations: &str) -> Self {
        Lexicon {
            stopwords: parse_list(stopwords),
            abbreviations: parse_list(abbreviations),
            negations: parse_list(negations),
        }
    }

    /// Reads the three list files from `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let read = |name: &str| {
            let path = dir.join(name);
            fs::read_to_string(&path).map_err(|e| Error::io(&path, e))
        };
        Ok(Lexicon::from_lists(
            &read(STOPWORDS_FILE)?,
            &read(ABBREVIATIONS_FILE)?,
            &read(NEGATIONS_FILE)?,
        ))
    }

    pub fn is_stopword(&self, word: &str) -> bool {
        self.stopwords.contains(&word.to_lowercase())
    }

    /// `word` without its trailing period, e.g. `"dr"` for `"Dr."`.
    pub fn is_abbreviation(&self, word: &str) -> bool {
        self.abbreviations.contains(&word.to_lowercase())
    }

    pub fn is_negation(&self, word: &str) -> bool {
        let lower = word.to_lowercase().replace('\u{2019}', "'");
        self.negations.contains(&lower) || (lower.len() > 3 && lower.ends_with("n't"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_lists() {
        let lx = Lexicon::default();
        assert!(lx.is_stopword("The"));
        assert!(!lx.is_stopword("guideline"));
        assert!(lx.is_abbreviation("Dr"));
        assert!(lx.is_negation("not"));
        assert!(lx.is_negation("doesn't"));
        assert!(lx.is_negation("Can\u{2019}t"));
        assert!(!lx.is_negation("know"));
    }

    #[test]
    fn loads_from_directory() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join(STOPWORDS_FILE), "# comment\nfoo\n\n").unwrap();
        fs::write(dir.path().join(ABBREVIATIONS_FILE), "abc\n").unwrap();
        fs::write(dir.path().join(NEGATIONS_FILE), "nah\n").unwrap();
        let lx = Lexicon::load_dir(dir.path()).unwrap();
        assert!(lx.is_stopword("FOO"));
        assert!(!lx.is_stopword("the"));
        assert!(lx.is_abbreviation("abc"));
        assert!(lx.is_negation("nah"));
    }

    #[test]
    fn missing_file_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(Lexicon::load_dir(dir.path()), Err(Error::Io { .. })));
    }
}
