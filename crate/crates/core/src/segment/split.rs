use super::lexicon::Lexicon;

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '?' | '!')
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '\u{201d}' | '\u{2019}')
}

fn is_opener(c: char) -> bool {
    matches!(c, '"' | '\'' | '(' | '[' | '\u{201c}' | '\u{2018}')
}

/// Byte spans of the fragments of `text`: newline runs split first, then
/// sentences. Spans are trimmed of surrounding whitespace; empty ones are dropped.
pub fn fragment_spans(text: &str, lexicon: &Lexicon) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    for (i, c) in text.char_indices() {
        if c == '\n' || c == '\r' {
            if start < i {
                sentence_spans(text, start, i, lexicon, &mut out);
            }
            start = i + c.len_utf8();
        }
    }
    if start < text.len() {
        sentence_spans(text, start, text.len(), lexicon, &mut out);
    }
    out
}

fn push_trimmed(text: &str, start: usize, end: usize, out: &mut Vec<(usize, usize)>) {
    let slice = &text[start..end];
    let lead = slice.len() - slice.trim_start().len();
    let trail = slice.len() - slice.trim_end().len();
    if lead + trail < slice.len() {
        out.push((start + lead, end - trail));
    }
}

/// Word immediately before byte `at`, without leading punctuation.
fn word_before<'a>(text: &'a str, block_start: usize, at: usize) -> &'a str {
    let before = &text[block_start..at];
    let word = before.rsplit(char::is_whitespace).next().unwrap_or("");
    word.trim_start_matches(|c: char| !c.is_alphanumeric())
}

fn sentence_spans(
    text: &str,
    block_start: usize,
    block_end: usize,
    lexicon: &Lexicon,
    out: &mut Vec<(usize, usize)>,
) {
    let chars: Vec<(usize, char)> = text[block_start..block_end]
        .char_indices()
        .map(|(i, c)| (i + block_start, c))
        .collect();
    let mut start = block_start;
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if !is_terminator(c) {
            i += 1;
            continue;
        }
        let mut j = i + 1;
        while j < chars.len() && (is_terminator(chars[j].1) || is_closer(chars[j].1)) {
            j += 1;
        }
        let end = chars.get(j).map_or(block_end, |&(b, _)| b);
        let mut k = j;
        while k < chars.len() && chars[k].1.is_whitespace() {
            k += 1;
        }
        let mut first = k;
        while first < chars.len() && is_opener(chars[first].1) {
            first += 1;
        }
        let opens_sentence = k > j
            && chars
                .get(first)
                .is_some_and(|&(_, n)| n.is_uppercase() || n.is_ascii_digit());
        let abbreviated = c == '.' && lexicon.is_abbreviation(word_before(text, start, pos));
        if opens_sentence && !abbreviated {
            push_trimmed(text, start, end, out);
            start = end;
        }
        i = j;
    }
    if start < block_end {
        push_trimmed(text, start, block_end, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pieces(text: &str) -> Vec<&str> {
        fragment_spans(text, &Lexicon::default())
            .into_iter()
            .map(|(s, e)| &text[s..e])
            .collect()
    }

    #[test]
    fn newline_then_sentence() {
        let text = "A. B.\nC.";
        assert_eq!(fragment_spans(text, &Lexicon::default()), vec![(0, 2), (3, 5), (6, 8)]);
        assert_eq!(pieces(text), vec!["A.", "B.", "C."]);
    }

    #[test]
    fn empty_and_blank() {
        assert!(pieces("").is_empty());
        assert!(pieces(" \n\n  \n").is_empty());
    }

    #[test]
    fn abbreviation_does_not_split() {
        assert_eq!(pieces("Dr. Smith arrived. He left."), vec!["Dr. Smith arrived.", "He left."]);
        assert_eq!(pieces("Use e.g. Paris. Then stop."), vec!["Use e.g. Paris.", "Then stop."]);
    }

    #[test]
    fn lowercase_continuation_does_not_split() {
        assert_eq!(pieces("It cost 3.5 dollars. ok then."), vec!["It cost 3.5 dollars. ok then."]);
    }

    #[test]
    fn question_exclamation_and_quotes() {
        assert_eq!(
            pieces("Really?! Yes. \"Go.\" 5 left"),
            vec!["Really?!", "Yes.", "\"Go.\"", "5 left"]
        );
    }

    #[test]
    fn crlf_and_newline_runs() {
        assert_eq!(pieces("one\r\n\r\ntwo\n\nthree"), vec!["one", "two", "three"]);
    }
}
