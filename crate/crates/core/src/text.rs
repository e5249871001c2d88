//! Tokenization, normalization and string similarity shared by search, BLEU,
//! tagging and fuzzy annotation.
//!
//! Offsets are always counted in `char`s of the original text so that spans
//! survive re-tokenization.

use unicode_normalization::UnicodeNormalization;

/// A case-folded token with its char range in the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

/// Scripts that are written without spaces get one token per character.
fn is_unspaced_script(c: char) -> bool {
    matches!(c as u32,
        0x3040..=0x30FF      // kana
        | 0x3400..=0x4DBF    // CJK ext A
        | 0x4E00..=0x9FFF    // CJK unified
        | 0xAC00..=0xD7AF    // hangul
        | 0xF900..=0xFAFF    // CJK compatibility
        | 0x20000..=0x2FFFF)
}

/// Splits on whitespace and punctuation, case-folding each token.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut cur_start = 0;
    let flush = |cur: &mut String, start: usize, end: usize, out: &mut Vec<Token>| {
        if !cur.is_empty() {
            out.push(Token {
                text: cur.to_lowercase(),
                start,
                end,
            });
            cur.clear();
        }
    };
    let mut idx = 0;
    for c in text.chars() {
        if is_unspaced_script(c) {
            flush(&mut cur, cur_start, idx, &mut out);
            out.push(Token {
                text: c.to_lowercase().collect(),
                start: idx,
                end: idx + 1,
            });
        } else if c.is_alphanumeric() {
            if cur.is_empty() {
                cur_start = idx;
            }
            cur.push(c);
        } else {
            flush(&mut cur, cur_start, idx, &mut out);
        }
        idx += 1;
    }
    flush(&mut cur, cur_start, idx, &mut out);
    out
}

/// Terms used for retrieval and BLEU. Text without any whitespace that is
/// written in an unspaced script falls back to character bigrams.
pub fn terms(text: &str) -> Vec<String> {
    let tokens = tokenize(text);
    let unspaced = !text.trim().chars().any(char::is_whitespace)
        && tokens.len() > 1
        && text.chars().any(is_unspaced_script);
    if unspaced {
        tokens
            .windows(2)
            .map(|w| format!("{}{}", w[0].text, w[1].text))
            .collect()
    } else {
        tokens.into_iter().map(|t| t.text).collect()
    }
}

/// Normalization used for exact matching of database values: NFC, trimmed,
/// case-folded.
pub fn normalize(value: &str) -> String {
    value.nfc().collect::<String>().trim().to_lowercase()
}

/// Case-folded, NFC, whitespace removed. Input form for fuzzy similarity.
pub fn squash(value: &str) -> String {
    value
        .nfc()
        .filter(|c| !c.is_whitespace())
        .flat_map(char::to_lowercase)
        .collect()
}

/// `1 - levenshtein / max_len` over squashed strings.
pub fn similarity(a: &str, b: &str) -> f64 {
    strsim::normalized_levenshtein(&squash(a), &squash(b))
}

/// Substring by char range.
pub fn char_slice(text: &str, start: usize, end: usize) -> &str {
    let mut indices = text
        .char_indices()
        .map(|(i, _)| i)
        .chain(std::iter::once(text.len()));
    let b0 = indices.nth(start).unwrap_or(text.len());
    let b1 = if end > start {
        indices.nth(end - start - 1).unwrap_or(text.len())
    } else {
        b0
    };
    &text[b0..b1]
}

pub fn char_len(text: &str) -> usize {
    text.chars().count()
}

/// Char offset of a byte offset.
pub fn byte_to_char(text: &str, byte: usize) -> usize {
    text[..byte].chars().count()
}


/// A token-aligned window of some text and its similarity to a target value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowMatch {
    pub start: usize,
    pub end: usize,
    pub similarity: f64,
}

/// Best token-aligned window of `text` against `value`. Windows span between
/// `n-1` and `n+1` tokens where `n` is the token length of `value`. Ties go
/// to the later window.
pub fn best_window(text: &str, value: &str) -> Option<WindowMatch> {
    let tokens = tokenize(text);
    best_window_in(text, &tokens, value)
}

pub fn best_window_in(text: &str, tokens: &[Token], value: &str) -> Option<WindowMatch> {
    let n = tokenize(value).len().max(1);
    let target = squash(value);
    if target.is_empty() {
        return None;
    }
    let mut best: Option<WindowMatch> = None;
    for i in 0..tokens.len() {
        for len in n.saturating_sub(1).max(1)..=n + 1 {
            let j = i + len;
            if j > tokens.len() {
                break;
            }
            let (start, end) = (tokens[i].start, tokens[j - 1].end);
            let sim =
                strsim::normalized_levenshtein(&squash(char_slice(text, start, end)), &target);
            if best.is_none_or(|b| sim >= b.similarity) {
                best = Some(WindowMatch {
                    start,
                    end,
                    similarity: sim,
                });
            }
        }
    }
    best
}

#[cfg(test)]
mod window_tests {
    use super::*;

    #[test]
    fn finds_verbatim_and_spaced_variants() {
        let m = best_window("Dinner at 7 pm please", "7pm").unwrap();
        assert_eq!(m.similarity, 1.0);
        assert_eq!(char_slice("Dinner at 7 pm please", m.start, m.end), "7 pm");
        let m = best_window("North or north?", "north").unwrap();
        assert_eq!((m.start, m.end), (9, 14), "later window wins ties");
    }
}
