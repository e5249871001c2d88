//! Index-extended BIO tags: `B-k`/`I-k` mark the k-th argument of the
//! instruction's API, `O` everything else. The alphabet has `1 + 2·max_args`
//! symbols whatever the domain or attribute inventory.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::model::{Span, Speaker, Utterance};
use crate::text;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tag {
    O,
    B(usize),
    I(usize),
}

impl Tag {
    pub fn index(self) -> Option<usize> {
        match self {
            Tag::O => None,
            Tag::B(k) | Tag::I(k) => Some(k),
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tag::O => f.write_str("O"),
            Tag::B(k) => write!(f, "B-{k}"),
            Tag::I(k) => write!(f, "I-{k}"),
        }
    }
}

impl FromStr for Tag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "O" {
            return Ok(Tag::O);
        }
        let (head, k) = s.split_once('-').ok_or_else(|| format!("bad tag {s:?}"))?;
        let k: usize = k.parse().map_err(|_| format!("bad tag index in {s:?}"))?;
        if k == 0 {
            return Err(format!("tag index must be positive in {s:?}"));
        }
        match head {
            "B" => Ok(Tag::B(k)),
            "I" => Ok(Tag::I(k)),
            _ => Err(format!("bad tag {s:?}")),
        }
    }
}

impl Serialize for Tag {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Tag {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The tag alphabet for `max_args` arguments.
pub fn alphabet(max_args: usize) -> Vec<Tag> {
    let mut out = vec![Tag::O];
    for k in 1..=max_args {
        out.push(Tag::B(k));
        out.push(Tag::I(k));
    }
    out
}

/// A token of the dialogue history, addressed by utterance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryToken {
    pub text: String,
    pub span: Span,
}

/// Tokens of every utterance in `history`, oldest first.
pub fn history_tokens(history: &[Utterance<'_>]) -> Vec<HistoryToken> {
    history
        .iter()
        .flat_map(|u| {
            text::tokenize(u.text)
                .into_iter()
                .map(move |t| HistoryToken {
                    text: t.text,
                    span: Span {
                        turn: u.turn,
                        speaker: u.speaker,
                        start: t.start,
                        end: t.end,
                    },
                })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagSequence {
    pub tokens: Vec<String>,
    pub tags: Vec<Tag>,
    pub alignment: Vec<Span>,
}

impl TagSequence {
    pub fn all_o(tokens: &[HistoryToken]) -> Self {
        TagSequence {
            tokens: tokens.iter().map(|t| t.text.clone()).collect(),
            tags: vec![Tag::O; tokens.len()],
            alignment: tokens.iter().map(|t| t.span).collect(),
        }
    }

    /// Every `I-k` continues a `B-k`/`I-k` of the same utterance.
    pub fn is_well_formed(&self) -> bool {
        self.tags.iter().enumerate().all(|(i, tag)| match tag {
            Tag::I(k) => {
                i > 0
                    && self.tags[i - 1].index() == Some(*k)
                    && same_utterance(&self.alignment[i - 1], &self.alignment[i])
            }
            _ => true,
        })
    }
}

fn same_utterance(a: &Span, b: &Span) -> bool {
    a.turn == b.turn && a.speaker == b.speaker
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("spans for arguments {first} and {second} overlap")]
    Overlap { first: usize, second: usize },
    #[error("argument index {index} is outside 1..={max_args}")]
    Index { index: usize, max_args: usize },
    #[error("span for argument {index} covers no token")]
    Unaligned { index: usize },
}

/// An argument span with its 1-based index.
pub type IndexedSpan = (usize, Span);

/// Tags covering `spans`. A token belongs to a span when it lies inside it.
pub fn encode(
    spans: &[IndexedSpan],
    tokens: &[HistoryToken],
    max_args: usize,
) -> Result<TagSequence, CodecError> {
    let mut seq = TagSequence::all_o(tokens);
    let mut owner: Vec<Option<usize>> = vec![None; tokens.len()];
    for (n, (k, span)) in spans.iter().enumerate() {
        if *k == 0 || *k > max_args {
            return Err(CodecError::Index {
                index: *k,
                max_args,
            });
        }
        for (m, (_, other)) in spans.iter().enumerate().take(n) {
            if same_utterance(span, other) && span.start < other.end && other.start < span.end {
                return Err(CodecError::Overlap {
                    first: spans[m].0,
                    second: *k,
                });
            }
        }
        let mut first = true;
        for (i, t) in tokens.iter().enumerate() {
            let inside = same_utterance(&t.span, span)
                && t.span.start >= span.start
                && t.span.end <= span.end;
            if !inside {
                continue;
            }
            if let Some(prev) = owner[i] {
                return Err(CodecError::Overlap {
                    first: spans[prev].0,
                    second: *k,
                });
            }
            owner[i] = Some(n);
            seq.tags[i] = if first { Tag::B(*k) } else { Tag::I(*k) };
            first = false;
        }
        if first {
            return Err(CodecError::Unaligned { index: *k });
        }
    }
    Ok(seq)
}

/// Spans encoded by `seq`, in token order. A stray `I-k` opens a new span.
pub fn decode(seq: &TagSequence) -> Vec<IndexedSpan> {
    let mut out: Vec<IndexedSpan> = Vec::new();
    let mut open = false;
    for (i, tag) in seq.tags.iter().enumerate() {
        let a = seq.alignment[i];
        match tag {
            Tag::O => open = false,
            Tag::B(k) => {
                out.push((*k, a));
                open = true;
            }
            Tag::I(k) => {
                let extends = open
                    && out
                        .last()
                        .is_some_and(|(pk, ps)| pk == k && same_utterance(ps, &a))
                    && seq.tags[i - 1].index() == Some(*k);
                if extends {
                    out.last_mut().expect("open span").1.end = a.end;
                } else {
                    out.push((*k, a));
                    open = true;
                }
            }
        }
    }
    out
}

/// Convenience for a single utterance history.
pub fn utterance(turn: usize, speaker: Speaker, text: &str) -> Utterance<'_> {
    Utterance {
        turn,
        speaker,
        text,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn span(start: usize, end: usize) -> Span {
        Span {
            turn: 0,
            speaker: Speaker::User,
            start,
            end,
        }
    }

    #[test]
    fn hotel_and_day_get_indexed_tags() {
        let text = "Book Yuanhang International Hotel Beijing on Tuesday";
        let tokens = history_tokens(&[utterance(0, Speaker::User, text)]);
        let at = |needle: &str| text.find(needle).unwrap();
        let hotel = span(at("Yuanhang"), at(" on"));
        let day = span(at("Tuesday"), text.len());
        let seq = encode(&[(1, hotel), (2, day)], &tokens, 2).unwrap();
        let tags: Vec<String> = seq.tags.iter().map(|t| t.to_string()).collect();
        assert_eq!(tags, ["O", "B-1", "I-1", "I-1", "I-1", "O", "B-2"]);
        assert_eq!(decode(&seq), vec![(1, hotel), (2, day)]);
    }

    #[test]
    fn encode_rejects_bad_input() {
        let tokens = history_tokens(&[utterance(0, Speaker::User, "a b c")]);
        assert_eq!(
            encode(&[(3, span(0, 1))], &tokens, 2),
            Err(CodecError::Index {
                index: 3,
                max_args: 2
            })
        );
        assert!(matches!(
            encode(&[(1, span(0, 3)), (2, span(2, 3))], &tokens, 2),
            Err(CodecError::Overlap { .. })
        ));
        assert!(encode(&[], &tokens, 2)
            .unwrap()
            .tags
            .iter()
            .all(|t| *t == Tag::O));
    }

    #[test]
    fn alphabet_size_is_one_plus_twice_max_args() {
        for k in 0..5 {
            assert_eq!(alphabet(k).len(), 1 + 2 * k);
        }
        assert_eq!("I-2".parse::<Tag>().unwrap(), Tag::I(2));
        assert!("B-0".parse::<Tag>().is_err());
    }
}
