//! Argument filling: tagger interface and the lexical baselines.

use std::collections::BTreeMap;

use super::codec::{encode, history_tokens, IndexedSpan, TagSequence};
use super::values::{Recognized, ValueIndex, REFERENCE_ATTRIBUTE};
use super::PredictError;
use crate::catalog::lang::LanguagePack;
use crate::metrics::FUZZY_THRESHOLD;
use crate::model::{Instruction, Span, Speaker, Utterance};
use crate::text;

/// Tags argument spans in the history for one selected instruction.
pub trait Tagger: Send + Sync {
    fn tag(
        &self,
        history: &[Utterance<'_>],
        instruction: &Instruction,
        max_args: usize,
    ) -> Result<TagSequence, PredictError>;
}

/// Cue words per attribute, lower-cased.
fn cue_table(pack: &LanguagePack) -> BTreeMap<String, Vec<String>> {
    pack.cues
        .iter()
        .map(|(a, cs)| (a.clone(), cs.iter().map(|c| c.to_lowercase()).collect()))
        .collect()
}

/// Baseline that reads the instruction's attribute mentions: each API input
/// is filled with the latest value of that attribute's lexicon, or of its
/// shape for reference numbers, preferring values after the attribute's
/// cue words.
#[derive(Debug, Clone)]
pub struct ManualTagger {
    values: ValueIndex,
    cues: BTreeMap<String, Vec<String>>,
}

impl ManualTagger {
    pub fn new(values: ValueIndex, pack: &LanguagePack) -> Self {
        ManualTagger {
            values,
            cues: cue_table(pack),
        }
    }

    fn cue_before(&self, tokens: &[text::Token], r: &Recognized, attribute: &str) -> bool {
        r.tokens.0 > 0
            && self
                .cues
                .get(attribute)
                .is_some_and(|cs| cs.iter().any(|c| *c == tokens[r.tokens.0 - 1].text))
    }

    fn find_in(
        &self,
        u: &Utterance<'_>,
        domain: &str,
        attribute: &str,
        others: &[&str],
        taken: &[IndexedSpan],
    ) -> Option<Span> {
        let tokens = text::tokenize(u.text);
        let hits = self.values.recognize_tokens(u.text, &tokens);
        let free = |r: &&Recognized| {
            !taken.iter().any(|(_, s)| {
                s.turn == u.turn && s.speaker == u.speaker && s.start < r.end && r.start < s.end
            })
        };
        let candidates: Vec<&Recognized> = hits
            .iter()
            .filter(|r| {
                if attribute == REFERENCE_ATTRIBUTE {
                    r.has_attribute(attribute)
                } else {
                    r.has(domain, attribute)
                }
            })
            .filter(free)
            .collect();
        let span = |r: &Recognized| Span {
            turn: u.turn,
            speaker: u.speaker,
            start: r.start,
            end: r.end,
        };
        if !candidates.is_empty() {
            let cued: Vec<&&Recognized> = candidates
                .iter()
                .filter(|r| self.cue_before(&tokens, r, attribute))
                .collect();
            if let Some(r) = cued.last() {
                return Some(span(r));
            }
            let uncontested: Vec<&&Recognized> = candidates
                .iter()
                .filter(|r| !others.iter().any(|o| self.cue_before(&tokens, r, o)))
                .collect();
            return uncontested.last().map(|r| span(r));
        }
        let lexicon = self.values.small_lexicon(domain, attribute)?;
        let mut best: Option<text::WindowMatch> = None;
        for v in lexicon {
            if let Some(m) = text::best_window_in(u.text, &tokens, v) {
                let clear = !taken.iter().any(|(_, s)| {
                    s.turn == u.turn && s.speaker == u.speaker && s.start < m.end && m.start < s.end
                });
                if clear
                    && m.similarity >= FUZZY_THRESHOLD
                    && best.is_none_or(|b| m.similarity > b.similarity)
                {
                    best = Some(m);
                }
            }
        }
        best.map(|m| Span {
            turn: u.turn,
            speaker: u.speaker,
            start: m.start,
            end: m.end,
        })
    }

    /// Argument spans, latest utterance first per input.
    pub fn spans(
        &self,
        history: &[Utterance<'_>],
        instruction: &Instruction,
        max_args: usize,
    ) -> Vec<IndexedSpan> {
        let Some(api) = &instruction.api else {
            return Vec::new();
        };
        let attrs: Vec<&str> = api.mentions.iter().map(|m| m.attribute.as_str()).collect();
        let mut out: Vec<IndexedSpan> = Vec::new();
        for (k, attr) in attrs.iter().enumerate().take(max_args) {
            let others: Vec<&str> = attrs.iter().filter(|a| *a != attr).copied().collect();
            for u in history.iter().rev() {
                if let Some(s) = self.find_in(u, instruction.domain.as_str(), attr, &others, &out) {
                    out.push((k + 1, s));
                    break;
                }
            }
        }
        out
    }
}

impl Tagger for ManualTagger {
    fn tag(
        &self,
        history: &[Utterance<'_>],
        instruction: &Instruction,
        max_args: usize,
    ) -> Result<TagSequence, PredictError> {
        if instruction.api.is_none() {
            return Err(PredictError::NoApi(instruction.id.clone()));
        }
        let tokens = history_tokens(history);
        Ok(encode(
            &self.spans(history, instruction, max_args),
            &tokens,
            max_args,
        )?)
    }
}

/// Ablation without the manual: every database value in the latest user
/// utterance becomes an argument, indexed by order of appearance.
#[derive(Debug, Clone)]
pub struct NoManualTagger {
    values: ValueIndex,
}

impl NoManualTagger {
    pub fn new(values: ValueIndex) -> Self {
        NoManualTagger { values }
    }

    pub fn spans(&self, history: &[Utterance<'_>], max_args: usize) -> Vec<IndexedSpan> {
        let Some(u) = history.iter().rev().find(|u| u.speaker == Speaker::User) else {
            return Vec::new();
        };
        self.values
            .recognize(u.text)
            .iter()
            .take(max_args)
            .enumerate()
            .map(|(k, r)| {
                (
                    k + 1,
                    Span {
                        turn: u.turn,
                        speaker: u.speaker,
                        start: r.start,
                        end: r.end,
                    },
                )
            })
            .collect()
    }
}

impl Tagger for NoManualTagger {
    fn tag(
        &self,
        history: &[Utterance<'_>],
        _instruction: &Instruction,
        max_args: usize,
    ) -> Result<TagSequence, PredictError> {
        let tokens = history_tokens(history);
        Ok(encode(&self.spans(history, max_args), &tokens, max_args)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::lang::LanguagePack;
    use crate::dbgen::{self, DbConfig};
    use crate::model::{InstructionApi, Mention};
    use crate::nlu::codec::{decode, utterance, Tag};

    fn book_instruction() -> Instruction {
        Instruction {
            id: "m01:hotel.book".into(),
            family: "hotel.book".into(),
            domain: "hotel".into(),
            condition: "If the guest wants to book.".into(),
            solution: "Booked.".into(),
            api: Some(InstructionApi {
                api: "hotel_book".into(),
                text: "Book with the name and the date.".into(),
                mentions: vec![
                    Mention {
                        attribute: "name".into(),
                        start: 14,
                        end: 18,
                    },
                    Mention {
                        attribute: "day".into(),
                        start: 27,
                        end: 31,
                    },
                ],
            }),
        }
    }

    #[test]
    fn tuesday_is_tagged_as_the_second_argument() {
        let db = dbgen::generate(2, &DbConfig::uniform(20));
        let hotel = db.entities(&"hotel".into())[0].name().unwrap().to_string();
        let agent = format!("{hotel} is a nice hotel.");
        let h = [
            utterance(0, Speaker::User, "I need a hotel."),
            utterance(0, Speaker::Agent, &agent),
            utterance(1, Speaker::User, "Please book it on Tuesday."),
        ];
        let tagger = ManualTagger::new(
            crate::nlu::values::ValueIndex::build(&db),
            &LanguagePack::english(),
        );
        let seq = tagger.tag(&h, &book_instruction(), 2).unwrap();
        let spans = decode(&seq);
        assert_eq!(spans.len(), 2);
        assert_eq!(spans[1].0, 2);
        assert_eq!(
            crate::text::char_slice(h[2].text, spans[1].1.start, spans[1].1.end),
            "Tuesday"
        );
        let first = spans[0].1;
        assert_eq!((first.turn, first.speaker), (0, Speaker::Agent));
        let i = seq.tags.iter().position(|t| *t == Tag::B(2)).unwrap();
        assert_eq!(seq.tokens[i], "tuesday");
    }

    #[test]
    fn no_values_means_all_o() {
        let db = dbgen::generate(2, &DbConfig::uniform(20));
        let tagger = ManualTagger::new(
            crate::nlu::values::ValueIndex::build(&db),
            &LanguagePack::english(),
        );
        let h = [utterance(0, Speaker::User, "Hello, can you help me?")];
        let seq = tagger.tag(&h, &book_instruction(), 2).unwrap();
        assert!(seq.tags.iter().all(|t| *t == Tag::O));
    }

    #[test]
    fn cues_separate_departure_and_destination() {
        let db = dbgen::generate(2, &DbConfig::uniform(20));
        let places = &db.lexicons[&crate::model::Domain::from("taxi")]
            [&crate::model::AttributeName::from("departure")];
        let (a, b) = (&places[0], &places[1]);
        let said = format!("I need a taxi from {a} to {b}.");
        let h = [utterance(0, Speaker::User, &said)];
        let mut ins = book_instruction();
        ins.domain = "taxi".into();
        let api = ins.api.as_mut().unwrap();
        api.mentions[0].attribute = "departure".into();
        api.mentions[1].attribute = "destination".into();
        let tagger = ManualTagger::new(
            crate::nlu::values::ValueIndex::build(&db),
            &LanguagePack::english(),
        );
        let spans = tagger.spans(&h, &ins, 2);
        let text_of = |s: &Span| crate::text::char_slice(&said, s.start, s.end).to_string();
        assert_eq!(text_of(&spans[0].1), *a);
        assert_eq!(text_of(&spans[1].1), *b);
    }
}
