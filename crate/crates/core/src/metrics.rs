//! Evaluation measures: instruction sentence accuracy, turn-level set
//! precision/recall/F1, token tag accuracy, BLEU and argument error rate.
//!
//! Conventions:
//! - Turn-level P/R/F1 are macro-averaged over turns. A turn whose gold and
//!   predicted sets are both empty scores 1 on all three; an empty prediction
//!   against nonempty gold has P = 0, and vice versa R = 0.
//! - BLEU uses uniform weights over 1–4-grams. A zero n-gram precision
//!   (including orders where the candidate has no n-gram at all) is replaced
//!   by `BLEU_EPSILON`. The brevity penalty uses the closest reference
//!   length, shorter on ties.
//! - AER counts an expected value as present when some token window of the
//!   response reaches similarity `FUZZY_THRESHOLD`.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ApiResult, InstructionId};
use crate::nlu::codec::Tag;
use crate::nlu::MatchDecision;
use crate::text;

pub const BLEU_EPSILON: f64 = 1e-9;
pub const MAX_NGRAM: usize = 4;
pub const FUZZY_THRESHOLD: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("{what}: {predicted} predicted items against {gold} gold items")]
    LengthMismatch {
        what: &'static str,
        predicted: usize,
        gold: usize,
    },
    #[error("turn {turn}: no decision for instruction {instruction}")]
    Coverage {
        turn: usize,
        instruction: InstructionId,
    },
    #[error("turn {turn}: duplicate decision for instruction {instruction}")]
    Duplicate {
        turn: usize,
        instruction: InstructionId,
    },
}

fn same_len(what: &'static str, predicted: usize, gold: usize) -> Result<(), MetricError> {
    if predicted == gold {
        Ok(())
    } else {
        Err(MetricError::LengthMismatch {
            what,
            predicted,
            gold,
        })
    }
}

/// Share of correct (turn, instruction) decisions. Each turn must carry
/// exactly one decision per candidate instruction, and every gold id must be
/// a candidate.
pub fn instr_sentence_accuracy(
    decisions: &[Vec<MatchDecision>],
    gold: &[BTreeSet<InstructionId>],
) -> Result<f64, MetricError> {
    same_len("turns", decisions.len(), gold.len())?;
    let (mut correct, mut total) = (0usize, 0usize);
    for (turn, (ds, g)) in decisions.iter().zip(gold).enumerate() {
        let mut seen = BTreeSet::new();
        for d in ds {
            if !seen.insert(&d.instruction) {
                return Err(MetricError::Duplicate {
                    turn,
                    instruction: d.instruction.clone(),
                });
            }
            total += 1;
            if d.selected == g.contains(&d.instruction) {
                correct += 1;
            }
        }
        if let Some(missing) = g.iter().find(|id| !seen.contains(id)) {
            return Err(MetricError::Coverage {
                turn,
                instruction: missing.clone(),
            });
        }
    }
    Ok(if total == 0 {
        1.0
    } else {
        correct as f64 / total as f64
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub const PERFECT: Prf = Prf {
        precision: 1.0,
        recall: 1.0,
        f1: 1.0,
    };

    /// Scores of one turn.
    pub fn of_sets<T: Ord>(predicted: &BTreeSet<T>, gold: &BTreeSet<T>) -> Prf {
        if predicted.is_empty() && gold.is_empty() {
            return Prf::PERFECT;
        }
        let hit = predicted.intersection(gold).count() as f64;
        let precision = if predicted.is_empty() {
            0.0
        } else {
            hit / predicted.len() as f64
        };
        let recall = if gold.is_empty() {
            0.0
        } else {
            hit / gold.len() as f64
        };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Prf {
            precision,
            recall,
            f1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrfReport {
    /// Macro averages over turns.
    pub macro_avg: Prf,
    pub per_turn: Vec<Prf>,
}

/// Turn-level precision, recall and F1, macro-averaged.
pub fn set_prf<T: Ord>(
    predicted: &[BTreeSet<T>],
    gold: &[BTreeSet<T>],
) -> Result<PrfReport, MetricError> {
    same_len("turns", predicted.len(), gold.len())?;
    let per_turn: Vec<Prf> = predicted
        .iter()
        .zip(gold)
        .map(|(p, g)| Prf::of_sets(p, g))
        .collect();
    let n = per_turn.len();
    let macro_avg = if n == 0 {
        Prf::PERFECT
    } else {
        let sum = |f: fn(&Prf) -> f64| per_turn.iter().map(f).sum::<f64>() / n as f64;
        Prf {
            precision: sum(|p| p.precision),
            recall: sum(|p| p.recall),
            f1: sum(|p| p.f1),
        }
    };
    Ok(PrfReport {
        macro_avg,
        per_turn,
    })
}

/// Share of tokens whose predicted tag equals the gold tag.
pub fn token_tag_accuracy(predicted: &[Vec<Tag>], gold: &[Vec<Tag>]) -> Result<f64, MetricError> {
    same_len("sequences", predicted.len(), gold.len())?;
    let (mut correct, mut total) = (0usize, 0usize);
    for (p, g) in predicted.iter().zip(gold) {
        same_len("tokens", p.len(), g.len())?;
        total += g.len();
        correct += p.iter().zip(g).filter(|(a, b)| a == b).count();
    }
    Ok(if total == 0 {
        1.0
    } else {
        correct as f64 / total as f64
    })
}

/// N-gram multiset of one token sequence, orders 1..=MAX_NGRAM.
#[derive(Debug, Clone)]
pub struct NgramCounts<'a> {
    pub len: usize,
    maps: Vec<HashMap<&'a [String], usize>>,
}

impl<'a> NgramCounts<'a> {
    pub fn new(tokens: &'a [String]) -> Self {
        let maps = (1..=MAX_NGRAM)
            .map(|n| {
                let mut m = HashMap::new();
                for w in tokens.windows(n) {
                    *m.entry(w).or_insert(0) += 1;
                }
                m
            })
            .collect();
        NgramCounts {
            len: tokens.len(),
            maps,
        }
    }
}

/// Matched and total n-gram counts of one candidate against its references.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NgramStats {
    pub matches: [usize; MAX_NGRAM],
    pub totals: [usize; MAX_NGRAM],
    pub candidate_len: usize,
    pub reference_len: usize,
}

impl NgramStats {
    pub fn of(candidate: &[String], references: &[Vec<String>]) -> Self {
        let refs: Vec<NgramCounts<'_>> = references.iter().map(|r| NgramCounts::new(r)).collect();
        let refs: Vec<&NgramCounts<'_>> = refs.iter().collect();
        Self::from_counts(&NgramCounts::new(candidate), &refs)
    }

    /// Clipped matches: each candidate n-gram counts at most as often as in
    /// the reference where it is most frequent.
    pub fn from_counts(candidate: &NgramCounts<'_>, references: &[&NgramCounts<'_>]) -> Self {
        let mut s = NgramStats {
            candidate_len: candidate.len,
            ..Default::default()
        };
        for n in 0..MAX_NGRAM {
            for (gram, count) in &candidate.maps[n] {
                let max_ref = references
                    .iter()
                    .map(|r| r.maps[n].get(gram).copied().unwrap_or(0))
                    .max()
                    .unwrap_or(0);
                s.matches[n] += (*count).min(max_ref);
                s.totals[n] += count;
            }
        }
        s.reference_len = references
            .iter()
            .map(|r| r.len)
            .min_by_key(|&r| (r.abs_diff(candidate.len), r))
            .unwrap_or(0);
        s
    }

    pub fn add(&mut self, other: &NgramStats) {
        for n in 0..MAX_NGRAM {
            self.matches[n] += other.matches[n];
            self.totals[n] += other.totals[n];
        }
        self.candidate_len += other.candidate_len;
        self.reference_len += other.reference_len;
    }

    pub fn precisions(&self) -> [f64; MAX_NGRAM] {
        std::array::from_fn(|n| {
            if self.matches[n] == 0 {
                BLEU_EPSILON
            } else {
                self.matches[n] as f64 / self.totals[n] as f64
            }
        })
    }

    pub fn brevity_penalty(&self) -> f64 {
        let (c, r) = (self.candidate_len as f64, self.reference_len as f64);
        if c == 0.0 {
            0.0
        } else if c >= r {
            1.0
        } else {
            (1.0 - r / c).exp()
        }
    }

    pub fn bleu(&self) -> f64 {
        let log_mean = self.precisions().iter().map(|p| p.ln()).sum::<f64>() / MAX_NGRAM as f64;
        self.brevity_penalty() * log_mean.exp()
    }
}

/// Corpus BLEU of `candidates`, each against its own reference list.
pub fn bleu<S: AsRef<str>>(candidates: &[S], references: &[Vec<S>]) -> Result<f64, MetricError> {
    same_len("candidates", candidates.len(), references.len())?;
    let mut total = NgramStats::default();
    for (c, refs) in candidates.iter().zip(references) {
        let refs: Vec<Vec<String>> = refs.iter().map(|r| text::terms(r.as_ref())).collect();
        total.add(&NgramStats::of(&text::terms(c.as_ref()), &refs));
    }
    Ok(total.bleu())
}

/// BLEU of a single candidate against references.
pub fn sentence_bleu(candidate: &str, references: &[&str]) -> f64 {
    let refs: Vec<Vec<String>> = references.iter().map(|r| text::terms(r)).collect();
    NgramStats::of(&text::terms(candidate), &refs).bleu()
}

/// Surface values a response is expected to carry for one API result.
/// For a find the anchor is the returned entity with the most values present
/// in the response (first on ties); the count is expected when above one.
pub fn expected_values(response: &str, result: &ApiResult) -> Vec<String> {
    match result {
        ApiResult::Find { count, entities } => {
            let mut anchor: Option<(usize, &crate::model::Entity)> = None;
            for e in entities {
                let hits = e
                    .attributes
                    .values()
                    .filter(|v| value_present(response, v))
                    .count();
                if anchor.is_none_or(|(best, _)| hits > best) {
                    anchor = Some((hits, e));
                }
            }
            let Some((_, anchor)) = anchor else {
                return Vec::new();
            };
            let mut out: Vec<String> = anchor.attributes.values().cloned().collect();
            if *count > 1 {
                out.push(count.to_string());
            }
            dedup(out)
        }
        ApiResult::Add { reference, details }
        | ApiResult::Edit {
            reference, details, ..
        } => {
            let mut out = vec![reference.clone()];
            out.extend(details.values().cloned());
            dedup(out)
        }
        ApiResult::Delete { reference, .. } => vec![reference.clone()],
    }
}

fn dedup(values: Vec<String>) -> Vec<String> {
    let mut seen = BTreeSet::new();
    values
        .into_iter()
        .filter(|v| seen.insert(text::normalize(v)))
        .collect()
}

pub fn value_present(response: &str, value: &str) -> bool {
    text::best_window(response, value).is_some_and(|m| m.similarity >= FUZZY_THRESHOLD)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AerTurn {
    pub expected: Vec<String>,
    pub missing: Vec<String>,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AerReport {
    /// Mean over included turns; 0 when no turn is included.
    pub rate: f64,
    pub included_turns: usize,
    /// `None` for turns without expected values.
    pub per_turn: Vec<Option<AerTurn>>,
}

/// Argument error rate of responses given each turn's API results.
pub fn aer<S: AsRef<str>>(
    responses: &[S],
    results: &[Vec<ApiResult>],
) -> Result<AerReport, MetricError> {
    same_len("turns", responses.len(), results.len())?;
    let per_turn: Vec<Option<AerTurn>> = responses
        .iter()
        .zip(results)
        .map(|(resp, rs)| {
            let resp = resp.as_ref();
            let expected = dedup(rs.iter().flat_map(|r| expected_values(resp, r)).collect());
            if expected.is_empty() {
                return None;
            }
            let missing: Vec<String> = expected
                .iter()
                .filter(|v| !value_present(resp, v))
                .cloned()
                .collect();
            let rate = missing.len() as f64 / expected.len() as f64;
            Some(AerTurn {
                expected,
                missing,
                rate,
            })
        })
        .collect();
    let included: Vec<f64> = per_turn.iter().flatten().map(|t| t.rate).collect();
    let rate = if included.is_empty() {
        0.0
    } else {
        included.iter().sum::<f64>() / included.len() as f64
    };
    Ok(AerReport {
        rate,
        included_turns: included.len(),
        per_turn,
    })
}
