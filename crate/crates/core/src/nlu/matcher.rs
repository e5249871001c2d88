//! Instruction matching: predictor interface, lexical baseline and operating
//! point selection.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::values::ValueIndex;
use super::{MatchDecision, PredictError};
use crate::catalog;
use crate::manual_kit::{idf_table, tfidf_vector};
use crate::metrics::{set_prf, Prf};
use crate::model::{Domain, Instruction, InstructionId, Manual, Speaker, Utterance};
use crate::text;

/// Scores every instruction of a manual for a dialogue history.
pub trait Matcher: Send + Sync {
    /// One score in `[0, 1]` per instruction, in manual order.
    fn score(&self, history: &[Utterance<'_>], manual: &Manual) -> Result<Vec<f64>, PredictError>;
}

/// One decision per instruction; `selected` iff the score reaches `threshold`.
pub fn match_instructions(
    history: &[Utterance<'_>],
    manual: &Manual,
    matcher: &dyn Matcher,
    threshold: f64,
) -> Result<Vec<MatchDecision>, PredictError> {
    if history.last().is_none_or(|u| u.speaker != Speaker::User) {
        return Err(PredictError::BadHistory);
    }
    let scores = matcher.score(history, manual)?;
    if scores.len() != manual.instructions.len() {
        return Err(PredictError::Malformed(format!(
            "{} scores for {} instructions",
            scores.len(),
            manual.instructions.len()
        )));
    }
    Ok(manual
        .instructions
        .iter()
        .zip(scores)
        .map(|(i, score)| MatchDecision {
            instruction: i.id.clone(),
            score,
            selected: score >= threshold,
        })
        .collect())
}

/// Selected instruction ids of a decision list.
pub fn selected(decisions: &[MatchDecision]) -> BTreeSet<InstructionId> {
    decisions
        .iter()
        .filter(|d| d.selected)
        .map(|d| d.instruction.clone())
        .collect()
}

/// Number of pair features.
pub const FEATURES: usize = 12;

/// Learned association between user words and instruction words.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Association {
    /// Utterance word to `(instruction word, weight)` pairs, sorted.
    by_word: BTreeMap<String, Vec<(String, f64)>>,
    /// Log lift of an instruction word among selected instructions, per
    /// turn signature.
    prior: Vec<BTreeMap<String, f64>>,
}

impl Association {
    /// Positive pointwise mutual information from (utterance terms,
    /// instruction terms) pairs of gold matches.
    pub fn fit(examples: &[(Vec<String>, Vec<String>)]) -> Self {
        let mut joint: HashMap<(&str, &str), f64> = HashMap::new();
        let mut left: HashMap<&str, f64> = HashMap::new();
        let mut right: HashMap<&str, f64> = HashMap::new();
        for (u, i) in examples {
            let u: BTreeSet<&str> = u.iter().map(String::as_str).collect();
            let i: BTreeSet<&str> = i.iter().map(String::as_str).collect();
            for w in &u {
                *left.entry(w).or_default() += 1.0;
            }
            for v in &i {
                *right.entry(v).or_default() += 1.0;
            }
            for w in &u {
                for v in &i {
                    *joint.entry((w, v)).or_default() += 1.0;
                }
            }
        }
        let n = examples.len().max(1) as f64;
        let mut by_word: BTreeMap<String, Vec<(String, f64)>> = BTreeMap::new();
        for ((w, v), c) in joint {
            if c < 2.0 {
                continue;
            }
            let pmi = (c * n / (left[w] * right[v])).ln();
            if pmi > 0.0 {
                // Discount rare pairs.
                let weight = pmi * c / (c + 3.0);
                by_word
                    .entry(w.to_string())
                    .or_default()
                    .push((v.to_string(), weight));
            }
        }
        for list in by_word.values_mut() {
            list.sort_by(|a, b| a.0.cmp(&b.0));
        }
        Association {
            by_word,
            prior: Vec::new(),
        }
    }

    /// Sets the word prior from counts per turn signature: how often
    /// instructions holding a word were candidates and how often they were
    /// selected.
    pub fn with_prior(mut self, counts: &[WordCounts; SIGNATURES]) -> Self {
        self.prior = counts
            .iter()
            .map(|c| {
                let total_c: f64 = c.candidates.values().sum();
                let total_s: f64 = c.selected.values().sum();
                if total_c == 0.0 || total_s == 0.0 {
                    return BTreeMap::new();
                }
                let base = total_s / total_c;
                c.candidates
                    .iter()
                    .map(|(w, n)| {
                        let s = c.selected.get(w).copied().unwrap_or(0.0);
                        (w.clone(), ((s + base) / (n + 1.0) / base).ln())
                    })
                    .collect()
            })
            .collect();
        self
    }

    fn prior_of(&self, signature: usize, word: &str) -> f64 {
        self.prior
            .get(signature)
            .and_then(|p| p.get(word))
            .copied()
            .unwrap_or(0.0)
    }

    /// Best association of each instruction word with any utterance word.
    pub fn best_per_term<'a>(&'a self, utterance: &[String]) -> HashMap<&'a str, f64> {
        let mut best: HashMap<&str, f64> = HashMap::new();
        for w in utterance {
            for (v, weight) in self.by_word.get(w).into_iter().flatten() {
                let e = best.entry(v.as_str()).or_insert(0.0);
                *e = e.max(*weight);
            }
        }
        best
    }

    /// Mean over instruction terms of the best association with any
    /// utterance term, squashed into `[0, 1)`.
    pub fn score(&self, utterance: &[String], instruction: &[String]) -> f64 {
        if instruction.is_empty() {
            return 0.0;
        }
        let best = self.best_per_term(utterance);
        squash_mean(
            instruction
                .iter()
                .map(|v| best.get(v.as_str()).copied().unwrap_or(0.0))
                .sum(),
            instruction.len(),
        )
    }

    pub fn is_empty(&self) -> bool {
        self.by_word.is_empty()
    }
}

/// Candidate and selection counts of instruction words.
#[derive(Debug, Clone, Default)]
pub struct WordCounts {
    pub candidates: HashMap<String, f64>,
    pub selected: HashMap<String, f64>,
}

/// Number of turn signatures.
pub const SIGNATURES: usize = 4;

/// Coarse shape of a user utterance: whether it holds a known value and
/// whether it asks a question.
pub fn turn_signature(text: &str, has_value: bool) -> usize {
    usize::from(has_value) * 2 + usize::from(text.contains('?'))
}

fn squash_mean(total: f64, n: usize) -> f64 {
    let mean = total / n as f64;
    mean / (1.0 + mean)
}

/// Lexical matcher: a logistic model over TF-IDF similarity, domain
/// agreement, typed value overlap and learned word association.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LexicalMatcher {
    pub weights: [f64; FEATURES],
    pub association: Association,
    #[serde(skip)]
    values: ValueIndex,
}

/// Per-manual data reused across turns. Terms are interned into a manual
/// vocabulary.
pub struct PreparedManual {
    vocab: HashMap<String, usize>,
    /// Idf-weighted mean word prior per instruction and turn signature.
    prior: Vec<[f64; SIGNATURES]>,
    idf: Vec<f64>,
    /// Unit TF-IDF vectors as sorted `(term, weight)` lists.
    vectors: Vec<Vec<(usize, f64)>>,
    condition_terms: Vec<Vec<usize>>,
    mention_attributes: Vec<BTreeSet<String>>,
    domains: Vec<Domain>,
}

impl PreparedManual {
    pub fn new(manual: &Manual, association: &Association) -> Self {
        let docs: Vec<Vec<String>> = manual
            .instructions
            .iter()
            .map(|i| text::terms(&instruction_text(i)))
            .collect();
        let idf_map = idf_table(&docs);
        let mut words: Vec<&String> = idf_map.keys().collect();
        words.sort();
        let vocab: HashMap<String, usize> = words
            .iter()
            .enumerate()
            .map(|(k, w)| ((*w).clone(), k))
            .collect();
        let idf: Vec<f64> = words.iter().map(|w| idf_map[*w]).collect();
        let vectors = docs
            .iter()
            .map(|d| {
                let mut v: Vec<(usize, f64)> = tfidf_vector(d, &idf_map)
                    .into_iter()
                    .map(|(t, w)| (vocab[&t], w))
                    .collect();
                v.sort_by_key(|e| e.0);
                v
            })
            .collect();
        let condition_terms: Vec<Vec<usize>> = docs
            .iter()
            .map(|d| {
                let mut t: Vec<usize> = d.iter().map(|w| vocab[w]).collect();
                t.sort_unstable();
                t.dedup();
                t
            })
            .collect();
        let prior = condition_terms
            .iter()
            .map(|ts: &Vec<usize>| {
                let den: f64 = ts.iter().map(|t| idf[*t]).sum();
                std::array::from_fn(|sig| {
                    let num: f64 = ts
                        .iter()
                        .map(|t| idf[*t] * association.prior_of(sig, words[*t]))
                        .sum();
                    if den > 0.0 {
                        num / den
                    } else {
                        0.0
                    }
                })
            })
            .collect();
        PreparedManual {
            prior,
            vectors,
            condition_terms,
            mention_attributes: manual
                .instructions
                .iter()
                .map(|i| {
                    i.api
                        .iter()
                        .flat_map(|a| a.mentions.iter().map(|m| m.attribute.to_string()))
                        .collect()
                })
                .collect(),
            domains: manual
                .instructions
                .iter()
                .map(|i| i.domain.clone())
                .collect(),
            vocab,
            idf,
        }
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Dense unit TF-IDF vector of `terms` over the vocabulary.
    fn dense(&self, terms: &[String]) -> Vec<f64> {
        let mut v = vec![0.0; self.idf.len()];
        for t in terms {
            if let Some(&k) = self.vocab.get(t) {
                v[k] += self.idf[k];
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }

    fn cosine(&self, dense: &[f64], k: usize) -> f64 {
        self.vectors[k].iter().map(|(t, w)| dense[*t] * w).sum()
    }
}

/// Text the matcher compares against: condition and API description.
pub fn instruction_text(i: &Instruction) -> String {
    match &i.api {
        Some(a) => format!("{} {}", i.condition, a.text),
        None => i.condition.clone(),
    }
}

/// Distinct terms of an instruction's text, sorted.
pub fn instruction_terms(i: &Instruction) -> Vec<String> {
    let mut t = text::terms(&instruction_text(i));
    t.sort();
    t.dedup();
    t
}

/// Domain the conversation is about: the latest user utterance naming a
/// domain noun, or else holding values of a single domain.
pub fn active_domain(history: &[Utterance<'_>], values: &ValueIndex) -> Option<Domain> {
    for u in history.iter().rev().filter(|u| u.speaker == Speaker::User) {
        let terms: HashSet<String> = text::tokenize(u.text).into_iter().map(|t| t.text).collect();
        let mut named: Vec<&catalog::DomainProfile> = catalog::PROFILES
            .iter()
            .filter(|p| terms.contains(p.noun))
            .collect();
        if let Some(p) = named.pop() {
            return Some(p.domain());
        }
        let mut seen: BTreeSet<&Domain> = BTreeSet::new();
        let hits = values.recognize(u.text);
        for h in &hits {
            let ds: BTreeSet<&Domain> = h.entries.iter().map(|e| &e.domain).collect();
            if ds.len() == 1 {
                seen.extend(ds);
            }
        }
        if seen.len() == 1 {
            return seen.into_iter().next().cloned();
        }
    }
    None
}

/// Features of the current turn shared by all instructions.
pub struct TurnFeatures {
    last: Vec<f64>,
    history: Vec<f64>,
    association: Vec<f64>,
    signature: usize,
    domain: Option<Domain>,
    recognized: HashMap<Domain, BTreeSet<String>>,
}

impl TurnFeatures {
    pub fn new(
        history: &[Utterance<'_>],
        prepared: &PreparedManual,
        values: &ValueIndex,
        association: &Association,
    ) -> Self {
        let last = history.last().map(|u| u.text).unwrap_or("");
        let last_terms = text::terms(last);
        let mut weighted = last_terms.clone();
        weighted.extend(last_terms.iter().cloned());
        for u in &history[..history.len().saturating_sub(1)] {
            weighted.extend(text::terms(u.text));
        }
        let mut recognized: HashMap<Domain, BTreeSet<String>> = HashMap::new();
        let hits = values.recognize(last);
        let signature = turn_signature(last, !hits.is_empty());
        for r in hits {
            for e in r.entries {
                recognized
                    .entry(e.domain)
                    .or_default()
                    .insert(e.attribute.to_string());
            }
        }
        let mut assoc = vec![0.0; prepared.idf.len()];
        for (v, w) in association.best_per_term(&last_terms) {
            if let Some(&k) = prepared.vocab.get(v) {
                assoc[k] = w;
            }
        }
        TurnFeatures {
            last: prepared.dense(&last_terms),
            history: prepared.dense(&weighted),
            association: assoc,
            signature,
            domain: active_domain(history, values),
            recognized,
        }
    }

    pub fn features(&self, prepared: &PreparedManual, k: usize) -> [f64; FEATURES] {
        let cos_last = prepared.cosine(&self.last, k);
        let cos_hist = prepared.cosine(&self.history, k);
        let dom = match &self.domain {
            Some(d) if *d == prepared.domains[k] => 1.0,
            Some(_) => 0.0,
            None => 0.5,
        };
        let mentions = &prepared.mention_attributes[k];
        let empty = BTreeSet::new();
        let rec = self.recognized.get(&prepared.domains[k]).unwrap_or(&empty);
        let (jacc, exact) = if mentions.is_empty() {
            (0.0, 0.0)
        } else {
            let inter = rec.intersection(mentions).count() as f64;
            let union = rec.union(mentions).count() as f64;
            (inter / union, if rec == mentions { 1.0 } else { 0.0 })
        };
        let terms = &prepared.condition_terms[k];
        let (num, den) = terms.iter().fold((0.0, 0.0), |(n, d), t| {
            (
                n + prepared.idf[*t] * self.association[*t],
                d + prepared.idf[*t],
            )
        });
        let assoc = if den > 0.0 {
            squash_mean(num / den, 1)
        } else {
            0.0
        };
        let has_api = if mentions.is_empty() { 0.0 } else { 1.0 };
        let prior = prepared.prior[k][self.signature];
        [
            1.0,
            cos_last,
            cos_hist,
            dom,
            jacc,
            exact,
            assoc,
            assoc * dom,
            exact * dom,
            has_api,
            cos_last * dom,
            prior,
        ]
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn dot(w: &[f64; FEATURES], x: &[f64; FEATURES]) -> f64 {
    w.iter().zip(x).map(|(a, b)| a * b).sum()
}

/// Weights used before any fitting: similarity to the latest utterance only.
pub const DEFAULT_WEIGHTS: [f64; FEATURES] =
    [-3.0, 6.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];

/// One labelled (turn, instruction) example.
#[derive(Debug, Clone)]
pub struct PairExample {
    pub features: [f64; FEATURES],
    pub positive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            epochs: 300,
            learning_rate: 0.5,
            l2: 1e-4,
        }
    }
}

/// Full-batch gradient descent on class-balanced logistic loss.
pub fn fit_weights(examples: &[PairExample], config: &FitConfig) -> [f64; FEATURES] {
    let mut w = [0.0; FEATURES];
    let pos = examples.iter().filter(|e| e.positive).count().max(1) as f64;
    let neg = examples.iter().filter(|e| !e.positive).count().max(1) as f64;
    let total = pos + neg;
    for _ in 0..config.epochs {
        let mut grad = [0.0; FEATURES];
        for e in examples {
            let (y, weight) = if e.positive {
                (1.0, total / (2.0 * pos))
            } else {
                (0.0, total / (2.0 * neg))
            };
            let err = (sigmoid(dot(&w, &e.features)) - y) * weight;
            for (g, x) in grad.iter_mut().zip(&e.features) {
                *g += err * x;
            }
        }
        for (wi, g) in w.iter_mut().zip(&grad) {
            *wi -= config.learning_rate * (g / total + config.l2 * *wi);
        }
    }
    w
}

impl LexicalMatcher {
    pub fn new(values: ValueIndex) -> Self {
        LexicalMatcher {
            weights: DEFAULT_WEIGHTS,
            association: Association::default(),
            values,
        }
    }

    pub fn with_model(
        values: ValueIndex,
        weights: [f64; FEATURES],
        association: Association,
    ) -> Self {
        LexicalMatcher {
            weights,
            association,
            values,
        }
    }

    pub fn values(&self) -> &ValueIndex {
        &self.values
    }

    pub fn set_values(&mut self, values: ValueIndex) {
        self.values = values;
    }

    pub fn score_prepared(&self, history: &[Utterance<'_>], prepared: &PreparedManual) -> Vec<f64> {
        let turn = TurnFeatures::new(history, prepared, &self.values, &self.association);
        (0..prepared.len())
            .map(|k| sigmoid(dot(&self.weights, &turn.features(prepared, k))))
            .collect()
    }
}

impl Matcher for LexicalMatcher {
    fn score(&self, history: &[Utterance<'_>], manual: &Manual) -> Result<Vec<f64>, PredictError> {
        Ok(self.score_prepared(history, &PreparedManual::new(manual, &self.association)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    F1,
    Recall,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OperatingPointError {
    #[error("empty dev set")]
    Empty,
    #[error("{0} score rows for {1} gold sets")]
    Mismatch(usize, usize),
}

/// Candidate thresholds `0.01, 0.02, …, 1.00`.
pub fn threshold_grid() -> Vec<f64> {
    (1..=100).map(|i| i as f64 / 100.0).collect()
}

/// Macro P/R/F1 of selecting `score >= threshold`.
pub fn evaluate_threshold(
    decisions: &[Vec<MatchDecision>],
    gold: &[BTreeSet<InstructionId>],
    threshold: f64,
) -> Prf {
    let predicted: Vec<BTreeSet<InstructionId>> = decisions
        .iter()
        .map(|row| {
            row.iter()
                .filter(|d| d.score >= threshold)
                .map(|d| d.instruction.clone())
                .collect()
        })
        .collect();
    set_prf(&predicted, gold).expect("equal lengths").macro_avg
}

/// Threshold maximizing the dev objective; ties go to the lower threshold.
pub fn pick_operating_point(
    decisions: &[Vec<MatchDecision>],
    gold: &[BTreeSet<InstructionId>],
    objective: Objective,
) -> Result<f64, OperatingPointError> {
    if decisions.is_empty() {
        return Err(OperatingPointError::Empty);
    }
    if decisions.len() != gold.len() {
        return Err(OperatingPointError::Mismatch(decisions.len(), gold.len()));
    }
    let mut best: Option<(f64, f64)> = None;
    for t in threshold_grid() {
        let prf = evaluate_threshold(decisions, gold, t);
        let value = match objective {
            Objective::F1 => prf.f1,
            Objective::Recall => prf.recall,
        };
        if best.is_none_or(|(_, b)| value > b) {
            best = Some((t, value));
        }
    }
    Ok(best.expect("grid is nonempty").0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::InstructionApi;
    use crate::nlu::codec::utterance;

    fn instr(id: &str, condition: &str, api: bool) -> Instruction {
        Instruction {
            id: id.into(),
            family: id.into(),
            domain: "hotel".into(),
            condition: condition.into(),
            solution: "ok".into(),
            api: api.then(|| InstructionApi {
                api: "hotel_book".into(),
                text: "Book it.".into(),
                mentions: vec![],
            }),
        }
    }

    fn manual() -> Manual {
        Manual {
            id: "m".into(),
            instructions: vec![
                instr(
                    "a",
                    "If the guest wants to reserve a room for several nights.",
                    true,
                ),
                instr(
                    "b",
                    "When the customer asks to change the reservation date.",
                    true,
                ),
                instr("c", "Once the user asks to cancel a booking.", true),
            ],
        }
    }

    #[test]
    fn verbatim_condition_is_selected() {
        let m = manual();
        let matcher = LexicalMatcher::new(ValueIndex::default());
        let h = [utterance(0, Speaker::User, &m.instructions[1].condition)];
        let d = match_instructions(&h, &m, &matcher, 0.5).unwrap();
        assert!(d[1].selected);
        assert!(d.iter().all(|x| (0.0..=1.0).contains(&x.score)));
    }

    #[test]
    fn greeting_selects_nothing() {
        let m = manual();
        let matcher = LexicalMatcher::new(ValueIndex::default());
        let h = [utterance(0, Speaker::User, "Hello there.")];
        let d = match_instructions(&h, &m, &matcher, 0.5).unwrap();
        assert!(selected(&d).is_empty());
    }

    #[test]
    fn decisions_do_not_depend_on_instruction_order() {
        let m = manual();
        let mut r = m.clone();
        r.instructions.reverse();
        let matcher = LexicalMatcher::new(ValueIndex::default());
        let h = [utterance(
            0,
            Speaker::User,
            "I want to cancel my booking please",
        )];
        let a = match_instructions(&h, &m, &matcher, 0.3).unwrap();
        let mut b = match_instructions(&h, &r, &matcher, 0.3).unwrap();
        b.reverse();
        assert_eq!(a, b);
    }

    #[test]
    fn single_perfect_example_gives_lowest_grid_point() {
        let d = vec![vec![MatchDecision {
            instruction: "a".into(),
            score: 0.7,
            selected: true,
        }]];
        let gold = vec![BTreeSet::from([InstructionId::from("a")])];
        assert_eq!(
            pick_operating_point(&d, &gold, Objective::F1).unwrap(),
            0.01
        );
        assert!(pick_operating_point(&[], &[], Objective::F1).is_err());
    }
}
