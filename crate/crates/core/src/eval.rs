//! Experiment protocols: subtask evaluation on held-out manuals, data-size
//! and manual-count sweeps, leave-one-domain-out, with per-turn dumps.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::time::Duration;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::lang::LanguagePack;
use crate::metrics::{
    aer, bleu, instr_sentence_accuracy, set_prf, token_tag_accuracy, MetricError, Prf,
};
use crate::model::codec::{corpus_from_str, corpus_to_string};
use crate::model::{
    ApiResult, Dialogue, DialogueId, Domain, Instruction, InstructionId, Manual, ManualId, Turn,
};
use crate::nlu::bridge::{BridgeClient, Generator};
use crate::nlu::codec::{decode, encode, history_tokens, IndexedSpan, Tag};
use crate::nlu::matcher::{
    evaluate_threshold, fit_weights, instruction_terms, pick_operating_point, turn_signature,
    Association, FitConfig, LexicalMatcher, Objective, OperatingPointError, PairExample,
    PreparedManual, TurnFeatures, WordCounts, FEATURES, SIGNATURES,
};
use crate::nlu::tagger::{ManualTagger, NoManualTagger, Tagger};
use crate::nlu::values::ValueIndex;
use crate::nlu::{MatchDecision, PredictError};
use crate::responder::{realize, ResponderState, Step};
use crate::seed;
use crate::simulator::{config_hash, Corpus, Manifest, Partition, Split};
use crate::text;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{split} dialogue {dialogue} uses held-out manual {manual}")]
    Leakage {
        split: &'static str,
        dialogue: DialogueId,
        manual: ManualId,
    },
    #[error("test dialogue {dialogue} uses manual {manual}, which is not held out")]
    NotHeldOut {
        dialogue: DialogueId,
        manual: ManualId,
    },
    #[error("dialogue {dialogue} uses unknown manual {manual}")]
    UnknownManual {
        dialogue: DialogueId,
        manual: ManualId,
    },
    #[error("fraction {0} is outside (0, 1]")]
    Fraction(f64),
    #[error("manual count {count} is outside 1..={available}")]
    ManualCount { count: usize, available: usize },
    #[error("{0} split is empty")]
    Empty(&'static str),
    #[error("dialogue {dialogue} turn {turn}: {source}")]
    Predict {
        dialogue: DialogueId,
        turn: usize,
        source: PredictError,
    },
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    OperatingPoint(#[from] OperatingPointError),
    #[error("bridge predictor selected but no bridge command configured")]
    NoBridge,
    #[error("{context}: {message}")]
    Io { context: String, message: String },
}

fn io_err(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> EvalError {
    let context = context.into();
    move |e| EvalError::Io {
        context,
        message: e.to_string(),
    }
}

/// Which predictor produces matching scores, argument tags and responses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictorKind {
    /// Gold annotations.
    Oracle,
    /// Selects nothing, tags nothing, says nothing.
    Empty,
    /// Fitted lexical matcher, manual-guided lexical tagger, template responder.
    #[default]
    Lexical,
    /// External model over the line protocol.
    Bridge,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct BridgeConfig {
    /// Predictor process command line.
    pub command: Vec<String>,
    pub timeout_ms: u64,
    /// Training command run in each point's working directory, which holds
    /// `train.jsonl` and `dev.jsonl`.
    pub train_hook: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub predictor: PredictorKind,
    /// Objective of the primary operating point; the other is reported too.
    pub objective: Objective,
    pub max_args: usize,
    pub fit: FitConfig,
    /// Highest-similarity negatives kept per training turn.
    pub hard_negatives: usize,
    /// Random negatives kept per training turn.
    pub random_negatives: usize,
    pub bridge: BridgeConfig,
    /// Root for per-point working directories of training hooks.
    pub work_dir: Option<PathBuf>,
    /// Include per-turn dumps in reports.
    pub dump_turns: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            predictor: PredictorKind::Lexical,
            objective: Objective::F1,
            max_args: 2,
            fit: FitConfig::default(),
            hard_negatives: 0,
            random_negatives: 48,
            bridge: BridgeConfig::default(),
            work_dir: None,
            dump_turns: true,
        }
    }
}

/// Splits, manuals and value lexicons an evaluation runs on.
#[derive(Debug, Clone)]
pub struct EvalData {
    pub train: Vec<Dialogue>,
    pub dev: Vec<Dialogue>,
    pub test: Vec<Dialogue>,
    pub partition: Partition,
    pub manuals: BTreeMap<ManualId, Manual>,
    pub values: ValueIndex,
    pub pack: LanguagePack,
}

impl EvalData {
    pub fn new(
        train: Vec<Dialogue>,
        dev: Vec<Dialogue>,
        test: Vec<Dialogue>,
        partition: Partition,
        manuals: &[Manual],
        values: ValueIndex,
    ) -> Result<Self, EvalError> {
        let data = EvalData {
            train,
            dev,
            test,
            partition,
            manuals: manuals.iter().map(|m| (m.id.clone(), m.clone())).collect(),
            values,
            pack: LanguagePack::english(),
        };
        data.check()?;
        Ok(data)
    }

    pub fn from_corpus(
        corpus: &Corpus,
        manuals: &[Manual],
        values: ValueIndex,
    ) -> Result<Self, EvalError> {
        Self::new(
            corpus.dialogues(Split::Train),
            corpus.dialogues(Split::Dev),
            corpus.dialogues(Split::Test),
            corpus.manifest.config.partition.clone(),
            manuals,
            values,
        )
    }

    /// Reads a corpus directory written by `Corpus::write`.
    pub fn load(dir: &Path, manuals: &[Manual], values: ValueIndex) -> Result<Self, EvalError> {
        let read = |name: &str| -> Result<String, EvalError> {
            let path = dir.join(name);
            std::fs::read_to_string(&path).map_err(io_err(path.display().to_string()))
        };
        let split = |name: &str| -> Result<Vec<Dialogue>, EvalError> {
            corpus_from_str(&read(name)?).map_err(|e| EvalError::Io {
                context: name.into(),
                message: e.to_string(),
            })
        };
        let manifest: Manifest =
            serde_json::from_str(&read("manifest.json")?).map_err(|e| EvalError::Io {
                context: "manifest.json".into(),
                message: e.to_string(),
            })?;
        Self::new(
            split("train.jsonl")?,
            split("dev.jsonl")?,
            split("test.jsonl")?,
            manifest.config.partition,
            manuals,
            values,
        )
    }

    /// Train and dev never use held-out manuals; test uses only them.
    pub fn check(&self) -> Result<(), EvalError> {
        self.partition.check().map_err(|e| EvalError::Io {
            context: "partition".into(),
            message: e.to_string(),
        })?;
        for (name, split) in [("train", &self.train), ("dev", &self.dev)] {
            check_trainable(name, split.iter(), &self.partition)?;
        }
        for d in &self.test {
            if !self.partition.is_held_out(&d.manual) {
                return Err(EvalError::NotHeldOut {
                    dialogue: d.id.clone(),
                    manual: d.manual.clone(),
                });
            }
        }
        for d in self.train.iter().chain(&self.dev).chain(&self.test) {
            if !self.manuals.contains_key(&d.manual) {
                return Err(EvalError::UnknownManual {
                    dialogue: d.id.clone(),
                    manual: d.manual.clone(),
                });
            }
        }
        Ok(())
    }

    fn manual(&self, d: &Dialogue) -> &Manual {
        &self.manuals[&d.manual]
    }
}

fn check_trainable<'a>(
    name: &'static str,
    dialogues: impl IntoIterator<Item = &'a Dialogue>,
    partition: &Partition,
) -> Result<(), EvalError> {
    for d in dialogues {
        if partition.is_held_out(&d.manual) {
            return Err(EvalError::Leakage {
                split: name,
                dialogue: d.id.clone(),
                manual: d.manual.clone(),
            });
        }
    }
    Ok(())
}

/// An argument as scored by the tagging metrics: which instruction, which
/// input, and the squashed span text.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ArgItem {
    pub instruction: InstructionId,
    pub index: usize,
    pub value: String,
}

/// Gold instructions of a turn in manual order.
fn gold_instructions<'m>(manual: &'m Manual, turn: &Turn) -> Vec<&'m Instruction> {
    let gold: BTreeSet<&InstructionId> = turn.selected_instructions.iter().collect();
    manual
        .instructions
        .iter()
        .filter(|i| gold.contains(&i.id))
        .collect()
}

fn gold_spans(turn: &Turn, instruction: &InstructionId) -> Vec<IndexedSpan> {
    turn.argument_annotations
        .iter()
        .filter(|a| a.instruction == *instruction)
        .map(|a| (a.index, a.span))
        .collect()
}

fn items(d: &Dialogue, instruction: &InstructionId, spans: &[IndexedSpan]) -> BTreeSet<ArgItem> {
    spans
        .iter()
        .map(|(k, s)| ArgItem {
            instruction: instruction.clone(),
            index: *k,
            value: text::squash(d.span_text(s).unwrap_or("")),
        })
        .collect()
}

/// Fits association and logistic weights on gold matches of `train`.
/// Aborts if any dialogue uses a held-out manual.
pub fn fit_matcher(
    train: &[&Dialogue],
    partition: &Partition,
    manuals: &BTreeMap<ManualId, Manual>,
    values: &ValueIndex,
    config: &EvalConfig,
    seed_value: u64,
) -> Result<LexicalMatcher, EvalError> {
    check_trainable("train", train.iter().copied(), partition)?;
    if train.is_empty() {
        return Err(EvalError::Empty("train"));
    }
    let used: BTreeSet<&ManualId> = train.iter().map(|d| &d.manual).collect();
    for id in &used {
        if !manuals.contains_key(*id) {
            let d = train
                .iter()
                .find(|d| &&d.manual == id)
                .expect("used manual");
            return Err(EvalError::UnknownManual {
                dialogue: d.id.clone(),
                manual: (*id).clone(),
            });
        }
    }
    let terms: BTreeMap<&ManualId, Vec<Vec<String>>> = used
        .iter()
        .map(|id| {
            (
                *id,
                manuals[*id]
                    .instructions
                    .iter()
                    .map(instruction_terms)
                    .collect(),
            )
        })
        .collect();
    let per_manual: BTreeMap<&ManualId, HashMap<&str, f64>> = terms
        .iter()
        .map(|(id, ts)| {
            let mut c: HashMap<&str, f64> = HashMap::new();
            for t in ts.iter().flatten() {
                *c.entry(t.as_str()).or_default() += 1.0;
            }
            (*id, c)
        })
        .collect();

    let mut pairs: Vec<(Vec<String>, Vec<String>)> = Vec::new();
    let mut counts: [WordCounts; SIGNATURES] = Default::default();
    for d in train {
        let manual = &manuals[&d.manual];
        let position: HashMap<&InstructionId, usize> = manual
            .instructions
            .iter()
            .enumerate()
            .map(|(k, i)| (&i.id, k))
            .collect();
        for turn in &d.turns {
            let sig = turn_signature(
                &turn.user_utterance,
                !values.recognize(&turn.user_utterance).is_empty(),
            );
            let WordCounts {
                candidates,
                selected,
            } = &mut counts[sig];
            for (w, c) in &per_manual[&d.manual] {
                *candidates.entry(w.to_string()).or_default() += c;
            }
            let u = text::terms(&turn.user_utterance);
            for id in &turn.selected_instructions {
                let Some(&k) = position.get(id) else { continue };
                let t = &terms[&d.manual][k];
                for w in t {
                    *selected.entry(w.clone()).or_default() += 1.0;
                }
                pairs.push((u.clone(), t.clone()));
            }
        }
    }
    let association = Association::fit(&pairs).with_prior(&counts);
    let prepared: BTreeMap<&ManualId, PreparedManual> = used
        .iter()
        .map(|id| (*id, PreparedManual::new(&manuals[*id], &association)))
        .collect();

    let examples: Vec<PairExample> = train
        .par_iter()
        .flat_map_iter(|d| {
            let manual = &manuals[&d.manual];
            let prep = &prepared[&d.manual];
            let mut out = Vec::new();
            for (t, turn) in d.turns.iter().enumerate() {
                let history = d.history(t);
                let features = TurnFeatures::new(&history, prep, values, &association);
                let gold: BTreeSet<&InstructionId> = turn.selected_instructions.iter().collect();
                let mut negatives: Vec<(f64, [f64; FEATURES])> = Vec::new();
                for (k, ins) in manual.instructions.iter().enumerate() {
                    let x = features.features(prep, k);
                    if gold.contains(&ins.id) {
                        out.push(PairExample {
                            features: x,
                            positive: true,
                        });
                    } else {
                        negatives.push((x[1] + x[2] + x[6], x));
                    }
                }
                negatives.sort_by(|a, b| b.0.total_cmp(&a.0));
                let hard = config.hard_negatives.min(negatives.len());
                let mut rest = negatives.split_off(hard);
                out.extend(negatives.into_iter().map(|(_, x)| PairExample {
                    features: x,
                    positive: false,
                }));
                let mut rng =
                    seed::rng(seed::derive(seed_value, &format!("negatives/{}/{t}", d.id)));
                rest.shuffle(&mut rng);
                out.extend(
                    rest.into_iter()
                        .take(config.random_negatives)
                        .map(|(_, x)| PairExample {
                            features: x,
                            positive: false,
                        }),
                );
            }
            out
        })
        .collect();
    let weights = fit_weights(&examples, &config.fit);
    Ok(LexicalMatcher::with_model(
        values.clone(),
        weights,
        association,
    ))
}

/// Scores every instruction of each turn of `dialogues`.
fn score_turns(
    dialogues: &[Dialogue],
    data: &EvalData,
    predictor: &Predictor<'_>,
) -> Result<Vec<Vec<MatchDecision>>, EvalError> {
    let prepared: BTreeMap<&ManualId, PreparedManual> = match predictor {
        Predictor::Lexical(m) => dialogues
            .iter()
            .map(|d| &d.manual)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .map(|id| (id, PreparedManual::new(&data.manuals[id], &m.association)))
            .collect(),
        _ => BTreeMap::new(),
    };
    let rows: Vec<Result<Vec<Vec<MatchDecision>>, EvalError>> = dialogues
        .par_iter()
        .map(|d| {
            let manual = data.manual(d);
            let prep = prepared.get(&d.manual);
            d.turns
                .iter()
                .enumerate()
                .map(|(t, turn)| {
                    let scores: Vec<f64> = match predictor {
                        Predictor::Oracle => {
                            let gold: BTreeSet<&InstructionId> =
                                turn.selected_instructions.iter().collect();
                            manual
                                .instructions
                                .iter()
                                .map(|i| if gold.contains(&i.id) { 1.0 } else { 0.0 })
                                .collect()
                        }
                        Predictor::Empty => vec![0.0; manual.instructions.len()],
                        Predictor::Lexical(m) => {
                            m.score_prepared(&d.history(t), prep.expect("prepared"))
                        }
                        Predictor::Bridge(b) => {
                            crate::nlu::matcher::Matcher::score(*b, &d.history(t), manual).map_err(
                                |source| EvalError::Predict {
                                    dialogue: d.id.clone(),
                                    turn: t,
                                    source,
                                },
                            )?
                        }
                    };
                    Ok(manual
                        .instructions
                        .iter()
                        .zip(scores)
                        .map(|(i, score)| MatchDecision {
                            instruction: i.id.clone(),
                            score,
                            selected: false,
                        })
                        .collect())
                })
                .collect()
        })
        .collect();
    let mut out = Vec::new();
    for r in rows {
        out.extend(r?);
    }
    Ok(out)
}

fn gold_sets(dialogues: &[Dialogue]) -> Vec<BTreeSet<InstructionId>> {
    dialogues
        .iter()
        .flat_map(|d| {
            d.turns
                .iter()
                .map(|t| t.selected_instructions.iter().cloned().collect())
        })
        .collect()
}

fn apply_threshold(rows: &[Vec<MatchDecision>], threshold: f64) -> Vec<Vec<MatchDecision>> {
    rows.iter()
        .map(|r| {
            r.iter()
                .map(|d| MatchDecision {
                    selected: d.score >= threshold,
                    ..d.clone()
                })
                .collect()
        })
        .collect()
}

enum Predictor<'a> {
    Oracle,
    Empty,
    Lexical(&'a LexicalMatcher),
    Bridge(&'a BridgeClient),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchingRow {
    pub name: String,
    pub threshold: f64,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Macro scores on dev at this threshold.
    pub dev: Option<Prf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggingRow {
    pub name: String,
    pub token_accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Turns with at least one gold instruction that calls an API.
    pub turns: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseRow {
    pub name: String,
    pub bleu: f64,
    pub aer: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnDump {
    pub dialogue: DialogueId,
    pub turn: usize,
    pub domains: BTreeSet<Domain>,
    pub gold_instructions: BTreeSet<InstructionId>,
    pub predicted_instructions: BTreeSet<InstructionId>,
    pub matching: Prf,
    pub gold_arguments: BTreeSet<ArgItem>,
    pub predicted_arguments: BTreeSet<ArgItem>,
    pub no_manual_arguments: BTreeSet<ArgItem>,
    /// `None` when no gold instruction calls an API.
    pub tagging: Option<Prf>,
    pub response: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HookRecord {
    pub command: Vec<String>,
    pub dir: PathBuf,
    /// Exit code; `None` if killed by a signal or not started.
    pub status: Option<i32>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    pub train_dialogues: usize,
    pub dev_dialogues: usize,
    pub test_dialogues: usize,
    pub test_turns: usize,
    pub train_manuals: Vec<ManualId>,
    pub test_manuals: Vec<ManualId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub predictor: PredictorKind,
    pub config: EvalConfig,
    pub config_hash: String,
    pub seed: u64,
    pub data: DataSummary,
    /// Primary operating point first.
    pub matching: Vec<MatchingRow>,
    /// Predictor tagging first, then the no-manual ablation.
    pub tagging: Vec<TaggingRow>,
    pub response: ResponseRow,
    pub hook: Option<HookRecord>,
    pub turns: Vec<TurnDump>,
}

impl EvalReport {
    pub fn primary_matching(&self) -> &MatchingRow {
        &self.matching[0]
    }

    pub fn tagging_row(&self, name: &str) -> Option<&TaggingRow> {
        self.tagging.iter().find(|r| r.name == name)
    }

    /// Tab-separated summary table.
    pub fn to_table(&self) -> String {
        let mut out = String::from("subtask\trow\tthreshold\taccuracy\tprecision\trecall\tf1\n");
        for r in &self.matching {
            out += &format!(
                "matching\t{}\t{:.2}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\n",
                r.name, r.threshold, r.accuracy, r.precision, r.recall, r.f1
            );
        }
        for r in &self.tagging {
            out += &format!(
                "tagging\t{}\t-\t{:.4}\t{:.4}\t{:.4}\t{:.4}\n",
                r.name, r.token_accuracy, r.precision, r.recall, r.f1
            );
        }
        out += &format!(
            "response\t{}\tbleu={:.4}\taer={:.4}\n",
            self.response.name, self.response.bleu, self.response.aer
        );
        out
    }
}

/// Per-turn tagging and response output over the test split.
struct TurnOutput {
    gold: BTreeSet<ArgItem>,
    predicted: BTreeSet<ArgItem>,
    no_manual: BTreeSet<ArgItem>,
    gold_tags: Vec<Vec<Tag>>,
    predicted_tags: Vec<Vec<Tag>>,
    no_manual_tags: Vec<Vec<Tag>>,
    has_api: bool,
    response: String,
    results: Vec<ApiResult>,
    domains: BTreeSet<Domain>,
}

fn tag_and_respond(
    data: &EvalData,
    predictor: &Predictor<'_>,
    config: &EvalConfig,
    seed_value: u64,
) -> Result<Vec<TurnOutput>, EvalError> {
    let with_manual = ManualTagger::new(data.values.clone(), &data.pack);
    let no_manual = NoManualTagger::new(data.values.clone());
    let rows: Vec<Result<Vec<TurnOutput>, EvalError>> = data
        .test
        .par_iter()
        .map(|d| {
            let manual = data.manual(d);
            let mut state = ResponderState::default();
            let mut out = Vec::with_capacity(d.turns.len());
            for (t, turn) in d.turns.iter().enumerate() {
                let err = |source: PredictError| EvalError::Predict {
                    dialogue: d.id.clone(),
                    turn: t,
                    source,
                };
                let history = d.history(t);
                let tokens = history_tokens(&history);
                let gold_ins = gold_instructions(manual, turn);
                let mut o = TurnOutput {
                    gold: BTreeSet::new(),
                    predicted: BTreeSet::new(),
                    no_manual: BTreeSet::new(),
                    gold_tags: vec![],
                    predicted_tags: vec![],
                    no_manual_tags: vec![],
                    has_api: false,
                    response: String::new(),
                    results: turn.api_results.clone(),
                    domains: gold_ins.iter().map(|i| i.domain.clone()).collect(),
                };
                let ablation = no_manual.spans(&history, config.max_args);
                for ins in gold_ins.iter().filter(|i| i.api.is_some()) {
                    o.has_api = true;
                    let gold = gold_spans(turn, &ins.id);
                    let predicted: Vec<IndexedSpan> = match predictor {
                        Predictor::Oracle => gold.clone(),
                        Predictor::Empty => vec![],
                        Predictor::Lexical(_) => decode(
                            &with_manual
                                .tag(&history, ins, config.max_args)
                                .map_err(err)?,
                        ),
                        Predictor::Bridge(b) => {
                            decode(&b.tag(&history, ins, config.max_args).map_err(err)?)
                        }
                    };
                    let seq = |spans: &[IndexedSpan]| {
                        encode(spans, &tokens, config.max_args)
                            .map(|s| s.tags)
                            .map_err(|e| err(e.into()))
                    };
                    o.gold_tags.push(seq(&gold)?);
                    o.predicted_tags.push(seq(&predicted)?);
                    o.no_manual_tags.push(seq(&ablation)?);
                    o.gold.extend(items(d, &ins.id, &gold));
                    o.predicted.extend(items(d, &ins.id, &predicted));
                    o.no_manual.extend(items(d, &ins.id, &ablation));
                }
                o.response = match predictor {
                    Predictor::Oracle => turn.agent_response.clone(),
                    Predictor::Empty => String::new(),
                    Predictor::Lexical(_) => {
                        let steps: Vec<Step<'_>> = gold_ins
                            .iter()
                            .map(|i| Step {
                                instruction: i,
                                result: turn
                                    .api_calls
                                    .iter()
                                    .position(|c| c.instruction.as_ref() == Some(&i.id))
                                    .and_then(|k| turn.api_results.get(k)),
                            })
                            .collect();
                        let s = seed::derive(seed_value, &format!("respond/{}/{t}", d.id));
                        realize(&steps, &mut state, s)
                            .map(|f| f.text)
                            .unwrap_or_default()
                    }
                    Predictor::Bridge(b) => b
                        .generate(&history, &gold_ins, &turn.api_results)
                        .map_err(err)?,
                };
                out.push(o);
            }
            Ok(out)
        })
        .collect();
    let mut out = Vec::new();
    for r in rows {
        out.extend(r?);
    }
    Ok(out)
}

fn tagging_row(
    name: &str,
    outputs: &[TurnOutput],
    pick: impl Fn(&TurnOutput) -> (&BTreeSet<ArgItem>, &Vec<Vec<Tag>>),
) -> Result<(TaggingRow, Vec<Prf>), EvalError> {
    let with_api: Vec<&TurnOutput> = outputs.iter().filter(|o| o.has_api).collect();
    let predicted: Vec<BTreeSet<ArgItem>> = with_api.iter().map(|o| pick(o).0.clone()).collect();
    let gold: Vec<BTreeSet<ArgItem>> = with_api.iter().map(|o| o.gold.clone()).collect();
    let prf = set_prf(&predicted, &gold)?;
    let p_tags: Vec<Vec<Tag>> = with_api
        .iter()
        .flat_map(|o| pick(o).1.iter().cloned())
        .collect();
    let g_tags: Vec<Vec<Tag>> = with_api
        .iter()
        .flat_map(|o| o.gold_tags.iter().cloned())
        .collect();
    let row = TaggingRow {
        name: name.into(),
        token_accuracy: token_tag_accuracy(&p_tags, &g_tags)?,
        precision: prf.macro_avg.precision,
        recall: prf.macro_avg.recall,
        f1: prf.macro_avg.f1,
        turns: with_api.len(),
    };
    Ok((row, prf.per_turn))
}

/// Row, per-turn scores and per-turn predicted sets.
type ScoredRow = (MatchingRow, Vec<Prf>, Vec<BTreeSet<InstructionId>>);

fn matching_row(
    name: &str,
    threshold: f64,
    test: &[Vec<MatchDecision>],
    gold: &[BTreeSet<InstructionId>],
    dev: Option<Prf>,
) -> Result<ScoredRow, EvalError> {
    let decided = apply_threshold(test, threshold);
    let predicted: Vec<BTreeSet<InstructionId>> = decided
        .iter()
        .map(|r| crate::nlu::matcher::selected(r))
        .collect();
    let prf = set_prf(&predicted, gold)?;
    let row = MatchingRow {
        name: name.into(),
        threshold,
        accuracy: instr_sentence_accuracy(&decided, gold)?,
        precision: prf.macro_avg.precision,
        recall: prf.macro_avg.recall,
        f1: prf.macro_avg.f1,
        dev,
    };
    Ok((row, prf.per_turn, predicted))
}

fn objective_name(o: Objective) -> &'static str {
    match o {
        Objective::F1 => "f1",
        Objective::Recall => "rec",
    }
}

/// Trained state of one run.
struct Fitted {
    matcher: Option<LexicalMatcher>,
    bridge: Option<BridgeClient>,
    hook: Option<HookRecord>,
}

fn prepare(
    data: &EvalData,
    train: &[&Dialogue],
    dev: &[&Dialogue],
    config: &EvalConfig,
    seed_value: u64,
    point: &str,
) -> Result<Fitted, EvalError> {
    check_trainable("train", train.iter().copied(), &data.partition)?;
    check_trainable("dev", dev.iter().copied(), &data.partition)?;
    match config.predictor {
        PredictorKind::Oracle | PredictorKind::Empty => Ok(Fitted {
            matcher: None,
            bridge: None,
            hook: None,
        }),
        PredictorKind::Lexical => Ok(Fitted {
            matcher: Some(fit_matcher(
                train,
                &data.partition,
                &data.manuals,
                &data.values,
                config,
                seed_value,
            )?),
            bridge: None,
            hook: None,
        }),
        PredictorKind::Bridge => {
            if config.bridge.command.is_empty() {
                return Err(EvalError::NoBridge);
            }
            let hook = match (&config.work_dir, config.bridge.train_hook.is_empty()) {
                (Some(root), false) => Some(run_hook(
                    &config.bridge.train_hook,
                    &root.join(point),
                    train,
                    dev,
                )?),
                _ => None,
            };
            let timeout = Duration::from_millis(if config.bridge.timeout_ms == 0 {
                30_000
            } else {
                config.bridge.timeout_ms
            });
            let client =
                BridgeClient::spawn(&config.bridge.command, timeout).map_err(|source| {
                    EvalError::Predict {
                        dialogue: DialogueId::new("-"),
                        turn: 0,
                        source,
                    }
                })?;
            Ok(Fitted {
                matcher: None,
                bridge: Some(client),
                hook,
            })
        }
    }
}

/// Writes the training data into `dir` and runs `command` there.
pub fn run_hook(
    command: &[String],
    dir: &Path,
    train: &[&Dialogue],
    dev: &[&Dialogue],
) -> Result<HookRecord, EvalError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir.display().to_string()))?;
    let owned = |ds: &[&Dialogue]| ds.iter().map(|d| (*d).clone()).collect::<Vec<_>>();
    for (name, ds) in [("train.jsonl", train), ("dev.jsonl", dev)] {
        let path = dir.join(name);
        std::fs::write(&path, corpus_to_string(&owned(ds)))
            .map_err(io_err(path.display().to_string()))?;
    }
    let (program, args) = command.split_first().ok_or(EvalError::NoBridge)?;
    let status = std::process::Command::new(program)
        .args(args)
        .current_dir(dir)
        .status();
    Ok(match status {
        Ok(s) => HookRecord {
            command: command.to_vec(),
            dir: dir.to_path_buf(),
            status: s.code(),
            error: None,
        },
        Err(e) => HookRecord {
            command: command.to_vec(),
            dir: dir.to_path_buf(),
            status: None,
            error: Some(e.to_string()),
        },
    })
}

fn evaluate(
    data: &EvalData,
    train: &[&Dialogue],
    dev: &[&Dialogue],
    config: &EvalConfig,
    seed_value: u64,
    point: &str,
) -> Result<EvalReport, EvalError> {
    if data.test.is_empty() {
        return Err(EvalError::Empty("test"));
    }
    let fitted = prepare(data, train, dev, config, seed_value, point)?;
    let predictor = match (config.predictor, &fitted.matcher, &fitted.bridge) {
        (PredictorKind::Oracle, ..) => Predictor::Oracle,
        (PredictorKind::Empty, ..) => Predictor::Empty,
        (PredictorKind::Lexical, Some(m), _) => Predictor::Lexical(m),
        (PredictorKind::Bridge, _, Some(b)) => Predictor::Bridge(b),
        _ => unreachable!("prepare fits the configured predictor"),
    };
    let test_rows = score_turns(&data.test, data, &predictor)?;
    let test_gold = gold_sets(&data.test);

    let tunable = matches!(
        config.predictor,
        PredictorKind::Lexical | PredictorKind::Bridge
    );
    let mut matching = Vec::new();
    let mut primary: Option<(Vec<Prf>, Vec<BTreeSet<InstructionId>>)> = None;
    if tunable {
        if dev.is_empty() {
            return Err(EvalError::Empty("dev"));
        }
        let dev_owned: Vec<Dialogue> = dev.iter().map(|d| (*d).clone()).collect();
        let dev_rows = score_turns(&dev_owned, data, &predictor)?;
        let dev_gold = gold_sets(&dev_owned);
        let other = match config.objective {
            Objective::F1 => Objective::Recall,
            Objective::Recall => Objective::F1,
        };
        for objective in [config.objective, other] {
            let threshold = pick_operating_point(&dev_rows, &dev_gold, objective)?;
            let dev_prf = evaluate_threshold(&dev_rows, &dev_gold, threshold);
            let name = format!(
                "{}-{}",
                predictor_name(config.predictor),
                objective_name(objective)
            );
            let (row, per_turn, predicted) =
                matching_row(&name, threshold, &test_rows, &test_gold, Some(dev_prf))?;
            if primary.is_none() {
                primary = Some((per_turn, predicted));
            }
            matching.push(row);
        }
    } else {
        let (row, per_turn, predicted) = matching_row(
            predictor_name(config.predictor),
            0.5,
            &test_rows,
            &test_gold,
            None,
        )?;
        primary = Some((per_turn, predicted));
        matching.push(row);
    }
    let (match_per_turn, predicted_sets) = primary.expect("one matching row");

    let outputs = tag_and_respond(data, &predictor, config, seed_value)?;
    let (main_row, tag_per_turn) = tagging_row(predictor_name(config.predictor), &outputs, |o| {
        (&o.predicted, &o.predicted_tags)
    })?;
    let (ablation_row, _) =
        tagging_row("no-manual", &outputs, |o| (&o.no_manual, &o.no_manual_tags))?;
    let responses: Vec<&str> = outputs.iter().map(|o| o.response.as_str()).collect();
    let references: Vec<Vec<&str>> = data
        .test
        .iter()
        .flat_map(|d| d.turns.iter().map(|t| vec![t.agent_response.as_str()]))
        .collect();
    let results: Vec<Vec<ApiResult>> = outputs.iter().map(|o| o.results.clone()).collect();
    let response = ResponseRow {
        name: predictor_name(config.predictor).into(),
        bleu: bleu(&responses, &references)?,
        aer: aer(&responses, &results)?.rate,
    };

    let mut turns = Vec::new();
    if config.dump_turns {
        let mut tag_iter = tag_per_turn.into_iter();
        let mut k = 0;
        for d in &data.test {
            for t in 0..d.turns.len() {
                let o = &outputs[k];
                turns.push(TurnDump {
                    dialogue: d.id.clone(),
                    turn: t,
                    domains: o.domains.clone(),
                    gold_instructions: test_gold[k].clone(),
                    predicted_instructions: predicted_sets[k].clone(),
                    matching: match_per_turn[k],
                    gold_arguments: o.gold.clone(),
                    predicted_arguments: o.predicted.clone(),
                    no_manual_arguments: o.no_manual.clone(),
                    tagging: if o.has_api { tag_iter.next() } else { None },
                    response: o.response.clone(),
                });
                k += 1;
            }
        }
    }
    let manual_set = |ds: &mut dyn Iterator<Item = &Dialogue>| -> Vec<ManualId> {
        ds.map(|d| d.manual.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    };
    Ok(EvalReport {
        predictor: config.predictor,
        config: config.clone(),
        config_hash: config_hash(config),
        seed: seed_value,
        data: DataSummary {
            train_dialogues: train.len(),
            dev_dialogues: dev.len(),
            test_dialogues: data.test.len(),
            test_turns: test_gold.len(),
            train_manuals: manual_set(&mut train.iter().copied()),
            test_manuals: manual_set(&mut data.test.iter()),
        },
        matching,
        tagging: vec![main_row, ablation_row],
        response,
        hook: fitted.hook,
        turns,
    })
}

fn predictor_name(kind: PredictorKind) -> &'static str {
    match kind {
        PredictorKind::Oracle => "oracle",
        PredictorKind::Empty => "empty",
        PredictorKind::Lexical => "lexical",
        PredictorKind::Bridge => "bridge",
    }
}

/// Fits on train, picks thresholds on dev and scores the held-out test split.
pub fn run_subtask_eval(
    data: &EvalData,
    config: &EvalConfig,
    seed_value: u64,
) -> Result<EvalReport, EvalError> {
    data.check()?;
    let train: Vec<&Dialogue> = data.train.iter().collect();
    let dev: Vec<&Dialogue> = data.dev.iter().collect();
    evaluate(data, &train, &dev, config, seed_value, "full")
}

/// One point of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// Training fraction or manual count.
    pub x: f64,
    pub train_dialogues: usize,
    pub train_manuals: Vec<ManualId>,
    pub threshold: f64,
    pub matching: MatchingRow,
    pub tagging: TaggingRow,
    pub hook: Option<HookRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub kind: String,
    pub config_hash: String,
    pub seed: u64,
    pub test_manuals: Vec<ManualId>,
    pub points: Vec<CurvePoint>,
}

impl Curve {
    /// Tab-separated point table.
    pub fn to_table(&self) -> String {
        let mut out = String::from(
            "x\ttrain_dialogues\tthreshold\tmatching_f1\tmatching_accuracy\ttagging_f1\n",
        );
        for p in &self.points {
            out += &format!(
                "{}\t{}\t{:.2}\t{:.4}\t{:.4}\t{:.4}\n",
                p.x,
                p.train_dialogues,
                p.threshold,
                p.matching.f1,
                p.matching.accuracy,
                p.tagging.f1
            );
        }
        out
    }
}

fn point_of(x: f64, report: EvalReport) -> CurvePoint {
    let matching = report.matching[0].clone();
    CurvePoint {
        x,
        train_dialogues: report.data.train_dialogues,
        train_manuals: report.data.train_manuals,
        threshold: matching.threshold,
        matching,
        tagging: report.tagging[0].clone(),
        hook: report.hook,
    }
}

fn lean(config: &EvalConfig) -> EvalConfig {
    EvalConfig {
        dump_turns: false,
        ..config.clone()
    }
}

/// Trains on growing prefixes of a seeded shuffle of the train split.
pub fn sweep_data_size(
    data: &EvalData,
    fractions: &[f64],
    config: &EvalConfig,
    seed_value: u64,
) -> Result<Curve, EvalError> {
    data.check()?;
    if let Some(f) = fractions.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
        return Err(EvalError::Fraction(*f));
    }
    let mut order: Vec<&Dialogue> = data.train.iter().collect();
    order.shuffle(&mut seed::rng(seed::derive(seed_value, "sweep-data")));
    let dev: Vec<&Dialogue> = data.dev.iter().collect();
    let config = lean(config);
    let points: Vec<Result<CurvePoint, EvalError>> = fractions
        .par_iter()
        .enumerate()
        .map(|(i, &f)| {
            let n = if f == 1.0 {
                order.len()
            } else {
                ((f * order.len() as f64).ceil() as usize).max(1)
            };
            let train: Vec<&Dialogue> = if n == order.len() {
                data.train.iter().collect()
            } else {
                order[..n].to_vec()
            };
            let report = evaluate(
                data,
                &train,
                &dev,
                &config,
                seed_value,
                &format!("data-{i}"),
            )?;
            Ok(point_of(f, report))
        })
        .collect();
    Ok(Curve {
        kind: "data-size".into(),
        config_hash: config_hash(&config),
        seed: seed_value,
        test_manuals: data.partition.test.clone(),
        points: points.into_iter().collect::<Result<_, _>>()?,
    })
}

/// Trains only on dialogues of the first `count` train/dev manuals; dev is
/// restricted the same way and the held-out test split is unchanged.
pub fn sweep_manual_count(
    data: &EvalData,
    counts: &[usize],
    config: &EvalConfig,
    seed_value: u64,
) -> Result<Curve, EvalError> {
    data.check()?;
    let available = data.partition.train_dev.len();
    if let Some(&c) = counts.iter().find(|c| **c == 0 || **c > available) {
        return Err(EvalError::ManualCount {
            count: c,
            available,
        });
    }
    let config = lean(config);
    let points: Vec<Result<CurvePoint, EvalError>> = counts
        .par_iter()
        .enumerate()
        .map(|(i, &c)| {
            let keep: HashSet<&ManualId> = data.partition.train_dev[..c].iter().collect();
            let train: Vec<&Dialogue> = data
                .train
                .iter()
                .filter(|d| keep.contains(&d.manual))
                .collect();
            let dev: Vec<&Dialogue> = data
                .dev
                .iter()
                .filter(|d| keep.contains(&d.manual))
                .collect();
            let dev = if dev.is_empty() {
                data.dev.iter().collect()
            } else {
                dev
            };
            let report = evaluate(
                data,
                &train,
                &dev,
                &config,
                seed_value,
                &format!("manuals-{i}"),
            )?;
            Ok(point_of(c as f64, report))
        })
        .collect();
    Ok(Curve {
        kind: "manual-count".into(),
        config_hash: config_hash(&config),
        seed: seed_value,
        test_manuals: data.partition.test.clone(),
        points: points.into_iter().collect::<Result<_, _>>()?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainScores {
    pub turns: usize,
    pub matching_f1: f64,
    pub tagging_turns: usize,
    pub tagging_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LodoRow {
    /// `None` for the full-data row.
    pub excluded: Option<Domain>,
    pub train_dialogues: usize,
    pub dev_dialogues: usize,
    pub per_domain: BTreeMap<Domain, DomainScores>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LodoTable {
    pub config_hash: String,
    pub seed: u64,
    pub rows: Vec<LodoRow>,
}

impl LodoTable {
    /// Matching F1 matrix: excluded domain by evaluated domain.
    pub fn to_table(&self) -> String {
        let domains: BTreeSet<&Domain> =
            self.rows.iter().flat_map(|r| r.per_domain.keys()).collect();
        let mut out = String::from("excluded");
        for d in &domains {
            out += &format!("\t{d}");
        }
        out.push('\n');
        for r in &self.rows {
            out += r.excluded.as_ref().map_or("full", |d| d.as_str());
            for d in &domains {
                match r.per_domain.get(*d) {
                    Some(s) => out += &format!("\t{:.4}", s.matching_f1),
                    None => out += "\t-",
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Per-domain scores from turn dumps. A turn counts toward every domain of
/// its gold instructions.
pub fn per_domain(turns: &[TurnDump]) -> BTreeMap<Domain, DomainScores> {
    let mut acc: BTreeMap<Domain, (usize, f64, usize, f64)> = BTreeMap::new();
    for t in turns {
        for d in &t.domains {
            let e = acc.entry(d.clone()).or_default();
            e.0 += 1;
            e.1 += t.matching.f1;
            if let Some(p) = t.tagging {
                e.2 += 1;
                e.3 += p.f1;
            }
        }
    }
    acc.into_iter()
        .map(|(d, (n, m, tn, tf))| {
            let mean = |s: f64, n: usize| if n == 0 { 0.0 } else { s / n as f64 };
            (
                d,
                DomainScores {
                    turns: n,
                    matching_f1: mean(m, n),
                    tagging_turns: tn,
                    tagging_f1: mean(tf, tn),
                },
            )
        })
        .collect()
}

/// One row per entry of `excluded`: train and dev drop every dialogue
/// whose goal involves the excluded domain.
pub fn leave_one_domain_out(
    data: &EvalData,
    excluded: &[Option<Domain>],
    config: &EvalConfig,
    seed_value: u64,
) -> Result<LodoTable, EvalError> {
    data.check()?;
    let config = EvalConfig {
        dump_turns: true,
        ..config.clone()
    };
    let rows: Vec<Result<LodoRow, EvalError>> = excluded
        .par_iter()
        .enumerate()
        .map(|(i, ex)| {
            let keep = |d: &&Dialogue| ex.as_ref().is_none_or(|x| !d.goal.domains.contains(x));
            let train: Vec<&Dialogue> = data.train.iter().filter(keep).collect();
            let dev: Vec<&Dialogue> = data.dev.iter().filter(keep).collect();
            let report = evaluate(
                data,
                &train,
                &dev,
                &config,
                seed_value,
                &format!("lodo-{i}"),
            )?;
            Ok(LodoRow {
                excluded: ex.clone(),
                train_dialogues: train.len(),
                dev_dialogues: dev.len(),
                per_domain: per_domain(&report.turns),
            })
        })
        .collect();
    Ok(LodoTable {
        config_hash: config_hash(&config),
        seed: seed_value,
        rows: rows.into_iter().collect::<Result<_, _>>()?,
    })
}
