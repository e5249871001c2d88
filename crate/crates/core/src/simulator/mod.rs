//! Rule-based self-play: a simulated user with a goal talks to an oracle or
//! model-driven agent, producing fully annotated dialogues and corpora.

pub mod agent;
pub mod user;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::catalog::lang::LanguagePack;
use crate::engine::{CallRecord, EngineConfig, EngineError};
use crate::model::codec::{corpus_to_string, to_lines, SCHEMA_VERSION};
use crate::model::{
    Context, Database, Dialogue, DialogueId, Domain, FamilyId, GoalId, GoalSet, Manual, ManualId,
    Speaker, Turn, UserGoal, Validate, Violation,
};
use crate::nlu::PredictError;
use crate::responder::RealizeError;
use crate::seed;

pub use agent::{AgentContext, AgentPolicy, AgentState, AgentTurn, SlotRegistry, MAX_SELECTED};
pub use user::{InformStyle, PlannedTurn, Said, UserAct, UserLedger, UserSim, UserTurn};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("manual {manual} has no instruction of family {family}")]
    MissingFamily { manual: ManualId, family: FamilyId },
    #[error("turn {turn}: api call failed: {source}")]
    Engine { turn: usize, source: EngineError },
    #[error("turn {turn}: {source}")]
    Realize { turn: usize, source: RealizeError },
    #[error("turn {turn}: {source}")]
    Predict { turn: usize, source: PredictError },
    #[error("turn {turn}: no {domain} entity on offer")]
    NoFocus { turn: usize, domain: Domain },
    #[error("turn {turn}: no active {domain} booking")]
    NoBooking { turn: usize, domain: Domain },
    #[error("{attribute} is not searchable in {domain}")]
    NotSearchable {
        domain: Domain,
        attribute: crate::model::AttributeName,
    },
    #[error("dialogue {dialogue} is invalid: {}", .violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid {
        dialogue: DialogueId,
        violations: Vec<Violation>,
    },
    #[error("{needed} goals needed, {available} given")]
    NotEnoughGoals { needed: usize, available: usize },
    #[error("goal {0} repeats an earlier goal")]
    DuplicateGoal(GoalId),
    #[error("manual partition: {0}")]
    Partition(String),
    #[error("unknown manual {0}")]
    UnknownManual(ManualId),
    #[error("{context}: {message}")]
    Io { context: String, message: String },
}

/// Self-play parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub max_turns: usize,
    pub max_args: usize,
    pub greeting_probability: f64,
    /// Chance that two search constraints are given in separate turns.
    pub split_inform_probability: f64,
    /// Chance of first asking for something that does not exist.
    pub detour_probability: f64,
    /// Chance of booking without the booking value, prompting a question.
    pub book_ask_probability: f64,
    /// Chance that requests ride along with the booking turn.
    pub combine_requests_probability: f64,
    pub edit_probability: f64,
    pub cancel_probability: f64,
    pub faq_probability: f64,
    pub engine: EngineConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            max_turns: 20,
            max_args: 2,
            greeting_probability: 0.3,
            split_inform_probability: 0.4,
            detour_probability: 0.08,
            book_ask_probability: 0.25,
            combine_requests_probability: 0.5,
            edit_probability: 0.15,
            cancel_probability: 0.05,
            faq_probability: 0.1,
            engine: EngineConfig::default(),
        }
    }
}

/// A self-played dialogue with its call log and final user ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedDialogue {
    pub dialogue: Dialogue,
    pub calls: Vec<CallRecord>,
    pub ledger: UserLedger,
}

/// Plays one dialogue. The dialogue is completed when the user's ledger is
/// complete and the user said goodbye within `max_turns`.
pub fn simulate(
    goal: &UserGoal,
    manual: &Manual,
    db: &Database,
    pack: &LanguagePack,
    config: &SimConfig,
    seed_value: u64,
    policy: AgentPolicy<'_>,
) -> Result<SimulatedDialogue, SimError> {
    let mut rng = seed::rng(seed::derive(seed_value, "user"));
    let mut user = UserSim::new(goal, db, pack, config, &mut rng);
    let mut agent = AgentState::new(seed::derive(seed_value, "agent"));
    let ctx = AgentContext {
        db,
        manual,
        pack,
        engine: &config.engine,
    };
    let mut turns: Vec<Turn> = Vec::new();
    let mut last: Option<(String, Vec<(Domain, crate::model::ApiResult)>)> = None;
    for t in 0..config.max_turns {
        let observed = last.as_ref().map(|(r, res)| (r.as_str(), res.as_slice()));
        let Some(user_turn) = user.user_step(observed, &mut rng) else {
            break;
        };
        turns.push(Turn {
            index: t,
            user_utterance: user_turn.utterance.text.clone(),
            ..Default::default()
        });
        agent.slots.add(t, Speaker::User, &user_turn.utterance);
        let out = match policy {
            AgentPolicy::Oracle => agent.oracle_step(&ctx, t, &user_turn, &mut rng)?,
            AgentPolicy::Model {
                matcher,
                tagger,
                threshold,
                max_args,
            } => agent.model_step(
                &ctx,
                t,
                &turns,
                &user_turn,
                (matcher, tagger, threshold, max_args),
                &mut rng,
            )?,
        };
        agent.slots.add(t, Speaker::Agent, &out.response);
        let turn = turns.last_mut().expect("turn pushed");
        turn.agent_response = out.response.text.clone();
        turn.flagged_for_review = out.selected.is_empty();
        turn.selected_instructions = out.selected;
        turn.api_calls = out.calls;
        turn.api_results = out.results.clone();
        turn.argument_annotations = out.annotations;
        last = Some((
            out.response.text,
            out.domains.into_iter().zip(out.results).collect(),
        ));
    }
    if let Some((r, res)) = &last {
        user.ledger.observe(r, res);
    }
    let completed = user.is_finished() && user.ledger.is_complete();
    Ok(SimulatedDialogue {
        dialogue: Dialogue {
            id: DialogueId::new(format!("dlg-{}", goal.id)),
            goal: goal.clone(),
            manual: manual.id.clone(),
            turns,
            completed,
        },
        calls: agent.log,
        ledger: user.ledger,
    })
}

/// Corpus split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSizes {
    pub train: usize,
    pub dev: usize,
    pub test: usize,
}

impl Default for SplitSizes {
    fn default() -> Self {
        SplitSizes {
            train: 900,
            dev: 100,
            test: 100,
        }
    }
}

impl SplitSizes {
    pub fn total(&self) -> usize {
        self.train + self.dev + self.test
    }
}

/// Manuals used for train/dev and manuals held out for test.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub train_dev: Vec<ManualId>,
    pub test: Vec<ManualId>,
}

impl Default for Partition {
    fn default() -> Self {
        let ids = |r: std::ops::Range<usize>| r.map(crate::manual_kit::manual_id).collect();
        Partition {
            train_dev: ids(0..10),
            test: ids(10..14),
        }
    }
}

impl Partition {
    pub fn check(&self) -> Result<(), SimError> {
        if self.train_dev.is_empty() || self.test.is_empty() {
            return Err(SimError::Partition(
                "both manual groups must be nonempty".into(),
            ));
        }
        let a: BTreeSet<_> = self.train_dev.iter().collect();
        if let Some(m) = self.test.iter().find(|m| a.contains(m)) {
            return Err(SimError::Partition(format!("manual {m} is in both groups")));
        }
        Ok(())
    }

    pub fn is_held_out(&self, manual: &ManualId) -> bool {
        self.test.contains(manual)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusConfig {
    pub splits: SplitSizes,
    pub partition: Partition,
    pub sim: SimConfig,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub dialogue: DialogueId,
    pub goal: GoalId,
    pub manual: ManualId,
    pub split: Split,
    pub seed: u64,
    pub completed: bool,
}

/// Provenance of a generated corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub master_seed: u64,
    pub mode: String,
    pub database_digest: String,
    pub config: CorpusConfig,
    pub config_hash: String,
    pub entries: Vec<ManifestEntry>,
    /// Dialogues that hit the turn cap; excluded from the splits.
    pub failed: Vec<DialogueId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub train: Vec<SimulatedDialogue>,
    pub dev: Vec<SimulatedDialogue>,
    pub test: Vec<SimulatedDialogue>,
    pub manifest: Manifest,
}

impl Corpus {
    pub fn split(&self, split: Split) -> &[SimulatedDialogue] {
        match split {
            Split::Train => &self.train,
            Split::Dev => &self.dev,
            Split::Test => &self.test,
        }
    }

    pub fn dialogues(&self, split: Split) -> Vec<Dialogue> {
        self.split(split)
            .iter()
            .map(|s| s.dialogue.clone())
            .collect()
    }

    pub fn all(&self) -> impl Iterator<Item = &SimulatedDialogue> {
        self.train.iter().chain(&self.dev).chain(&self.test)
    }

    /// Writes `{train,dev,test}.jsonl`, `calls.jsonl` and `manifest.json`.
    pub fn write(&self, dir: &Path) -> Result<(), SimError> {
        let io = |context: String| {
            move |e: std::io::Error| SimError::Io {
                context,
                message: e.to_string(),
            }
        };
        std::fs::create_dir_all(dir).map_err(io(dir.display().to_string()))?;
        for split in Split::ALL {
            let path = dir.join(format!("{}.jsonl", split.name()));
            std::fs::write(&path, corpus_to_string(&self.dialogues(split)))
                .map_err(io(path.display().to_string()))?;
        }
        let logs: Vec<CallLog> = self
            .all()
            .map(|s| CallLog {
                dialogue: s.dialogue.id.clone(),
                calls: s.calls.clone(),
            })
            .collect();
        let path = dir.join("calls.jsonl");
        std::fs::write(&path, to_lines("calls", &logs)).map_err(io(path.display().to_string()))?;
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        std::fs::write(&path, text + "\n").map_err(io(path.display().to_string()))?;
        Ok(())
    }
}

/// Call log of one dialogue as stored in `calls.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallLog {
    pub dialogue: DialogueId,
    pub calls: Vec<CallRecord>,
}

/// SHA-256 of a value's canonical JSON.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    hex::encode(Sha256::digest(
        serde_json::to_vec(value).expect("config serializes"),
    ))
}

/// Generates a corpus with the oracle agent. Goals fill train, dev and test
/// in order; train and dev dialogues cycle through the train/dev manuals,
/// test dialogues through the held-out ones.
pub fn generate_corpus(
    db: &Database,
    manuals: &[Manual],
    goals: &GoalSet,
    pack: &LanguagePack,
    config: &CorpusConfig,
    master_seed: u64,
) -> Result<Corpus, SimError> {
    generate_corpus_with(
        db,
        manuals,
        goals,
        pack,
        config,
        master_seed,
        AgentPolicy::Oracle,
    )
}

pub fn generate_corpus_with(
    db: &Database,
    manuals: &[Manual],
    goals: &GoalSet,
    pack: &LanguagePack,
    config: &CorpusConfig,
    master_seed: u64,
    policy: AgentPolicy<'_>,
) -> Result<Corpus, SimError> {
    config.partition.check()?;
    let needed = config.splits.total();
    if goals.goals.len() < needed {
        return Err(SimError::NotEnoughGoals {
            needed,
            available: goals.goals.len(),
        });
    }
    let mut seen = BTreeSet::new();
    for g in goals.goals.iter().take(needed) {
        if !seen.insert(g.content_key()) {
            return Err(SimError::DuplicateGoal(g.id.clone()));
        }
    }
    let by_id: BTreeMap<&ManualId, &Manual> = manuals.iter().map(|m| (&m.id, m)).collect();
    let resolve = |ids: &[ManualId]| -> Result<Vec<&Manual>, SimError> {
        ids.iter()
            .map(|id| {
                by_id
                    .get(id)
                    .copied()
                    .ok_or_else(|| SimError::UnknownManual(id.clone()))
            })
            .collect()
    };
    let train_dev = resolve(&config.partition.train_dev)?;
    let test = resolve(&config.partition.test)?;

    let mut jobs: Vec<(Split, &UserGoal, &Manual)> = Vec::with_capacity(needed);
    let sizes = [
        (Split::Train, config.splits.train),
        (Split::Dev, config.splits.dev),
        (Split::Test, config.splits.test),
    ];
    let mut goal_iter = goals.goals.iter();
    for (split, n) in sizes {
        let group = if split == Split::Test {
            &test
        } else {
            &train_dev
        };
        for i in 0..n {
            let goal = goal_iter.next().expect("goal count checked");
            jobs.push((split, goal, group[i % group.len()]));
        }
    }
    let mode = match policy {
        AgentPolicy::Oracle => "oracle",
        AgentPolicy::Model { .. } => "model",
    };
    let results: Vec<Result<(Split, u64, SimulatedDialogue), SimError>> = jobs
        .par_iter()
        .map(|(split, goal, manual)| {
            let s = seed::derive(master_seed, &format!("dialogue/{}", goal.id));
            let sim = simulate(goal, manual, db, pack, &config.sim, s, policy)?;
            if sim.dialogue.completed {
                let violations = sim.dialogue.validate(&Context::with_db(db).manual(manual));
                if !violations.is_empty() {
                    return Err(SimError::Invalid {
                        dialogue: sim.dialogue.id.clone(),
                        violations,
                    });
                }
            }
            Ok((*split, s, sim))
        })
        .collect();
    let mut corpus = Corpus {
        train: vec![],
        dev: vec![],
        test: vec![],
        manifest: Manifest {
            schema_version: SCHEMA_VERSION,
            master_seed,
            mode: mode.into(),
            database_digest: db.content_digest(),
            config: config.clone(),
            config_hash: config_hash(config),
            entries: vec![],
            failed: vec![],
        },
    };
    for r in results {
        let (split, s, sim) = r?;
        let d = &sim.dialogue;
        corpus.manifest.entries.push(ManifestEntry {
            dialogue: d.id.clone(),
            goal: d.goal.id.clone(),
            manual: d.manual.clone(),
            split,
            seed: s,
            completed: d.completed,
        });
        if !d.completed {
            corpus.manifest.failed.push(d.id.clone());
            continue;
        }
        match split {
            Split::Train => corpus.train.push(sim),
            Split::Dev => corpus.dev.push(sim),
            Split::Test => corpus.test.push(sim),
        }
    }
    Ok(corpus)
}

/// Corpus-level statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub dialogues: usize,
    pub turns: usize,
    pub mean_turns: f64,
    pub mean_instructions_per_turn: f64,
    pub mean_arguments_per_turn: f64,
    pub no_instruction_share: f64,
    pub mean_domains: f64,
}

pub fn corpus_stats<'a>(dialogues: impl IntoIterator<Item = &'a Dialogue>) -> CorpusStats {
    let (mut n, mut turns, mut instr, mut args, mut empty, mut domains) =
        (0usize, 0usize, 0usize, 0usize, 0usize, 0usize);
    for d in dialogues {
        n += 1;
        domains += d.goal.domains.len();
        for t in &d.turns {
            turns += 1;
            instr += t.selected_instructions.len();
            args += t.api_calls.iter().map(|c| c.args.len()).sum::<usize>();
            empty += usize::from(t.selected_instructions.is_empty());
        }
    }
    let per = |x: usize, d: usize| if d == 0 { 0.0 } else { x as f64 / d as f64 };
    CorpusStats {
        dialogues: n,
        turns,
        mean_turns: per(turns, n),
        mean_instructions_per_turn: per(instr, turns),
        mean_arguments_per_turn: per(args, turns),
        no_instruction_share: per(empty, turns),
        mean_domains: per(domains, n),
    }
}
