//! Offline operations behind the command-line tool. Each request is
//! self-contained: the database is regenerated from the world spec.

use mgdial_core::dbgen::DbConfig;
use mgdial_core::engine::CallRecord;
use mgdial_core::eval::EvalConfig;
use mgdial_core::goals::GoalConfig;
use mgdial_core::manual_kit::FamilyGate;
use mgdial_core::model::{Database, Dialogue, Domain, GoalSet, Manual};
use mgdial_core::nlu::annotate::AnnotationReport;
use mgdial_core::simulator::{Corpus, CorpusConfig, CorpusStats, Partition};
use serde::{Deserialize, Serialize};

/// Master seed and database settings. Sub-tasks draw from labelled child
/// seeds of `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldSpec {
    pub seed: u64,
    #[serde(default)]
    pub db: DbConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenDb {
    pub world: WorldSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedDb {
    pub database: Database,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenGoals {
    pub world: WorldSpec,
    pub count: usize,
    #[serde(default)]
    pub config: GoalConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedGoals {
    pub goals: GoalSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenCorpus {
    pub world: WorldSpec,
    /// Goals to simulate; sampled with `goal_config` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goals: Option<GoalSet>,
    #[serde(default)]
    pub goal_config: GoalConfig,
    #[serde(default)]
    pub config: CorpusConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedCorpus {
    pub corpus: Corpus,
    pub stats: CorpusStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckParaphrases {
    /// Manuals to check; the bundled set when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manuals: Option<Vec<Manual>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParaphraseCheck {
    pub passed: bool,
    pub families: Vec<FamilyGate>,
}

/// Corpus splits uploaded for evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusData {
    pub train: Vec<Dialogue>,
    pub dev: Vec<Dialogue>,
    pub test: Vec<Dialogue>,
    #[serde(default)]
    pub partition: Partition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluate {
    pub world: WorldSpec,
    pub data: CorpusData,
    #[serde(default)]
    pub config: EvalConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepData {
    pub world: WorldSpec,
    pub data: CorpusData,
    #[serde(default)]
    pub config: EvalConfig,
    pub fractions: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepManuals {
    pub world: WorldSpec,
    pub data: CorpusData,
    #[serde(default)]
    pub config: EvalConfig,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaveOneDomainOut {
    pub world: WorldSpec,
    pub data: CorpusData,
    #[serde(default)]
    pub config: EvalConfig,
    /// Domains to hold out; `null` is the run without exclusion.
    pub excluded: Vec<Option<Domain>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotate {
    pub dialogue: Dialogue,
    pub calls: Vec<CallRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotated {
    /// The dialogue with argument annotations replaced by the annotator's.
    pub dialogue: Dialogue,
    pub report: AnnotationReport,
}
