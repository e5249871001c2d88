//! The fixed data a service instance works on.

use std::collections::BTreeMap;

use mgdial_core::catalog::lang::LanguagePack;
use mgdial_core::dbgen::{self, DbConfig};
use mgdial_core::engine::EngineConfig;
use mgdial_core::goals::{sample_goals, GoalConfig, GoalError};
use mgdial_core::manual_kit::{build_index, bundled_manuals, SearchIndex};
use mgdial_core::model::{Database, GoalId, GoalSet, Manual, ManualId, UserGoal};
use mgdial_core::nlu::values::ValueIndex;
use mgdial_core::seed;
use mgdial_protocol::ops::WorldSpec;

/// Child seed of the database.
pub fn db_seed(master: u64) -> u64 {
    seed::derive(master, "db")
}

/// Child seed of goal sampling.
pub fn goal_seed(master: u64) -> u64 {
    seed::derive(master, "goals")
}

/// Child seed of corpus simulation.
pub fn corpus_seed(master: u64) -> u64 {
    seed::derive(master, "corpus")
}

/// Child seed of evaluation runs.
pub fn eval_seed(master: u64) -> u64 {
    seed::derive(master, "eval")
}

pub fn database(spec: &WorldSpec) -> Database {
    dbgen::generate(db_seed(spec.seed), &spec.db)
}

/// Database, bundled manuals with their search indexes, and the goals
/// sessions can be opened for.
#[derive(Debug)]
pub struct World {
    pub spec: WorldSpec,
    pub db: Database,
    pub values: ValueIndex,
    pub manuals: BTreeMap<ManualId, Manual>,
    pub indexes: BTreeMap<ManualId, SearchIndex>,
    pub goals: BTreeMap<GoalId, UserGoal>,
    pub pack: LanguagePack,
    pub engine: EngineConfig,
}

impl World {
    pub fn new(spec: WorldSpec, goals: GoalSet) -> Self {
        let db = database(&spec);
        Self::with_db(spec, db, goals)
    }

    fn with_db(spec: WorldSpec, db: Database, goals: GoalSet) -> Self {
        let values = ValueIndex::build(&db);
        let manuals: BTreeMap<ManualId, Manual> = bundled_manuals()
            .into_iter()
            .map(|m| (m.id.clone(), m))
            .collect();
        let indexes = manuals
            .iter()
            .map(|(id, m)| (id.clone(), build_index(m)))
            .collect();
        World {
            spec,
            db,
            values,
            manuals,
            indexes,
            goals: goals.goals.into_iter().map(|g| (g.id.clone(), g)).collect(),
            pack: LanguagePack::english(),
            engine: EngineConfig::default(),
        }
    }

    /// World with `count` goals sampled from the master seed.
    pub fn sampled(
        seed_value: u64,
        db: DbConfig,
        count: usize,
        config: &GoalConfig,
    ) -> Result<Self, GoalError> {
        let spec = WorldSpec {
            seed: seed_value,
            db,
        };
        let db = database(&spec);
        let goals = sample_goals(&db, goal_seed(seed_value), count, config)?;
        Ok(World::with_db(spec, db, goals))
    }

    pub fn manual_list(&self) -> Vec<Manual> {
        self.manuals.values().cloned().collect()
    }
}
