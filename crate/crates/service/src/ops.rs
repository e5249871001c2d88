//! Blocking implementations of the offline operations.

use mgdial_core::catalog::lang::LanguagePack;
use mgdial_core::eval::{self, EvalData, EvalError, EvalReport};
use mgdial_core::eval::{Curve, LodoTable};
use mgdial_core::goals::{sample_goals, GoalError};
use mgdial_core::manual_kit::{bundled_manuals, gate_manuals, GateError};
use mgdial_core::model::validate::{Context, Validate};
use mgdial_core::nlu::annotate::fuzzy_annotate;
use mgdial_core::nlu::values::ValueIndex;
use mgdial_core::simulator::{corpus_stats, generate_corpus, SimError};
use mgdial_protocol::ops::{
    Annotate, Annotated, CheckParaphrases, CorpusData, Evaluate, GenCorpus, GenDb, GenGoals,
    GeneratedCorpus, GeneratedDb, GeneratedGoals, LeaveOneDomainOut, ParaphraseCheck, SweepData,
    SweepManuals, WorldSpec,
};
use thiserror::Error;

use crate::world::{corpus_seed, database, eval_seed, goal_seed};

#[derive(Debug, Error)]
pub enum OpError {
    #[error(transparent)]
    Goals(#[from] GoalError),
    #[error(transparent)]
    Simulation(#[from] SimError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Gate(#[from] GateError),
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub fn gen_db(req: &GenDb) -> Result<GeneratedDb, OpError> {
    let database = database(&req.world);
    let violations = database.validate(&Context::with_db(&database));
    if let Some(v) = violations.first() {
        return Err(OpError::Invalid(format!(
            "generated database breaks a rule: {v}"
        )));
    }
    Ok(GeneratedDb { database })
}

pub fn gen_goals(req: &GenGoals) -> Result<GeneratedGoals, OpError> {
    let db = database(&req.world);
    Ok(GeneratedGoals {
        goals: sample_goals(&db, goal_seed(req.world.seed), req.count, &req.config)?,
    })
}

pub fn gen_corpus(req: &GenCorpus) -> Result<GeneratedCorpus, OpError> {
    let db = database(&req.world);
    let goals = match &req.goals {
        Some(g) => g.clone(),
        None => sample_goals(
            &db,
            goal_seed(req.world.seed),
            req.config.splits.total(),
            &req.goal_config,
        )?,
    };
    let corpus = generate_corpus(
        &db,
        &bundled_manuals(),
        &goals,
        &LanguagePack::english(),
        &req.config,
        corpus_seed(req.world.seed),
    )?;
    let stats = corpus_stats(corpus.all().map(|s| &s.dialogue));
    Ok(GeneratedCorpus { corpus, stats })
}

pub fn check_paraphrases(req: &CheckParaphrases) -> Result<ParaphraseCheck, OpError> {
    let manuals = req.manuals.clone().unwrap_or_else(bundled_manuals);
    let families = gate_manuals(&manuals)?;
    Ok(ParaphraseCheck {
        passed: families.iter().all(|f| f.report.accepted),
        families,
    })
}

fn eval_data(world: &WorldSpec, data: &CorpusData) -> Result<EvalData, OpError> {
    let db = database(world);
    Ok(EvalData::new(
        data.train.clone(),
        data.dev.clone(),
        data.test.clone(),
        data.partition.clone(),
        &bundled_manuals(),
        ValueIndex::build(&db),
    )?)
}

pub fn evaluate(req: &Evaluate) -> Result<EvalReport, OpError> {
    let data = eval_data(&req.world, &req.data)?;
    Ok(eval::run_subtask_eval(
        &data,
        &req.config,
        eval_seed(req.world.seed),
    )?)
}

pub fn sweep_data(req: &SweepData) -> Result<Curve, OpError> {
    let data = eval_data(&req.world, &req.data)?;
    Ok(eval::sweep_data_size(
        &data,
        &req.fractions,
        &req.config,
        eval_seed(req.world.seed),
    )?)
}

pub fn sweep_manuals(req: &SweepManuals) -> Result<Curve, OpError> {
    let data = eval_data(&req.world, &req.data)?;
    Ok(eval::sweep_manual_count(
        &data,
        &req.counts,
        &req.config,
        eval_seed(req.world.seed),
    )?)
}

pub fn lodo(req: &LeaveOneDomainOut) -> Result<LodoTable, OpError> {
    let data = eval_data(&req.world, &req.data)?;
    Ok(eval::leave_one_domain_out(
        &data,
        &req.excluded,
        &req.config,
        eval_seed(req.world.seed),
    )?)
}

pub fn annotate(req: &Annotate) -> Result<Annotated, OpError> {
    let report = fuzzy_annotate(&req.dialogue.turns, &req.calls);
    let mut dialogue = req.dialogue.clone();
    for t in dialogue.turns.iter_mut() {
        t.argument_annotations = report.for_turn(t.index);
    }
    Ok(Annotated { dialogue, report })
}
