//! Manual-guided task-oriented dialogue toolkit.
//!
//! Agents are guided by unstructured manuals of instructions instead of a
//! dialogue-state ontology. The crate covers the data model, an API engine
//! with carryover semantics, manual compilation and search, goal sampling,
//! instruction matching and argument tagging baselines, response
//! realization, metrics, a self-play simulator and the evaluation harness.

pub mod catalog;
pub mod config;
pub mod dbgen;
pub mod engine;
pub mod eval;
pub mod goals;
pub mod manual_kit;
pub mod metrics;
pub mod model;
pub mod nlu;
pub mod responder;
pub mod seed;
pub mod simulator;
pub mod text;
