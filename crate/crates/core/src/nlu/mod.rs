//! Understanding subtasks: instruction matching and argument tagging, with
//! lexical baselines, the fuzzy span annotator and the external predictor
//! bridge.

pub mod annotate;
pub mod bridge;
pub mod codec;
pub mod matcher;
pub mod tagger;
pub mod values;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::InstructionId;

/// Matcher output for one instruction at one turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchDecision {
    pub instruction: InstructionId,
    pub score: f64,
    pub selected: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PredictError {
    #[error("history must be nonempty and end with a user utterance")]
    BadHistory,
    #[error("instruction {0} has no API")]
    NoApi(InstructionId),
    #[error("predictor unavailable: {0}")]
    Unavailable(String),
    #[error("predictor timed out after {0} ms")]
    Timeout(u64),
    #[error("malformed predictor reply: {0}")]
    Malformed(String),
    #[error("predictor protocol version {got}, expected {expected}")]
    Version { got: u32, expected: u32 },
    #[error("tag encoding failed: {0}")]
    Encoding(#[from] codec::CodecError),
}
