//! Fuzzy annotation of logged API arguments with history spans.

use serde::{Deserialize, Serialize};

use crate::engine::CallRecord;
use crate::metrics::FUZZY_THRESHOLD;
use crate::model::{history_of, ArgumentAnnotation, InstructionId, Span, Turn};
use crate::text;

/// A logged argument with no sufficiently similar history span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnmatchedArgument {
    pub turn: usize,
    pub instruction: Option<InstructionId>,
    pub index: usize,
    pub value: String,
    pub best_similarity: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AnnotationReport {
    /// `(turn, annotation)` pairs in call-log order.
    pub annotations: Vec<(usize, ArgumentAnnotation)>,
    pub unmatched: Vec<UnmatchedArgument>,
}

impl AnnotationReport {
    /// Annotations of one turn.
    pub fn for_turn(&self, turn: usize) -> Vec<ArgumentAnnotation> {
        self.annotations
            .iter()
            .filter(|(t, _)| *t == turn)
            .map(|(_, a)| a.clone())
            .collect()
    }
}

/// Best span for `value` in the history of turn `t`: maximal similarity,
/// later utterances and later positions winning ties.
pub fn locate(turns: &[Turn], t: usize, value: &str) -> Option<(Span, f64)> {
    let mut best: Option<(Span, f64)> = None;
    for u in history_of(turns, t) {
        if let Some(m) = text::best_window(u.text, value) {
            if best.is_none_or(|(_, s)| m.similarity >= s) {
                best = Some((
                    Span {
                        turn: u.turn,
                        speaker: u.speaker,
                        start: m.start,
                        end: m.end,
                    },
                    m.similarity,
                ));
            }
        }
    }
    best
}

/// Annotates every argument of every successful logged call. Arguments are
/// indexed by their position, which follows the API input order. Calls
/// without a triggering instruction and values below the similarity
/// threshold are reported as unmatched.
pub fn fuzzy_annotate(turns: &[Turn], log: &[CallRecord]) -> AnnotationReport {
    let mut report = AnnotationReport::default();
    for record in log.iter().filter(|r| r.error.is_none()) {
        for (k, arg) in record.call.args.iter().enumerate() {
            let found = (record.turn < turns.len())
                .then(|| locate(turns, record.turn, &arg.value))
                .flatten();
            match (&record.call.instruction, found) {
                (Some(instruction), Some((span, sim))) if sim >= FUZZY_THRESHOLD => {
                    report.annotations.push((
                        record.turn,
                        ArgumentAnnotation {
                            instruction: instruction.clone(),
                            index: k + 1,
                            span,
                        },
                    ));
                }
                (instruction, found) => report.unmatched.push(UnmatchedArgument {
                    turn: record.turn,
                    instruction: instruction.clone(),
                    index: k + 1,
                    value: arg.value.clone(),
                    best_similarity: found.map_or(0.0, |(_, s)| s),
                }),
            }
        }
    }
    report
}
