//! Agent response realization from selected instructions and API results.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::template::Filled;
use crate::catalog::{self, phrasing, template};
use crate::engine::REFERENCE_ATTRIBUTE;
use crate::model::{ApiResult, AttributeName, Domain, Entity, Instruction, InstructionId};
use crate::seed::stable_hash;

/// Placeholder carrying a find count.
pub const CHOICE_ATTRIBUTE: &str = "choice";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RealizeError {
    #[error("instruction {instruction}: solution needs '{attribute}', which no result provides")]
    MissingAttribute {
        instruction: InstructionId,
        attribute: AttributeName,
    },
}

/// What the agent has offered so far, per domain.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponderState {
    /// Entity last presented to the user.
    pub focus: BTreeMap<Domain, Entity>,
    /// Count of the last find.
    pub last_count: BTreeMap<Domain, usize>,
}

/// One selected instruction with the result of the call it triggered.
#[derive(Debug, Clone, Copy)]
pub struct Step<'a> {
    pub instruction: &'a Instruction,
    /// `None` when the instruction has no API or its call failed.
    pub result: Option<&'a ApiResult>,
}

fn is_no_result(i: &Instruction) -> bool {
    i.family.as_str().ends_with(".no-result")
}

fn noun(domain: &Domain) -> &str {
    catalog::profile(domain.as_str())
        .map(|p| p.noun)
        .unwrap_or(domain.as_str())
}

fn pick<'e>(
    entities: &'e [Entity],
    focus: Option<&Entity>,
    key: &str,
    salt: &str,
) -> Option<&'e Entity> {
    if let Some(f) = focus.and_then(|f| f.get(key)) {
        if let Some(e) = entities.iter().find(|e| e.get(key) == Some(f)) {
            return Some(e);
        }
    }
    if entities.is_empty() {
        return None;
    }
    Some(&entities[(stable_hash(&[salt]) % entities.len() as u64) as usize])
}

/// Realizes the selected instructions in order, joined by spaces.
/// Values come only from `steps`' results and `state`. `seed` fixes which
/// entity is presented when a find returns several.
pub fn realize(
    steps: &[Step<'_>],
    state: &mut ResponderState,
    seed: u64,
) -> Result<Filled, RealizeError> {
    let apology_selected = steps.iter().any(|s| is_no_result(s.instruction));
    let mut out = Filled::default();
    for (n, step) in steps.iter().enumerate() {
        let ins = step.instruction;
        let domain = &ins.domain;
        let key = catalog::profile(domain.as_str())
            .map(|p| p.key)
            .unwrap_or("name");
        let mut values: BTreeMap<String, String> = BTreeMap::new();
        let mut echo: Vec<(AttributeName, String)> = Vec::new();
        match (step.result, &ins.api) {
            (Some(ApiResult::Find { count, entities }), _) => {
                state.last_count.insert(domain.clone(), *count);
                if *count == 0 {
                    state.focus.remove(domain);
                    if !apology_selected {
                        out.append(
                            " ",
                            Filled {
                                text: format!("Sorry, there is no {} matching that.", noun(domain)),
                                slots: vec![],
                            },
                        );
                    }
                    continue;
                }
                let salt = format!("{seed}/{n}/{}", ins.id);
                let chosen = pick(entities, state.focus.get(domain), key, &salt).cloned();
                if let Some(e) = chosen {
                    for (k, v) in &e.attributes {
                        values.insert(k.to_string(), v.clone());
                        echo.push((k.clone(), v.clone()));
                    }
                    let merged = state
                        .focus
                        .entry(domain.clone())
                        .or_insert_with(|| e.clone());
                    if merged.get(key) != e.get(key) {
                        *merged = e.clone();
                    } else {
                        merged.attributes.extend(e.attributes.clone());
                    }
                }
                values.insert(CHOICE_ATTRIBUTE.into(), count.to_string());
            }
            (Some(ApiResult::Add { reference, details }), _)
            | (
                Some(ApiResult::Edit {
                    reference, details, ..
                }),
                _,
            ) => {
                for (k, v) in details {
                    values.insert(k.to_string(), v.clone());
                    echo.push((k.clone(), v.clone()));
                }
                values.insert(REFERENCE_ATTRIBUTE.into(), reference.clone());
                echo.push((REFERENCE_ATTRIBUTE.into(), reference.clone()));
            }
            (Some(ApiResult::Delete { reference, .. }), _) => {
                values.insert(REFERENCE_ATTRIBUTE.into(), reference.clone());
            }
            (None, Some(_)) => {
                out.append(
                    " ",
                    Filled {
                        text: "Sorry, I could not complete that request.".into(),
                        slots: vec![],
                    },
                );
                continue;
            }
            (None, None) => {
                if let Some(e) = state.focus.get(domain) {
                    for (k, v) in &e.attributes {
                        values.insert(k.to_string(), v.clone());
                    }
                }
                if let Some(c) = state.last_count.get(domain) {
                    values.insert(CHOICE_ATTRIBUTE.into(), c.to_string());
                }
            }
        }
        let mut filled = template::fill(&ins.solution, |a| values.get(a.as_str()).cloned())
            .map_err(|attribute| RealizeError::MissingAttribute {
                instruction: ins.id.clone(),
                attribute,
            })?;
        let missing: Vec<String> = echo
            .iter()
            .filter(|(_, v)| !filled.slots.iter().any(|s| &s.value == v))
            .map(|(a, _)| format!("{} {{{}}}", phrasing::attribute_name(a.as_str()), a))
            .collect();
        if !missing.is_empty() {
            let extra = template::fill(&format!("Details: {}.", missing.join(", ")), |a| {
                echo.iter().find(|(k, _)| k == a).map(|(_, v)| v.clone())
            })
            .expect("echo values resolve");
            filled.append(" ", extra);
        }
        out.append(" ", filled);
    }
    Ok(out)
}
