//! Simulated agent: the oracle policy reads the user's acts, the model
//! policy uses matcher and tagger predictions. Both execute calls through the
//! engine and realize responses with the responder.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use super::user::{Said, UserAct, UserTurn};
use super::SimError;
use crate::catalog::lang::LanguagePack;
use crate::catalog::template::Filled;
use crate::catalog::{self, FamilyKind};
use crate::engine::{self, CallRecord, EngineConfig, SessionDbState, REFERENCE_ATTRIBUTE};
use crate::model::{
    history_of, ApiCall, ApiResult, Argument, ArgumentAnnotation, AttributeName, Database, Domain,
    Instruction, InstructionId, Manual, Span, Speaker, Turn,
};
use crate::nlu::codec::decode;
use crate::nlu::matcher::{match_instructions, Matcher};
use crate::nlu::tagger::Tagger;
use crate::responder::{self, ResponderState, Step};
use crate::seed::{self, Rng};
use crate::text;

/// Most instructions one turn may select.
pub const MAX_SELECTED: usize = 10;

/// Where each realized value sits in the dialogue so far.
#[derive(Debug, Clone, Default)]
pub struct SlotRegistry {
    entries: Vec<(Span, String)>,
}

impl SlotRegistry {
    pub fn add(&mut self, turn: usize, speaker: Speaker, filled: &Filled) {
        for s in &filled.slots {
            self.entries.push((
                Span {
                    turn,
                    speaker,
                    start: s.start,
                    end: s.end,
                },
                text::squash(&s.value),
            ));
        }
    }

    /// Latest placement of `value`, later utterances and positions first.
    pub fn latest(&self, value: &str) -> Option<Span> {
        let wanted = text::squash(value);
        self.entries
            .iter()
            .filter(|(_, v)| *v == wanted)
            .map(|(s, _)| *s)
            .max()
    }
}

/// Mutable per-dialogue agent state.
#[derive(Debug, Clone, Default)]
pub struct AgentState {
    pub db: SessionDbState,
    pub responder: ResponderState,
    /// Last active booking reference per domain.
    pub references: BTreeMap<Domain, String>,
    /// Taxi endpoints given before the agent asked for the missing one.
    pub taxi_given: BTreeMap<Domain, Vec<Said>>,
    pub slots: SlotRegistry,
    pub log: Vec<CallRecord>,
}

impl AgentState {
    pub fn new(seed: u64) -> Self {
        AgentState {
            db: SessionDbState::new(seed),
            ..Default::default()
        }
    }
}

/// What the agent did in one turn.
#[derive(Debug, Clone, Default)]
pub struct AgentTurn {
    pub selected: Vec<InstructionId>,
    pub calls: Vec<ApiCall>,
    pub results: Vec<ApiResult>,
    /// Domain of each result.
    pub domains: Vec<Domain>,
    pub annotations: Vec<ArgumentAnnotation>,
    pub response: Filled,
}

/// How the agent decides.
#[derive(Clone, Copy)]
pub enum AgentPolicy<'p> {
    Oracle,
    Model {
        matcher: &'p dyn Matcher,
        tagger: &'p dyn Tagger,
        threshold: f64,
        max_args: usize,
    },
}

/// Shared inputs of one dialogue.
#[derive(Clone, Copy)]
pub struct AgentContext<'c> {
    pub db: &'c Database,
    pub manual: &'c Manual,
    pub pack: &'c LanguagePack,
    pub engine: &'c EngineConfig,
}

struct Planned<'m> {
    instruction: &'m Instruction,
    call: Option<ApiCall>,
    result: Option<ApiResult>,
}

fn key_of(domain: &Domain) -> &'static str {
    catalog::profile(domain.as_str())
        .map(|p| p.key)
        .unwrap_or("name")
}

fn instruction<'m>(
    manual: &'m Manual,
    domain: &Domain,
    kind: &FamilyKind,
) -> Result<&'m Instruction, SimError> {
    let family = kind.family_id(domain.as_str());
    manual
        .by_family(&family)
        .ok_or_else(|| SimError::MissingFamily {
            manual: manual.id.clone(),
            family,
        })
}

/// Search attributes of the said values as static names of the domain.
fn attrs_of(domain: &Domain, values: &[Said]) -> Result<Vec<&'static str>, SimError> {
    let searchable = catalog::profile(domain.as_str())
        .map(|p| p.searchable)
        .unwrap_or(&[]);
    values
        .iter()
        .map(|(a, _)| {
            searchable
                .iter()
                .copied()
                .find(|s| *s == a.as_str())
                .ok_or_else(|| SimError::NotSearchable {
                    domain: domain.clone(),
                    attribute: a.clone(),
                })
        })
        .collect()
}

fn args(values: &[Said]) -> Vec<Argument> {
    values
        .iter()
        .map(|(a, v)| Argument::new(a.clone(), v.clone()))
        .collect()
}

impl AgentState {
    fn execute(
        &mut self,
        ctx: &AgentContext<'_>,
        t: usize,
        mut call: ApiCall,
        instruction: &Instruction,
    ) -> Result<(ApiCall, ApiResult), SimError> {
        call.instruction = Some(instruction.id.clone());
        let result =
            engine::execute_logged(&call, ctx.db, &mut self.db, ctx.engine, t, &mut self.log)
                .map_err(|source| SimError::Engine { turn: t, source })?;
        if let Some(r) = result.reference() {
            self.references
                .insert(instruction.domain.clone(), r.to_string());
        }
        Ok((call, result))
    }

    fn focus_key(&self, domain: &Domain) -> Option<Said> {
        let key = key_of(domain);
        self.responder
            .focus
            .get(domain)
            .and_then(|e| e.get(key))
            .map(|v| (AttributeName::from(key), v.to_string()))
    }

    /// Oracle policy: instructions by the family of each user act, arguments
    /// from the simulator's own records.
    pub fn oracle_step(
        &mut self,
        ctx: &AgentContext<'_>,
        t: usize,
        user: &UserTurn,
        rng: &mut Rng,
    ) -> Result<AgentTurn, SimError> {
        let mut planned: Vec<Planned<'_>> = Vec::new();
        for act in &user.acts {
            match act {
                UserAct::Greet | UserAct::Farewell => {}
                UserAct::Inform { domain, values, .. }
                | UserAct::Misinform { domain, values, .. } => {
                    let more = matches!(act, UserAct::Inform { more: true, .. });
                    let attrs = attrs_of(domain, values)?;
                    let ins = instruction(ctx.manual, domain, &FamilyKind::Find(attrs.clone()))?;
                    let call = ApiCall::new(
                        catalog::search_api_id(domain.as_str(), &attrs),
                        args(values),
                    );
                    let (call, result) = self.execute(ctx, t, call, ins)?;
                    let follow = match &result {
                        ApiResult::Find { count: 0, .. } => Some(FamilyKind::NoResult),
                        ApiResult::Find { count, .. } if *count > 1 => Some(if more {
                            FamilyKind::AskMore
                        } else {
                            FamilyKind::Recommend
                        }),
                        _ => None,
                    };
                    planned.push(Planned {
                        instruction: ins,
                        call: Some(call),
                        result: Some(result),
                    });
                    if let Some(kind) = follow {
                        planned.push(Planned {
                            instruction: instruction(ctx.manual, domain, &kind)?,
                            call: None,
                            result: None,
                        });
                    }
                }
                UserAct::Book {
                    domain,
                    extra: Some(extra),
                } => {
                    let key = self.focus_key(domain).ok_or(SimError::NoFocus {
                        turn: t,
                        domain: domain.clone(),
                    })?;
                    let ins = instruction(ctx.manual, domain, &FamilyKind::Book)?;
                    let call = ApiCall::new(
                        catalog::book_api_id(domain.as_str()),
                        args(&[key, extra.clone()]),
                    );
                    let (call, result) = self.execute(ctx, t, call, ins)?;
                    planned.push(Planned {
                        instruction: ins,
                        call: Some(call),
                        result: Some(result),
                    });
                }
                UserAct::Book {
                    domain,
                    extra: None,
                } => {
                    let extra = catalog::profile(domain.as_str())
                        .and_then(|p| p.booking_extra)
                        .unwrap_or("day");
                    let ins = instruction(ctx.manual, domain, &FamilyKind::BookAsk(extra))?;
                    planned.push(Planned {
                        instruction: ins,
                        call: None,
                        result: None,
                    });
                }
                UserAct::Taxi { domain, given } if given.len() < 2 => {
                    let missing = if given.iter().any(|(a, _)| a.as_str() == "departure") {
                        "destination"
                    } else {
                        "departure"
                    };
                    self.taxi_given.insert(domain.clone(), given.clone());
                    let ins = instruction(ctx.manual, domain, &FamilyKind::TaxiAsk(missing))?;
                    planned.push(Planned {
                        instruction: ins,
                        call: None,
                        result: None,
                    });
                }
                UserAct::Taxi { domain, given } => {
                    planned.push(self.book_taxi(ctx, t, domain, given.clone())?);
                }
                UserAct::Give { domain, value } => {
                    let entity_less =
                        catalog::profile(domain.as_str()).is_some_and(|p| p.entity_less);
                    if entity_less {
                        let mut given = self.taxi_given.remove(domain).unwrap_or_default();
                        given.push(value.clone());
                        planned.push(self.book_taxi(ctx, t, domain, given)?);
                    } else {
                        let key = self.focus_key(domain).ok_or(SimError::NoFocus {
                            turn: t,
                            domain: domain.clone(),
                        })?;
                        let ins = instruction(ctx.manual, domain, &FamilyKind::Book)?;
                        let call = ApiCall::new(
                            catalog::book_api_id(domain.as_str()),
                            args(&[key, value.clone()]),
                        );
                        let (call, result) = self.execute(ctx, t, call, ins)?;
                        planned.push(Planned {
                            instruction: ins,
                            call: Some(call),
                            result: Some(result),
                        });
                    }
                }
                UserAct::Request { domain, attribute } => {
                    let key = self.focus_key(domain).ok_or(SimError::NoFocus {
                        turn: t,
                        domain: domain.clone(),
                    })?;
                    let attr = catalog::profile(domain.as_str())
                        .and_then(|p| {
                            p.requestable
                                .iter()
                                .copied()
                                .find(|a| *a == attribute.as_str())
                        })
                        .unwrap_or("address");
                    let ins = instruction(ctx.manual, domain, &FamilyKind::Lookup(attr))?;
                    let call =
                        ApiCall::new(catalog::lookup_api_id(domain.as_str(), attr), args(&[key]));
                    let (call, result) = self.execute(ctx, t, call, ins)?;
                    planned.push(Planned {
                        instruction: ins,
                        call: Some(call),
                        result: Some(result),
                    });
                }
                UserAct::Edit { domain, value } => {
                    let reference =
                        self.references
                            .get(domain)
                            .cloned()
                            .ok_or(SimError::NoBooking {
                                turn: t,
                                domain: domain.clone(),
                            })?;
                    let attr = catalog::profile(domain.as_str())
                        .and_then(|p| p.editable.iter().copied().find(|a| *a == value.0.as_str()))
                        .unwrap_or("day");
                    let ins = instruction(ctx.manual, domain, &FamilyKind::Edit(attr))?;
                    let call = ApiCall::new(
                        catalog::edit_api_id(domain.as_str(), attr),
                        args(&[(REFERENCE_ATTRIBUTE.into(), reference), value.clone()]),
                    );
                    let (call, result) = self.execute(ctx, t, call, ins)?;
                    planned.push(Planned {
                        instruction: ins,
                        call: Some(call),
                        result: Some(result),
                    });
                }
                UserAct::Cancel { domain } => {
                    let reference =
                        self.references
                            .get(domain)
                            .cloned()
                            .ok_or(SimError::NoBooking {
                                turn: t,
                                domain: domain.clone(),
                            })?;
                    let ins = instruction(ctx.manual, domain, &FamilyKind::Cancel)?;
                    let call = ApiCall::new(
                        catalog::cancel_api_id(domain.as_str()),
                        args(&[(REFERENCE_ATTRIBUTE.into(), reference)]),
                    );
                    let (call, result) = self.execute(ctx, t, call, ins)?;
                    self.references.remove(domain);
                    planned.push(Planned {
                        instruction: ins,
                        call: Some(call),
                        result: Some(result),
                    });
                }
                UserAct::Faq {
                    domain,
                    intent,
                    aspect,
                } => {
                    let ins = instruction(ctx.manual, domain, &FamilyKind::Faq(*intent, *aspect))?;
                    planned.push(Planned {
                        instruction: ins,
                        call: None,
                        result: None,
                    });
                }
            }
        }
        if let Some(domain) = &user.closes {
            planned.push(Planned {
                instruction: instruction(ctx.manual, domain, &FamilyKind::AnythingElse)?,
                call: None,
                result: None,
            });
        }
        self.finish(ctx, t, user, planned, rng)
    }

    fn book_taxi<'m>(
        &mut self,
        ctx: &AgentContext<'m>,
        t: usize,
        domain: &Domain,
        mut given: Vec<Said>,
    ) -> Result<Planned<'m>, SimError> {
        given.sort_by_key(|(a, _)| a.as_str() != "departure");
        let ins = instruction(ctx.manual, domain, &FamilyKind::Book)?;
        let call = ApiCall::new(catalog::book_api_id(domain.as_str()), args(&given));
        let (call, result) = self.execute(ctx, t, call, ins)?;
        Ok(Planned {
            instruction: ins,
            call: Some(call),
            result: Some(result),
        })
    }

    /// Annotates arguments with their latest placement, realizes the
    /// response and records it.
    fn finish(
        &mut self,
        ctx: &AgentContext<'_>,
        t: usize,
        user: &UserTurn,
        planned: Vec<Planned<'_>>,
        rng: &mut Rng,
    ) -> Result<AgentTurn, SimError> {
        let mut out = AgentTurn::default();
        for p in &planned {
            out.selected.push(p.instruction.id.clone());
            if let (Some(call), Some(result)) = (&p.call, &p.result) {
                for (k, a) in call.args.iter().enumerate() {
                    if let Some(span) = self.slots.latest(&a.value) {
                        out.annotations.push(ArgumentAnnotation {
                            instruction: p.instruction.id.clone(),
                            index: k + 1,
                            span,
                        });
                    }
                }
                out.calls.push(call.clone());
                out.results.push(result.clone());
                out.domains.push(p.instruction.domain.clone());
            }
        }
        let steps: Vec<Step<'_>> = planned
            .iter()
            .map(|p| Step {
                instruction: p.instruction,
                result: p.result.as_ref(),
            })
            .collect();
        out.response = self.respond(ctx, t, &steps, &user.acts, rng)?;
        Ok(out)
    }

    fn respond(
        &mut self,
        ctx: &AgentContext<'_>,
        t: usize,
        steps: &[Step<'_>],
        acts: &[UserAct],
        rng: &mut Rng,
    ) -> Result<Filled, SimError> {
        if steps.is_empty() {
            let pool = if acts.iter().any(|a| matches!(a, UserAct::Farewell)) {
                &ctx.pack.agent_farewells
            } else {
                &ctx.pack.agent_greetings
            };
            let text = pool.choose(rng).cloned().unwrap_or_default();
            return Ok(Filled {
                text,
                slots: vec![],
            });
        }
        let seed = seed::derive(self.db.seed, &format!("respond/{t}"));
        responder::realize(steps, &mut self.responder, seed)
            .map_err(|source| SimError::Realize { turn: t, source })
    }

    /// Model policy: predicted instructions and argument spans.
    pub fn model_step(
        &mut self,
        ctx: &AgentContext<'_>,
        t: usize,
        turns: &[Turn],
        user: &UserTurn,
        policy: (&dyn Matcher, &dyn Tagger, f64, usize),
        rng: &mut Rng,
    ) -> Result<AgentTurn, SimError> {
        let (matcher, tagger, threshold, max_args) = policy;
        let history = history_of(turns, t);
        let decisions = match_instructions(&history, ctx.manual, matcher, threshold)
            .map_err(|source| SimError::Predict { turn: t, source })?;
        let mut chosen: Vec<(usize, f64)> = decisions
            .iter()
            .enumerate()
            .filter(|(_, d)| d.selected)
            .map(|(i, d)| (i, d.score))
            .collect();
        chosen.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        chosen.truncate(MAX_SELECTED);
        let mut planned = Vec::new();
        for (i, _) in chosen {
            let ins = &ctx.manual.instructions[i];
            let Some(api) = &ins.api else {
                planned.push(Planned {
                    instruction: ins,
                    call: None,
                    result: None,
                });
                continue;
            };
            let Some(spec) = ctx.db.api(&api.api) else {
                planned.push(Planned {
                    instruction: ins,
                    call: None,
                    result: None,
                });
                continue;
            };
            let seq = tagger
                .tag(&history, ins, max_args)
                .map_err(|source| SimError::Predict { turn: t, source })?;
            let mut spans = decode(&seq);
            spans.sort_by_key(|(k, _)| *k);
            let mut call_args = Vec::new();
            for (k, span) in spans {
                let Some(input) = spec.inputs.get(k - 1) else {
                    continue;
                };
                let Some(u) = history
                    .iter()
                    .find(|u| u.turn == span.turn && u.speaker == span.speaker)
                else {
                    continue;
                };
                let mut a = Argument::new(
                    input.attribute.clone(),
                    text::char_slice(u.text, span.start, span.end),
                );
                a.span = Some(span);
                if !call_args
                    .iter()
                    .any(|x: &Argument| x.attribute == a.attribute)
                {
                    call_args.push(a);
                }
            }
            let mut call = ApiCall::new(api.api.clone(), call_args);
            call.instruction = Some(ins.id.clone());
            let result =
                engine::execute_logged(&call, ctx.db, &mut self.db, ctx.engine, t, &mut self.log)
                    .ok();
            if let Some(r) = result.as_ref().and_then(ApiResult::reference) {
                self.references.insert(ins.domain.clone(), r.to_string());
            }
            planned.push(Planned {
                instruction: ins,
                call: result.is_some().then_some(call),
                result,
            });
        }
        let mut out = AgentTurn::default();
        for p in &planned {
            out.selected.push(p.instruction.id.clone());
            if let (Some(call), Some(result)) = (&p.call, &p.result) {
                for (k, a) in call.args.iter().enumerate() {
                    if let Some(span) = a.span {
                        out.annotations.push(ArgumentAnnotation {
                            instruction: p.instruction.id.clone(),
                            index: k + 1,
                            span,
                        });
                    }
                }
                let mut stored = call.clone();
                stored.args.iter_mut().for_each(|a| a.span = None);
                out.calls.push(stored);
                out.results.push(result.clone());
                out.domains.push(p.instruction.domain.clone());
            }
        }
        let steps: Vec<Step<'_>> = planned
            .iter()
            .map(|p| Step {
                instruction: p.instruction,
                result: p.result.as_ref(),
            })
            .collect();
        out.response = self.respond(ctx, t, &steps, &user.acts, rng)?;
        Ok(out)
    }
}
