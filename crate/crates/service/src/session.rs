//! Event-sourced collection sessions. Commands check the session's phase and
//! the caller's role, emit one event, and the event is applied through the
//! same path replay uses.

use mgdial_core::engine::{self, CallRecord, EngineError, SessionDbState};
use mgdial_core::goals::{render_goal, Checklist, ChecklistItem};
use mgdial_core::model::validate::{Context, Validate, MAX_SELECTED_INSTRUCTIONS};
use mgdial_core::model::{ApiCall, Dialogue, DialogueId, InstructionId, Turn, UserGoal};
use mgdial_core::nlu::annotate::fuzzy_annotate;
use mgdial_core::seed;
use mgdial_protocol::session::{
    AgentView, ApiForm, CallView, Event, FinalStatus, Finalized, FormField, Phase, RecordedEvent,
    Role, SessionExport, SessionSummary, TurnView, UserView,
};
use mgdial_protocol::ErrorKind;
use thiserror::Error;

use crate::world::World;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SessionError {
    #[error("{0}")]
    Sequence(String),
    #[error("{0}")]
    Validation(String),
    #[error("malformed api call: {0}")]
    MalformedCall(String),
    #[error("{0}")]
    NotFound(String),
    #[error("api call failed: {0}")]
    Engine(String),
    #[error("event {seq} does not replay: {message}")]
    Replay { seq: u64, message: String },
}

impl SessionError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            SessionError::Sequence(_) => ErrorKind::Sequence,
            SessionError::Validation(_) => ErrorKind::Validation,
            SessionError::MalformedCall(_) => ErrorKind::Schema,
            SessionError::NotFound(_) => ErrorKind::NotFound,
            SessionError::Engine(_) => ErrorKind::Engine,
            SessionError::Replay { .. } => ErrorKind::Internal,
        }
    }
}

type Result<T> = std::result::Result<T, SessionError>;

/// Dialogue id of a session without a label.
pub fn default_dialogue_id(session: &str) -> DialogueId {
    DialogueId::from(format!("session-{session}").as_str())
}

/// Reference-number seed of a session without an explicit one.
pub fn default_seed(dialogue: &DialogueId) -> u64 {
    seed::stable_hash(&["session", dialogue.as_str()])
}

#[derive(Debug, Clone)]
pub struct Session {
    id: String,
    dialogue: DialogueId,
    goal: UserGoal,
    manual: mgdial_core::model::ManualId,
    phase: Phase,
    turns: Vec<Turn>,
    calls: Vec<CallRecord>,
    db_state: SessionDbState,
    checklist: Checklist,
    events: Vec<RecordedEvent>,
    export: Option<SessionExport>,
}

impl Session {
    /// Opens a session; the goal and manual must exist in `world`.
    pub fn create(world: &World, id: &str, created: Event) -> Result<Self> {
        let Event::Created {
            dialogue,
            goal,
            manual,
            seed: s,
        } = &created
        else {
            return Err(SessionError::Replay {
                seq: 0,
                message: "first event must be 'created'".into(),
            });
        };
        let goal = world
            .goals
            .get(goal)
            .ok_or_else(|| SessionError::NotFound(format!("unknown goal '{goal}'")))?;
        if !world.manuals.contains_key(manual) {
            return Err(SessionError::NotFound(format!("unknown manual '{manual}'")));
        }
        let mut session = Session {
            id: id.to_string(),
            dialogue: dialogue.clone(),
            goal: goal.clone(),
            manual: manual.clone(),
            phase: Phase::AwaitUser,
            turns: Vec::new(),
            calls: Vec::new(),
            db_state: SessionDbState::new(*s),
            checklist: Checklist::for_goal(goal),
            events: Vec::new(),
            export: None,
        };
        session.events.push(RecordedEvent {
            seq: 0,
            role: None,
            event: created,
        });
        Ok(session)
    }

    /// Rebuilds a session from its event log.
    pub fn replay(world: &World, id: &str, events: &[RecordedEvent]) -> Result<Self> {
        let Some((first, rest)) = events.split_first() else {
            return Err(SessionError::Replay {
                seq: 0,
                message: "empty event log".into(),
            });
        };
        let mut session = Session::create(world, id, first.event.clone())?;
        for e in rest {
            session
                .apply(world, e.role, e.event.clone())
                .map_err(|err| match err {
                    SessionError::Replay { .. } => err,
                    other => SessionError::Replay {
                        seq: e.seq,
                        message: other.to_string(),
                    },
                })?;
        }
        Ok(session)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn manual(&self) -> &mgdial_core::model::ManualId {
        &self.manual
    }

    pub fn events(&self) -> &[RecordedEvent] {
        &self.events
    }

    pub fn export(&self) -> Option<&SessionExport> {
        self.export.as_ref()
    }

    pub fn checklist(&self) -> &Checklist {
        &self.checklist
    }

    pub fn summary(&self) -> SessionSummary {
        SessionSummary {
            session: self.id.clone(),
            dialogue: self.dialogue.clone(),
            goal: self.goal.id.clone(),
            manual: self.manual.clone(),
            phase: self.phase,
            turns: self.turns.len(),
        }
    }

    fn transcript(&self) -> Vec<TurnView> {
        self.turns
            .iter()
            .map(|t| TurnView {
                index: t.index,
                user: t.user_utterance.clone(),
                agent: (!t.agent_response.is_empty()).then(|| t.agent_response.clone()),
            })
            .collect()
    }

    pub fn user_view(&self) -> UserView {
        UserView {
            session: self.id.clone(),
            phase: self.phase,
            turns: self.transcript(),
            goal_description: render_goal(&self.goal).description,
            checklist: self.checklist.clone(),
        }
    }

    pub fn agent_view(&self, world: &World) -> AgentView {
        let open = self.phase == Phase::AwaitAgent;
        let selected = if open {
            self.turns
                .last()
                .map(|t| t.selected_instructions.clone())
                .unwrap_or_default()
        } else {
            vec![]
        };
        let manual = &world.manuals[&self.manual];
        let forms = selected
            .iter()
            .filter_map(|id| {
                let api = manual
                    .instructions
                    .iter()
                    .find(|i| &i.id == id)?
                    .api
                    .as_ref()?;
                let spec = world.db.api(&api.api)?;
                Some(ApiForm {
                    instruction: id.clone(),
                    api: spec.id.clone(),
                    name: spec.name.clone(),
                    fields: spec
                        .inputs
                        .iter()
                        .map(|i| FormField {
                            attribute: i.attribute.clone(),
                            required: i.required,
                        })
                        .collect(),
                })
            })
            .collect();
        let mut results = self.turns.iter().flat_map(|t| t.api_results.iter());
        let calls = self
            .calls
            .iter()
            .map(|r| CallView {
                turn: r.turn,
                call: r.call.clone(),
                result: if r.error.is_none() {
                    results.next().cloned()
                } else {
                    None
                },
                error: r.error.clone(),
            })
            .collect();
        AgentView {
            session: self.id.clone(),
            phase: self.phase,
            turns: self.transcript(),
            manual: self.manual.clone(),
            selected,
            forms,
            calls,
        }
    }

    fn expect_phase(&self, allowed: &[Phase], action: &str) -> Result<()> {
        if allowed.contains(&self.phase) {
            Ok(())
        } else {
            Err(SessionError::Sequence(format!(
                "cannot {action} while the session is {:?}",
                self.phase
            )))
        }
    }

    fn record(&mut self, world: &World, role: Role, event: Event) -> Result<()> {
        self.apply(world, Some(role), event)
    }

    /// Applies one event; replay and live commands share this path.
    fn apply(&mut self, world: &World, role: Option<Role>, event: Event) -> Result<()> {
        let seq = self.events.len() as u64;
        match &event {
            Event::Created { .. } => {
                return Err(SessionError::Replay {
                    seq,
                    message: "duplicate 'created' event".into(),
                });
            }
            Event::UserMessage { turn, text } => {
                self.expect_phase(&[Phase::AwaitUser], "post a user message")?;
                self.expect_turn(*turn, self.turns.len())?;
                self.turns.push(Turn {
                    index: *turn,
                    user_utterance: text.clone(),
                    ..Turn::default()
                });
                self.phase = Phase::AwaitAgent;
            }
            Event::InstructionsSelected { turn, instructions } => {
                self.expect_phase(&[Phase::AwaitAgent], "select instructions")?;
                self.expect_turn(*turn, self.turns.len() - 1)?;
                self.turns
                    .last_mut()
                    .expect("open turn")
                    .selected_instructions = instructions.clone();
            }
            Event::ApiCalled {
                turn,
                call,
                result,
                error,
            } => {
                self.expect_phase(&[Phase::AwaitAgent], "call an api")?;
                self.expect_turn(*turn, self.turns.len() - 1)?;
                let mut log = Vec::new();
                let outcome = engine::execute_logged(
                    call,
                    &world.db,
                    &mut self.db_state,
                    &world.engine,
                    *turn,
                    &mut log,
                );
                let same = match (&outcome, result, error) {
                    (Ok(r), Some(expected), None) => r == expected,
                    (Err(e), None, Some(expected)) => e.to_string() == *expected,
                    _ => false,
                };
                if !same {
                    return Err(SessionError::Replay {
                        seq,
                        message: "api outcome differs from the recorded one".into(),
                    });
                }
                if let Ok(r) = outcome {
                    let open = self.turns.last_mut().expect("open turn");
                    open.api_calls.push(call.clone());
                    open.api_results.push(r);
                }
                self.calls.extend(log);
            }
            Event::AgentMessage { turn, text } => {
                self.expect_phase(&[Phase::AwaitAgent], "post an agent message")?;
                self.expect_turn(*turn, self.turns.len() - 1)?;
                let open = self.turns.last_mut().expect("open turn");
                open.agent_response = text.clone();
                open.flagged_for_review = open.selected_instructions.is_empty();
                self.phase = Phase::AwaitUser;
            }
            Event::ChecklistUpdated { update } => {
                self.expect_phase(
                    &[Phase::AwaitUser, Phase::AwaitAgent],
                    "update the checklist",
                )?;
                let item = self.checklist.items.get_mut(update.item).ok_or_else(|| {
                    SessionError::NotFound(format!("no checklist item {}", update.item))
                })?;
                match (item, update.checked, &update.value) {
                    (ChecklistItem::Check { checked, .. }, Some(c), None) => *checked = c,
                    (ChecklistItem::Fill { value, .. }, None, v) => *value = v.clone(),
                    (ChecklistItem::Check { .. }, _, _) => {
                        return Err(SessionError::Validation(
                            "constraint rows take 'checked' only".into(),
                        ))
                    }
                    (ChecklistItem::Fill { .. }, _, _) => {
                        return Err(SessionError::Validation(
                            "request rows take 'value' only".into(),
                        ))
                    }
                }
            }
            Event::Finalized { status, .. } => {
                self.expect_phase(&[Phase::AwaitUser], "finalize")?;
                match status {
                    FinalStatus::Completed => {
                        let (dialogue, _) = self.annotated_dialogue();
                        self.export = Some(SessionExport {
                            dialogue,
                            calls: self.calls.clone(),
                        });
                        self.phase = Phase::Completed;
                    }
                    FinalStatus::Failed => self.phase = Phase::Failed,
                    FinalStatus::Incomplete => {
                        return Err(SessionError::Replay {
                            seq,
                            message: "incomplete finalization is not an event".into(),
                        })
                    }
                }
            }
            Event::Reopened => {
                self.expect_phase(&[Phase::Failed], "reopen")?;
                self.phase = Phase::AwaitUser;
            }
        }
        self.events.push(RecordedEvent { seq, role, event });
        Ok(())
    }

    fn expect_turn(&self, got: usize, want: usize) -> Result<()> {
        if got == want {
            Ok(())
        } else {
            Err(SessionError::Sequence(format!(
                "event for turn {got}, open turn is {want}"
            )))
        }
    }

    fn annotated_dialogue(&self) -> (Dialogue, usize) {
        let report = fuzzy_annotate(&self.turns, &self.calls);
        let mut turns = self.turns.clone();
        for t in turns.iter_mut() {
            t.argument_annotations = report.for_turn(t.index);
        }
        let dialogue = Dialogue {
            id: self.dialogue.clone(),
            goal: self.goal.clone(),
            manual: self.manual.clone(),
            turns,
            completed: true,
        };
        (dialogue, report.unmatched.len())
    }

    pub fn post_message(&mut self, world: &World, role: Role, text: &str) -> Result<(usize, bool)> {
        let text = text.trim();
        if text.is_empty() {
            return Err(SessionError::Validation("message text is empty".into()));
        }
        match role {
            Role::User => {
                let turn = self.turns.len();
                self.record(
                    world,
                    role,
                    Event::UserMessage {
                        turn,
                        text: text.to_string(),
                    },
                )?;
                Ok((turn, false))
            }
            Role::Agent => {
                self.expect_phase(&[Phase::AwaitAgent], "post an agent message")?;
                let turn = self.turns.len() - 1;
                self.record(
                    world,
                    role,
                    Event::AgentMessage {
                        turn,
                        text: text.to_string(),
                    },
                )?;
                Ok((turn, self.turns[turn].flagged_for_review))
            }
        }
    }

    pub fn select(&mut self, world: &World, instructions: &[InstructionId]) -> Result<usize> {
        self.expect_phase(&[Phase::AwaitAgent], "select instructions")?;
        if instructions.len() > MAX_SELECTED_INSTRUCTIONS {
            return Err(SessionError::Validation(format!(
                "at most {MAX_SELECTED_INSTRUCTIONS} instructions per turn, got {}",
                instructions.len()
            )));
        }
        let manual = &world.manuals[&self.manual];
        if let Some(id) = instructions.iter().find(|id| manual.get(id).is_none()) {
            return Err(SessionError::NotFound(format!(
                "instruction '{id}' is not in manual '{}'",
                self.manual
            )));
        }
        let unique: std::collections::BTreeSet<&InstructionId> = instructions.iter().collect();
        if unique.len() != instructions.len() {
            return Err(SessionError::Validation(
                "instruction selected twice".into(),
            ));
        }
        let turn = self.turns.len() - 1;
        self.record(
            world,
            Role::Agent,
            Event::InstructionsSelected {
                turn,
                instructions: instructions.to_vec(),
            },
        )?;
        Ok(turn)
    }

    /// Executes a call. Malformed calls are rejected without a trace; calls
    /// the engine refuses are logged and reported as errors.
    pub fn call(
        &mut self,
        world: &World,
        call: &ApiCall,
    ) -> Result<(usize, mgdial_core::model::ApiResult)> {
        self.expect_phase(&[Phase::AwaitAgent], "call an api")?;
        if let Some(id) = &call.instruction {
            if world.manuals[&self.manual].get(id).is_none() {
                return Err(SessionError::NotFound(format!(
                    "instruction '{id}' is not in manual '{}'",
                    self.manual
                )));
            }
        }
        let mut probe = self.db_state.clone();
        let outcome = engine::execute_with(call, &world.db, &mut probe, &world.engine);
        let turn = self.turns.len() - 1;
        match outcome {
            Err(
                e @ (EngineError::UnknownApi(_)
                | EngineError::InvalidCall(_)
                | EngineError::Schema { .. }
                | EngineError::MissingArguments { .. }
                | EngineError::NotFind(_)
                | EngineError::RangeQuery { .. }),
            ) => Err(SessionError::MalformedCall(e.to_string())),
            Err(e) => {
                let message = e.to_string();
                self.record(
                    world,
                    Role::Agent,
                    Event::ApiCalled {
                        turn,
                        call: call.clone(),
                        result: None,
                        error: Some(message.clone()),
                    },
                )?;
                Err(SessionError::Engine(message))
            }
            Ok(result) => {
                self.record(
                    world,
                    Role::Agent,
                    Event::ApiCalled {
                        turn,
                        call: call.clone(),
                        result: Some(result.clone()),
                        error: None,
                    },
                )?;
                Ok((turn, result))
            }
        }
    }

    pub fn update_checklist(
        &mut self,
        world: &World,
        update: mgdial_protocol::session::ChecklistUpdate,
    ) -> Result<()> {
        self.record(world, Role::User, Event::ChecklistUpdated { update })
    }

    /// Closes the dialogue once every checklist row is settled. Open rows
    /// leave the session untouched; rule violations leave it repairable.
    pub fn finalize(&mut self, world: &World) -> Result<Finalized> {
        self.expect_phase(&[Phase::AwaitUser], "finalize")?;
        if self.turns.is_empty() {
            return Err(SessionError::Sequence(
                "nothing to finalize: no turns yet".into(),
            ));
        }
        let open_items: Vec<usize> = self
            .checklist
            .items
            .iter()
            .enumerate()
            .filter(|(_, i)| match i {
                ChecklistItem::Check { checked, .. } => !checked,
                ChecklistItem::Fill { value, .. } => value.is_none(),
            })
            .map(|(k, _)| k)
            .collect();
        if !open_items.is_empty() {
            return Ok(Finalized {
                status: FinalStatus::Incomplete,
                open_items,
                violations: vec![],
                unmatched_arguments: 0,
            });
        }
        let (dialogue, unmatched) = self.annotated_dialogue();
        let ctx = Context::with_db(&world.db).manual(&world.manuals[&self.manual]);
        let violations: Vec<String> = dialogue
            .validate(&ctx)
            .iter()
            .map(ToString::to_string)
            .collect();
        let status = if violations.is_empty() {
            FinalStatus::Completed
        } else {
            FinalStatus::Failed
        };
        self.record(
            world,
            Role::User,
            Event::Finalized {
                status,
                violations: violations.clone(),
            },
        )?;
        Ok(Finalized {
            status,
            open_items: vec![],
            violations,
            unmatched_arguments: unmatched,
        })
    }

    pub fn reopen(&mut self, world: &World, role: Role) -> Result<()> {
        self.record(world, role, Event::Reopened)
    }
}
