//! Collection sessions: one user and one agent build a dialogue turn by turn.

use mgdial_core::engine::CallRecord;
use mgdial_core::goals::Checklist;
use mgdial_core::model::{
    ApiCall, ApiId, ApiResult, AttributeName, Dialogue, DialogueId, GoalId, Instruction,
    InstructionId, ManualId,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Agent,
}

/// Where a session stands. Users speak first; the agent's message closes
/// the turn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    AwaitUser,
    AwaitAgent,
    /// Finalization found violations; the session can be reopened.
    Failed,
    Completed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CreateSession {
    pub goal: GoalId,
    pub manual: ManualId,
    /// Dialogue id of the export; defaults to `session-<id>`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    /// Seed of reference numbers; defaults to a hash of the dialogue id.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session: String,
    pub dialogue: DialogueId,
    pub user_token: String,
    pub agent_token: String,
}

/// One exchanged turn as both roles see it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnView {
    pub index: usize,
    pub user: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent: Option<String>,
}

/// The user's view: transcript, goal and checklist, never the manual.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserView {
    pub session: String,
    pub phase: Phase,
    pub turns: Vec<TurnView>,
    pub goal_description: String,
    pub checklist: Checklist,
}

/// One logged call of the current session as the agent sees it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallView {
    pub turn: usize,
    pub call: ApiCall,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<ApiResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// The agent's view: transcript, manual and calls, never the goal or the
/// checklist.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentView {
    pub session: String,
    pub phase: Phase,
    pub turns: Vec<TurnView>,
    pub manual: ManualId,
    /// Instructions selected for the open turn.
    pub selected: Vec<InstructionId>,
    /// One call form per selected instruction that describes an API.
    pub forms: Vec<ApiForm>,
    pub calls: Vec<CallView>,
}

/// Input form for the API an instruction describes; one field per input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiForm {
    pub instruction: InstructionId,
    pub api: ApiId,
    pub name: String,
    pub fields: Vec<FormField>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormField {
    pub attribute: AttributeName,
    pub required: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "role", rename_all = "lowercase")]
pub enum SessionView {
    User(UserView),
    Agent(AgentView),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PostMessage {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageAccepted {
    pub turn: usize,
    pub phase: Phase,
    /// Set on agent messages sent without any selected instruction.
    #[serde(default)]
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManualHit {
    pub instruction: Instruction,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResults {
    pub query: String,
    pub hits: Vec<ManualHit>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectInstructions {
    pub instructions: Vec<InstructionId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionAccepted {
    pub turn: usize,
    pub selected: Vec<InstructionId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmitCall {
    pub call: ApiCall,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallAccepted {
    pub turn: usize,
    pub result: ApiResult,
}

/// Sets one checklist row: `checked` for constraints, `value` for requests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChecklistUpdate {
    pub item: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checked: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChecklistState {
    pub checklist: Checklist,
    pub complete: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinalStatus {
    Completed,
    /// Checklist rows are still open; nothing was recorded.
    Incomplete,
    /// The dialogue breaks validation rules; reopen and repair it.
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finalized {
    pub status: FinalStatus,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub open_items: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<String>,
    /// Call arguments the annotator could not place in the history.
    #[serde(default)]
    pub unmatched_arguments: usize,
}

/// A completed dialogue with its call log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionExport {
    pub dialogue: Dialogue,
    pub calls: Vec<CallRecord>,
}

/// State change of a session. The session is the fold of its events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    Created {
        dialogue: DialogueId,
        goal: GoalId,
        manual: ManualId,
        seed: u64,
    },
    UserMessage {
        turn: usize,
        text: String,
    },
    InstructionsSelected {
        turn: usize,
        instructions: Vec<InstructionId>,
    },
    ApiCalled {
        turn: usize,
        call: ApiCall,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        result: Option<ApiResult>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        error: Option<String>,
    },
    AgentMessage {
        turn: usize,
        text: String,
    },
    ChecklistUpdated {
        update: ChecklistUpdate,
    },
    Finalized {
        status: FinalStatus,
        violations: Vec<String>,
    },
    Reopened,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordedEvent {
    pub seq: u64,
    pub role: Option<Role>,
    pub event: Event,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventLog {
    pub session: String,
    pub events: Vec<RecordedEvent>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub session: String,
    pub dialogue: DialogueId,
    pub goal: GoalId,
    pub manual: ManualId,
    pub phase: Phase,
    pub turns: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionList {
    pub sessions: Vec<SessionSummary>,
}

/// Completed dialogues collected so far, in completion order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollectedCorpus {
    pub dialogues: Vec<SessionExport>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoalList {
    pub goals: Vec<GoalId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManualList {
    pub manuals: Vec<ManualId>,
}
