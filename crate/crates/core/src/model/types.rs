use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, BTreeSet};

use super::{
    ApiId, AttributeName, DialogueId, Domain, FamilyId, GoalId, InstructionId, ManualId, Registry,
};
use crate::text;

pub type AttributeMap = BTreeMap<AttributeName, String>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainSchema {
    #[serde(default)]
    pub entity_less: bool,
    pub attributes: Vec<AttributeName>,
}

impl DomainSchema {
    pub fn contains(&self, attribute: &AttributeName) -> bool {
        self.attributes.contains(attribute)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub domain: Domain,
    pub attributes: AttributeMap,
}

impl Entity {
    pub fn get(&self, attribute: &str) -> Option<&str> {
        self.attributes.get(attribute).map(String::as_str)
    }

    pub fn name(&self) -> Option<&str> {
        self.get("name")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Operation {
    Find,
    Add,
    Edit,
    Delete,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiInput {
    pub attribute: AttributeName,
    pub required: bool,
}

/// A typed API description. Several specs may share a function `name`
/// (e.g. `restaurant_search`) while exposing different input lists.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiSpec {
    pub id: ApiId,
    pub name: String,
    pub domain: Domain,
    pub operation: Operation,
    pub inputs: Vec<ApiInput>,
    pub outputs: Vec<AttributeName>,
}

impl ApiSpec {
    /// 1-based argument index of an input attribute. This is the index used by
    /// the `B-k`/`I-k` tags.
    pub fn input_index(&self, attribute: &AttributeName) -> Option<usize> {
        self.inputs
            .iter()
            .position(|i| &i.attribute == attribute)
            .map(|p| p + 1)
    }

    pub fn input_attributes(&self) -> impl Iterator<Item = &AttributeName> {
        self.inputs.iter().map(|i| &i.attribute)
    }

    pub fn arity(&self) -> usize {
        self.inputs.len()
    }
}

/// The database: per-domain schemas, entity tables, value lexicons for
/// attributes that have no entity column (booking attributes, taxi places),
/// and the API catalog.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Database {
    #[serde(default)]
    pub registry: Registry,
    pub schemas: BTreeMap<Domain, DomainSchema>,
    pub entities: BTreeMap<Domain, Vec<Entity>>,
    #[serde(default)]
    pub lexicons: BTreeMap<Domain, BTreeMap<AttributeName, Vec<String>>>,
    #[serde(default)]
    pub apis: Vec<ApiSpec>,
}

impl Database {
    pub fn schema(&self, domain: &Domain) -> Option<&DomainSchema> {
        self.schemas.get(domain)
    }

    pub fn domains(&self) -> impl Iterator<Item = &Domain> {
        self.schemas.keys()
    }

    pub fn entities(&self, domain: &Domain) -> &[Entity] {
        self.entities.get(domain).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn api(&self, id: &ApiId) -> Option<&ApiSpec> {
        self.apis.iter().find(|a| &a.id == id)
    }

    pub fn is_entity_less(&self, domain: &Domain) -> bool {
        self.schema(domain).is_some_and(|s| s.entity_less) || self.registry.is_entity_less(domain)
    }

    /// Every surface value known for `(domain, attribute)`: entity column
    /// values followed by lexicon values, deduplicated, in first-seen order.
    pub fn value_set(&self, domain: &Domain, attribute: &AttributeName) -> Vec<String> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        let column = self
            .entities(domain)
            .iter()
            .filter_map(|e| e.attributes.get(attribute));
        let lexicon = self
            .lexicons
            .get(domain)
            .and_then(|l| l.get(attribute))
            .into_iter()
            .flatten();
        for v in column.chain(lexicon) {
            if seen.insert(v.as_str()) {
                out.push(v.clone());
            }
        }
        out
    }

    /// Whether `value` exists for `(domain, attribute)` after normalization.
    pub fn has_value(&self, domain: &Domain, attribute: &AttributeName, value: &str) -> bool {
        let wanted = text::normalize(value);
        let in_column = self
            .entities(domain)
            .iter()
            .filter_map(|e| e.attributes.get(attribute))
            .any(|v| text::normalize(v) == wanted);
        in_column
            || self
                .lexicons
                .get(domain)
                .and_then(|l| l.get(attribute))
                .is_some_and(|vs| vs.iter().any(|v| text::normalize(v) == wanted))
    }

    /// SHA-256 over the canonical JSON of the entity tables.
    pub fn content_digest(&self) -> String {
        let bytes = serde_json::to_vec(&self.entities).expect("entities serialize");
        hex::encode(Sha256::digest(bytes))
    }
}

/// A character range inside a mention-carrying text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mention {
    pub attribute: AttributeName,
    pub start: usize,
    pub end: usize,
}

/// API description attached to an instruction. `mentions` are in API input
/// order and point into `text`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionApi {
    pub api: ApiId,
    pub text: String,
    pub mentions: Vec<Mention>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instruction {
    pub id: InstructionId,
    pub family: FamilyId,
    pub domain: Domain,
    pub condition: String,
    pub solution: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api: Option<InstructionApi>,
}

impl Instruction {
    /// Condition, API description and solution joined into one text.
    pub fn full_text(&self) -> String {
        match &self.api {
            Some(api) => format!("{} {} {}", self.condition, api.text, self.solution),
            None => format!("{} {}", self.condition, self.solution),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manual {
    pub id: ManualId,
    pub instructions: Vec<Instruction>,
}

impl Manual {
    pub fn get(&self, id: &InstructionId) -> Option<&Instruction> {
        self.instructions.iter().find(|i| &i.id == id)
    }

    pub fn by_family(&self, family: &FamilyId) -> Option<&Instruction> {
        self.instructions.iter().find(|i| &i.family == family)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Constraint {
    pub domain: Domain,
    pub attribute: AttributeName,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Request {
    pub domain: Domain,
    pub attribute: AttributeName,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct UserGoal {
    pub id: GoalId,
    pub domains: Vec<Domain>,
    pub constraints: Vec<Constraint>,
    pub requests: Vec<Request>,
}

impl UserGoal {
    pub fn constraints_for<'a>(
        &'a self,
        domain: &'a Domain,
    ) -> impl Iterator<Item = &'a Constraint> {
        self.constraints.iter().filter(move |c| &c.domain == domain)
    }

    pub fn requests_for<'a>(&'a self, domain: &'a Domain) -> impl Iterator<Item = &'a Request> {
        self.requests.iter().filter(move |r| &r.domain == domain)
    }

    /// Identity of the goal's content, ignoring its id.
    pub fn content_key(&self) -> String {
        let mut c = self.constraints.clone();
        c.sort();
        let mut r = self.requests.clone();
        r.sort();
        serde_json::to_string(&(&self.domains, c, r)).expect("goal serializes")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoalSet {
    pub goals: Vec<UserGoal>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    User,
    Agent,
}

/// Character range in one utterance of a dialogue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub turn: usize,
    pub speaker: Speaker,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Argument {
    pub attribute: AttributeName,
    pub value: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span: Option<Span>,
}

impl Argument {
    pub fn new(attribute: impl Into<AttributeName>, value: impl Into<String>) -> Self {
        Self {
            attribute: attribute.into(),
            value: value.into(),
            span: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiCall {
    pub api: ApiId,
    /// Instruction that triggered the call, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instruction: Option<InstructionId>,
    pub args: Vec<Argument>,
}

impl ApiCall {
    pub fn new(api: impl Into<ApiId>, args: Vec<Argument>) -> Self {
        Self {
            api: api.into(),
            instruction: None,
            args,
        }
    }

    pub fn arg(&self, attribute: &str) -> Option<&str> {
        self.args
            .iter()
            .find(|a| a.attribute.as_str() == attribute)
            .map(|a| a.value.as_str())
    }

    /// `func(attr1=arg1, attr2=arg2)`.
    pub fn render(&self, spec: &ApiSpec) -> String {
        let args: Vec<String> = self
            .args
            .iter()
            .map(|a| format!("{}={}", a.attribute, a.value))
            .collect();
        format!("{}({})", spec.name, args.join(", "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BookingStatus {
    Active,
    Cancelled,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ApiResult {
    Find {
        count: usize,
        entities: Vec<Entity>,
    },
    Add {
        reference: String,
        details: AttributeMap,
    },
    Edit {
        reference: String,
        status: BookingStatus,
        details: AttributeMap,
    },
    Delete {
        reference: String,
        status: BookingStatus,
    },
}

impl ApiResult {
    pub fn reference(&self) -> Option<&str> {
        match self {
            ApiResult::Find { .. } => None,
            ApiResult::Add { reference, .. }
            | ApiResult::Edit { reference, .. }
            | ApiResult::Delete { reference, .. } => Some(reference),
        }
    }

    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("result serializes");
        hex::encode(&Sha256::digest(bytes)[..8])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArgumentAnnotation {
    pub instruction: InstructionId,
    /// 1-based argument index in the API input order.
    pub index: usize,
    pub span: Span,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub index: usize,
    pub user_utterance: String,
    pub agent_response: String,
    pub selected_instructions: Vec<InstructionId>,
    pub api_calls: Vec<ApiCall>,
    pub api_results: Vec<ApiResult>,
    pub argument_annotations: Vec<ArgumentAnnotation>,
    /// Set when no instruction was selected; such turns need review.
    #[serde(default)]
    pub flagged_for_review: bool,
}

impl Turn {
    pub fn utterance(&self, speaker: Speaker) -> &str {
        match speaker {
            Speaker::User => &self.user_utterance,
            Speaker::Agent => &self.agent_response,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dialogue {
    pub id: DialogueId,
    pub goal: UserGoal,
    pub manual: ManualId,
    pub turns: Vec<Turn>,
    pub completed: bool,
}

/// One utterance in a dialogue history.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Utterance<'a> {
    pub turn: usize,
    pub speaker: Speaker,
    pub text: &'a str,
}

impl Dialogue {
    /// `D_t`: all utterances before turn `t` plus the user utterance of `t`,
    /// oldest first.
    pub fn history(&self, t: usize) -> Vec<Utterance<'_>> {
        history_of(&self.turns, t)
    }

    pub fn utterance(&self, turn: usize, speaker: Speaker) -> Option<&str> {
        self.turns.get(turn).map(|t| t.utterance(speaker))
    }

    pub fn span_text(&self, span: &Span) -> Option<&str> {
        let u = self.utterance(span.turn, span.speaker)?;
        (span.end <= text::char_len(u) && span.start <= span.end)
            .then(|| text::char_slice(u, span.start, span.end))
    }
}

pub fn history_of(turns: &[Turn], t: usize) -> Vec<Utterance<'_>> {
    let mut out = Vec::with_capacity(2 * t + 1);
    for turn in turns.iter().take(t) {
        out.push(Utterance {
            turn: turn.index,
            speaker: Speaker::User,
            text: &turn.user_utterance,
        });
        out.push(Utterance {
            turn: turn.index,
            speaker: Speaker::Agent,
            text: &turn.agent_response,
        });
    }
    if let Some(turn) = turns.get(t) {
        out.push(Utterance {
            turn: turn.index,
            speaker: Speaker::User,
            text: &turn.user_utterance,
        });
    }
    out
}

/// Per-domain argument memory for find calls.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CarryoverState {
    pub domains: BTreeMap<Domain, AttributeMap>,
}

impl CarryoverState {
    pub fn get(&self, domain: &Domain) -> Option<&AttributeMap> {
        self.domains.get(domain)
    }

    pub fn reset(&mut self, domain: &Domain) {
        self.domains.remove(domain);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BookingRecord {
    pub reference: String,
    pub domain: Domain,
    pub attributes: AttributeMap,
    pub status: BookingStatus,
}
