//! Invariant checks. Violations are data: every check returns the full list.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use super::*;
use crate::text;

/// Max selected instructions per turn.
pub const MAX_SELECTED_INSTRUCTIONS: usize = 10;
/// Max domains per user goal.
pub const MAX_GOAL_DOMAINS: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

/// What a check may consult. Checks that need a missing piece are skipped.
#[derive(Debug, Clone, Copy)]
pub struct Context<'a> {
    pub registry: &'a Registry,
    pub db: Option<&'a Database>,
    pub manual: Option<&'a Manual>,
    /// Upper bound on inputs of instruction-triggered APIs.
    pub max_args: usize,
}

impl<'a> Context<'a> {
    pub fn new(registry: &'a Registry) -> Self {
        Self {
            registry,
            db: None,
            manual: None,
            max_args: 2,
        }
    }

    pub fn with_db(db: &'a Database) -> Self {
        Self {
            registry: &db.registry,
            db: Some(db),
            manual: None,
            max_args: 2,
        }
    }

    pub fn manual(mut self, manual: &'a Manual) -> Self {
        self.manual = Some(manual);
        self
    }
}

struct Sink<'v> {
    out: &'v mut Vec<Violation>,
    prefix: String,
}

impl Sink<'_> {
    fn push(&mut self, field: impl fmt::Display, rule: impl Into<String>) {
        let field = if self.prefix.is_empty() {
            field.to_string()
        } else {
            format!("{}.{}", self.prefix, field)
        };
        self.out.push(Violation {
            field,
            rule: rule.into(),
        });
    }
}

pub trait Validate {
    fn check(&self, ctx: &Context<'_>, prefix: &str, out: &mut Vec<Violation>);

    fn validate(&self, ctx: &Context<'_>) -> Vec<Violation> {
        let mut out = Vec::new();
        self.check(ctx, "", &mut out);
        out
    }
}

fn sink<'v>(out: &'v mut Vec<Violation>, prefix: &str) -> Sink<'v> {
    Sink {
        out,
        prefix: prefix.to_string(),
    }
}

fn join(prefix: &str, field: impl fmt::Display) -> String {
    if prefix.is_empty() {
        field.to_string()
    } else {
        format!("{prefix}.{field}")
    }
}

impl Validate for Registry {
    fn check(&self, _ctx: &Context<'_>, prefix: &str, out: &mut Vec<Violation>) {
        let mut s = sink(out, prefix);
        for dup in self.duplicate_attributes() {
            s.push("attributes", format!("duplicate registry name '{dup}'"));
        }
        let mut seen = BTreeSet::new();
        for d in &self.domains {
            if !seen.insert(&d.name) {
                s.push("domains", format!("duplicate domain '{}'", d.name));
            }
        }
    }
}

impl Validate for Database {
    fn check(&self, _ctx: &Context<'_>, prefix: &str, out: &mut Vec<Violation>) {
        let ctx = Context::with_db(self);
        self.registry.check(&ctx, &join(prefix, "registry"), out);
        let mut s = sink(out, prefix);
        for (domain, schema) in &self.schemas {
            if self.registry.domain(domain).is_none() {
                s.push(format!("schemas.{domain}"), "domain not registered");
            }
            if schema.attributes.is_empty() {
                s.push(format!("schemas.{domain}"), "schema is empty");
            }
            for a in &schema.attributes {
                if !self.registry.has_attribute(a) {
                    s.push(
                        format!("schemas.{domain}"),
                        format!("attribute '{a}' not registered"),
                    );
                }
            }
            if self.is_entity_less(domain) && !self.entities(domain).is_empty() {
                s.push(
                    format!("entities.{domain}"),
                    "entity-less domain has entities",
                );
            }
        }
        for (domain, lexicon) in &self.lexicons {
            for attr in lexicon.keys() {
                if !self.schema(domain).is_some_and(|sc| sc.contains(attr)) {
                    s.push(
                        format!("lexicons.{domain}"),
                        format!("attribute '{attr}' not in schema"),
                    );
                }
            }
        }
        for (domain, entities) in &self.entities {
            for (i, e) in entities.iter().enumerate() {
                if &e.domain != domain {
                    s.push(
                        format!("entities.{domain}[{i}]"),
                        "entity filed under wrong domain",
                    );
                }
                e.check(
                    &ctx,
                    &join(prefix, format!("entities.{domain}[{i}]")),
                    s.out,
                );
            }
        }
        let mut ids = BTreeSet::new();
        for (i, api) in self.apis.iter().enumerate() {
            if !ids.insert(&api.id) {
                sink(out, prefix).push(
                    format!("apis[{i}]"),
                    format!("duplicate api id '{}'", api.id),
                );
            }
            api.check(&ctx, &join(prefix, format!("apis[{i}]")), out);
        }
    }
}

impl Validate for Entity {
    fn check(&self, ctx: &Context<'_>, prefix: &str, out: &mut Vec<Violation>) {
        let mut s = sink(out, prefix);
        let entity_less = ctx
            .db
            .map_or(ctx.registry.is_entity_less(&self.domain), |db| {
                db.is_entity_less(&self.domain)
            });
        if !entity_less && !self.attributes.contains_key("name") {
            s.push("attributes", "missing 'name'");
        }
        let schema = ctx.db.and_then(|db| db.schema(&self.domain));
        for key in self.attributes.keys() {
            if !ctx.registry.has_attribute(key) {
                s.push("attributes", format!("attribute '{key}' not registered"));
            } else if let Some(schema) = schema {
                if !schema.contains(key) {
                    s.push(
                        "attributes",
                        format!("attribute '{key}' not in {} schema", self.domain),
                    );
                }
            }
        }
    }
}

impl Validate for ApiSpec {
    fn check(&self, ctx: &Context<'_>, prefix: &str, out: &mut Vec<Violation>) {
        let mut s = sink(out, prefix);
        let schema = ctx.db.and_then(|db| db.schema(&self.domain));
        if ctx.db.is_some() && schema.is_none() {
            s.push("domain", format!("unknown domain '{}'", self.domain));
        }
        let mut seen = BTreeSet::new();
        for a in self.input_attributes().chain(self.outputs.iter()) {
            if !ctx.registry.has_attribute(a) {
                s.push("inputs", format!("attribute '{a}' not registered"));
            }
        }
        for a in self.input_attributes() {
            if !seen.insert(a) {
                s.push("inputs", format!("duplicate input '{a}'"));
            }
            if let Some(schema) = schema {
                if !schema.contains(a) {
                    s.push(
                        "inputs",
                        format!("input '{a}' not in {} schema", self.domain),
                    );
                }
            }
        }
    }
}

impl Validate for Instruction {
    fn check(&self, ctx: &Context<'_>, prefix: &str, out: &mut Vec<Violation>) {
        let mut s = sink(out, prefix);
        if self.condition.trim().is_empty() {
            s.push("condition", "empty");
        }
        if self.solution.trim().is_empty() {
            s.push("solution", "empty");
        }
        let Some(api) = &self.api else { return };
        let len = text::char_len(&api.text);
        for (i, m) in api.mentions.iter().enumerate() {
            if m.start >= m.end || m.end > len {
                s.push(format!("api.mentions[{i}]"), "span outside api text");
            }
        }
        let Some(spec) = ctx.db.and_then(|db| db.api(&api.api)) else {
            if ctx.db.is_some() {
                s.push("api.api", format!("unknown api '{}'", api.api));
            }
            return;
        };
        if spec.domain != self.domain {
            s.push("api.api", "api domain differs from instruction domain");
        }
        if api.mentions.len() != spec.arity() {
            s.push(
                "api.mentions",
                format!(
                    "mention count {} != api input count {}",
                    api.mentions.len(),
                    spec.arity()
                ),
            );
        } else if !api
            .mentions
            .iter()
            .map(|m| &m.attribute)
            .eq(spec.input_attributes())
        {
            s.push("api.mentions", "mention order differs from api input order");
        }
        if spec.arity() > ctx.max_args {
            s.push(
                "api.api",
                format!("api has {} inputs, max is {}", spec.arity(), ctx.max_args),
            );
        }
    }
}

impl Validate for Manual {
    fn check(&self, ctx: &Context<'_>, prefix: &str, out: &mut Vec<Violation>) {
        let mut ids = BTreeSet::new();
        let mut families = BTreeSet::new();
        for (i, ins) in self.instructions.iter().enumerate() {
            let mut s = sink(out, prefix);
            if !ids.insert(&ins.id) {
                s.push(
                    format!("instructions[{i}].id"),
                    format!("duplicate id '{}'", ins.id),
                );
            }
            if !families.insert(&ins.family) {
                s.push(
                    format!("instructions[{i}].family"),
                    format!("family '{}' repeated", ins.family),
                );
            }
            ins.check(ctx, &join(prefix, format!("instructions[{i}]")), out);
        }
    }
}

impl Validate for UserGoal {
    fn check(&self, ctx: &Context<'_>, prefix: &str, out: &mut Vec<Violation>) {
        let mut s = sink(out, prefix);
        if self.domains.is_empty() {
            s.push("domains", "domains < 1");
        }
        if self.domains.len() > MAX_GOAL_DOMAINS {
            s.push("domains", "domains > 4");
        }
        let unique: BTreeSet<_> = self.domains.iter().collect();
        if unique.len() != self.domains.len() {
            s.push("domains", "duplicate domain");
        }
        let mut constrained: BTreeMap<&Domain, BTreeSet<&AttributeName>> = BTreeMap::new();
        for (i, c) in self.constraints.iter().enumerate() {
            if !unique.contains(&c.domain) {
                s.push(
                    format!("constraints[{i}]"),
                    format!("domain '{}' not in goal", c.domain),
                );
            }
            if !ctx.registry.has_attribute(&c.attribute) {
                s.push(
                    format!("constraints[{i}]"),
                    format!("attribute '{}' not registered", c.attribute),
                );
            }
            if !constrained
                .entry(&c.domain)
                .or_default()
                .insert(&c.attribute)
            {
                s.push(
                    format!("constraints[{i}]"),
                    "duplicate constraint attribute",
                );
            }
            if let Some(db) = ctx.db {
                if !db.is_entity_less(&c.domain) && !db.has_value(&c.domain, &c.attribute, &c.value)
                {
                    s.push(
                        format!("constraints[{i}].value"),
                        format!(
                            "value '{}' not in database for {}.{}",
                            c.value, c.domain, c.attribute
                        ),
                    );
                }
            }
        }
        let mut requested: BTreeMap<&Domain, BTreeSet<&AttributeName>> = BTreeMap::new();
        for (i, r) in self.requests.iter().enumerate() {
            if !unique.contains(&r.domain) {
                s.push(
                    format!("requests[{i}]"),
                    format!("domain '{}' not in goal", r.domain),
                );
            }
            if !ctx.registry.has_attribute(&r.attribute) {
                s.push(
                    format!("requests[{i}]"),
                    format!("attribute '{}' not registered", r.attribute),
                );
            }
            if !requested.entry(&r.domain).or_default().insert(&r.attribute) {
                s.push(format!("requests[{i}]"), "duplicate request");
            }
            if constrained
                .get(&r.domain)
                .is_some_and(|cs| cs.contains(&r.attribute))
            {
                s.push(format!("requests[{i}]"), "C/R overlap");
            }
        }
    }
}

impl Validate for ApiCall {
    fn check(&self, ctx: &Context<'_>, prefix: &str, out: &mut Vec<Violation>) {
        let mut s = sink(out, prefix);
        let Some(db) = ctx.db else { return };
        let Some(spec) = db.api(&self.api) else {
            s.push("api", format!("unknown api '{}'", self.api));
            return;
        };
        let mut last = 0;
        for (i, a) in self.args.iter().enumerate() {
            match spec.input_index(&a.attribute) {
                None => s.push(
                    format!("args[{i}]"),
                    format!("'{}' is not an input of {}", a.attribute, spec.id),
                ),
                Some(k) if k <= last => s.push(format!("args[{i}]"), "args out of api input order"),
                Some(k) => last = k,
            }
        }
    }
}

impl Validate for ApiResult {
    fn check(&self, ctx: &Context<'_>, prefix: &str, out: &mut Vec<Violation>) {
        let mut s = sink(out, prefix);
        match self {
            ApiResult::Find { count, entities } => {
                if entities.len() > *count {
                    s.push("entities", "more entities than count");
                }
                if let Some(db) = ctx.db {
                    for (i, e) in entities.iter().enumerate() {
                        let projects = |d: &Entity| {
                            e.attributes
                                .iter()
                                .all(|(k, v)| d.attributes.get(k) == Some(v))
                        };
                        if !db.entities(&e.domain).iter().any(projects) {
                            s.push(format!("entities[{i}]"), "entity not in database");
                        }
                    }
                }
            }
            other => {
                if other.reference().is_none_or(|r| r.trim().is_empty()) {
                    s.push("reference", "missing reference number");
                }
            }
        }
    }
}

impl Validate for Dialogue {
    fn check(&self, ctx: &Context<'_>, prefix: &str, out: &mut Vec<Violation>) {
        self.goal.check(ctx, &join(prefix, "goal"), out);
        let mut s = sink(out, prefix);
        if let Some(manual) = ctx.manual {
            if manual.id != self.manual {
                s.push(
                    "manual",
                    format!(
                        "dialogue uses '{}', context has '{}'",
                        self.manual, manual.id
                    ),
                );
            }
        }
        let mut refs = BTreeSet::new();
        for (t, turn) in self.turns.iter().enumerate() {
            let p = join(prefix, format!("turns[{t}]"));
            let mut s = sink(out, &p);
            if turn.index != t {
                s.push("index", format!("expected {t}, found {}", turn.index));
            }
            if turn.selected_instructions.len() > MAX_SELECTED_INSTRUCTIONS {
                s.push(
                    "selected_instructions",
                    "more than 10 instructions selected",
                );
            }
            if turn.flagged_for_review != turn.selected_instructions.is_empty() {
                s.push(
                    "flagged_for_review",
                    "flag must be set exactly when no instruction is selected",
                );
            }
            if turn.api_calls.len() != turn.api_results.len() {
                s.push("api_results", "results not aligned to calls");
            }
            if let Some(manual) = ctx.manual.filter(|m| m.id == self.manual) {
                for id in &turn.selected_instructions {
                    if manual.get(id).is_none() {
                        s.push("selected_instructions", format!("'{id}' not in manual"));
                    }
                }
            }
            for r in &turn.api_results {
                if let ApiResult::Add { reference, .. } = r {
                    if !refs.insert(reference.clone()) {
                        s.push(
                            "api_results",
                            format!("reference '{reference}' is not fresh"),
                        );
                    }
                }
            }
            for (i, a) in turn.argument_annotations.iter().enumerate() {
                let inside =
                    a.span.turn < t || (a.span.turn == t && a.span.speaker == Speaker::User);
                if !inside || self.span_text(&a.span).is_none() || a.span.start >= a.span.end {
                    s.push(
                        format!("argument_annotations[{i}]"),
                        "span outside dialogue history",
                    );
                }
                if a.index == 0 {
                    s.push(
                        format!("argument_annotations[{i}]"),
                        "argument index is 1-based",
                    );
                }
                if let (Some(manual), Some(db)) = (ctx.manual, ctx.db) {
                    let arity = manual
                        .get(&a.instruction)
                        .and_then(|ins| ins.api.as_ref())
                        .and_then(|api| db.api(&api.api))
                        .map(ApiSpec::arity);
                    if arity.is_some_and(|n| a.index > n) {
                        s.push(
                            format!("argument_annotations[{i}]"),
                            "argument index exceeds api arity",
                        );
                    }
                }
            }
            for (i, call) in turn.api_calls.iter().enumerate() {
                call.check(ctx, &join(&p, format!("api_calls[{i}]")), out);
            }
            for (i, r) in turn.api_results.iter().enumerate() {
                r.check(ctx, &join(&p, format!("api_results[{i}]")), out);
            }
        }
        if self.completed {
            let mut s = sink(out, prefix);
            for (i, c) in self.goal.constraints.iter().enumerate() {
                let expressed = self.turns.iter().any(|t| {
                    text::best_window(&t.user_utterance, &c.value)
                        .is_some_and(|m| m.similarity >= 0.8)
                });
                if !expressed {
                    s.push(
                        format!("goal.constraints[{i}]"),
                        "completed dialogue never expresses constraint",
                    );
                }
            }
        }
    }
}

impl Validate for CarryoverState {
    fn check(&self, ctx: &Context<'_>, prefix: &str, out: &mut Vec<Violation>) {
        let mut s = sink(out, prefix);
        let Some(db) = ctx.db else { return };
        for (domain, attrs) in &self.domains {
            let Some(schema) = db.schema(domain) else {
                s.push(format!("domains.{domain}"), "unknown domain");
                continue;
            };
            for a in attrs.keys() {
                if !schema.contains(a) {
                    s.push(
                        format!("domains.{domain}"),
                        format!("attribute '{a}' not valid for domain"),
                    );
                }
            }
        }
    }
}

impl Validate for [BookingRecord] {
    fn check(&self, ctx: &Context<'_>, prefix: &str, out: &mut Vec<Violation>) {
        let mut s = sink(out, prefix);
        let mut seen = BTreeSet::new();
        for (i, b) in self.iter().enumerate() {
            if !seen.insert(&b.reference) {
                s.push(format!("[{i}].reference"), "reference number not unique");
            }
            if let Some(schema) = ctx.db.and_then(|db| db.schema(&b.domain)) {
                for a in b.attributes.keys() {
                    if !schema.contains(a) {
                        s.push(
                            format!("[{i}].attributes"),
                            format!("attribute '{a}' not valid for domain"),
                        );
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn goal(domains: &[&str]) -> UserGoal {
        UserGoal {
            id: "g".into(),
            domains: domains.iter().map(|d| Domain::from(*d)).collect(),
            constraints: vec![],
            requests: vec![],
        }
    }

    #[test]
    fn goal_with_five_domains_is_rejected() {
        let reg = Registry::standard();
        let g = goal(&["attraction", "hospital", "hotel", "restaurant", "train"]);
        let v = g.validate(&Context::new(&reg));
        assert!(v.iter().any(|v| v.rule == "domains > 4"), "{v:?}");
    }

    #[test]
    fn constraint_request_overlap_is_rejected() {
        let reg = Registry::standard();
        let mut g = goal(&["restaurant"]);
        g.constraints.push(Constraint {
            domain: "restaurant".into(),
            attribute: "food".into(),
            value: "x".into(),
        });
        g.requests.push(Request {
            domain: "restaurant".into(),
            attribute: "food".into(),
        });
        let v = g.validate(&Context::new(&reg));
        assert!(v.iter().any(|v| v.rule == "C/R overlap"), "{v:?}");
    }

    #[test]
    fn empty_incomplete_dialogue_is_valid() {
        let reg = Registry::standard();
        let d = Dialogue {
            id: "d".into(),
            goal: goal(&["taxi"]),
            manual: "m01".into(),
            turns: vec![],
            completed: false,
        };
        assert!(d.validate(&Context::new(&reg)).is_empty());
    }

    #[test]
    fn annotation_after_current_user_utterance_is_rejected() {
        let reg = Registry::standard();
        let turn = Turn {
            index: 0,
            user_utterance: "hi".into(),
            agent_response: "hello there".into(),
            selected_instructions: vec!["m01:x".into()],
            argument_annotations: vec![ArgumentAnnotation {
                instruction: "m01:x".into(),
                index: 1,
                span: Span {
                    turn: 0,
                    speaker: Speaker::Agent,
                    start: 0,
                    end: 5,
                },
            }],
            ..Turn::default()
        };
        let d = Dialogue {
            id: "d".into(),
            goal: goal(&["taxi"]),
            manual: "m01".into(),
            turns: vec![turn],
            completed: false,
        };
        let v = d.validate(&Context::new(&reg));
        assert!(
            v.iter().any(|v| v.rule == "span outside dialogue history"),
            "{v:?}"
        );
    }

    #[test]
    fn eleven_instructions_are_rejected() {
        let reg = Registry::standard();
        let turn = Turn {
            selected_instructions: (0..11)
                .map(|i| InstructionId::new(format!("m01:f{i}")))
                .collect(),
            ..Turn::default()
        };
        let d = Dialogue {
            id: "d".into(),
            goal: goal(&["taxi"]),
            manual: "m01".into(),
            turns: vec![turn],
            completed: false,
        };
        let v = d.validate(&Context::new(&reg));
        assert!(v.iter().any(|v| v.rule.contains("more than 10")), "{v:?}");
    }
}
