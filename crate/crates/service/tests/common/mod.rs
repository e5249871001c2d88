#![allow(dead_code)]

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use mgdial_core::catalog::lang::LanguagePack;
use mgdial_core::dbgen::DbConfig;
use mgdial_core::goals::{ChecklistItem, GoalConfig};
use mgdial_core::model::{ApiCall, InstructionId, ManualId};
use mgdial_core::seed;
use mgdial_core::simulator::{simulate, AgentPolicy, SimConfig, SimulatedDialogue};
use mgdial_protocol::session::ChecklistUpdate;
use mgdial_service::world::World;
use mgdial_service::{router, AppState};
use serde_json::{json, Value};
use tower::ServiceExt;

pub fn world() -> World {
    World::sampled(7, DbConfig::default(), 40, &GoalConfig::default()).expect("goals sample")
}

pub struct Harness {
    app: Router,
}

impl Harness {
    pub fn new(world: World) -> Self {
        Harness {
            app: router(AppState::new(world)),
        }
    }

    pub async fn raw(
        &self,
        method: Method,
        path: &str,
        token: Option<&str>,
        body: Option<Value>,
    ) -> (StatusCode, Vec<u8>) {
        let mut req = Request::builder().method(method).uri(path);
        if let Some(t) = token {
            req = req.header("authorization", format!("Bearer {t}"));
        }
        let req = match body {
            Some(b) => req
                .header("content-type", "application/json")
                .body(Body::from(b.to_string())),
            None => req.body(Body::empty()),
        }
        .unwrap();
        let res = self.app.clone().oneshot(req).await.unwrap();
        let status = res.status();
        let bytes = res.into_body().collect().await.unwrap().to_bytes().to_vec();
        (status, bytes)
    }

    pub async fn get(&self, path: &str, token: Option<&str>) -> (StatusCode, Value) {
        let (s, b) = self.raw(Method::GET, path, token, None).await;
        (s, serde_json::from_slice(&b).unwrap_or(Value::Null))
    }

    pub async fn post(&self, path: &str, token: Option<&str>, body: Value) -> (StatusCode, Value) {
        let (s, b) = self.raw(Method::POST, path, token, Some(body)).await;
        (s, serde_json::from_slice(&b).unwrap_or(Value::Null))
    }

    pub async fn open(
        &self,
        goal: &str,
        manual: &str,
        label: Option<&str>,
        seed: Option<u64>,
    ) -> Session {
        let mut body = json!({ "goal": goal, "manual": manual });
        if let Some(l) = label {
            body["label"] = json!(l);
        }
        if let Some(s) = seed {
            body["seed"] = json!(s);
        }
        let (status, v) = self.post("/v1/sessions", None, body).await;
        assert_eq!(status, StatusCode::CREATED, "{v}");
        Session {
            id: v["session"].as_str().unwrap().to_string(),
            user: v["user_token"].as_str().unwrap().to_string(),
            agent: v["agent_token"].as_str().unwrap().to_string(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Session {
    pub id: String,
    pub user: String,
    pub agent: String,
}

impl Session {
    pub fn path(&self, tail: &str) -> String {
        format!("/v1/sessions/{}{tail}", self.id)
    }
}

/// One action of a scripted session.
#[derive(Debug, Clone)]
pub enum Step {
    User(String),
    Select(Vec<InstructionId>),
    Call(ApiCall),
    Agent(String),
    Checklist(ChecklistUpdate),
    Finalize,
}

impl Step {
    /// Performs the step and asserts it succeeded.
    pub async fn run(&self, h: &Harness, s: &Session) -> Value {
        let (status, v) = match self {
            Step::User(t) => {
                h.post(&s.path("/messages"), Some(&s.user), json!({ "text": t }))
                    .await
            }
            Step::Agent(t) => {
                h.post(&s.path("/messages"), Some(&s.agent), json!({ "text": t }))
                    .await
            }
            Step::Select(ids) => {
                h.post(
                    &s.path("/instructions"),
                    Some(&s.agent),
                    json!({ "instructions": ids }),
                )
                .await
            }
            Step::Call(c) => {
                h.post(&s.path("/api"), Some(&s.agent), json!({ "call": c }))
                    .await
            }
            Step::Checklist(u) => {
                h.post(
                    &s.path("/checklist"),
                    Some(&s.user),
                    serde_json::to_value(u).unwrap(),
                )
                .await
            }
            Step::Finalize => h.post(&s.path("/finalize"), Some(&s.user), json!({})).await,
        };
        assert!(status.is_success(), "{self:?} -> {status} {v}");
        v
    }
}

/// A completed oracle dialogue over manual m01 whose length is `turns`.
pub fn simulated(world: &World, turns: usize, skip: usize) -> (SimulatedDialogue, u64) {
    let manual = &world.manuals[&ManualId::from("m01")];
    world
        .goals
        .values()
        .filter_map(|g| {
            let s = seed::derive(11, g.id.as_str());
            let d = simulate(
                g,
                manual,
                &world.db,
                &LanguagePack::english(),
                &SimConfig::default(),
                s,
                AgentPolicy::Oracle,
            )
            .ok()?;
            (d.dialogue.completed && d.dialogue.turns.len() == turns).then_some((d, s))
        })
        .nth(skip)
        .expect("a dialogue of the requested length")
}

/// Steps that rebuild `sim` through the service, then settle the checklist
/// and finalize.
pub fn script(world: &World, sim: &SimulatedDialogue) -> Vec<Step> {
    let mut steps = Vec::new();
    for t in &sim.dialogue.turns {
        steps.push(Step::User(t.user_utterance.clone()));
        steps.push(Step::Select(t.selected_instructions.clone()));
        steps.extend(t.api_calls.iter().cloned().map(Step::Call));
        steps.push(Step::Agent(t.agent_response.clone()));
    }
    let goal = &world.goals[&sim.dialogue.goal.id];
    for (item, row) in mgdial_core::goals::Checklist::for_goal(goal)
        .items
        .iter()
        .enumerate()
    {
        let update = match row {
            ChecklistItem::Check { .. } => ChecklistUpdate {
                item,
                checked: Some(true),
                value: None,
            },
            ChecklistItem::Fill {
                domain, attribute, ..
            } => {
                let filled = sim
                    .ledger
                    .requests
                    .iter()
                    .find(|r| r.request.domain == *domain && r.request.attribute == *attribute)
                    .and_then(|r| r.filled.clone());
                ChecklistUpdate {
                    item,
                    checked: None,
                    value: Some(filled.unwrap_or_else(|| "noted".into())),
                }
            }
        };
        steps.push(Step::Checklist(update));
    }
    steps.push(Step::Finalize);
    steps
}

/// Session seed that reproduces the simulator's reference numbers.
pub fn agent_seed(sim_seed: u64) -> u64 {
    seed::derive(sim_seed, "agent")
}
