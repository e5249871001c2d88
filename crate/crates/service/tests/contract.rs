mod common;

use axum::http::{Method, StatusCode};
use common::{agent_seed, script, simulated, world, Harness, Step};
use mgdial_core::model::{ApiCall, Argument};
use serde_json::json;

fn first_goal(h: &mgdial_service::world::World) -> String {
    h.goals.keys().next().unwrap().to_string()
}

#[tokio::test]
async fn roles_see_disjoint_halves_of_the_task() {
    let w = world();
    let goal = first_goal(&w);
    let h = Harness::new(w);
    let s = h.open(&goal, "m02", None, None).await;
    let (status, user) = h.get(&s.path(""), Some(&s.user)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(user["version"], 1);
    assert_eq!(user["role"], "user");
    assert!(user.get("checklist").is_some() && user.get("goal_description").is_some());
    assert!(user.get("manual").is_none());
    let (_, agent) = h.get(&s.path(""), Some(&s.agent)).await;
    assert_eq!(agent["role"], "agent");
    assert_eq!(agent["manual"], "m02");
    assert!(agent.get("checklist").is_none() && agent.get("goal_description").is_none());
    assert!(!agent.to_string().contains(&goal));
}

#[tokio::test]
async fn tokens_gate_every_session_route() {
    let w = world();
    let goal = first_goal(&w);
    let h = Harness::new(w);
    let s = h.open(&goal, "m01", None, None).await;
    let other = h.open(&goal, "m01", None, None).await;
    assert_eq!(h.get(&s.path(""), None).await.0, StatusCode::UNAUTHORIZED);
    assert_eq!(
        h.get(&s.path(""), Some("nope")).await.0,
        StatusCode::UNAUTHORIZED
    );
    assert_eq!(
        h.get(&s.path(""), Some(&other.user)).await.0,
        StatusCode::FORBIDDEN
    );
    assert_eq!(
        h.get("/v1/sessions/missing", Some(&s.user)).await.0,
        StatusCode::NOT_FOUND
    );
    assert_eq!(
        h.get(&s.path("/checklist"), Some(&s.agent)).await.0,
        StatusCode::FORBIDDEN
    );
    assert_eq!(
        h.get(&s.path("/manual/search?q=book"), Some(&s.user))
            .await
            .0,
        StatusCode::FORBIDDEN
    );
    let (status, body) = h
        .post(
            &s.path("/instructions"),
            Some(&s.user),
            json!({ "instructions": [] }),
        )
        .await;
    assert_eq!(status, StatusCode::FORBIDDEN);
    assert_eq!(body["error"], "forbidden");
}

#[tokio::test]
async fn turns_alternate_starting_with_the_user() {
    let w = world();
    let goal = first_goal(&w);
    let h = Harness::new(w);
    let s = h.open(&goal, "m01", None, None).await;
    let (status, body) = h
        .post(
            &s.path("/messages"),
            Some(&s.agent),
            json!({ "text": "Hello" }),
        )
        .await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"], "sequence");
    Step::User("Hi there.".into()).run(&h, &s).await;
    assert_eq!(
        h.post(
            &s.path("/messages"),
            Some(&s.user),
            json!({ "text": "Again" })
        )
        .await
        .0,
        StatusCode::CONFLICT
    );
    let (status, body) = h
        .post(
            &s.path("/messages"),
            Some(&s.agent),
            json!({ "text": "  " }),
        )
        .await;
    assert_eq!(
        (status, body["error"].as_str()),
        (StatusCode::UNPROCESSABLE_ENTITY, Some("validation"))
    );
    let accepted = Step::Agent("How can I help?".into()).run(&h, &s).await;
    assert_eq!(accepted["flagged"], true);
    assert_eq!(accepted["phase"], "await_user");
}

#[tokio::test]
async fn selection_is_capped_and_checked_against_the_manual() {
    let w = world();
    let goal = first_goal(&w);
    let ids: Vec<String> = w.manuals[&mgdial_core::model::ManualId::from("m01")]
        .instructions
        .iter()
        .map(|i| i.id.to_string())
        .collect();
    let h = Harness::new(w);
    let s = h.open(&goal, "m01", None, None).await;
    Step::User("I need a place to stay.".into())
        .run(&h, &s)
        .await;
    let (status, _) = h
        .post(
            &s.path("/instructions"),
            Some(&s.agent),
            json!({ "instructions": ids[..11] }),
        )
        .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, _) = h
        .post(
            &s.path("/instructions"),
            Some(&s.agent),
            json!({ "instructions": ["m02:hotel.book"] }),
        )
        .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = h
        .post(
            &s.path("/instructions"),
            Some(&s.agent),
            json!({ "instructions": [ids[0], ids[0]] }),
        )
        .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let ok = Step::Select(ids[..10].iter().map(|i| i.as_str().into()).collect())
        .run(&h, &s)
        .await;
    assert_eq!(ok["selected"].as_array().unwrap().len(), 10);
    let accepted = Step::Agent("Sure.".into()).run(&h, &s).await;
    assert_eq!(accepted["flagged"], false);
}

#[tokio::test]
async fn agent_view_offers_a_form_per_selected_api_instruction() {
    let w = world();
    let goal = first_goal(&w);
    let manual = &w.manuals[&mgdial_core::model::ManualId::from("m01")];
    let inputs = |i: &&mgdial_core::model::Instruction| {
        i.api
            .as_ref()
            .and_then(|a| w.db.api(&a.api))
            .map_or(0, |s| s.inputs.len())
    };
    let mut with_api: Vec<_> = manual
        .instructions
        .iter()
        .filter(|i| i.api.is_some())
        .collect();
    with_api.sort_by_key(|i| std::cmp::Reverse(inputs(i)));
    let picked: Vec<_> = with_api
        .into_iter()
        .take(3)
        .chain(
            manual
                .instructions
                .iter()
                .filter(|i| i.api.is_none())
                .take(1),
        )
        .collect();
    let arity: Vec<(String, usize)> = picked
        .iter()
        .filter_map(|i| {
            Some((
                i.id.to_string(),
                w.db.api(&i.api.as_ref()?.api)?.inputs.len(),
            ))
        })
        .collect();
    let ids: Vec<_> = picked.iter().map(|i| i.id.clone()).collect();
    let h = Harness::new(w);
    let s = h.open(&goal, "m01", None, None).await;
    Step::User("I need a place to stay.".into())
        .run(&h, &s)
        .await;
    let (_, before) = h.get(&s.path(""), Some(&s.agent)).await;
    assert_eq!(before["forms"], json!([]));
    Step::Select(ids).run(&h, &s).await;
    let (_, view) = h.get(&s.path(""), Some(&s.agent)).await;
    let forms = view["forms"].as_array().unwrap();
    assert_eq!(forms.len(), 3);
    for (form, (id, n)) in forms.iter().zip(&arity) {
        assert_eq!(form["instruction"], id.as_str());
        assert_eq!(form["fields"].as_array().unwrap().len(), *n);
    }
    assert!(arity.iter().any(|(_, n)| *n > 1));
    Step::Agent("Sure.".into()).run(&h, &s).await;
    let (_, after) = h.get(&s.path(""), Some(&s.agent)).await;
    assert_eq!(after["forms"], json!([]));
}

#[tokio::test]
async fn manual_search_ranks_instructions_for_the_agent() {
    let w = world();
    let goal = first_goal(&w);
    let h = Harness::new(w);
    let s = h.open(&goal, "m01", None, None).await;
    let (status, body) = h
        .get(
            &s.path("/manual/search?q=book%20a%20hotel%20room&k=3"),
            Some(&s.agent),
        )
        .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let hits = body["hits"].as_array().unwrap();
    assert_eq!(hits.len(), 3);
    assert!(hits[0]["instruction"]["id"]
        .as_str()
        .unwrap()
        .starts_with("m01:"));
    assert!(hits[0]["score"].as_f64() >= hits[2]["score"].as_f64());
    assert_eq!(
        h.get(&s.path("/manual/search?q=x&k=0"), Some(&s.agent))
            .await
            .0,
        StatusCode::UNPROCESSABLE_ENTITY
    );
    assert_eq!(
        h.get(&s.path("/manual/search"), Some(&s.agent)).await.0,
        StatusCode::BAD_REQUEST
    );
}

#[tokio::test]
async fn malformed_calls_are_schema_errors_and_engine_failures_are_logged() {
    let w = world();
    let goal = first_goal(&w);
    let h = Harness::new(w);
    let s = h.open(&goal, "m01", None, None).await;
    Step::User("Please cancel booking ABCD1234.".into())
        .run(&h, &s)
        .await;
    let bogus = ApiCall {
        api: "hotel_teleport".into(),
        instruction: None,
        args: vec![],
    };
    let (status, body) = h
        .post(&s.path("/api"), Some(&s.agent), json!({ "call": bogus }))
        .await;
    assert_eq!(
        (status, body["error"].as_str()),
        (StatusCode::BAD_REQUEST, Some("schema"))
    );
    let (status, _) = h
        .post(
            &s.path("/api"),
            Some(&s.agent),
            json!({ "call": { "api": 3 } }),
        )
        .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let cancel = ApiCall {
        api: "hotel_book_cancel".into(),
        instruction: None,
        args: vec![Argument {
            attribute: "reference num.".into(),
            value: "ABCD1234".into(),
            span: None,
        }],
    };
    let (status, body) = h
        .post(&s.path("/api"), Some(&s.agent), json!({ "call": cancel }))
        .await;
    assert_eq!(
        (status, body["error"].as_str()),
        (StatusCode::UNPROCESSABLE_ENTITY, Some("engine")),
        "{body}"
    );
    let (_, events) = h.get(&s.path("/events"), Some(&s.agent)).await;
    let kinds: Vec<&str> = events["events"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["event"]["type"].as_str().unwrap())
        .collect();
    assert_eq!(kinds, ["created", "user_message", "api_called"]);
    let (_, view) = h.get(&s.path(""), Some(&s.agent)).await;
    assert!(view["calls"][0]["error"]
        .as_str()
        .unwrap()
        .contains("ABCD1234"));
}

#[tokio::test]
async fn open_checklist_rows_block_finalization_without_a_trace() {
    let w = world();
    let (sim, seed) = simulated(&w, 6, 0);
    let steps = script(&w, &sim);
    let h = Harness::new(w);
    let s = h
        .open(
            sim.dialogue.goal.id.as_str(),
            "m01",
            None,
            Some(agent_seed(seed)),
        )
        .await;
    let body_turns = steps
        .iter()
        .take_while(|s| !matches!(s, Step::Checklist(_)));
    for step in body_turns {
        step.run(&h, &s).await;
    }
    let before = h.get(&s.path("/events"), Some(&s.user)).await.1["events"]
        .as_array()
        .unwrap()
        .len();
    let outcome = Step::Finalize.run(&h, &s).await;
    assert_eq!(outcome["status"], "incomplete");
    assert!(!outcome["open_items"].as_array().unwrap().is_empty());
    let after = h.get(&s.path("/events"), Some(&s.user)).await.1["events"]
        .as_array()
        .unwrap()
        .len();
    assert_eq!(before, after);
    assert_eq!(
        h.get(&s.path("/export"), Some(&s.user)).await.0,
        StatusCode::CONFLICT
    );
    let (status, _) = h
        .post(
            &s.path("/checklist"),
            Some(&s.user),
            json!({ "item": 0, "value": "x" }),
        )
        .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, _) = h
        .post(
            &s.path("/checklist"),
            Some(&s.user),
            json!({ "item": 99, "checked": true }),
        )
        .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn failed_dialogue_is_reopened_and_repaired() {
    let w = world();
    let (sim, seed) = simulated(&w, 6, 0);
    let all = script(&w, &sim);
    let h = Harness::new(w);
    let s = h
        .open(
            sim.dialogue.goal.id.as_str(),
            "m01",
            Some("repair"),
            Some(agent_seed(seed)),
        )
        .await;
    Step::User("Hello.".into()).run(&h, &s).await;
    Step::Agent("Hello, how can I help?".into())
        .run(&h, &s)
        .await;
    for step in all.iter().filter(|s| matches!(s, Step::Checklist(_))) {
        step.run(&h, &s).await;
    }
    let outcome = Step::Finalize.run(&h, &s).await;
    assert_eq!(outcome["status"], "failed");
    assert!(outcome["violations"]
        .as_array()
        .unwrap()
        .iter()
        .any(|v| v.as_str().unwrap().contains("never expresses")));
    assert_eq!(
        h.post(
            &s.path("/messages"),
            Some(&s.user),
            json!({ "text": "More." })
        )
        .await
        .0,
        StatusCode::CONFLICT
    );
    let reopened = h.post(&s.path("/reopen"), Some(&s.user), json!({})).await;
    assert_eq!(reopened.0, StatusCode::OK);
    assert_eq!(
        h.post(&s.path("/reopen"), Some(&s.user), json!({})).await.0,
        StatusCode::CONFLICT
    );
    let wants: Vec<String> = sim
        .dialogue
        .goal
        .constraints
        .iter()
        .map(|c| c.value.clone())
        .collect();
    Step::User(format!("I want {}.", wants.join(" and ")))
        .run(&h, &s)
        .await;
    Step::Agent("Noted.".into()).run(&h, &s).await;
    assert_eq!(Step::Finalize.run(&h, &s).await["status"], "completed");
    let (status, export) = h.get(&s.path("/export"), Some(&s.agent)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(export["dialogue"]["turns"].as_array().unwrap().len(), 2);
    assert_eq!(export["dialogue"]["turns"][0]["flagged_for_review"], true);
    let (_, corpus) = h.get("/v1/corpus", None).await;
    assert_eq!(corpus["dialogues"].as_array().unwrap().len(), 1);
}

#[tokio::test]
async fn requests_are_versioned_and_unknown_resources_are_not_found() {
    let w = world();
    let goal = first_goal(&w);
    let h = Harness::new(w);
    let (status, body) = h
        .post(
            "/v1/sessions",
            None,
            json!({ "version": 2, "goal": goal, "manual": "m01" }),
        )
        .await;
    assert_eq!(
        (status, body["error"].as_str()),
        (StatusCode::BAD_REQUEST, Some("version"))
    );
    let (status, _) = h
        .post(
            "/v1/sessions",
            None,
            json!({ "goal": "nope", "manual": "m01" }),
        )
        .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = h
        .post(
            "/v1/sessions",
            None,
            json!({ "goal": goal, "manual": "m99" }),
        )
        .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = h
        .raw(
            Method::POST,
            "/v1/sessions",
            None,
            Some(json!("not an object")),
        )
        .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(h.get("/v1/nowhere", None).await.0, StatusCode::NOT_FOUND);
    let (_, goals) = h.get("/v1/goals", None).await;
    assert_eq!(goals["goals"].as_array().unwrap().len(), 40);
    let (_, manuals) = h.get("/v1/manuals", None).await;
    assert_eq!(manuals["manuals"].as_array().unwrap().len(), 14);
    let (_, health) = h.get("/v1/health", None).await;
    assert_eq!(health["status"], "ok");
}
