mod common;

use axum::http::StatusCode;
use common::{simulated, world, Harness};
use mgdial_core::model::codec::SCHEMA_VERSION;
use serde_json::json;

fn small_world() -> serde_json::Value {
    json!({ "seed": 3, "db": { "entity_counts": { "restaurant": 5, "hotel": 5, "attraction": 5, "train": 5 } } })
}

#[tokio::test]
async fn gen_db_is_deterministic_in_the_seed() {
    let h = Harness::new(world());
    let (status, a) = h
        .post("/v1/ops/gen-db", None, json!({ "world": small_world() }))
        .await;
    assert_eq!(status, StatusCode::OK, "{a}");
    let (_, b) = h
        .post("/v1/ops/gen-db", None, json!({ "world": small_world() }))
        .await;
    assert_eq!(a, b);
    assert_eq!(
        a["database"]["entities"]["hotel"].as_array().unwrap().len(),
        5
    );
    let (_, c) = h
        .post(
            "/v1/ops/gen-db",
            None,
            json!({ "world": { "seed": 4, "db": small_world()["db"] } }),
        )
        .await;
    assert_ne!(a, c);
}

#[tokio::test]
async fn gen_goals_and_a_small_corpus() {
    let h = Harness::new(world());
    let (status, goals) = h
        .post(
            "/v1/ops/gen-goals",
            None,
            json!({ "world": small_world(), "count": 12 }),
        )
        .await;
    assert_eq!(status, StatusCode::OK, "{goals}");
    assert_eq!(goals["goals"]["goals"].as_array().unwrap().len(), 12);
    let config = json!({ "splits": { "train": 6, "dev": 3, "test": 3 } });
    let (status, out) = h
        .post(
            "/v1/ops/gen-corpus",
            None,
            json!({ "world": small_world(), "goals": goals["goals"], "config": config }),
        )
        .await;
    assert_eq!(status, StatusCode::OK, "{out}");
    let manifest = &out["corpus"]["manifest"];
    assert_eq!(manifest["schema_version"], SCHEMA_VERSION);
    let done = out["stats"]["dialogues"].as_u64().unwrap()
        + manifest["failed"].as_array().unwrap().len() as u64;
    assert_eq!(done, 12);
    for d in out["corpus"]["test"].as_array().unwrap() {
        let m: u32 = d["dialogue"]["manual"].as_str().unwrap()[1..]
            .parse()
            .unwrap();
        assert!(m >= 11, "test dialogue uses train manual m{m}");
    }
    let (status, err) = h
        .post(
            "/v1/ops/gen-corpus",
            None,
            json!({ "world": small_world(), "goals": { "goals": [] }, "config": config }),
        )
        .await;
    assert_eq!(
        (status, err["error"].as_str()),
        (StatusCode::UNPROCESSABLE_ENTITY, Some("operation"))
    );
}

#[tokio::test]
async fn bundled_manuals_pass_the_paraphrase_gate() {
    let h = Harness::new(world());
    let (status, out) = h.post("/v1/ops/check-paraphrases", None, json!({})).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(out["passed"], true);
    assert!(!out["families"].as_array().unwrap().is_empty());
}

#[tokio::test]
async fn annotate_recovers_the_simulated_spans() {
    let w = world();
    let (sim, _) = simulated(&w, 6, 0);
    let mut stripped = sim.dialogue.clone();
    for t in stripped.turns.iter_mut() {
        t.argument_annotations.clear();
    }
    let h = Harness::new(world());
    let (status, out) = h
        .post(
            "/v1/ops/annotate",
            None,
            json!({ "dialogue": stripped, "calls": sim.calls }),
        )
        .await;
    assert_eq!(status, StatusCode::OK, "{out}");
    assert_eq!(
        out["dialogue"],
        serde_json::to_value(&sim.dialogue).unwrap()
    );
    assert!(out["report"]["unmatched"].as_array().unwrap().is_empty());
}

#[tokio::test]
async fn eval_rejects_train_dialogues_on_held_out_manuals() {
    let w = world();
    let (sim, _) = simulated(&w, 6, 0);
    let mut leaked = sim.dialogue.clone();
    leaked.manual = "m12".into();
    let data = json!({ "train": [leaked], "dev": [], "test": [sim.dialogue] });
    let h = Harness::new(world());
    let (status, out) = h
        .post(
            "/v1/ops/eval",
            None,
            json!({ "world": { "seed": 7 }, "data": data }),
        )
        .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(out["message"].as_str().unwrap().contains("m12"), "{out}");
}
