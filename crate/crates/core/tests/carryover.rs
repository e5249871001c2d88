use std::collections::{BTreeMap, BTreeSet};

use mgdial_core::dbgen::{self, DbConfig};
use mgdial_core::engine::{execute_with, EngineConfig, SessionDbState};
use mgdial_core::model::{ApiCall, ApiResult, ApiSpec, Argument, Database, Domain, Operation};
use mgdial_core::{catalog, seed, text};
use rand::seq::SliceRandom;
use rand::Rng;

const SEQUENCES: usize = 1000;

fn find_apis(db: &Database) -> BTreeMap<Domain, Vec<&ApiSpec>> {
    let mut out: BTreeMap<Domain, Vec<&ApiSpec>> = BTreeMap::new();
    for a in db
        .apis
        .iter()
        .filter(|a| a.operation == Operation::Find && !db.entities(&a.domain).is_empty())
    {
        out.entry(a.domain.clone()).or_default().push(a);
    }
    out
}

fn key_of(domain: &Domain) -> &'static str {
    catalog::profile(domain.as_str()).map(|p| p.key).unwrap()
}

/// Keys of the entities whose attributes equal every merged constraint.
fn brute_force(
    db: &Database,
    domain: &Domain,
    merged: &BTreeMap<String, String>,
) -> BTreeSet<String> {
    db.entities(domain)
        .iter()
        .filter(|e| {
            merged.iter().all(|(a, v)| {
                e.attributes
                    .iter()
                    .any(|(k, x)| k.as_str() == a && text::normalize(x) == text::normalize(v))
            })
        })
        .map(|e| {
            e.attributes
                .iter()
                .find(|(k, _)| k.as_str() == key_of(domain))
                .unwrap()
                .1
                .clone()
        })
        .collect()
}

#[test]
fn sequential_find_calls_equal_one_merged_query() {
    let db = dbgen::generate(21, &DbConfig::uniform(20));
    let apis = find_apis(&db);
    let domains: Vec<&Domain> = apis.keys().collect();
    assert!(domains.len() >= 4);
    for d in &domains {
        assert_eq!(db.entities(d).len(), 20);
    }
    let config = EngineConfig {
        find_limit: usize::MAX,
    };
    let mut rng = seed::rng(99);
    let mut calls = 0;
    let mut nonempty = 0;
    for n in 0..SEQUENCES {
        let mut state = SessionDbState::new(n as u64);
        let mut merged: BTreeMap<Domain, BTreeMap<String, String>> = BTreeMap::new();
        let len = rng.gen_range(1..=6);
        for _ in 0..len {
            let domain = *domains[..2 + n % 3].choose(&mut rng).unwrap();
            let spec = *apis[domain].choose(&mut rng).unwrap();
            let entities = db.entities(domain);
            let args: Vec<Argument> = spec
                .inputs
                .iter()
                .map(|input| {
                    let source = if rng.gen_bool(0.7) {
                        &entities[0..3]
                    } else {
                        entities
                    };
                    let e = source.choose(&mut rng).unwrap();
                    let value = e
                        .attributes
                        .get(&input.attribute)
                        .cloned()
                        .unwrap_or_default();
                    Argument {
                        attribute: input.attribute.clone(),
                        value,
                        span: None,
                    }
                })
                .collect();
            let call = ApiCall {
                api: spec.id.clone(),
                instruction: None,
                args: args.clone(),
            };
            let result = execute_with(&call, &db, &mut state, &config).unwrap();
            let m = merged.entry(domain.clone()).or_default();
            for a in &args {
                m.insert(a.attribute.to_string(), a.value.clone());
            }
            let expected = brute_force(&db, domain, m);
            let ApiResult::Find {
                count,
                entities: got,
            } = result
            else {
                panic!("find returned {result:?}")
            };
            assert!(spec.outputs.iter().any(|o| o.as_str() == key_of(domain)));
            let got: BTreeSet<String> = got
                .iter()
                .map(|e| e.get(key_of(domain)).unwrap().to_string())
                .collect();
            assert_eq!(count, expected.len(), "sequence {n}: {m:?}");
            assert_eq!(got, expected, "sequence {n}: {m:?}");
            let carried: BTreeMap<String, String> = state
                .carryover
                .get(domain)
                .unwrap()
                .iter()
                .map(|(k, v)| (k.to_string(), v.clone()))
                .collect();
            assert_eq!(&carried, m);
            calls += 1;
            nonempty += usize::from(count > 0);
        }
    }
    assert!(calls >= SEQUENCES);
    assert!(
        nonempty * 4 > calls,
        "too few nonempty results: {nonempty}/{calls}"
    );
}

#[test]
fn later_arguments_override_carried_values() {
    let db = dbgen::generate(21, &DbConfig::uniform(20));
    let restaurant = Domain::from("restaurant");
    let by_area = catalog::search_api_id("restaurant", &["area"]);
    let mut state = SessionDbState::new(1);
    let call = |area: &str| ApiCall {
        api: by_area.clone(),
        instruction: None,
        args: vec![Argument {
            attribute: "area".into(),
            value: area.into(),
            span: None,
        }],
    };
    execute_with(&call("north"), &db, &mut state, &EngineConfig::default()).unwrap();
    execute_with(&call("south"), &db, &mut state, &EngineConfig::default()).unwrap();
    assert_eq!(
        state
            .carryover
            .get(&restaurant)
            .unwrap()
            .get(&mgdial_core::model::AttributeName::from("area"))
            .map(String::as_str),
        Some("south")
    );
    assert!(state.carryover.get(&Domain::from("hotel")).is_none());
}
