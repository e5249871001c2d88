//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use mgdial_client::{credentials, Client, Credentials};
use mgdial_core::catalog::lang::LanguagePack;
use mgdial_core::dbgen::{self, DbConfig};
use mgdial_core::engine::{execute_with, EngineConfig, SessionDbState};
use mgdial_core::eval::{
    fit_matcher, run_subtask_eval, sweep_data_size, EvalConfig, EvalData, EvalError, PredictorKind,
};
use mgdial_core::goals::{sample_goals, Checklist, ChecklistItem, GoalConfig};
use mgdial_core::manual_kit::{bundled_manuals, gate_manuals, paraphrase_gate};
use mgdial_core::metrics::{aer, sentence_bleu, set_prf, Prf};
use mgdial_core::model::validate::{Context, Validate};
use mgdial_core::model::{
    ApiCall, ApiResult, Argument, AttributeMap, Database, Dialogue, ManualId, Operation, Span,
    Speaker, Utterance,
};
use mgdial_core::nlu::annotate::fuzzy_annotate;
use mgdial_core::nlu::codec::{alphabet, decode, encode, history_tokens, IndexedSpan};
use mgdial_core::nlu::values::ValueIndex;
use mgdial_core::simulator::{
    corpus_stats, generate_corpus, simulate, AgentPolicy, Corpus, CorpusConfig, SimConfig,
    SimulatedDialogue, SplitSizes,
};
use mgdial_core::{catalog, seed, text};
use mgdial_protocol::session::{ChecklistUpdate, CreateSession, FinalStatus};
use mgdial_service::world::World;
use mgdial_service::AppState;
use rand::seq::SliceRandom;
use rand::Rng;

const FIXTURE: &str = concat!(
    env!("CARGO_MANIFEST_DIR"),
    "/../service/tests/fixtures/six_turn_export.json"
);

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn corpus(db: &Database, master: u64, splits: SplitSizes) -> Corpus {
    let config = CorpusConfig {
        splits,
        ..Default::default()
    };
    let goals = sample_goals(
        db,
        seed::derive(master, "goals"),
        splits.total(),
        &GoalConfig::default(),
    )
    .unwrap();
    generate_corpus(
        db,
        &bundled_manuals(),
        &goals,
        &LanguagePack::english(),
        &config,
        seed::derive(master, "corpus"),
    )
    .unwrap()
}

fn oracle_loop(db: &Database, small: &Corpus, elapsed: Duration) -> Outcome {
    let start = Instant::now();
    let manuals: BTreeMap<ManualId, _> = bundled_manuals()
        .into_iter()
        .map(|m| (m.id.clone(), m))
        .collect();
    let dialogues: Vec<&Dialogue> = small.all().map(|s| &s.dialogue).collect();
    ensure(
        small.manifest.failed.is_empty(),
        format!("{} dialogues hit the turn cap", small.manifest.failed.len()),
    )?;
    ensure(
        dialogues.len() == 200,
        format!("{} dialogues", dialogues.len()),
    )?;
    ensure(
        dialogues.iter().all(|d| d.completed && d.turns.len() <= 20),
        "incomplete or over-long dialogue",
    )?;
    for d in &dialogues {
        let v = d.validate(&Context::with_db(db).manual(&manuals[&d.manual]));
        if let Some(first) = v.first() {
            return Err(format!("{}: {first}", d.id));
        }
    }
    let data = EvalData::from_corpus(small, &bundled_manuals(), ValueIndex::build(db))
        .map_err(|e| e.to_string())?;
    let config = EvalConfig {
        predictor: PredictorKind::Oracle,
        dump_turns: false,
        ..Default::default()
    };
    let report = run_subtask_eval(&data, &config, 1).map_err(|e| e.to_string())?;
    let m = report.primary_matching();
    let t = &report.tagging[0];
    ensure(
        m.accuracy == 1.0 && m.f1 == 1.0 && t.f1 == 1.0,
        format!("acc {} f1 {} tag {}", m.accuracy, m.f1, t.f1),
    )?;
    let total = elapsed + start.elapsed();
    ensure(total < Duration::from_secs(60), format!("took {total:?}"))?;
    Ok(format!(
        "200/200 completed, max {} turns, accuracy=F1=tagging F1=1.0, {total:.1?}",
        dialogues.iter().map(|d| d.turns.len()).max().unwrap()
    ))
}

fn carryover() -> Outcome {
    let db = dbgen::generate(21, &DbConfig::uniform(20));
    let mut apis: BTreeMap<_, Vec<_>> = BTreeMap::new();
    for a in db
        .apis
        .iter()
        .filter(|a| a.operation == Operation::Find && !db.entities(&a.domain).is_empty())
    {
        apis.entry(a.domain.clone()).or_default().push(a);
    }
    let domains: Vec<_> = apis.keys().cloned().collect();
    let key = |d: &mgdial_core::model::Domain| catalog::profile(d.as_str()).unwrap().key;
    let config = EngineConfig {
        find_limit: usize::MAX,
    };
    let mut rng = seed::rng(99);
    let mut calls = 0;
    for n in 0..1000 {
        let mut state = SessionDbState::new(n);
        let mut merged: BTreeMap<_, BTreeMap<String, String>> = BTreeMap::new();
        for _ in 0..rng.gen_range(1..=6) {
            let domain = domains.choose(&mut rng).unwrap();
            let spec = *apis[domain].choose(&mut rng).unwrap();
            let entities = db.entities(domain);
            let args: Vec<Argument> = spec
                .inputs
                .iter()
                .map(|i| {
                    let e = entities[..if rng.gen_bool(0.7) { 3 } else { entities.len() }]
                        .choose(&mut rng)
                        .unwrap();
                    Argument {
                        attribute: i.attribute.clone(),
                        value: e.attributes[&i.attribute].clone(),
                        span: None,
                    }
                })
                .collect();
            let call = ApiCall {
                api: spec.id.clone(),
                instruction: None,
                args: args.clone(),
            };
            let result =
                execute_with(&call, &db, &mut state, &config).map_err(|e| e.to_string())?;
            let m = merged.entry(domain.clone()).or_default();
            m.extend(
                args.iter()
                    .map(|a| (a.attribute.to_string(), a.value.clone())),
            );
            let expected: BTreeSet<String> = entities
                .iter()
                .filter(|e| {
                    m.iter().all(|(a, v)| {
                        e.attributes.iter().any(|(k, x)| {
                            k.as_str() == a && text::normalize(x) == text::normalize(v)
                        })
                    })
                })
                .map(|e| {
                    e.attributes
                        .iter()
                        .find(|(k, _)| k.as_str() == key(domain))
                        .unwrap()
                        .1
                        .clone()
                })
                .collect();
            let ApiResult::Find { entities: got, .. } = result else {
                return Err("find returned another result".into());
            };
            let got: BTreeSet<String> = got
                .iter()
                .map(|e| e.get(key(domain)).unwrap().to_string())
                .collect();
            ensure(
                got == expected,
                format!("sequence {n} differs from the merged query"),
            )?;
            calls += 1;
        }
    }
    Ok(format!(
        "1000/1000 sequences ({calls} calls) equal the merged brute-force result"
    ))
}

fn codec() -> Outcome {
    const WORDS: [&str; 8] = ["alpha", "b", "café", "d3", "echo", "fox", "über", "x"];
    let mut rng = seed::rng(3);
    for case in 0..10_000 {
        let max_args = rng.gen_range(1..=3);
        let texts: Vec<String> = (0..rng.gen_range(1..=4))
            .map(|_| {
                (0..rng.gen_range(1..=10))
                    .map(|_| *WORDS.choose(&mut rng).unwrap())
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect();
        let history: Vec<Utterance<'_>> = texts
            .iter()
            .enumerate()
            .map(|(i, t)| Utterance {
                turn: i / 2,
                speaker: if i % 2 == 0 {
                    Speaker::User
                } else {
                    Speaker::Agent
                },
                text: t,
            })
            .collect();
        let tokens = history_tokens(&history);
        let mut spans: Vec<IndexedSpan> = Vec::new();
        let mut i = 0;
        while i < tokens.len() {
            let len = rng.gen_range(1..=3);
            let end = i + len;
            let same_utterance = end <= tokens.len()
                && tokens[i..end].iter().all(|t| {
                    t.span.turn == tokens[i].span.turn && t.span.speaker == tokens[i].span.speaker
                });
            if same_utterance && rng.gen_bool(0.3) {
                let (a, b) = (tokens[i].span, tokens[end - 1].span);
                spans.push((rng.gen_range(1..=max_args), Span { end: b.end, ..a }));
                i = end;
            } else {
                i += 1;
            }
        }
        let seq = encode(&spans, &tokens, max_args).map_err(|e| format!("case {case}: {e}"))?;
        let sigma = alphabet(max_args);
        ensure(
            sigma.len() == 1 + 2 * max_args && seq.tags.iter().all(|t| sigma.contains(t)),
            format!("case {case}: alphabet"),
        )?;
        ensure(
            decode(&seq) == spans,
            format!("case {case}: decode(encode) differs"),
        )?;
    }
    Ok("10000/10000 identity, |alphabet| = 1+2k for k in 1..=3".into())
}

fn annotator(corpora: &[&Corpus]) -> Outcome {
    let (mut args, mut exact) = (0, 0);
    for sim in corpora.iter().flat_map(|c| c.all()) {
        let report = fuzzy_annotate(&sim.dialogue.turns, &sim.calls);
        ensure(
            report.unmatched.is_empty(),
            format!("{}: unmatched arguments", sim.dialogue.id),
        )?;
        args += sim
            .calls
            .iter()
            .filter(|c| c.error.is_none())
            .map(|c| c.call.args.len())
            .sum::<usize>();
        for t in &sim.dialogue.turns {
            let found = report.for_turn(t.index);
            ensure(
                found == t.argument_annotations,
                format!("{} turn {}: spans differ", sim.dialogue.id, t.index),
            )?;
            exact += found.len();
        }
    }
    ensure(
        args == exact,
        format!("{exact} of {args} arguments recovered"),
    )?;
    Ok(format!(
        "{exact}/{args} logged arguments recovered with exact spans"
    ))
}

fn metrics() -> Outcome {
    let hand = (5.0 / 6.0 * 3.0 / 5.0 * 1.0 / 4.0 * 1e-9f64).powf(0.25);
    let got = sentence_bleu("the cat sat on the mat", &["the cat is on the mat"]);
    ensure((got - hand).abs() < 1e-9, format!("BLEU {got} vs {hand}"))?;

    let mut x: u64 = 0x9E37_79B9_7F4A_7C15;
    let mut sets = || -> BTreeSet<String> {
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        (0..8)
            .filter(|i| x >> (i * 3) & 7 == 0)
            .map(|i| format!("f{i}"))
            .collect()
    };
    let (pred, gold): (Vec<_>, Vec<_>) = (0..50).map(|_| (sets(), sets())).unzip();
    let mut reference = [0.0; 3];
    for (a, b) in pred.iter().zip(&gold) {
        let tp = a.intersection(b).count() as f64;
        let (p, r) = match (a.len(), b.len()) {
            (0, 0) => (1.0, 1.0),
            (na, nb) => (
                if na > 0 { tp / na as f64 } else { 0.0 },
                if nb > 0 { tp / nb as f64 } else { 0.0 },
            ),
        };
        let f = if p + r > 0.0 {
            2.0 * p * r / (p + r)
        } else {
            0.0
        };
        for (acc, v) in reference.iter_mut().zip([p, r, f]) {
            *acc += v / 50.0;
        }
    }
    let got = set_prf(&pred, &gold).map_err(|e| e.to_string())?.macro_avg;
    let diff = [
        got.precision - reference[0],
        got.recall - reference[1],
        got.f1 - reference[2],
    ];
    ensure(
        diff.iter().all(|d| d.abs() < 1e-12),
        format!("PRF differs by {diff:?}"),
    )?;
    ensure(
        set_prf(&gold, &gold).map_err(|e| e.to_string())?.macro_avg == Prf::PERFECT,
        "gold vs gold PRF",
    )?;
    ensure(
        sentence_bleu("the cat sat on the mat", &["the cat sat on the mat"]) == 1.0,
        "gold vs gold BLEU",
    )?;

    let booking = |details: &[(&str, &str)]| ApiResult::Add {
        reference: "7F3A21C0".into(),
        details: details
            .iter()
            .map(|(k, v)| ((*k).into(), (*v).to_string()))
            .collect::<AttributeMap>(),
    };
    let full = booking(&[("name", "River Bar"), ("day", "Monday")]);
    let rates = [
        aer(
            &["Booked River Bar on Monday, reference 7F3A21C0."],
            &[vec![full.clone()]],
        ),
        aer(&["Sorry, something went wrong."], &[vec![full]]),
        aer(
            &["Done, your number is 7F3A21C0."],
            &[vec![booking(&[("day", "Monday")])]],
        ),
    ]
    .into_iter()
    .map(|r| r.map(|r| r.rate).map_err(|e| e.to_string()))
    .collect::<Result<Vec<_>, _>>()?;
    ensure(rates == [0.0, 1.0, 0.5], format!("AER {rates:?}"))?;
    Ok("BLEU within 1e-9, PRF within 1e-12, gold=1.0, AER 0/1/0.5".into())
}

fn gate() -> Outcome {
    let start = Instant::now();
    let same =
        paraphrase_gate(&["if the user wants a table, book it"; 4]).map_err(|e| e.to_string())?;
    ensure(
        same.self_bleu == 1.0 && !same.accepted,
        format!("identical set: {}", same.self_bleu),
    )?;
    let disjoint = [
        "alpha beta gamma delta",
        "epsilon zeta eta theta",
        "iota kappa lambda mu",
        "nu xi omicron pi",
    ];
    let report = paraphrase_gate(&disjoint).map_err(|e| e.to_string())?;
    ensure(
        report.accepted,
        format!("disjoint set: {}", report.self_bleu),
    )?;
    let manuals = bundled_manuals();
    let forward = gate_manuals(&manuals).map_err(|e| e.to_string())?;
    let mut reversed = manuals.clone();
    reversed.reverse();
    let backward = gate_manuals(&reversed).map_err(|e| e.to_string())?;
    let decisions = |g: &[mgdial_core::manual_kit::FamilyGate]| -> Vec<_> {
        g.iter()
            .map(|f| (f.family.clone(), f.report.accepted))
            .collect()
    };
    ensure(
        decisions(&forward) == decisions(&backward),
        "decisions depend on manual order",
    )?;
    ensure(
        forward.iter().all(|f| f.report.accepted),
        "a bundled family is rejected",
    )?;
    let took = start.elapsed();
    ensure(took < Duration::from_secs(5), format!("took {took:?}"))?;
    Ok(format!(
        "identical rejected, disjoint accepted, {} families order-invariant, {took:.1?}",
        forward.len()
    ))
}

fn patterns(db: &Database, full: &Corpus) -> Outcome {
    let data = EvalData::from_corpus(full, &bundled_manuals(), ValueIndex::build(db))
        .map_err(|e| e.to_string())?;
    let config = EvalConfig {
        dump_turns: false,
        ..Default::default()
    };
    let eval_seed = seed::derive(7, "eval");
    let report = run_subtask_eval(&data, &config, eval_seed).map_err(|e| e.to_string())?;
    let (with, without) = (report.tagging[0].f1, report.tagging.last().unwrap().f1);
    ensure(
        with - without >= 0.10,
        format!("(a) tagging F1 {with:.4} vs {without:.4}"),
    )?;
    let dev_recall = |i: usize| report.matching[i].dev.map(|p| p.recall).unwrap_or(f64::NAN);
    let (f1_row, rec_row) = (dev_recall(0), dev_recall(1));
    ensure(
        rec_row >= f1_row,
        format!("(b) dev recall {rec_row:.4} < {f1_row:.4}"),
    )?;
    let curve = sweep_data_size(&data, &[0.2, 0.4, 0.6, 0.8, 1.0], &config, eval_seed)
        .map_err(|e| e.to_string())?;
    let f1s: Vec<f64> = curve.points.iter().map(|p| p.matching.f1).collect();
    ensure(
        f1s.windows(2).all(|w| w[1] >= w[0] - 0.02),
        format!("(c) curve {f1s:.4?}"),
    )?;
    let mut train: Vec<&Dialogue> = data.train.iter().collect();
    train.push(&data.test[0]);
    let err = fit_matcher(
        &train,
        &data.partition,
        &data.manuals,
        &data.values,
        &config,
        1,
    )
    .err();
    ensure(
        matches!(err, Some(EvalError::Leakage { .. })),
        "(d) training on a held-out manual did not abort",
    )?;
    Ok(format!(
        "(a) {:.2} vs {:.2} (b) {:.4} >= {:.4} (c) {} (d) aborted",
        100.0 * with,
        100.0 * without,
        rec_row,
        f1_row,
        f1s.iter()
            .map(|f| format!("{:.2}", 100.0 * f))
            .collect::<Vec<_>>()
            .join(" ")
    ))
}

fn stats(full: &Corpus, elapsed: Duration) -> Outcome {
    let s = corpus_stats(full.all().map(|d| &d.dialogue));
    ensure(s.dialogues == 1100, format!("{} dialogues", s.dialogues))?;
    let bands = [
        ("turns", s.mean_turns, 4.0, 8.0),
        ("instructions/turn", s.mean_instructions_per_turn, 1.0, 2.0),
        ("args/turn", s.mean_arguments_per_turn, 0.8, 1.6),
        ("no-instruction share", s.no_instruction_share, 0.10, 0.30),
    ];
    for (name, v, lo, hi) in bands {
        ensure(
            (lo..=hi).contains(&v),
            format!("{name} {v:.3} outside [{lo}, {hi}]"),
        )?;
    }
    ensure(
        elapsed < Duration::from_secs(120),
        format!("took {elapsed:?}"),
    )?;
    Ok(format!(
        "turns {:.2}, instructions {:.2}, args {:.2}, no-instruction {:.1}%, {elapsed:.1?}",
        s.mean_turns,
        s.mean_instructions_per_turn,
        s.mean_arguments_per_turn,
        100.0 * s.no_instruction_share
    ))
}

fn fixture_world() -> World {
    World::sampled(7, DbConfig::default(), 40, &GoalConfig::default()).unwrap()
}

fn six_turn_dialogue(world: &World, skip: usize) -> (SimulatedDialogue, u64) {
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
            (d.dialogue.completed && d.dialogue.turns.len() == 6).then_some((d, s))
        })
        .nth(skip)
        .unwrap()
}

struct Scripted {
    sim: SimulatedDialogue,
    seed: u64,
    label: &'static str,
}

impl Scripted {
    async fn open(&self, client: &Client) -> Result<(Credentials, Credentials), String> {
        let req = CreateSession {
            goal: self.sim.dialogue.goal.id.clone(),
            manual: ManualId::from("m01"),
            label: Some(self.label.into()),
            seed: Some(seed::derive(self.seed, "agent")),
        };
        Ok(credentials(
            &client
                .create_session(&req)
                .await
                .map_err(|e| e.to_string())?,
        ))
    }

    /// Performs step `k`; returns false once the script is exhausted.
    async fn step(
        &self,
        client: &Client,
        user: &Credentials,
        agent: &Credentials,
        world: &World,
        k: usize,
    ) -> Result<bool, String> {
        let per_turn: Vec<usize> = self
            .sim
            .dialogue
            .turns
            .iter()
            .map(|t| 3 + t.api_calls.len())
            .collect();
        let mut k = k;
        let err = |e: mgdial_client::ClientError| e.to_string();
        for (t, n) in self.sim.dialogue.turns.iter().zip(&per_turn) {
            if k < *n {
                match k {
                    0 => {
                        client
                            .send_message(user, &t.user_utterance)
                            .await
                            .map_err(err)?;
                    }
                    1 => {
                        client
                            .select_instructions(agent, &t.selected_instructions)
                            .await
                            .map_err(err)?;
                    }
                    k if k < n - 1 => {
                        client
                            .call_api(agent, &t.api_calls[k - 2])
                            .await
                            .map_err(err)?;
                    }
                    _ => {
                        client
                            .send_message(agent, &t.agent_response)
                            .await
                            .map_err(err)?;
                    }
                }
                return Ok(true);
            }
            k -= n;
        }
        let rows = Checklist::for_goal(&world.goals[&self.sim.dialogue.goal.id]).items;
        if k < rows.len() {
            let update = match &rows[k] {
                ChecklistItem::Check { .. } => ChecklistUpdate {
                    item: k,
                    checked: Some(true),
                    value: None,
                },
                ChecklistItem::Fill {
                    domain, attribute, ..
                } => {
                    let filled = self
                        .sim
                        .ledger
                        .requests
                        .iter()
                        .find(|r| r.request.domain == *domain && r.request.attribute == *attribute)
                        .and_then(|r| r.filled.clone());
                    ChecklistUpdate {
                        item: k,
                        checked: None,
                        value: Some(filled.unwrap_or_else(|| "noted".into())),
                    }
                }
            };
            client.update_checklist(user, &update).await.map_err(err)?;
            return Ok(true);
        }
        if k == rows.len() {
            let done = client.finalize(user).await.map_err(err)?;
            ensure(
                done.status == FinalStatus::Completed,
                format!("{} finalized as {:?}", self.label, done.status),
            )?;
            return Ok(true);
        }
        Ok(false)
    }
}

async fn local_server(world: World) -> (Client, tokio::sync::oneshot::Sender<()>) {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let (stop, rx) = tokio::sync::oneshot::channel::<()>();
    tokio::spawn(mgdial_service::serve(
        listener,
        AppState::new(world),
        async {
            rx.await.ok();
        },
    ));
    (Client::new(format!("http://{addr}")), stop)
}

async fn replay() -> Outcome {
    let world = fixture_world();
    let (a, seed_a) = six_turn_dialogue(&world, 0);
    let (b, seed_b) = six_turn_dialogue(&world, 1);
    let fixture = Scripted {
        sim: a.clone(),
        seed: seed_a,
        label: "fixture-six-turns",
    };
    let pair = [
        Scripted {
            sim: a,
            seed: seed_a,
            label: "a",
        },
        Scripted {
            sim: b,
            seed: seed_b,
            label: "b",
        },
    ];

    let mut alone = Vec::new();
    for s in std::iter::once(&fixture).chain(&pair) {
        let (client, stop) = local_server(fixture_world()).await;
        let (user, agent) = s.open(&client).await?;
        let mut k = 0;
        while s.step(&client, &user, &agent, &world, k).await? {
            k += 1;
        }
        alone.push(
            client
                .export_bytes(&user)
                .await
                .map_err(|e| e.to_string())?,
        );
        stop.send(()).ok();
    }
    let expected = std::fs::read(FIXTURE).map_err(|e| format!("{FIXTURE}: {e}"))?;
    ensure(alone[0] == expected, "export differs from the fixture")?;

    let (client, stop) = local_server(fixture_world()).await;
    let (ua, aa) = pair[0].open(&client).await?;
    let (ub, ab) = pair[1].open(&client).await?;
    let mut k = 0;
    loop {
        let more_b = pair[1].step(&client, &ub, &ab, &world, k).await?;
        let more_a = pair[0].step(&client, &ua, &aa, &world, k).await?;
        if !more_a && !more_b {
            break;
        }
        k += 1;
    }
    let (ea, eb) = (
        client.export_bytes(&ua).await.map_err(|e| e.to_string())?,
        client.export_bytes(&ub).await.map_err(|e| e.to_string())?,
    );
    stop.send(()).ok();
    ensure(
        ea == alone[1] && eb == alone[2],
        "interleaving changed an export",
    )?;
    Ok(format!(
        "{} bytes identical to the fixture over TCP; interleaved exports unchanged",
        expected.len()
    ))
}

fn main() {
    let db = dbgen::generate(seed::derive(7, "db"), &DbConfig::default());

    let start = Instant::now();
    let small = corpus(
        &db,
        11,
        SplitSizes {
            train: 140,
            dev: 30,
            test: 30,
        },
    );
    let small_time = start.elapsed();
    let start = Instant::now();
    let full = corpus(&db, 7, SplitSizes::default());
    let full_time = start.elapsed();

    let runtime = tokio::runtime::Runtime::new().unwrap();
    let results: Vec<(&str, Outcome)> = vec![
        ("oracle closed loop", oracle_loop(&db, &small, small_time)),
        ("carryover equivalence", carryover()),
        ("BIO-index codec", codec()),
        ("fuzzy annotator soundness", annotator(&[&small, &full])),
        ("metrics vs hand oracles", metrics()),
        ("paraphrase gate", gate()),
        ("pattern reproduction", patterns(&db, &full)),
        ("corpus statistics bands", stats(&full, full_time)),
        ("service replay", runtime.block_on(replay())),
    ];
    let mut failed = 0;
    for (i, (name, outcome)) in results.iter().enumerate() {
        match outcome {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {name}: {why}", i + 1)
            }
        }
    }
    println!(
        "{} of {} criteria pass",
        results.len() - failed,
        results.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
