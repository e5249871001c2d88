//! `mgdial`: command-line client of the mgdial service. Without `--server`
//! each command starts a private in-process service on a loopback port.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use mgdial_client::Client;
use mgdial_core::config::Settings;
use mgdial_core::engine::CallRecord;
use mgdial_core::model::codec::{
    corpus_from_str, corpus_to_string, from_document, from_lines, to_document, to_lines,
};
use mgdial_core::model::{Domain, GoalSet, Manual};
use mgdial_core::simulator::{CallLog, Manifest};
use mgdial_protocol::ops::{
    Annotate, CheckParaphrases, CorpusData, Evaluate, GenCorpus, GenDb, GenGoals,
    LeaveOneDomainOut, SweepData, SweepManuals, WorldSpec,
};
use mgdial_service::world::World;
use mgdial_service::AppState;
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "mgdial",
    version,
    about = "Manual-guided dialogue data generation, collection and evaluation"
)]
struct Cli {
    /// Master seed; every random choice derives from it.
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,
    /// TOML settings with `[db]`, `[goals]`, `[corpus]` and `[eval]` tables.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Use a running service instead of an in-process one.
    #[arg(long, global = true)]
    server: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct CorpusArg {
    /// Corpus directory written by `gen-corpus`.
    #[arg(long)]
    corpus: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the synthetic database.
    GenDb,
    /// Sample user goals; defaults to the corpus size.
    GenGoals {
        #[arg(long)]
        count: Option<usize>,
    },
    /// Simulate the train/dev/test corpus.
    GenCorpus {
        /// Goals file from `gen-goals`; sampled when absent.
        #[arg(long)]
        goals: Option<PathBuf>,
    },
    /// Run the paraphrase-diversity gate over manuals.
    CheckParaphrases {
        /// Manual documents to check; the bundled manuals when empty.
        #[arg(long)]
        manual: Vec<PathBuf>,
    },
    /// Evaluate both subtasks on the test split.
    Eval {
        #[command(flatten)]
        corpus: CorpusArg,
    },
    /// Learning curve over training-set fractions.
    SweepData {
        #[command(flatten)]
        corpus: CorpusArg,
        #[arg(long, value_delimiter = ',', default_value = "0.2,0.4,0.6,0.8,1.0")]
        fractions: Vec<f64>,
    },
    /// Learning curve over the number of training manuals.
    SweepManuals {
        #[command(flatten)]
        corpus: CorpusArg,
        #[arg(long, value_delimiter = ',', default_value = "2,4,6,8,10")]
        counts: Vec<usize>,
    },
    /// Leave-one-domain-out evaluation.
    Lodo {
        #[command(flatten)]
        corpus: CorpusArg,
        /// Domains to hold out; every domain when empty.
        #[arg(long, value_delimiter = ',')]
        domains: Vec<String>,
    },
    /// Run the collection service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Number of goals sessions can be opened for.
        #[arg(long, default_value_t = 200)]
        goals: usize,
    },
    /// Annotate argument spans of dialogues from their call logs.
    Annotate {
        /// Dialogue lines, such as `train.jsonl`.
        #[arg(long)]
        dialogues: PathBuf,
        /// Call-log lines, such as `calls.jsonl`.
        #[arg(long)]
        calls: PathBuf,
    },
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let path = dir.join(name);
    std::fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(path)
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf> {
    write(dir, name, &(serde_json::to_string_pretty(value)? + "\n"))
}

fn load_corpus(dir: &Path) -> Result<CorpusData> {
    let split = |name: &str| -> Result<_> {
        corpus_from_str(&read(&dir.join(name))?).with_context(|| format!("bad dialogues in {name}"))
    };
    let manifest: Manifest =
        serde_json::from_str(&read(&dir.join("manifest.json"))?).context("bad manifest.json")?;
    Ok(CorpusData {
        train: split("train.jsonl")?,
        dev: split("dev.jsonl")?,
        test: split("test.jsonl")?,
        partition: manifest.config.partition,
    })
}

/// The in-process service and its shutdown trigger.
struct Local {
    stop: tokio::sync::oneshot::Sender<()>,
    task: tokio::task::JoinHandle<std::io::Result<()>>,
}

async fn start_local(world: World) -> Result<(Client, Local)> {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
    let addr = listener.local_addr()?;
    let (stop, rx) = tokio::sync::oneshot::channel();
    let task = tokio::spawn(mgdial_service::serve(
        listener,
        AppState::new(world),
        async {
            rx.await.ok();
        },
    ));
    Ok((Client::new(format!("http://{addr}")), Local { stop, task }))
}

async fn run(cli: Cli) -> Result<()> {
    let settings = match &cli.config {
        Some(p) => Settings::load(p)?,
        None => Settings::default(),
    };
    let world = WorldSpec {
        seed: cli.seed,
        db: settings.db.clone(),
    };
    if let Command::Serve { addr, goals } = &cli.command {
        let world = World::sampled(cli.seed, settings.db.clone(), *goals, &settings.goals)?;
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .with_context(|| format!("cannot bind {addr}"))?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        mgdial_service::serve(listener, AppState::new(world), async {
            tokio::signal::ctrl_c().await.ok();
        })
        .await?;
        return Ok(());
    }
    let (client, local) = match &cli.server {
        Some(url) => (Client::new(url.clone()), None),
        None => {
            let (c, l) = start_local(World::new(world.clone(), GoalSet::default())).await?;
            (c, Some(l))
        }
    };
    let outcome = command(&cli, &settings, world, &client).await;
    if let Some(l) = local {
        l.stop.send(()).ok();
        l.task.await??;
    }
    outcome
}

async fn command(cli: &Cli, settings: &Settings, world: WorldSpec, client: &Client) -> Result<()> {
    let out = &cli.out;
    match &cli.command {
        Command::Serve { .. } => unreachable!("handled before connecting"),
        Command::GenDb => {
            let db = client.gen_db(&GenDb { world }).await?.database;
            let path = write(out, "database.json", &to_document(&db))?;
            let entities: usize = db.entities.values().map(Vec::len).sum();
            println!(
                "{entities} entities in {} domains -> {}",
                db.entities.len(),
                path.display()
            );
        }
        Command::GenGoals { count } => {
            let count = count.unwrap_or(settings.corpus.splits.total());
            let req = GenGoals {
                world,
                count,
                config: settings.goals.clone(),
            };
            let goals = client.gen_goals(&req).await?.goals;
            let path = write(out, "goals.json", &to_document(&goals))?;
            println!("{} goals -> {}", goals.goals.len(), path.display());
        }
        Command::GenCorpus { goals } => {
            let goals = match goals {
                Some(p) => Some(from_document::<GoalSet>(&read(p)?).context("bad goals file")?),
                None => None,
            };
            let req = GenCorpus {
                world,
                goals,
                goal_config: settings.goals.clone(),
                config: settings.corpus.clone(),
            };
            let generated = client.gen_corpus(&req).await?;
            generated.corpus.write(out)?;
            write_json(out, "stats.json", &generated.stats)?;
            let s = &generated.stats;
            println!(
                "{} dialogues ({} failed): {:.2} turns, {:.2} instructions/turn, {:.2} arguments/turn, {:.1}% turns without instructions -> {}",
                s.dialogues,
                generated.corpus.manifest.failed.len(),
                s.mean_turns,
                s.mean_instructions_per_turn,
                s.mean_arguments_per_turn,
                100.0 * s.no_instruction_share,
                out.display()
            );
        }
        Command::CheckParaphrases { manual } => {
            let manuals = if manual.is_empty() {
                None
            } else {
                let parsed: Result<Vec<Manual>> = manual
                    .iter()
                    .map(|p| {
                        from_document::<Manual>(&read(p)?)
                            .with_context(|| format!("bad manual {}", p.display()))
                    })
                    .collect();
                Some(parsed?)
            };
            let check = client
                .check_paraphrases(&CheckParaphrases { manuals })
                .await?;
            write_json(out, "paraphrase_gate.json", &check)?;
            for f in &check.families {
                println!(
                    "{}\t{:.3}\t{}",
                    f.family,
                    f.report.self_bleu,
                    if f.report.accepted { "ok" } else { "REJECT" }
                );
            }
            if !check.passed {
                bail!(
                    "{} families fail the paraphrase gate",
                    check.families.iter().filter(|f| !f.report.accepted).count()
                );
            }
        }
        Command::Eval { corpus } => {
            let req = Evaluate {
                world,
                data: load_corpus(&corpus.corpus)?,
                config: settings.eval.clone(),
            };
            let report = client.eval(&req).await?;
            write_json(out, "eval.json", &report)?;
            print!("{}", report.to_table());
        }
        Command::SweepData { corpus, fractions } => {
            let req = SweepData {
                world,
                data: load_corpus(&corpus.corpus)?,
                config: settings.eval.clone(),
                fractions: fractions.clone(),
            };
            let curve = client.sweep_data(&req).await?;
            write_json(out, "sweep_data.json", &curve)?;
            print!("{}", curve.to_table());
        }
        Command::SweepManuals { corpus, counts } => {
            let req = SweepManuals {
                world,
                data: load_corpus(&corpus.corpus)?,
                config: settings.eval.clone(),
                counts: counts.clone(),
            };
            let curve = client.sweep_manuals(&req).await?;
            write_json(out, "sweep_manuals.json", &curve)?;
            print!("{}", curve.to_table());
        }
        Command::Lodo { corpus, domains } => {
            let data = load_corpus(&corpus.corpus)?;
            let domains: Vec<Domain> = if domains.is_empty() {
                let mut all: Vec<Domain> = data
                    .test
                    .iter()
                    .flat_map(|d| d.goal.domains.iter().cloned())
                    .collect();
                all.sort();
                all.dedup();
                all
            } else {
                domains.iter().map(|d| Domain::from(d.as_str())).collect()
            };
            let excluded = std::iter::once(None)
                .chain(domains.into_iter().map(Some))
                .collect();
            let req = LeaveOneDomainOut {
                world,
                data,
                config: settings.eval.clone(),
                excluded,
            };
            let table = client.lodo(&req).await?;
            write_json(out, "lodo.json", &table)?;
            print!("{}", table.to_table());
        }
        Command::Annotate { dialogues, calls } => {
            let dialogues = corpus_from_str(&read(dialogues)?).context("bad dialogue file")?;
            let logs: Vec<CallLog> =
                from_lines("calls", &read(calls)?).context("bad call-log file")?;
            let mut annotated = Vec::with_capacity(dialogues.len());
            let mut reports = Vec::with_capacity(dialogues.len());
            for d in dialogues {
                let calls: Vec<CallRecord> = logs
                    .iter()
                    .find(|l| l.dialogue == d.id)
                    .map(|l| l.calls.clone())
                    .unwrap_or_default();
                let done = client.annotate(&Annotate { dialogue: d, calls }).await?;
                reports.push(
                    serde_json::json!({ "dialogue": done.dialogue.id, "report": done.report }),
                );
                annotated.push(done.dialogue);
            }
            write(out, "annotated.jsonl", &corpus_to_string(&annotated))?;
            write(
                out,
                "annotation_report.jsonl",
                &to_lines("annotation-report", &reports),
            )?;
            let unmatched: usize = reports
                .iter()
                .map(|r| r["report"]["unmatched"].as_array().map_or(0, Vec::len))
                .sum();
            println!(
                "{} dialogues annotated, {unmatched} arguments unmatched -> {}",
                annotated.len(),
                out.display()
            );
        }
    }
    Ok(())
}

#[tokio::main]
async fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()).await {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
