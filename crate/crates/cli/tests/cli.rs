use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
[db.entity_counts]
restaurant = 20
hotel = 20
attraction = 20
train = 20

[corpus.splits]
train = 40
dev = 10
test = 10
"#;

fn mgdial(dir: &Path, args: &[&str]) -> Output {
    let config = dir.join("small.toml");
    std::fs::write(&config, SMALL).unwrap();
    Command::new(env!("CARGO_BIN_EXE_mgdial"))
        .current_dir(dir)
        .args(["--seed", "5", "--config", config.to_str().unwrap()])
        .args(args)
        .output()
        .unwrap()
}

fn ok(out: Output) -> String {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn generation_pipeline_writes_reproducible_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(ok(mgdial(d, &["--out", "db", "gen-db"])).contains("-> db/database.json"));
    assert!(ok(mgdial(d, &["--out", "goals", "gen-goals"])).starts_with("60 goals"));
    ok(mgdial(
        d,
        &["--out", "a", "gen-corpus", "--goals", "goals/goals.json"],
    ));
    ok(mgdial(d, &["--out", "b", "gen-corpus"]));
    for f in [
        "train.jsonl",
        "dev.jsonl",
        "test.jsonl",
        "calls.jsonl",
        "manifest.json",
    ] {
        let a = std::fs::read(d.join("a").join(f)).unwrap();
        assert_eq!(
            a,
            std::fs::read(d.join("b").join(f)).unwrap(),
            "{f} differs"
        );
    }
    let out = ok(mgdial(
        d,
        &[
            "--out",
            "ann",
            "annotate",
            "--dialogues",
            "a/dev.jsonl",
            "--calls",
            "a/calls.jsonl",
        ],
    ));
    assert!(out.contains("0 arguments unmatched"), "{out}");
    let annotated = std::fs::read_to_string(d.join("ann/annotated.jsonl")).unwrap();
    assert_eq!(
        annotated,
        std::fs::read_to_string(d.join("a/dev.jsonl")).unwrap()
    );
}

#[test]
fn evaluation_commands_print_tables_and_write_reports() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(mgdial(d, &["--out", "corpus", "gen-corpus"]));
    let table = ok(mgdial(d, &["--out", "r", "eval", "--corpus", "corpus"]));
    assert!(table.starts_with("subtask\trow"), "{table}");
    assert!(table.contains("no-manual"));
    assert!(d.join("r/eval.json").exists());
    let curve = ok(mgdial(
        d,
        &[
            "--out",
            "r",
            "sweep-data",
            "--corpus",
            "corpus",
            "--fractions",
            "0.5,1.0",
        ],
    ));
    assert_eq!(curve.lines().count(), 3, "{curve}");
    let curve = ok(mgdial(
        d,
        &[
            "--out",
            "r",
            "sweep-manuals",
            "--corpus",
            "corpus",
            "--counts",
            "5,10",
        ],
    ));
    assert_eq!(curve.lines().count(), 3, "{curve}");
    let lodo = ok(mgdial(
        d,
        &[
            "--out",
            "r",
            "lodo",
            "--corpus",
            "corpus",
            "--domains",
            "hotel",
        ],
    ));
    assert!(lodo.contains("hotel"), "{lodo}");
    for f in ["sweep_data.json", "sweep_manuals.json", "lodo.json"] {
        assert!(d.join("r").join(f).exists(), "{f}");
    }
}

#[test]
fn paraphrase_check_passes_on_bundled_manuals() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(mgdial(dir.path(), &["--out", "p", "check-paraphrases"]));
    assert!(!out.contains("REJECT"));
}

#[test]
fn bad_inputs_exit_nonzero_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("bad.toml"), "[nope]\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_mgdial"))
        .current_dir(d)
        .args(["--config", "bad.toml", "gen-db"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("invalid settings"));
    let out = mgdial(d, &["eval", "--corpus", "missing"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot read"));
}
