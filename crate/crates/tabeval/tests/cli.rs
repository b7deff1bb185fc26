//! Drives the installed binary end to end: subcommand plumbing, option
//! precedence, stdout shapes, and the exit-code contract.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tabeval"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_table(dir: &Path, name: &str) {
    let doc = format!(
        r#"{{"name":"{name}","columns":[{{"name":"id","type":"int"}},{{"name":"label","type":"text"}}],"rows":[[1,"a"],[2,"b"],[3,"c"]]}}"#
    );
    std::fs::write(dir.join(format!("{name}.json")), doc).unwrap();
}

struct Pipeline {
    root: PathBuf,
    _keep: tempfile::TempDir,
}

fn build_pipeline() -> Pipeline {
    let keep = tempfile::tempdir().unwrap();
    let root = keep.path().to_path_buf();
    let tables = root.join("tables");
    std::fs::create_dir_all(&tables).unwrap();
    write_table(&tables, "parts");
    write_table(&tables, "tools");

    let questions = "\
{\"example_id\":\"a\",\"question\":\"count parts\",\"table\":\"parts\",\"gold_sql\":\"SELECT count(*) FROM parts\"}\n\
{\"example_id\":\"b\",\"question\":\"tool ids\",\"table\":\"tools\",\"gold_sql\":\"SELECT id FROM tools WHERE id > 1 ORDER BY id\"}\n";
    std::fs::write(root.join("questions.jsonl"), questions).unwrap();

    let out = run(&[
        "build",
        "--tables",
        tables.to_str().unwrap(),
        "--questions",
        root.join("questions.jsonl").to_str().unwrap(),
        "--dbs",
        root.join("dbs").to_str().unwrap(),
        "--out",
        root.join("clean").to_str().unwrap(),
        "--synthesize-dbs",
    ]);
    assert!(out.status.success(), "build failed: {}", stderr(&out));
    Pipeline { root, _keep: keep }
}

#[test]
fn build_writes_manifest_images_and_synthesized_dbs() {
    let p = build_pipeline();
    assert!(p.root.join("clean/manifest.jsonl").is_file());
    assert!(p.root.join("clean/images/a.png").is_file());
    assert!(p.root.join("clean/images/a.geometry.json").is_file());
    assert!(p.root.join("clean/dbs/parts.sqlite").is_file());

    // Rebuilding into a second directory gives byte-identical images.
    let out = run(&[
        "build",
        "--tables",
        p.root.join("tables").to_str().unwrap(),
        "--questions",
        p.root.join("questions.jsonl").to_str().unwrap(),
        "--dbs",
        p.root.join("dbs").to_str().unwrap(),
        "--out",
        p.root.join("again").to_str().unwrap(),
        "--synthesize-dbs",
    ]);
    assert!(out.status.success());
    let a = std::fs::read(p.root.join("clean/images/b.png")).unwrap();
    let b = std::fs::read(p.root.join("again/images/b.png")).unwrap();
    assert_eq!(a, b, "rebuild must be byte-identical");
}

#[test]
fn eval_reports_and_persists_rows() {
    let p = build_pipeline();
    let preds = "\
{\"example_id\":\"a\",\"predicted_sql\":\"SELECT count(*) FROM parts\"}\n\
{\"example_id\":\"b\",\"predicted_sql\":\"SELECT id FROM tools\"}\n";
    std::fs::write(p.root.join("preds.jsonl"), preds).unwrap();

    let out = run(&[
        "eval",
        "--manifest",
        p.root.join("clean/manifest.jsonl").to_str().unwrap(),
        "--predictions",
        p.root.join("preds.jsonl").to_str().unwrap(),
        "--out",
        p.root.join("report").to_str().unwrap(),
        "--jobs",
        "2",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("EXAcc"), "report text missing metrics: {text}");
    assert!(text.contains("split: clean"));
    for file in ["report.json", "rows.jsonl", "report.txt"] {
        assert!(p.root.join("report").join(file).is_file(), "missing {file}");
    }
}

#[test]
fn eval_rejects_predictions_for_unknown_examples() {
    let p = build_pipeline();
    std::fs::write(
        p.root.join("preds.jsonl"),
        "{\"example_id\":\"ghost\",\"predicted_sql\":\"SELECT 1\"}\n",
    )
    .unwrap();
    let out = run(&[
        "eval",
        "--manifest",
        p.root.join("clean/manifest.jsonl").to_str().unwrap(),
        "--predictions",
        p.root.join("preds.jsonl").to_str().unwrap(),
        "--out",
        p.root.join("report").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("ghost"));
}

#[test]
fn perturb_then_diff_round_trip() {
    let p = build_pipeline();
    let preds = "\
{\"example_id\":\"a\",\"predicted_sql\":\"SELECT count(*) FROM parts\"}\n\
{\"example_id\":\"b\",\"predicted_sql\":\"SELECT id FROM tools WHERE id > 1 ORDER BY id\"}\n";
    std::fs::write(p.root.join("preds.jsonl"), preds).unwrap();

    for kind in ["styleshift", "headermask", "noimage", "wrongtable"] {
        let out = run(&[
            "perturb",
            "--manifest",
            p.root.join("clean/manifest.jsonl").to_str().unwrap(),
            "--kind",
            kind,
            "--out",
            p.root.join(kind).to_str().unwrap(),
            "--seed",
            "11",
        ]);
        assert!(out.status.success(), "perturb {kind}: {}", stderr(&out));
        assert!(p.root.join(kind).join("manifest.jsonl").is_file());
    }
    assert!(p.root.join("headermask/masks.jsonl").is_file());

    for split in ["clean", "noimage"] {
        let out = run(&[
            "eval",
            "--manifest",
            p.root.join(split).join("manifest.jsonl").to_str().unwrap(),
            "--predictions",
            p.root.join("preds.jsonl").to_str().unwrap(),
            "--out",
            p.root.join(format!("report-{split}")).to_str().unwrap(),
        ]);
        assert!(out.status.success(), "eval {split}: {}", stderr(&out));
    }

    let out = run(&[
        "report-diff",
        "--clean",
        p.root.join("report-clean/report.json").to_str().unwrap(),
        "--perturbed",
        p.root.join("report-noimage/report.json").to_str().unwrap(),
        "--out",
        p.root.join("robustness.json").to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("noimage"), "diff table missing row: {text}");
    assert!(p.root.join("robustness.json").is_file());
}

#[test]
fn tokens_prints_stats_json() {
    let p = build_pipeline();
    let out = run(&[
        "tokens",
        "--manifest",
        p.root.join("clean/manifest.jsonl").to_str().unwrap(),
        "--budget",
        "100",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).expect("stdout is JSON");
    assert_eq!(v["optical_budget"], 100);
    assert_eq!(v["per_example"].as_array().unwrap().len(), 2);
}

#[test]
fn canon_reads_stdin_and_files() {
    use std::io::Write;
    use std::process::Stdio;

    let mut child = bin()
        .arg("canon")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .as_mut()
        .unwrap()
        .write_all(b"SELECT  *  FROM t WHERE ((b = 2)) AND a = 1")
        .unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    assert_eq!(stdout(&out).trim(), "select * from t where a=1 and b=2");

    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("q.sql");
    std::fs::write(&file, "SELECT 1").unwrap();
    let out = run(&["canon", file.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).trim(), "select 1");
}

#[test]
fn canon_warns_on_degraded_input_but_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("q.sql");
    std::fs::write(&file, "SELEC broken (").unwrap();
    let out = run(&["canon", file.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(stderr(&out).contains("did not parse"));
}

#[test]
fn exit_codes_follow_the_error_classes() {
    // Usage errors and help.
    assert_eq!(run(&["tokens"]).status.code(), Some(1), "missing required flag");
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["eval", "--help"]).status.code(), Some(0));

    // Configuration errors.
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, "{\"bogus\":1}").unwrap();
    let manifest = dir.path().join("m.jsonl");
    std::fs::write(&manifest, "").unwrap();
    let out = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "tokens",
        "--manifest",
        manifest.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1), "unknown config key: {}", stderr(&out));

    let out = bin()
        .env("TABEVAL_SEED", "not-a-number")
        .args(["perturb", "--manifest", manifest.to_str().unwrap(), "--kind", "noimage", "--out"])
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1), "bad env seed: {}", stderr(&out));

    // Integrity errors: malformed manifest line.
    std::fs::write(&manifest, "not json\n").unwrap();
    let out = run(&["tokens", "--manifest", manifest.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "malformed manifest: {}", stderr(&out));
    assert!(stderr(&out).contains("line 1"), "{}", stderr(&out));

    // Internal/environment errors: missing input file.
    let out = run(&["tokens", "--manifest", dir.path().join("nope.jsonl").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "missing file: {}", stderr(&out));
}

#[test]
fn config_file_and_env_fill_in_eval_defaults() {
    let p = build_pipeline();
    std::fs::write(
        p.root.join("preds.jsonl"),
        "{\"example_id\":\"a\",\"predicted_sql\":\"SELECT count(*) FROM parts\"}\n{\"example_id\":\"b\",\"predicted_sql\":\"SELECT id FROM tools\"}\n",
    )
    .unwrap();
    std::fs::write(p.root.join("cfg.json"), "{\"seed\":5,\"timeout_ms\":900}").unwrap();

    // Config file beats the env var; flags beat both.
    let out = bin()
        .env("TABEVAL_SEED", "77")
        .args([
            "--config",
            p.root.join("cfg.json").to_str().unwrap(),
            "eval",
            "--manifest",
            p.root.join("clean/manifest.jsonl").to_str().unwrap(),
            "--predictions",
            p.root.join("preds.jsonl").to_str().unwrap(),
            "--out",
            p.root.join("r1").to_str().unwrap(),
            "--budget",
            "64",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("seed=5"), "{text}");
    assert!(text.contains("timeout_ms=900"), "{text}");
    assert!(text.contains("budget=64"), "{text}");

    // Env var applies when nothing else names a seed.
    let out = bin()
        .env("TABEVAL_SEED", "77")
        .args([
            "eval",
            "--manifest",
            p.root.join("clean/manifest.jsonl").to_str().unwrap(),
            "--predictions",
            p.root.join("preds.jsonl").to_str().unwrap(),
            "--out",
            p.root.join("r2").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("seed=77"), "{}", stdout(&out));
}

#[test]
fn report_diff_rejects_mismatched_token_accounting() {
    let p = build_pipeline();
    std::fs::write(
        p.root.join("preds.jsonl"),
        "{\"example_id\":\"a\",\"predicted_sql\":\"SELECT count(*) FROM parts\"}\n{\"example_id\":\"b\",\"predicted_sql\":\"SELECT id FROM tools\"}\n",
    )
    .unwrap();
    let eval_with_budget = |split: &str, budget: &str, out_name: &str| {
        let out = run(&[
            "eval",
            "--manifest",
            p.root.join(split).join("manifest.jsonl").to_str().unwrap(),
            "--predictions",
            p.root.join("preds.jsonl").to_str().unwrap(),
            "--out",
            p.root.join(out_name).to_str().unwrap(),
            "--budget",
            budget,
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
    };
    let out = run(&[
        "perturb",
        "--manifest",
        p.root.join("clean/manifest.jsonl").to_str().unwrap(),
        "--kind",
        "noimage",
        "--out",
        p.root.join("noimage").to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));

    eval_with_budget("clean", "256", "rc");
    eval_with_budget("noimage", "100", "rp");

    let out = run(&[
        "report-diff",
        "--clean",
        p.root.join("rc/report.json").to_str().unwrap(),
        "--perturbed",
        p.root.join("rp/report.json").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
    assert!(stderr(&out).contains("budget"), "{}", stderr(&out));
}
