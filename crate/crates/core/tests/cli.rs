mod common;

use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

use common::*;

fn cogforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cogforge"))
        .args(args)
        .env_remove("COGFORGE_TEMPLATES")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth_items(dir: &Path, count: usize) -> std::path::PathBuf {
    let out = cogforge(&["synth", "--out", p(dir), "--count", &count.to_string(), "--seed", "3"]);
    assert_eq!(code(&out), 0, "{}", text(&out.stderr));
    dir.join("items.jsonl")
}

fn digest(path: &Path) -> String {
    hex::encode(Sha256::digest(std::fs::read(path).unwrap()))
}

#[test]
fn help_and_version_exit_zero() {
    let out = cogforge(&["--help"]);
    assert_eq!(code(&out), 0);
    assert!(text(&out.stdout).contains("generate"));
    assert_eq!(code(&cogforge(&["--version"])), 0);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&cogforge(&[])), 1);
    assert_eq!(code(&cogforge(&["frobnicate"])), 1);
    assert_eq!(code(&cogforge(&["generate", "--input", "x.jsonl", "--out", "o", "--config", "nope"])), 1);
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&cogforge(&["synth", "--out", p(dir.path()), "--count", "0"])), 1);
}

#[test]
fn missing_input_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("none.jsonl");
    let out = cogforge(&["generate", "--input", p(&missing), "--out", p(dir.path()), "--config", "raw-qa"]);
    assert_eq!(code(&out), 2);
    assert!(text(&out.stderr).contains("none.jsonl"));
}

#[test]
fn generate_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let items = synth_items(dir.path(), 4);
    let out_dir = dir.path().join("gen");
    let out = cogforge(&["generate", "--input", p(&items), "--out", p(&out_dir), "--config", "Aug-CGMap-FFR-Out"]);
    assert_eq!(code(&out), 0, "{}", text(&out.stderr));
    assert!(text(&out.stdout).contains("wrote 4 records"));
    let dataset = std::fs::read_to_string(out_dir.join("dataset.jsonl")).unwrap();
    assert_eq!(dataset.lines().count(), 4);
    assert_eq!(std::fs::read_to_string(out_dir.join("gold.jsonl")).unwrap().lines().count(), 4);
    let annotated = std::fs::read_to_string(out_dir.join("items_with_cogmap.jsonl")).unwrap();
    for line in annotated.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["cogmap"].as_str().unwrap().contains("\"views\""));
        assert!(v["cogmap_input"].as_str().is_some());
    }
    let manifest = std::fs::read_to_string(out_dir.join("sft_manifest.txt")).unwrap();
    assert!(manifest.contains("dataset_size = 4\n"));
    assert!(manifest.contains("config = Aug-CGMap-FFR-Out\n"));
}

#[test]
fn generate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let items = synth_items(dir.path(), 12);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out_dir in [&a, &b] {
        let out = cogforge(&["generate", "--input", p(&items), "--out", p(out_dir), "--config", "ff-rsn"]);
        assert_eq!(code(&out), 0);
    }
    for file in ["dataset.jsonl", "gold.jsonl", "items_with_cogmap.jsonl"] {
        assert_eq!(digest(&a.join(file)), digest(&b.join(file)), "{file}");
    }
}

#[test]
fn strict_mode_names_the_bad_item() {
    let dir = tempfile::tempdir().unwrap();
    let items = synth_items(dir.path(), 3);
    let mut text_in = std::fs::read_to_string(&items).unwrap();
    text_in.push_str("{\"id\": \"among_bad\", \"images\": []}\n");
    std::fs::write(&items, text_in).unwrap();
    let out_dir = dir.path().join("gen");

    let strict = cogforge(&["generate", "--strict", "--input", p(&items), "--out", p(&out_dir), "--config", "raw-qa"]);
    assert_eq!(code(&strict), 2);
    assert!(text(&strict.stderr).contains("among_bad"));
    assert!(!out_dir.exists());

    let lenient = cogforge(&["generate", "--input", p(&items), "--out", p(&out_dir), "--config", "raw-qa"]);
    assert_eq!(code(&lenient), 0);
    assert!(text(&lenient.stderr).contains("among_bad"));
    assert!(text(&lenient.stdout).contains("wrote 3 records"));
}

#[test]
fn schema_conflict_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let items = synth_items(dir.path(), 2);
    let out = cogforge(&[
        "generate", "--input", p(&items), "--out", p(dir.path()), "--config", "plain-cgmap-out", "--schema", "augmented",
    ]);
    assert_eq!(code(&out), 1);
    assert!(text(&out.stderr).contains("conflicts"));
    let ok = cogforge(&[
        "generate", "--input", p(&items), "--out", p(&dir.path().join("g")), "--config", "raw-qa", "--schema", "plain",
    ]);
    assert_eq!(code(&ok), 0);
}

fn write_jsonl(path: &Path, rows: &[serde_json::Value]) {
    let body: String = rows.iter().map(|r| format!("{r}\n")).collect();
    std::fs::write(path, body).unwrap();
}

#[test]
fn evaluate_grades_the_six_boxes() {
    let dir = tempfile::tempdir().unwrap();
    let goldens = cogforge::goldens::load_goldens().unwrap();
    let boxes = &goldens[..6];
    let responses: Vec<_> = boxes
        .iter()
        .map(|g| serde_json::json!({"id": format!("among_{}", g.name), "output": g.raw}))
        .collect();
    let gold_map: serde_json::Value =
        serde_json::from_str(&cogforge::cogmap::serialize_augmented(&worked_map())).unwrap();
    let gold: Vec<_> = boxes
        .iter()
        .map(|g| serde_json::json!({"id": format!("among_{}", g.name), "answer": "C", "cogmap": gold_map}))
        .collect();
    let (r, g) = (dir.path().join("responses.jsonl"), dir.path().join("gold.jsonl"));
    write_jsonl(&r, &responses);
    write_jsonl(&g, &gold);
    let out_dir = dir.path().join("eval");
    let out = cogforge(&["evaluate", "--responses", p(&r), "--gold", p(&g), "--out", p(&out_dir), "--label", "SFT boxes"]);
    assert_eq!(code(&out), 0, "{}", text(&out.stderr));
    let stdout = text(&out.stdout);
    assert!(stdout.contains("SFT boxes"));
    assert!(stdout.contains("16.67"), "{stdout}");

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["counts"]["overall"]["correct"], 1);
    assert_eq!(report["counts"]["overall"]["total"], 6);
    let graph = &report["graph"];
    let validity = graph["validity"].as_f64().unwrap();
    assert!((validity - 4.0 / 6.0).abs() < 1e-9, "{graph}");
    assert!(out_dir.join("report.txt").exists());
}

#[test]
fn evaluate_warns_about_missing_ids() {
    let dir = tempfile::tempdir().unwrap();
    let gold: Vec<_> = (0..6)
        .map(|i| serde_json::json!({"id": format!("around_{i}"), "answer": "A"}))
        .collect();
    let responses: Vec<_> = (0..3)
        .map(|i| serde_json::json!({"id": format!("around_{i}"), "output": "<answer>A. x</answer>"}))
        .collect();
    let (r, g) = (dir.path().join("r.jsonl"), dir.path().join("g.jsonl"));
    write_jsonl(&r, &responses);
    write_jsonl(&g, &gold);
    let out = cogforge(&["evaluate", "--responses", p(&r), "--gold", p(&g), "--out", p(&dir.path().join("e"))]);
    assert_eq!(code(&out), 0);
    assert!(text(&out.stderr).contains("no response for 3 gold id(s)"));
    assert!(text(&out.stdout).contains("100.00"));
}

#[test]
fn evaluate_with_nothing_joined_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let (r, g) = (dir.path().join("r.jsonl"), dir.path().join("g.jsonl"));
    write_jsonl(&r, &[serde_json::json!({"id": "among_1", "output": "A"})]);
    write_jsonl(&g, &[serde_json::json!({"id": "among_2", "answer": "A"})]);
    let out = cogforge(&["evaluate", "--responses", p(&r), "--gold", p(&g), "--out", p(dir.path())]);
    assert_eq!(code(&out), 2);
    write_jsonl(&g, &[serde_json::json!({"id": "among_1", "answer": "A"}), serde_json::json!({"id": "among_1", "answer": "B"})]);
    let out = cogforge(&["evaluate", "--responses", p(&r), "--gold", p(&g), "--out", p(dir.path())]);
    assert_eq!(code(&out), 2);
    assert!(text(&out.stderr).contains("duplicate id"));
}

#[test]
fn oracle_check_flags_a_flipped_answer() {
    let dir = tempfile::tempdir().unwrap();
    let items = synth_items(dir.path(), 9);
    let out = cogforge(&["oracle-check", "--strict", "--input", p(&items)]);
    assert_eq!(code(&out), 0, "{}", text(&out.stdout));
    assert!(text(&out.stdout).contains("checked 9 items: 9 agree"));

    let mut lines: Vec<serde_json::Value> = std::fs::read_to_string(&items)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let gt = lines[0]["gt_answer"].as_str().unwrap().to_string();
    let flipped = if gt.starts_with('A') { "B" } else { "A" };
    lines[0]["gt_answer"] = flipped.into();
    write_jsonl(&items, &lines);
    let out = cogforge(&["oracle-check", "--input", p(&items)]);
    assert_eq!(code(&out), 2);
    assert!(text(&out.stdout).contains("MISMATCH among_0001"));
}

#[test]
fn manifest_command() {
    let dir = tempfile::tempdir().unwrap();
    let out = cogforge(&["manifest", "--config", "Plain-CGMap-FFR-Out", "--out", p(dir.path())]);
    assert_eq!(code(&out), 0);
    let text_out = std::fs::read_to_string(dir.path().join("sft_manifest.txt")).unwrap();
    assert!(text_out.contains("effective_batch = 256\n"));
    assert!(text_out.contains("learning_rate = 1e-5\n"));
}

#[test]
fn template_directory_override() {
    let dir = tempfile::tempdir().unwrap();
    let items = synth_items(dir.path(), 3);
    let templates = dir.path().join("templates/tasks");
    std::fs::create_dir_all(&templates).unwrap();
    std::fs::write(templates.join("answer.txt"), "Reply with <answer>L. option</answer> only.\n").unwrap();
    let out_dir = dir.path().join("gen");
    let out = Command::new(env!("CARGO_BIN_EXE_cogforge"))
        .args(["generate", "--input", p(&items), "--out", p(&out_dir), "--config", "raw-qa"])
        .env("COGFORGE_TEMPLATES", dir.path().join("templates"))
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", text(&out.stderr));
    let dataset = std::fs::read_to_string(out_dir.join("dataset.jsonl")).unwrap();
    assert!(dataset.contains("Reply with <answer>L. option</answer> only."));

    std::fs::write(templates.join("answer.txt"), "Answer {unknown}\n").unwrap();
    let bad = Command::new(env!("CARGO_BIN_EXE_cogforge"))
        .args(["generate", "--input", p(&items), "--out", p(&out_dir), "--config", "raw-qa"])
        .env("COGFORGE_TEMPLATES", dir.path().join("templates"))
        .output()
        .unwrap();
    assert_eq!(code(&bad), 2);
}

#[test]
fn in_process_runner_matches_the_binary() {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = cogforge::cli::run(["cogforge", "oracle-check", "--input", p(&fixture("worked_among.jsonl"))], &mut out, &mut err);
    assert_eq!(code, cogforge::cli::EXIT_OK);
    assert!(text(&out).contains("checked 1 items: 1 agree"));
}
