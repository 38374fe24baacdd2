//! The `cogforge` command line.
//!
//! Exit codes: 0 on success, 1 for usage errors, 2 for data errors.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use crate::cogmap::{generate_cogmap, CogmapSchema};
use crate::ingest::{load_items, parse_setting};
use crate::metrics::{cogmap_metrics, qa_accuracy, render_table, GradedResult};
use crate::oracle::{answer_question, question_for_item};
use crate::parse::{parse_cogmap, parse_response};
use crate::scene::{CognitiveMap, SceneItem, Setting};
use crate::synth::synth_corpus;
use crate::tasks::{build_record, records_jsonl, SftManifest, TaskConfig};
use crate::templates::Templates;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "cogforge", version, about = "Cognitive-map SFT data curation and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a training dataset for one task configuration.
    Generate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: TaskConfig,
        /// Schema of the gold cogmaps written alongside the dataset.
        #[arg(long)]
        schema: Option<CogmapSchema>,
        /// Abort on the first malformed line or failing item.
        #[arg(long)]
        strict: bool,
    },
    /// Grade model responses against gold answers and cogmaps.
    Evaluate {
        #[arg(long)]
        responses: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Row label in the rendered table.
        #[arg(long, default_value = "model")]
        label: String,
    },
    /// Check every gold answer against the oracle on its generated map.
    OracleCheck {
        #[arg(long)]
        input: PathBuf,
        /// Count items the oracle cannot answer as failures.
        #[arg(long)]
        strict: bool,
    },
    /// Write the SFT hyperparameter manifest for a configuration.
    Manifest {
        #[arg(long)]
        config: TaskConfig,
        #[arg(long)]
        out: PathBuf,
        /// Dataset path recorded in the manifest.
        #[arg(long, default_value = "dataset.jsonl")]
        dataset: PathBuf,
    },
    /// Write a seeded synthetic corpus of scene items.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

enum Failure {
    Usage(String),
    Data(String),
}

type CmdResult = Result<(), Failure>;

fn data(e: impl std::fmt::Display) -> Failure {
    Failure::Data(e.to_string())
}

/// Runs the CLI on `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Generate {
            input,
            out: dir,
            config,
            schema,
            strict,
        } => generate(&input, &dir, config, schema, strict, out, err),
        Command::Evaluate {
            responses,
            gold,
            out: dir,
            label,
        } => evaluate(&responses, &gold, &dir, &label, out, err),
        Command::OracleCheck { input, strict } => oracle_check(&input, strict, out, err),
        Command::Manifest {
            config,
            out: dir,
            dataset,
        } => manifest(config, &dir, &dataset, out),
        Command::Synth {
            out: dir,
            count,
            seed,
        } => synth(&dir, count, seed, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(message)) => {
            let _ = writeln!(err, "error: {message}");
            EXIT_USAGE
        }
        Err(Failure::Data(message)) => {
            let _ = writeln!(err, "error: {message}");
            EXIT_DATA
        }
    }
}

fn create_dir(dir: &Path) -> CmdResult {
    fs::create_dir_all(dir).map_err(|e| data(format!("cannot create {}: {e}", dir.display())))
}

fn write(path: &Path, text: &str) -> CmdResult {
    fs::write(path, text).map_err(|e| data(format!("cannot write {}: {e}", path.display())))
}

fn jsonl(values: impl IntoIterator<Item = Value>) -> String {
    values.into_iter().map(|v| format!("{v}\n")).collect()
}

fn cogmap_value(map: &CognitiveMap, schema: CogmapSchema) -> Result<Value, String> {
    let text = schema.serialize(map).map_err(|e| e.to_string())?;
    Ok(serde_json::from_str(&text).expect("serialized cogmaps are JSON"))
}

fn generate(
    input: &Path,
    dir: &Path,
    config: TaskConfig,
    schema: Option<CogmapSchema>,
    strict: bool,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> CmdResult {
    let schema = match (schema, config.schema()) {
        (Some(asked), Some(fixed)) if asked != fixed => {
            return Err(Failure::Usage(format!(
                "--schema {} conflicts with {config}, which uses the {} schema",
                asked.as_str(),
                fixed.as_str()
            )))
        }
        (asked, fixed) => asked.or(fixed).unwrap_or(CogmapSchema::Augmented),
    };
    let templates = Templates::from_env().map_err(data)?;
    let dataset = load_items(input).map_err(data)?;
    for line_error in &dataset.line_errors {
        let id = line_error.id.as_deref().unwrap_or("?");
        let message = format!(
            "{}:{}: item {id}: {}",
            input.display(),
            line_error.line,
            line_error.message
        );
        if strict {
            return Err(data(message));
        }
        let _ = writeln!(err, "warning: skipped {message}");
    }

    let mut records = Vec::new();
    let mut gold = Vec::new();
    let mut annotated = Vec::new();
    let mut counts: BTreeMap<Setting, usize> = BTreeMap::new();
    for item in &dataset.items {
        let record = match build_record(item, config, &templates) {
            Ok(record) => record,
            Err(e) if strict => return Err(data(e)),
            Err(e) => {
                let _ = writeln!(err, "warning: skipped {e}");
                continue;
            }
        };
        let map = generate_cogmap(item).ok();
        let cogmap = map
            .as_ref()
            .map(|m| cogmap_value(m, schema))
            .transpose()
            .map_err(|e| data(format!("item {}: {e}", item.id)))?;
        gold.push(json!({
            "id": item.id,
            "answer": item.gold_answer.to_string(),
            "setting": item.setting,
            "cogmap": cogmap,
        }));
        let mut value = item.to_json();
        if let (Some(obj), Some(map)) = (value.as_object_mut(), &map) {
            let text = schema.serialize(map).map_err(data)?;
            let output_stem = match schema {
                CogmapSchema::Augmented => "cogmap_output_augmented",
                CogmapSchema::Plain => "cogmap_output_plain",
            };
            obj.insert(
                "cogmap_input".into(),
                templates.task("cogmap_input", &[("cogmap", &text)]).into(),
            );
            obj.insert("cogmap_output".into(), templates.task(output_stem, &[]).into());
            obj.insert("cogmap".into(), text.into());
        }
        annotated.push(value);
        *counts.entry(item.setting).or_default() += 1;
        records.push(record);
    }
    if records.is_empty() {
        return Err(data(format!("no item in {} could be composed", input.display())));
    }

    create_dir(dir)?;
    let dataset_path = dir.join("dataset.jsonl");
    write(&dataset_path, &records_jsonl(&records))?;
    write(&dir.join("gold.jsonl"), &jsonl(gold))?;
    write(&dir.join("items_with_cogmap.jsonl"), &jsonl(annotated))?;
    let mut manifest = SftManifest::new(config, &dataset_path);
    manifest.dataset_size = records.len();
    write(&dir.join("sft_manifest.txt"), &manifest.to_text())?;

    let per_setting: Vec<String> = counts.iter().map(|(s, n)| format!("{s} {n}")).collect();
    let _ = writeln!(
        out,
        "{config}: wrote {} records ({}) to {}",
        records.len(),
        per_setting.join(", "),
        dataset_path.display()
    );
    Ok(())
}

fn read_jsonl(path: &Path) -> Result<Vec<serde_json::Map<String, Value>>, Failure> {
    let text = fs::read_to_string(path).map_err(|e| data(format!("cannot read {}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| match serde_json::from_str(line) {
            Ok(Value::Object(obj)) => Ok(obj),
            Ok(_) => Err(data(format!("{}:{}: not a JSON object", path.display(), i + 1))),
            Err(e) => Err(data(format!("{}:{}: {e}", path.display(), i + 1))),
        })
        .collect()
}

fn string_field(obj: &serde_json::Map<String, Value>, key: &str, path: &Path) -> Result<String, Failure> {
    match obj.get(key) {
        Some(Value::String(s)) => Ok(s.clone()),
        Some(Value::Number(n)) => Ok(n.to_string()),
        _ => Err(data(format!("{}: a row lacks string field {key:?}", path.display()))),
    }
}

struct GoldRow {
    answer: char,
    setting: Setting,
    cogmap: Option<CognitiveMap>,
}

fn read_gold(path: &Path) -> Result<Vec<(String, GoldRow)>, Failure> {
    let mut rows = Vec::new();
    for obj in read_jsonl(path)? {
        let id = string_field(&obj, "id", path)?;
        let answer = string_field(&obj, "answer", path)?;
        let answer = crate::parse::parse_answer(&answer)
            .ok_or_else(|| data(format!("gold {id}: no option letter in {answer:?}")))?;
        let setting = match obj.get("setting").and_then(Value::as_str) {
            Some(s) => s.parse().map_err(data)?,
            None => parse_setting(&id).map_err(data)?,
        };
        let cogmap = match obj.get("cogmap") {
            None | Some(Value::Null) => None,
            Some(Value::String(s)) => Some(s.clone()),
            Some(other) => Some(other.to_string()),
        }
        .map(|text| parse_cogmap(&text).map(|p| p.map))
        .transpose()
        .map_err(|e| data(format!("gold {id}: {e}")))?;
        rows.push((id, GoldRow { answer, setting, cogmap }));
    }
    Ok(rows)
}

fn unique_ids<'a>(ids: impl Iterator<Item = &'a String>, path: &Path) -> CmdResult {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(data(format!("{}: duplicate id {id:?}", path.display())));
        }
    }
    Ok(())
}

fn evaluate(
    responses_path: &Path,
    gold_path: &Path,
    dir: &Path,
    label: &str,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> CmdResult {
    let gold = read_gold(gold_path)?;
    unique_ids(gold.iter().map(|(id, _)| id), gold_path)?;
    let mut responses = Vec::new();
    for obj in read_jsonl(responses_path)? {
        let id = string_field(&obj, "id", responses_path)?;
        let output = string_field(&obj, "output", responses_path)?;
        responses.push((id, output));
    }
    unique_ids(responses.iter().map(|(id, _)| id), responses_path)?;

    let by_id: HashMap<&str, &str> = responses.iter().map(|(i, o)| (i.as_str(), o.as_str())).collect();
    let gold_ids: HashSet<&str> = gold.iter().map(|(id, _)| id.as_str()).collect();
    let mut warnings = Vec::new();
    let missing: Vec<&str> = gold
        .iter()
        .map(|(id, _)| id.as_str())
        .filter(|id| !by_id.contains_key(id))
        .collect();
    if !missing.is_empty() {
        warnings.push(format!("no response for {} gold id(s): {}", missing.len(), missing.join(", ")));
    }
    let extra: Vec<&str> = responses
        .iter()
        .map(|(id, _)| id.as_str())
        .filter(|id| !gold_ids.contains(id))
        .collect();
    if !extra.is_empty() {
        warnings.push(format!("no gold for {} response id(s): {}", extra.len(), extra.join(", ")));
    }

    let mut results = Vec::new();
    let mut items = Vec::new();
    let mut parsed_maps = Vec::new();
    for (id, row) in &gold {
        let Some(output) = by_id.get(id.as_str()) else { continue };
        let parsed = parse_response(output);
        let result = GradedResult {
            id: id.clone(),
            setting: row.setting,
            predicted: parsed.answer,
            gold: row.answer,
        };
        items.push(json!({
            "id": id,
            "setting": row.setting,
            "predicted": parsed.answer.map(String::from),
            "gold": row.answer.to_string(),
            "correct": result.correct(),
            "cogmap_valid": parsed.cogmap_valid,
            "notes": parsed.notes,
        }));
        if let Some(gold_map) = &row.cogmap {
            parsed_maps.push((parsed.cogmap.filter(|_| parsed.cogmap_valid), gold_map));
        }
        results.push(result);
    }
    let mut report = qa_accuracy(&results)
        .map_err(|e| data(format!("{e}: no response matched a gold id")))?;
    if !parsed_maps.is_empty() {
        let pairs: Vec<_> = parsed_maps.iter().map(|(p, g)| (p.as_ref(), *g)).collect();
        report.graph = Some(cogmap_metrics(&pairs));
    }
    report.warnings.extend(warnings);
    for warning in &report.warnings {
        let _ = writeln!(err, "warning: {warning}");
    }

    create_dir(dir)?;
    let table = render_table(&[(label, &report)]);
    let mut json = report.to_json();
    json["label"] = label.into();
    json["items"] = items.into();
    write(&dir.join("report.json"), &format!("{:#}\n", json))?;
    write(&dir.join("report.txt"), &table)?;
    let _ = write!(out, "{table}");
    if let Some(g) = &report.graph {
        let _ = writeln!(
            out,
            "cogmap: validity {:.4}, recall {:.4}, precision {:.4}, position {:.4}, facing {:.4}, isomorphic {:.4}",
            g.validity, g.object_recall, g.object_precision, g.position_match, g.facing_match, g.isomorphic_score
        );
    }
    Ok(())
}

/// Oracle verdict for one item.
pub enum Verdict {
    Agree,
    Disagree { gold: char, oracle: char },
    Unchecked(String),
}

pub fn check_item(item: &SceneItem) -> Verdict {
    let map = match generate_cogmap(item) {
        Ok(map) => map,
        Err(e) => return Verdict::Unchecked(e.to_string()),
    };
    let answer = question_for_item(item, &map).and_then(|q| answer_question(&map, &q));
    match answer {
        Ok(oracle) if oracle == item.gold_answer => Verdict::Agree,
        Ok(oracle) => Verdict::Disagree {
            gold: item.gold_answer,
            oracle,
        },
        Err(e) => Verdict::Unchecked(e.to_string()),
    }
}

fn oracle_check(input: &Path, strict: bool, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let dataset = load_items(input).map_err(data)?;
    for line_error in &dataset.line_errors {
        let _ = writeln!(err, "warning: line {}: {}", line_error.line, line_error.message);
    }
    let (mut agree, mut disagree, mut unchecked) = (0, 0, 0);
    for item in &dataset.items {
        match check_item(item) {
            Verdict::Agree => agree += 1,
            Verdict::Disagree { gold, oracle } => {
                disagree += 1;
                let _ = writeln!(out, "MISMATCH {}: gold {gold}, oracle {oracle}", item.id);
            }
            Verdict::Unchecked(reason) => {
                unchecked += 1;
                let _ = writeln!(err, "warning: {} not checked: {reason}", item.id);
            }
        }
    }
    let _ = writeln!(
        out,
        "checked {} items: {agree} agree, {disagree} disagree, {unchecked} unchecked",
        dataset.items.len()
    );
    if disagree > 0 || (strict && (unchecked > 0 || !dataset.line_errors.is_empty())) {
        return Err(data("oracle check failed"));
    }
    Ok(())
}

fn manifest(config: TaskConfig, dir: &Path, dataset: &Path, out: &mut dyn Write) -> CmdResult {
    create_dir(dir)?;
    let path = dir.join("sft_manifest.txt");
    let text = SftManifest::new(config, dataset).to_text();
    write(&path, &text)?;
    let _ = write!(out, "{text}");
    Ok(())
}

fn synth(dir: &Path, count: usize, seed: u64, out: &mut dyn Write) -> CmdResult {
    if count == 0 {
        return Err(Failure::Usage("--count must be positive".into()));
    }
    create_dir(dir)?;
    let items = synth_corpus(count, seed);
    let path = dir.join("items.jsonl");
    write(&path, &jsonl(items.iter().map(SceneItem::to_json)))?;
    let _ = writeln!(out, "wrote {count} items to {}", path.display());
    Ok(())
}
