//! Prompt and target composition for the seven task configurations, JSONL
//! emission, and the SFT hyperparameter manifest.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cogmap::{generate_cogmap, CogmapSchema};
use crate::error::ComposeError;
use crate::reasoning::{generate_reasoning, ReasoningChain};
use crate::scene::{CognitiveMap, SceneItem, Setting};
use crate::templates::Templates;

/// Opening line of every target that carries a cogmap block.
pub const COGMAP_PREAMBLE: &str = "Based on my observation, the answer is:";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TaskConfig {
    RawQA,
    AugCGMapIn,
    AugCGMapOut,
    PlainCGMapOut,
    FFRsn,
    AugCGMapFFROut,
    PlainCGMapFFROut,
}

impl TaskConfig {
    pub const ALL: [TaskConfig; 7] = [
        TaskConfig::RawQA,
        TaskConfig::AugCGMapIn,
        TaskConfig::AugCGMapOut,
        TaskConfig::PlainCGMapOut,
        TaskConfig::FFRsn,
        TaskConfig::AugCGMapFFROut,
        TaskConfig::PlainCGMapFFROut,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TaskConfig::RawQA => "Raw-QA",
            TaskConfig::AugCGMapIn => "Aug-CGMap-In",
            TaskConfig::AugCGMapOut => "Aug-CGMap-Out",
            TaskConfig::PlainCGMapOut => "Plain-CGMap-Out",
            TaskConfig::FFRsn => "FF-Rsn",
            TaskConfig::AugCGMapFFROut => "Aug-CGMap-FFR-Out",
            TaskConfig::PlainCGMapFFROut => "Plain-CGMap-FFR-Out",
        }
    }

    /// Schema of the cogmap placed in the input, if any.
    pub fn cogmap_input(self) -> Option<CogmapSchema> {
        (self == TaskConfig::AugCGMapIn).then_some(CogmapSchema::Augmented)
    }

    /// Schema of the cogmap block expected in the output, if any.
    pub fn cogmap_output(self) -> Option<CogmapSchema> {
        match self {
            TaskConfig::AugCGMapOut | TaskConfig::AugCGMapFFROut => Some(CogmapSchema::Augmented),
            TaskConfig::PlainCGMapOut | TaskConfig::PlainCGMapFFROut => Some(CogmapSchema::Plain),
            _ => None,
        }
    }

    /// The schema this config fixes, in or out.
    pub fn schema(self) -> Option<CogmapSchema> {
        self.cogmap_input().or(self.cogmap_output())
    }

    pub fn needs_map(self) -> bool {
        self.schema().is_some()
    }

    pub fn needs_reasoning(self) -> bool {
        matches!(
            self,
            TaskConfig::FFRsn | TaskConfig::AugCGMapFFROut | TaskConfig::PlainCGMapFFROut
        )
    }
}

impl fmt::Display for TaskConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn squash(s: &str) -> String {
    s.chars()
        .filter(|c| !matches!(c, '-' | '_' | ' '))
        .flat_map(char::to_lowercase)
        .collect()
}

impl FromStr for TaskConfig {
    type Err = String;

    /// Case-, hyphen- and underscore-insensitive: "aug_cgmap_ffr_out",
    /// "AugCGMapFFROut" and "Aug-CGMap-FFR-Out" all work.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = squash(s);
        TaskConfig::ALL
            .into_iter()
            .find(|c| squash(c.name()) == key || squash(&format!("{c:?}")) == key)
            .ok_or_else(|| {
                let names: Vec<_> = TaskConfig::ALL.iter().map(|c| c.name()).collect();
                format!("unknown task config {s:?} (expected one of {})", names.join(", "))
            })
    }
}

impl Serialize for TaskConfig {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for TaskConfig {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub id: String,
    pub images: Vec<String>,
    pub input: String,
    pub target: String,
    pub config: TaskConfig,
    pub setting: Setting,
}

impl TrainingRecord {
    /// The emitted JSONL form: `{id, images, input, target}`.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "id": self.id,
            "images": self.images,
            "input": self.input,
            "target": self.target,
        })
    }
}

fn cogmap_block(json: &str) -> String {
    format!("<cogmap>\n```json\n{json}\n```\n</cogmap>")
}

/// Builds the record for `item`. `map` is required for configs involving a
/// cogmap, `chain` for configs involving reasoning.
pub fn compose(
    item: &SceneItem,
    config: TaskConfig,
    map: Option<&CognitiveMap>,
    chain: Option<&ReasoningChain>,
    templates: &Templates,
) -> Result<TrainingRecord, ComposeError> {
    let missing = |message: &str| ComposeError::Missing {
        id: item.id.clone(),
        message: format!("{config} {message}"),
    };
    let serialize = |schema: CogmapSchema| -> Result<String, ComposeError> {
        let map = map.ok_or_else(|| missing("needs a cognitive map"))?;
        schema.serialize(map).map_err(|source| ComposeError::Schema {
            id: item.id.clone(),
            source,
        })
    };
    let gold = item.gold_option().ok_or_else(|| missing("needs a gold option"))?;
    let answer = format!("<answer>{}</answer>", gold.label());

    let mut instructions = Vec::new();
    if let Some(schema) = config.cogmap_input() {
        let json = serialize(schema)?;
        instructions.push(templates.task("cogmap_input", &[("cogmap", &json)]));
    }
    let mut target = String::new();
    if let Some(schema) = config.cogmap_output() {
        let stem = match schema {
            CogmapSchema::Augmented => "cogmap_output_augmented",
            CogmapSchema::Plain => "cogmap_output_plain",
        };
        instructions.push(templates.task(stem, &[]));
        target.push_str(COGMAP_PREAMBLE);
        target.push('\n');
        target.push_str(&cogmap_block(&serialize(schema)?));
        target.push('\n');
    }
    if config.needs_reasoning() {
        let chain = chain.ok_or_else(|| missing("needs a reasoning chain"))?;
        if chain.bound_answer != gold.letter {
            return Err(missing(&format!(
                "chain concludes {} but the gold answer is {}",
                chain.bound_answer, gold.letter
            )));
        }
        instructions.push(templates.task("reasoning", &[]));
        target.push_str(&format!("<think>{}</think>", chain.text));
    }
    instructions.push(templates.task("answer", &[]));
    target.push_str(&answer);

    let options: Vec<String> = item.options.iter().map(|o| o.label()).collect();
    let input = format!(
        "{}\n{}\n\n{}",
        item.question.trim(),
        options.join("\n"),
        instructions.join("\n\n")
    );
    Ok(TrainingRecord {
        id: item.id.clone(),
        images: item.images.clone(),
        input,
        target,
        config,
        setting: item.setting,
    })
}

/// Map and chain for `item` as `config` requires them.
pub fn gold_inputs(
    item: &SceneItem,
    config: TaskConfig,
    templates: &Templates,
) -> Result<(Option<CognitiveMap>, Option<ReasoningChain>), ComposeError> {
    let needs_map = config.needs_map() || config.needs_reasoning();
    let map = needs_map
        .then(|| generate_cogmap(item))
        .transpose()
        .map_err(|source| ComposeError::Layout {
            id: item.id.clone(),
            source,
        })?;
    let chain = match (&map, config.needs_reasoning()) {
        (Some(map), true) => Some(generate_reasoning(item, map, templates).map_err(|source| {
            ComposeError::Chain {
                id: item.id.clone(),
                source,
            }
        })?),
        _ => None,
    };
    Ok((map, chain))
}

/// Generates whatever `config` needs and composes the record.
pub fn build_record(
    item: &SceneItem,
    config: TaskConfig,
    templates: &Templates,
) -> Result<TrainingRecord, ComposeError> {
    let (map, chain) = gold_inputs(item, config, templates)?;
    compose(item, config, map.as_ref(), chain.as_ref(), templates)
}

/// One JSON object per line, in record order.
pub fn records_jsonl(records: &[TrainingRecord]) -> String {
    let mut out = String::new();
    for record in records {
        out.push_str(&record.to_json().to_string());
        out.push('\n');
    }
    out
}

pub(crate) fn write_file(path: &Path, text: &str) -> Result<(), ComposeError> {
    let io = |source| ComposeError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut file = fs::File::create(path).map_err(io)?;
    file.write_all(text.as_bytes()).map_err(io)
}

/// Composes every item and writes the JSONL file. Nothing is written when
/// any item fails; the error names it.
pub fn emit_dataset(
    items: &[SceneItem],
    config: TaskConfig,
    out_path: impl AsRef<Path>,
    templates: &Templates,
) -> Result<usize, ComposeError> {
    let records = items
        .iter()
        .map(|item| build_record(item, config, templates))
        .collect::<Result<Vec<_>, _>>()?;
    write_file(out_path.as_ref(), &records_jsonl(&records))?;
    Ok(records.len())
}

/// SFT hyperparameters, one training run per task configuration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SftManifest {
    pub config: TaskConfig,
    pub dataset_path: PathBuf,
    pub dataset_size: usize,
    pub epochs: u32,
    pub learning_rate: f64,
    pub lr_scheduler: &'static str,
    pub finetuning_type: &'static str,
    pub per_device_train_batch_size: u32,
    pub gradient_accumulation_steps: u32,
    pub nproc_per_node: u32,
    pub gpus: &'static str,
    pub max_pixels: u32,
    pub min_pixels: u32,
    pub max_length: u32,
    pub weight_decay: f64,
    pub warmup_ratio: f64,
    pub max_grad_norm: f64,
    pub precision: &'static str,
    pub optimizer: &'static str,
    pub deepspeed: &'static str,
    pub tune_mm_vision: bool,
    pub tune_mm_mlp: bool,
    pub tune_mm_llm: bool,
    pub gradient_checkpointing: bool,
    pub save_steps: u32,
    pub save_total_limit: u32,
}

impl SftManifest {
    pub const DEFAULT_DATASET_SIZE: usize = 10_000;

    pub fn new(config: TaskConfig, dataset_path: impl Into<PathBuf>) -> Self {
        Self {
            config,
            dataset_path: dataset_path.into(),
            dataset_size: Self::DEFAULT_DATASET_SIZE,
            epochs: 3,
            learning_rate: 1e-5,
            lr_scheduler: "cosine",
            finetuning_type: "full",
            per_device_train_batch_size: 4,
            gradient_accumulation_steps: 32,
            nproc_per_node: 2,
            gpus: "2 x NVIDIA H100",
            max_pixels: 90_000,
            min_pixels: 784,
            max_length: 8192,
            weight_decay: 0.0,
            warmup_ratio: 0.03,
            max_grad_norm: 1.0,
            precision: "bf16",
            optimizer: "adamw",
            deepspeed: "zero3",
            tune_mm_vision: true,
            tune_mm_mlp: true,
            tune_mm_llm: true,
            gradient_checkpointing: true,
            save_steps: 5,
            save_total_limit: 12,
        }
    }

    /// Per-device batch times accumulation steps times processes.
    pub fn effective_batch(&self) -> u32 {
        self.per_device_train_batch_size * self.gradient_accumulation_steps * self.nproc_per_node
    }

    /// Ordered `(key, value)` pairs.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("config", self.config.name().to_string()),
            ("dataset_path", self.dataset_path.display().to_string()),
            ("dataset_size", self.dataset_size.to_string()),
            ("epochs", self.epochs.to_string()),
            ("learning_rate", format!("{:e}", self.learning_rate)),
            ("lr_scheduler", self.lr_scheduler.to_string()),
            ("finetuning_type", self.finetuning_type.to_string()),
            ("effective_batch", self.effective_batch().to_string()),
            ("per_device_train_batch_size", self.per_device_train_batch_size.to_string()),
            ("gradient_accumulation_steps", self.gradient_accumulation_steps.to_string()),
            ("nproc_per_node", self.nproc_per_node.to_string()),
            ("gpus", self.gpus.to_string()),
            ("max_pixels", self.max_pixels.to_string()),
            ("min_pixels", self.min_pixels.to_string()),
            ("max_length", self.max_length.to_string()),
            ("weight_decay", self.weight_decay.to_string()),
            ("warmup_ratio", self.warmup_ratio.to_string()),
            ("max_grad_norm", self.max_grad_norm.to_string()),
            ("precision", self.precision.to_string()),
            ("optimizer", self.optimizer.to_string()),
            ("deepspeed", self.deepspeed.to_string()),
            ("tune_mm_vision", self.tune_mm_vision.to_string()),
            ("tune_mm_mlp", self.tune_mm_mlp.to_string()),
            ("tune_mm_llm", self.tune_mm_llm.to_string()),
            ("gradient_checkpointing", self.gradient_checkpointing.to_string()),
            ("save_steps", self.save_steps.to_string()),
            ("save_total_limit", self.save_total_limit.to_string()),
        ]
    }

    pub fn to_text(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

/// Writes the manifest for `config` and returns its text.
pub fn emit_sft_manifest(
    config: TaskConfig,
    dataset_path: impl Into<PathBuf>,
    out_path: impl AsRef<Path>,
) -> Result<String, ComposeError> {
    let text = SftManifest::new(config, dataset_path).to_text();
    write_file(out_path.as_ref(), &text)?;
    Ok(text)
}

/// Reads `key = value` lines back into pairs.
pub fn parse_manifest(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter_map(|line| line.split_once(" = "))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::parse_item;

    fn worked() -> SceneItem {
        parse_item(include_str!("../fixtures/worked_among.jsonl").trim()).unwrap()
    }

    #[test]
    fn config_names() {
        for config in TaskConfig::ALL {
            assert_eq!(config.name().parse::<TaskConfig>().unwrap(), config);
            assert_eq!(format!("{config:?}").parse::<TaskConfig>().unwrap(), config);
        }
        assert_eq!("aug_cgmap_ffr_out".parse::<TaskConfig>().unwrap(), TaskConfig::AugCGMapFFROut);
        assert_eq!("ff rsn".parse::<TaskConfig>().unwrap(), TaskConfig::FFRsn);
        assert!("cgmap".parse::<TaskConfig>().is_err());
    }

    #[test]
    fn raw_qa_target() {
        let t = Templates::builtin();
        let record = build_record(&worked(), TaskConfig::RawQA, &t).unwrap();
        assert_eq!(record.target, "<answer>C. Bed sheet with a floral pattern</answer>");
        assert!(record.input.starts_with("From the perspective of image 4"));
        assert!(record.input.contains("\nD. White headboard\n"));
    }

    #[test]
    fn aug_out_target() {
        let t = Templates::builtin();
        let item = worked();
        let record = build_record(&item, TaskConfig::AugCGMapOut, &t).unwrap();
        let map = generate_cogmap(&item).unwrap();
        let expected = format!(
            "{COGMAP_PREAMBLE}\n<cogmap>\n```json\n{}\n```\n</cogmap>\n<answer>C. Bed sheet with a floral pattern</answer>",
            crate::cogmap::serialize_augmented(&map)
        );
        assert_eq!(record.target, expected);
    }

    #[test]
    fn ffrsn_and_cogmap_in_shapes() {
        let t = Templates::builtin();
        let record = build_record(&worked(), TaskConfig::FFRsn, &t).unwrap();
        assert!(record.target.starts_with("<think>In this scene"));
        assert!(record.target.ends_with("</think><answer>C. Bed sheet with a floral pattern</answer>"));
        assert!(!record.target.contains("<cogmap>"));

        let record = build_record(&worked(), TaskConfig::AugCGMapIn, &t).unwrap();
        assert!(!record.target.contains("<cogmap>"));
        assert!(record.input.contains("\"views\": ["));
    }

    #[test]
    fn missing_inputs_are_errors() {
        let t = Templates::builtin();
        let item = worked();
        let err = compose(&item, TaskConfig::PlainCGMapOut, None, None, &t).unwrap_err();
        assert!(matches!(err, ComposeError::Missing { .. }));
        let map = generate_cogmap(&item).unwrap();
        let err = compose(&item, TaskConfig::FFRsn, Some(&map), None, &t).unwrap_err();
        assert_eq!(err.item_id(), Some("among_0001"));
    }

    #[test]
    fn manifest_values() {
        let m = SftManifest::new(TaskConfig::RawQA, "data.jsonl");
        assert_eq!(m.effective_batch(), 256);
        let pairs = parse_manifest(&m.to_text());
        let get = |k: &str| pairs.iter().find(|(key, _)| key == k).unwrap().1.clone();
        assert_eq!(get("learning_rate"), "1e-5");
        assert_eq!(get("effective_batch"), "256");
        assert_eq!(get("max_length"), "8192");
        assert_eq!(get("config"), "Raw-QA");
        assert_eq!(get("max_grad_norm"), "1");
        assert_eq!(get("weight_decay"), "0");
    }
}
