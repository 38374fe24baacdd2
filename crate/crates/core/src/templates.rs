//! Slot-filling templates for reasoning chains and prompt instructions.
//!
//! Chain templates are TOML files (one per setting) mapping sentence keys to
//! text with `{slot}` placeholders. Instruction templates are plain text
//! files. Every key has a fixed slot vocabulary; a template using any other
//! slot is rejected at load time.
//!
//! The built-in copies under `templates/` are compiled in. A directory named
//! by `COGFORGE_TEMPLATES` (same layout) overrides them file by file.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::TemplateError;
use crate::scene::Setting;

pub const TEMPLATES_ENV: &str = "COGFORGE_TEMPLATES";

#[derive(Clone, Debug, PartialEq, Eq)]
enum Segment {
    Text(String),
    Slot(String),
}

/// A parsed template string.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Template {
    segments: Vec<Segment>,
}

impl Template {
    /// `{{` and `}}` stand for literal braces.
    pub fn parse(file: &str, key: &str, src: &str, allowed: &[&str]) -> Result<Self, TemplateError> {
        let syntax = |message: &str| TemplateError::Syntax {
            file: file.to_string(),
            message: format!("key {key:?}: {message}"),
        };
        let mut segments = Vec::new();
        let mut text = String::new();
        let mut chars = src.chars().peekable();
        while let Some(c) = chars.next() {
            match c {
                '{' if chars.peek() == Some(&'{') => {
                    chars.next();
                    text.push('{');
                }
                '}' if chars.peek() == Some(&'}') => {
                    chars.next();
                    text.push('}');
                }
                '{' => {
                    let mut slot = String::new();
                    loop {
                        match chars.next() {
                            Some('}') => break,
                            Some(c) => slot.push(c),
                            None => return Err(syntax("unclosed '{'")),
                        }
                    }
                    if !allowed.contains(&slot.as_str()) {
                        return Err(TemplateError::UnknownSlot {
                            file: file.to_string(),
                            key: key.to_string(),
                            slot,
                        });
                    }
                    if !text.is_empty() {
                        segments.push(Segment::Text(std::mem::take(&mut text)));
                    }
                    segments.push(Segment::Slot(slot));
                }
                '}' => return Err(syntax("unmatched '}'")),
                c => text.push(c),
            }
        }
        if !text.is_empty() {
            segments.push(Segment::Text(text));
        }
        Ok(Self { segments })
    }

    /// Fills slots from `values`. Slots without a value render empty.
    pub fn render(&self, values: &[(&str, &str)]) -> String {
        let mut out = String::new();
        for segment in &self.segments {
            match segment {
                Segment::Text(text) => out.push_str(text),
                Segment::Slot(slot) => {
                    let value = values.iter().find(|(k, _)| k == slot).map(|(_, v)| *v);
                    debug_assert!(value.is_some(), "no value for slot {slot}");
                    out.push_str(value.unwrap_or_default());
                }
            }
        }
        out
    }
}

/// Key schema entry: key name, allowed slots, whether the key is required.
pub type KeySpec = (&'static str, &'static [&'static str], bool);

/// A named collection of templates loaded from one TOML file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TemplateSet {
    templates: BTreeMap<String, Template>,
}

impl TemplateSet {
    pub fn parse(file: &str, text: &str, schema: &[KeySpec]) -> Result<Self, TemplateError> {
        let table: BTreeMap<String, String> =
            toml::from_str(text).map_err(|e| TemplateError::Syntax {
                file: file.to_string(),
                message: e.to_string(),
            })?;
        for key in table.keys() {
            if !schema.iter().any(|(k, _, _)| k == key) {
                return Err(TemplateError::UnknownKey {
                    file: file.to_string(),
                    key: key.clone(),
                });
            }
        }
        let mut templates = BTreeMap::new();
        for (key, slots, required) in schema {
            match table.get(*key) {
                Some(src) => {
                    templates.insert(key.to_string(), Template::parse(file, key, src, slots)?);
                }
                None if *required => {
                    return Err(TemplateError::MissingKey {
                        file: file.to_string(),
                        key: key.to_string(),
                    })
                }
                None => {}
            }
        }
        Ok(Self { templates })
    }

    pub fn has(&self, key: &str) -> bool {
        self.templates.contains_key(key)
    }

    /// Renders `key`. Panics if the key is not in the set; required keys are
    /// checked at load time.
    pub fn render(&self, key: &str, values: &[(&str, &str)]) -> String {
        self.templates
            .get(key)
            .unwrap_or_else(|| panic!("template key {key:?} missing"))
            .render(values)
    }
}

const ROTATION_STEP_KEYS: [KeySpec; 5] = [
    ("rotation_lead", &[], true),
    ("rotation_initial", &[], true),
    ("rotation_first", &["k", "step", "sense"], true),
    ("rotation_next", &["k", "step", "sense", "total"], true),
    ("rotation_further", &["k", "step", "sense", "total"], true),
];

pub const AMONG_SCHEMA: &[KeySpec] = &[
    ("intro", &["count"], true),
    ("anchor", &["anchor"], true),
    ("observation", &["k", "anchor", "object"], true),
    ("integration", &[], true),
    ROTATION_STEP_KEYS[0],
    ROTATION_STEP_KEYS[1],
    ROTATION_STEP_KEYS[2],
    ROTATION_STEP_KEYS[3],
    ROTATION_STEP_KEYS[4],
    ("inference_lead", &[], true),
    ("inference_first", &["object", "anchor", "ordinal", "relation"], true),
    ("inference_next", &["object", "anchor", "ordinal", "relation"], true),
    ("opposite", &["object", "anchor", "ordinal"], true),
    ("closing", &[], true),
    ("perspective", &["k", "statements"], true),
    ("statement_right", &["object", "anchor"], false),
    ("statement_behind", &["object", "anchor"], false),
    ("statement_left", &["object", "anchor"], false),
    ("statement_front", &["object", "anchor"], false),
    ("relation_front", &[], true),
    ("relation_behind", &[], true),
    ("relation_left", &[], true),
    ("relation_right", &[], true),
    ("answer", &["letter", "option"], true),
];

pub const ROTATION_SCHEMA: &[KeySpec] = &[
    ("intro", &["count"], true),
    ("anchor", &[], true),
    ("observation", &["k", "object"], true),
    ROTATION_STEP_KEYS[0],
    ROTATION_STEP_KEYS[1],
    ROTATION_STEP_KEYS[2],
    ROTATION_STEP_KEYS[3],
    ROTATION_STEP_KEYS[4],
    ("inference_lead", &[], true),
    ("inference_first", &["object", "ordinal", "relation"], true),
    ("inference_next", &["object", "ordinal", "relation"], true),
    ("opposite", &["object", "ordinal"], true),
    ("closing", &[], true),
    ("perspective", &["k", "statements"], true),
    ("statement_right", &["object"], false),
    ("statement_behind", &["object"], false),
    ("statement_left", &["object"], false),
    ("statement_front", &["object"], false),
    ("relation_front", &[], true),
    ("relation_behind", &[], true),
    ("relation_left", &[], true),
    ("relation_right", &[], true),
    ("answer", &["letter", "option"], true),
];

pub const AROUND_SCHEMA: &[KeySpec] = &[
    ("intro", &["count"], true),
    ("anchor", &["anchor"], true),
    ("observation", &["k", "anchor", "relations"], true),
    ("seen_front", &["object"], true),
    ("seen_behind", &["object"], true),
    ("seen_left", &["object"], true),
    ("seen_right", &["object"], true),
    ("integration", &["anchor"], true),
    ("perspective", &["k", "statements"], true),
    ("statement_right", &["object", "anchor"], false),
    ("statement_behind", &["object", "anchor"], false),
    ("statement_left", &["object", "anchor"], false),
    ("statement_front", &["object", "anchor"], false),
    ("answer", &["letter", "option"], true),
];

/// Instruction text files for prompt composition: file stem and slots.
pub const TASK_FILES: &[(&str, &[&str])] = &[
    ("answer", &[]),
    ("cogmap_input", &["cogmap"]),
    ("cogmap_output_augmented", &[]),
    ("cogmap_output_plain", &[]),
    ("reasoning", &[]),
];

const BUILTIN_AMONG: &str = include_str!("../templates/chains/among.toml");
const BUILTIN_AROUND: &str = include_str!("../templates/chains/around.toml");
const BUILTIN_ROTATION: &str = include_str!("../templates/chains/rotation.toml");

fn builtin_task(stem: &str) -> &'static str {
    match stem {
        "answer" => include_str!("../templates/tasks/answer.txt"),
        "cogmap_input" => include_str!("../templates/tasks/cogmap_input.txt"),
        "cogmap_output_augmented" => include_str!("../templates/tasks/cogmap_output_augmented.txt"),
        "cogmap_output_plain" => include_str!("../templates/tasks/cogmap_output_plain.txt"),
        "reasoning" => include_str!("../templates/tasks/reasoning.txt"),
        _ => unreachable!("unknown task template {stem}"),
    }
}

/// Every template the pipeline needs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Templates {
    among: TemplateSet,
    around: TemplateSet,
    rotation: TemplateSet,
    tasks: BTreeMap<String, Template>,
}

impl Templates {
    pub fn builtin() -> Self {
        Self::load(None).expect("built-in templates are valid")
    }

    /// Loads from `dir`, falling back to the built-in copy of each missing file.
    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Self, TemplateError> {
        Self::load(Some(dir.as_ref()))
    }

    /// Honors `COGFORGE_TEMPLATES` when set.
    pub fn from_env() -> Result<Self, TemplateError> {
        match std::env::var_os(TEMPLATES_ENV) {
            Some(dir) if !dir.is_empty() => Self::from_dir(dir),
            _ => Ok(Self::builtin()),
        }
    }

    fn load(dir: Option<&Path>) -> Result<Self, TemplateError> {
        let read = |rel: &str, builtin: &str| -> Result<String, TemplateError> {
            if let Some(path) = dir.map(|d| d.join(rel)).filter(|p| p.is_file()) {
                std::fs::read_to_string(&path).map_err(|e| TemplateError::Io {
                    file: path.display().to_string(),
                    message: e.to_string(),
                })
            } else {
                Ok(builtin.to_string())
            }
        };
        let chain = |stem: &str, builtin: &str, schema| {
            let rel = format!("chains/{stem}.toml");
            TemplateSet::parse(&rel, &read(&rel, builtin)?, schema)
        };
        let among = chain("among", BUILTIN_AMONG, AMONG_SCHEMA)?;
        let around = chain("around", BUILTIN_AROUND, AROUND_SCHEMA)?;
        let rotation = chain("rotation", BUILTIN_ROTATION, ROTATION_SCHEMA)?;
        let mut tasks = BTreeMap::new();
        for (stem, slots) in TASK_FILES {
            let rel = format!("tasks/{stem}.txt");
            let text = read(&rel, builtin_task(stem))?;
            let text = text.trim_end_matches(['\n', '\r']);
            tasks.insert(stem.to_string(), Template::parse(&rel, stem, text, slots)?);
        }
        Ok(Self {
            among,
            around,
            rotation,
            tasks,
        })
    }

    /// Chain templates for a setting; translation has none.
    pub fn chain(&self, setting: Setting) -> Option<&TemplateSet> {
        match setting {
            Setting::Among => Some(&self.among),
            Setting::Around => Some(&self.around),
            Setting::Rotation => Some(&self.rotation),
            Setting::Translation => None,
        }
    }

    pub fn task(&self, stem: &str, values: &[(&str, &str)]) -> String {
        self.tasks
            .get(stem)
            .unwrap_or_else(|| panic!("task template {stem:?} missing"))
            .render(values)
    }
}

impl Default for Templates {
    fn default() -> Self {
        Self::builtin()
    }
}
