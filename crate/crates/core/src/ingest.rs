//! JSONL loading and validation of scene items.
//!
//! Each nonblank line holds one item with keys `id`, `images`, `meta_info`,
//! `question`, `options` and `gt_answer` (alias `answer`). Malformed lines are
//! recorded in [`DatasetFile::line_errors`] instead of aborting the load.

use std::path::{Path, PathBuf};

use serde_json::{Map, Value};

use crate::error::IngestError;
use crate::scene::{AnswerOption, MetaInfo, SceneItem, Setting};

const KNOWN_KEYS: [&str; 7] = [
    "id",
    "images",
    "meta_info",
    "question",
    "options",
    "gt_answer",
    "answer",
];

#[derive(Clone, Debug, PartialEq)]
pub struct LineError {
    /// 1-based line number.
    pub line: usize,
    /// Item id when the line was readable far enough to have one.
    pub id: Option<String>,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetFile {
    pub path: PathBuf,
    pub items: Vec<SceneItem>,
    pub line_errors: Vec<LineError>,
}

pub fn load_items(path: impl AsRef<Path>) -> Result<DatasetFile, IngestError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let dataset = parse_items(&text, path);
    if dataset.items.is_empty() {
        return Err(IngestError::EmptyDataset {
            path: path.to_path_buf(),
            errors: dataset.line_errors.len(),
        });
    }
    Ok(dataset)
}

/// Parses JSONL text; never fails, even when no line is valid.
pub fn parse_items(text: &str, path: &Path) -> DatasetFile {
    let mut items = Vec::new();
    let mut line_errors = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match parse_item(line) {
            Ok(item) => items.push(item),
            Err((id, message)) => line_errors.push(LineError {
                line: i + 1,
                id,
                message,
            }),
        }
    }
    DatasetFile {
        path: path.to_path_buf(),
        items,
        line_errors,
    }
}

/// Parses one JSONL line. On failure returns the id (if any) and a message.
pub fn parse_item(line: &str) -> Result<SceneItem, (Option<String>, String)> {
    let value: Value =
        serde_json::from_str(line).map_err(|e| (None, format!("malformed JSON: {e}")))?;
    let Value::Object(mut obj) = value else {
        return Err((None, "line is not a JSON object".to_string()));
    };
    let id = match obj.get("id") {
        Some(Value::String(s)) if !s.trim().is_empty() => s.clone(),
        Some(Value::Number(n)) => n.to_string(),
        Some(_) => return Err((None, "field id must be a nonempty string".into())),
        None => return Err((None, "missing field id".into())),
    };
    let fail = |message: String| (Some(id.clone()), message);

    let images = field(&obj, "images")
        .ok_or_else(|| fail("missing field images".into()))?;
    let images: Vec<String> =
        serde_json::from_value(images).map_err(|e| fail(format!("field images: {e}")))?;

    let meta_info = field(&obj, "meta_info")
        .ok_or_else(|| fail("missing field meta_info".into()))?;
    let meta_info: MetaInfo =
        serde_json::from_value(meta_info).map_err(|e| fail(format!("field meta_info: {e}")))?;

    let question = match field(&obj, "question") {
        Some(Value::String(s)) => s,
        Some(_) => return Err(fail("field question must be a string".into())),
        None => return Err(fail("missing field question".into())),
    };

    let options = field(&obj, "options")
        .ok_or_else(|| fail("missing field options".into()))?;
    let options = parse_options(options).map_err(|m| fail(format!("field options: {m}")))?;

    let answer = field(&obj, "gt_answer")
        .or_else(|| field(&obj, "answer"))
        .ok_or_else(|| fail("missing field gt_answer".into()))?;
    let gold_answer = match &answer {
        Value::String(s) => answer_letter(s),
        _ => None,
    }
    .ok_or_else(|| fail(format!("field gt_answer: cannot read an option letter from {answer}")))?;

    let setting = parse_setting(&id).map_err(|e| fail(e.to_string()))?;

    obj.retain(|k, _| !KNOWN_KEYS.contains(&k.as_str()));
    let item = SceneItem {
        id: id.clone(),
        images,
        meta_info,
        question,
        options,
        gold_answer,
        setting,
        extra: obj,
    };
    item.validate().map_err(|e| fail(e.to_string()))?;
    Ok(item)
}

fn field(obj: &Map<String, Value>, key: &str) -> Option<Value> {
    obj.get(key).cloned()
}

/// Options may be `["A. text", ...]`, `{"A": "text", ...}` or
/// `[{"letter": "A", "text": "..."}, ...]`.
fn parse_options(value: Value) -> Result<Vec<AnswerOption>, String> {
    match value {
        Value::Array(entries) => entries
            .into_iter()
            .enumerate()
            .map(|(i, entry)| match entry {
                Value::String(s) => split_option(&s)
                    .ok_or_else(|| format!("entry {i} {s:?} is not of the form \"L. text\"")),
                Value::Object(_) => serde_json::from_value::<AnswerOption>(entry)
                    .map(|o| AnswerOption::new(o.letter.to_ascii_uppercase(), o.text))
                    .map_err(|e| format!("entry {i}: {e}")),
                other => Err(format!("entry {i} has unsupported type: {other}")),
            })
            .collect(),
        Value::Object(map) => map
            .into_iter()
            .map(|(letter, text)| {
                let letter = single_letter(&letter)
                    .ok_or_else(|| format!("key {letter:?} is not a letter"))?;
                let text = text
                    .as_str()
                    .ok_or_else(|| format!("option {letter} text must be a string"))?;
                Ok(AnswerOption::new(letter, text.trim()))
            })
            .collect(),
        other => Err(format!("unsupported type: {other}")),
    }
}

fn single_letter(s: &str) -> Option<char> {
    let mut chars = s.trim().chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) if c.is_ascii_alphabetic() => Some(c.to_ascii_uppercase()),
        _ => None,
    }
}

/// Splits `"A. text"` / `"A) text"` / `"A: text"` into an option.
fn split_option(s: &str) -> Option<AnswerOption> {
    let s = s.trim();
    let mut chars = s.char_indices();
    let (_, letter) = chars.next()?;
    if !letter.is_ascii_alphabetic() {
        return None;
    }
    let (sep_idx, sep) = chars.next()?;
    if !matches!(sep, '.' | ')' | ':') {
        return None;
    }
    let text = s[sep_idx + sep.len_utf8()..].trim();
    if text.is_empty() {
        return None;
    }
    Some(AnswerOption::new(letter.to_ascii_uppercase(), text))
}

/// Gold answers may be a bare letter or a full `"C. text"` label.
fn answer_letter(s: &str) -> Option<char> {
    single_letter(s).or_else(|| split_option(s).map(|o| o.letter))
}

/// Derives the setting from delimiter-separated tokens of an item id.
pub fn parse_setting(item_id: &str) -> Result<Setting, IngestError> {
    let mut found: Option<Setting> = None;
    for token in item_id.split(['_', '-', '/']) {
        let token = token.to_ascii_lowercase();
        if let Some(setting) = Setting::ALL.into_iter().find(|s| s.as_str() == token) {
            match found {
                Some(prev) if prev != setting => {
                    return Err(IngestError::UnparseableSetting(item_id.to_string()))
                }
                _ => found = Some(setting),
            }
        }
    }
    found.ok_or_else(|| IngestError::UnparseableSetting(item_id.to_string()))
}
