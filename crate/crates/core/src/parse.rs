//! Tolerant extraction of `<cogmap>`, `<think>` and `<answer>` blocks from
//! model output.
//!
//! Nothing here fails on bad input. Each deviation from the expected format
//! is written to [`ParsedResponse::notes`] so evaluation can tell an invalid
//! map from a wrong one.

use std::sync::OnceLock;

use regex::Regex;
use serde::Serialize;
use serde_json::Value;

use crate::error::CogmapError;
use crate::scene::{view_name, CognitiveMap, Facing, GridPos, MapObject, MapView};

/// Characters scanned by the untagged answer fallback.
pub const FALLBACK_WINDOW: usize = 200;

/// Content of one tagged block.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TagSegment<'a> {
    pub content: &'a str,
    /// False when the block runs to end of text without a closing tag.
    pub closed: bool,
}

fn segment_from<'a>(text: &'a str, start: usize, close: &str) -> TagSegment<'a> {
    let rest = &text[start..];
    match rest.find(close) {
        Some(end) => TagSegment {
            content: &rest[..end],
            closed: true,
        },
        None => TagSegment {
            content: rest,
            closed: false,
        },
    }
}

/// Content between the first `<tag>` and the following `</tag>`.
pub fn extract_tag<'a>(text: &'a str, tag: &str) -> Option<TagSegment<'a>> {
    let open = format!("<{tag}>");
    let start = text.find(&open)? + open.len();
    Some(segment_from(text, start, &format!("</{tag}>")))
}

/// Like [`extract_tag`] but for the last `<tag>` in the text.
pub fn extract_last_tag<'a>(text: &'a str, tag: &str) -> Option<TagSegment<'a>> {
    let open = format!("<{tag}>");
    let start = text.rfind(&open)? + open.len();
    Some(segment_from(text, start, &format!("</{tag}>")))
}

/// A parsed cogmap with the warnings raised while reading it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParsedCogmap {
    pub map: CognitiveMap,
    pub notes: Vec<String>,
    pub off_grid: bool,
}

const DEBRIS: [&str; 4] = [r"\begin{verbatim}", r"\end{verbatim}", r"\newline", "'''"];

fn strip_fences(text: &str, notes: &mut Vec<String>) -> String {
    let mut out = text.to_string();
    for debris in DEBRIS {
        if out.contains(debris) {
            out = out.replace(debris, "");
            notes.push(format!("stripped {debris:?}"));
        }
    }
    let mut lines: Vec<&str> = Vec::new();
    for line in out.lines() {
        if line.trim_start().starts_with("```") {
            continue;
        }
        lines.push(line);
    }
    lines.join("\n")
}

/// Parses a cogmap block in either schema.
///
/// Fences, verbatim markers and stray `'''` are stripped first; anything
/// outside the outermost braces is dropped with a note.
pub fn parse_cogmap(text: &str) -> Result<ParsedCogmap, CogmapError> {
    let mut notes = Vec::new();
    let cleaned = strip_fences(text, &mut notes);
    let value: Value = match serde_json::from_str(cleaned.trim()) {
        Ok(v) => v,
        Err(first) => {
            let (Some(start), Some(end)) = (cleaned.find('{'), cleaned.rfind('}')) else {
                return Err(CogmapError::Invalid(format!("no JSON object: {first}")));
            };
            if end < start {
                return Err(CogmapError::Invalid(format!("no JSON object: {first}")));
            }
            notes.push("ignored text outside the JSON object".to_string());
            serde_json::from_str(&cleaned[start..=end])
                .map_err(|e| CogmapError::Invalid(e.to_string()))?
        }
    };
    let Value::Object(obj) = value else {
        return Err(CogmapError::Invalid("top level is not a JSON object".into()));
    };
    let mut reader = Reader {
        notes,
        off_grid: false,
    };
    let map = if obj.contains_key("objects") || obj.contains_key("views") {
        reader.augmented(&obj)?
    } else {
        reader.plain(&obj)?
    };
    Ok(ParsedCogmap {
        map,
        notes: reader.notes,
        off_grid: reader.off_grid,
    })
}

struct Reader {
    notes: Vec<String>,
    off_grid: bool,
}

impl Reader {
    fn position(&mut self, value: Option<&Value>, owner: &str) -> Result<GridPos, CogmapError> {
        let invalid = || CogmapError::Invalid(format!("{owner}: position must be [x, y]"));
        let coords = value.and_then(Value::as_array).ok_or_else(invalid)?;
        let [x, y] = coords.as_slice() else {
            return Err(invalid());
        };
        let int = |v: &Value| v.as_i64().and_then(|n| i32::try_from(n).ok());
        let (Some(x), Some(y)) = (int(x), int(y)) else {
            return Err(invalid());
        };
        let pos = GridPos::raw(x, y);
        if !pos.on_grid() {
            self.off_grid = true;
            self.notes.push(format!("{owner}: position {pos} is off the grid"));
        }
        Ok(pos)
    }

    fn facing(&mut self, value: Option<&Value>, owner: &str) -> Result<Option<Facing>, CogmapError> {
        match value {
            None | Some(Value::Null) => Ok(None),
            Some(Value::String(s)) => s
                .parse()
                .map(Some)
                .map_err(|_| CogmapError::Invalid(format!("{owner}: unknown facing {s:?}"))),
            Some(_) => Err(CogmapError::Invalid(format!("{owner}: facing must be a string"))),
        }
    }

    fn entries<'v>(
        obj: &'v serde_json::Map<String, Value>,
        key: &str,
    ) -> Result<&'v [Value], CogmapError> {
        match obj.get(key) {
            None => Ok(&[]),
            Some(Value::Array(a)) => Ok(a),
            Some(_) => Err(CogmapError::Invalid(format!("\"{key}\" must be a list"))),
        }
    }

    fn name<'v>(entry: &'v Value, what: &str, i: usize) -> Result<&'v str, CogmapError> {
        entry
            .get("name")
            .and_then(Value::as_str)
            .ok_or_else(|| CogmapError::Invalid(format!("{what} {i} has no name")))
    }

    fn augmented(&mut self, obj: &serde_json::Map<String, Value>) -> Result<CognitiveMap, CogmapError> {
        let mut map = CognitiveMap::default();
        for (i, entry) in Self::entries(obj, "objects")?.iter().enumerate() {
            let name = Self::name(entry, "object", i + 1)?;
            if map.objects.iter().any(|o| o.name == name) {
                self.notes.push(format!("duplicate object name {name:?}"));
            }
            map.objects.push(MapObject {
                name: name.to_string(),
                position: self.position(entry.get("position"), name)?,
                facing: self.facing(entry.get("facing"), name)?,
            });
        }
        for (i, entry) in Self::entries(obj, "views")?.iter().enumerate() {
            let raw = Self::name(entry, "view", i + 1)?;
            let name = self.view_name(raw, i + 1);
            let facing = self
                .facing(entry.get("facing"), raw)?
                .ok_or_else(|| CogmapError::Invalid(format!("{raw}: views need a facing")))?;
            map.views.push(MapView {
                name,
                position: self.position(entry.get("position"), raw)?,
                facing,
            });
        }
        Ok(map)
    }

    /// Normalizes "View/Image k", "View k" and similar to "Image k".
    fn view_name(&mut self, raw: &str, index: usize) -> String {
        static RE: OnceLock<Regex> = OnceLock::new();
        let re = RE.get_or_init(|| {
            Regex::new(r"(?i)^\s*(?:view\s*/\s*image|image\s*/\s*view|view|image)\s*(\d+)\s*$").unwrap()
        });
        match re.captures(raw).and_then(|c| c[1].parse::<usize>().ok()) {
            Some(k) => {
                let name = view_name(k);
                if name != raw {
                    self.notes.push(format!("view name {raw:?} read as {name:?}"));
                }
                if k != index {
                    self.notes.push(format!("view {index} is named {name:?}"));
                }
                name
            }
            None => {
                self.notes.push(format!("unrecognized view name {raw:?}"));
                raw.to_string()
            }
        }
    }

    fn plain(&mut self, obj: &serde_json::Map<String, Value>) -> Result<CognitiveMap, CogmapError> {
        let mut map = CognitiveMap::default();
        for (name, entry) in obj {
            let position = self.position(entry.get("position"), name)?;
            let facing = self.facing(entry.get("facing"), name)?;
            map.objects.push(MapObject {
                name: name.clone(),
                position,
                facing,
            });
        }
        Ok(map)
    }
}

fn is_candidate(text: &str, idx: usize, c: char) -> bool {
    if !c.is_ascii_uppercase() {
        return false;
    }
    let before = text[..idx].chars().next_back();
    if before.is_some_and(|b| b.is_alphanumeric() || b == '\\') {
        return false;
    }
    let rest = &text[idx + 1..];
    match rest.chars().next() {
        Some('.' | ')' | ':') => true,
        _ => !rest.chars().any(char::is_alphanumeric),
    }
}

/// First standalone capital letter followed by `.`, `)` or `:`, or by
/// nothing alphanumeric.
pub fn parse_answer(text: &str) -> Option<char> {
    text.char_indices()
        .find(|&(i, c)| is_candidate(text, i, c))
        .map(|(_, c)| c)
}

fn tail(text: &str, chars: usize) -> &str {
    let count = text.chars().count();
    match text.char_indices().nth(count.saturating_sub(chars)) {
        Some((i, _)) => &text[i..],
        None => text,
    }
}

/// Answer recovery for responses without an `<answer>` block: an explicit
/// "answer is X" near the end wins, otherwise the first candidate letter in
/// the last [`FALLBACK_WINDOW`] characters.
pub fn parse_answer_fallback(text: &str) -> Option<char> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| {
        Regex::new(r"(?i:answer\s+is)\s*:?\s*\(?([A-Z])(?:[.):]|\s|$)").unwrap()
    });
    let window = tail(text, FALLBACK_WINDOW);
    re.captures_iter(window)
        .last()
        .and_then(|c| c[1].chars().next())
        .or_else(|| parse_answer(window))
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ParsedResponse {
    pub cogmap: Option<CognitiveMap>,
    pub cogmap_valid: bool,
    pub raw_cogmap_text: Option<String>,
    pub think: Option<String>,
    pub answer: Option<char>,
    pub notes: Vec<String>,
    pub off_grid: bool,
}

pub fn parse_response(text: &str) -> ParsedResponse {
    let mut out = ParsedResponse::default();
    let unclosed = |seg: &TagSegment, tag: &str, notes: &mut Vec<String>| {
        if !seg.closed {
            notes.push(format!("<{tag}> is not closed; read to end of text"));
        }
    };
    if let Some(seg) = extract_tag(text, "cogmap") {
        unclosed(&seg, "cogmap", &mut out.notes);
        out.raw_cogmap_text = Some(seg.content.to_string());
        match parse_cogmap(seg.content) {
            Ok(parsed) => {
                out.notes.extend(parsed.notes);
                out.off_grid = parsed.off_grid;
                out.cogmap = Some(parsed.map);
                out.cogmap_valid = true;
            }
            Err(e) => out.notes.push(e.to_string()),
        }
    }
    if let Some(seg) = extract_tag(text, "think") {
        unclosed(&seg, "think", &mut out.notes);
        out.think = Some(seg.content.trim().to_string());
    }
    if text.matches("<answer>").count() > 1 {
        out.notes.push("several <answer> blocks; using the last".into());
    }
    out.answer = match extract_last_tag(text, "answer") {
        Some(seg) => {
            unclosed(&seg, "answer", &mut out.notes);
            let answer = parse_answer(seg.content);
            if answer.is_none() {
                out.notes.push("no option letter in <answer>".into());
            }
            answer
        }
        None => {
            out.notes.push("no <answer> block; scanned the end of the response".into());
            parse_answer_fallback(text)
        }
    };
    out
}
