//! Golden response fixtures: raw model outputs with their expected parse.
//!
//! Layout of the fixture directory: `INDEX` lists case names in order, each
//! case has `<name>.txt` (raw output, verbatim) and `<name>.expected.json`,
//! and `SHA256SUMS` pins the bytes of every case file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::cogmap::CogmapSchema;
use crate::error::FixtureError;
use crate::scene::CognitiveMap;

/// Fixture directory shipped with the crate.
pub const GOLDEN_DIR: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/goldens");

#[derive(Clone, Debug, PartialEq, Eq, Deserialize)]
pub struct ExpectedParse {
    pub answer: Option<char>,
    pub cogmap_valid: bool,
    pub cogmap_schema: Option<CogmapSchema>,
    pub objects: Option<usize>,
    pub views: Option<usize>,
    pub off_grid: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GoldenCase {
    pub name: String,
    pub title: String,
    pub raw: String,
    pub expected: ExpectedParse,
    pub gold_answer: char,
    pub gold_cogmap: Option<CognitiveMap>,
}

#[derive(Deserialize)]
struct ExpectedFile {
    title: String,
    #[serde(flatten)]
    expected: ExpectedParse,
    gold_answer: char,
    gold_cogmap: Option<CognitiveMap>,
}

pub fn load_goldens() -> Result<Vec<GoldenCase>, FixtureError> {
    load_goldens_from(GOLDEN_DIR)
}

fn read(path: PathBuf) -> Result<String, FixtureError> {
    std::fs::read_to_string(&path).map_err(|source| FixtureError::Io { path, source })
}

fn checksums(dir: &Path) -> Result<BTreeMap<String, String>, FixtureError> {
    let text = read(dir.join("SHA256SUMS"))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let (hash, name) = line.split_once("  ").ok_or_else(|| FixtureError::Format {
                name: "SHA256SUMS".into(),
                message: format!("bad line {line:?}"),
            })?;
            Ok((name.trim().to_string(), hash.trim().to_ascii_lowercase()))
        })
        .collect()
}

fn verified(dir: &Path, file: &str, sums: &BTreeMap<String, String>) -> Result<String, FixtureError> {
    let text = read(dir.join(file))?;
    let actual = hex::encode(Sha256::digest(text.as_bytes()));
    let expected = sums.get(file).ok_or_else(|| FixtureError::Format {
        name: file.to_string(),
        message: "no committed checksum".into(),
    })?;
    if &actual != expected {
        return Err(FixtureError::Checksum {
            name: file.to_string(),
            expected: expected.clone(),
            actual,
        });
    }
    Ok(text)
}

/// Loads every case named in `dir/INDEX`, checking each file against
/// `dir/SHA256SUMS`.
pub fn load_goldens_from(dir: impl AsRef<Path>) -> Result<Vec<GoldenCase>, FixtureError> {
    let dir = dir.as_ref();
    let sums = checksums(dir)?;
    let index = read(dir.join("INDEX"))?;
    let mut cases = Vec::new();
    for name in index.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let raw = verified(dir, &format!("{name}.txt"), &sums)?;
        let file = format!("{name}.expected.json");
        let expected: ExpectedFile = serde_json::from_str(&verified(dir, &file, &sums)?)
            .map_err(|e| FixtureError::Format {
                name: file.clone(),
                message: e.to_string(),
            })?;
        cases.push(GoldenCase {
            name: name.to_string(),
            title: expected.title,
            raw,
            expected: expected.expected,
            gold_answer: expected.gold_answer,
            gold_cogmap: expected.gold_cogmap,
        });
    }
    Ok(cases)
}
