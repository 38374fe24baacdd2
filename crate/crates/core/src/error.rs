use std::path::PathBuf;

use thiserror::Error;

use crate::scene::GridPos;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SceneError {
    #[error("position [{x}, {y}] is outside the 10x10 grid")]
    OffGrid { x: i32, y: i32 },
    #[error("identical positions {0} have no relative direction")]
    Degenerate(GridPos),
    #[error("unknown facing {0:?}")]
    UnknownFacing(String),
    #[error("unknown setting {0:?}")]
    UnknownSetting(String),
    #[error("unknown direction {0:?}")]
    UnknownDirection(String),
    #[error("duplicate name {0:?}")]
    DuplicateName(String),
    #[error("views must be numbered consecutively: expected {expected:?}, found {found:?}")]
    ViewNumbering { expected: String, found: String },
    #[error("invalid item: {0}")]
    InvalidItem(String),
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: no valid items ({errors} malformed lines)")]
    EmptyDataset { path: PathBuf, errors: usize },
    #[error("cannot parse a setting from id {0:?}")]
    UnparseableSetting(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LayoutError {
    #[error("{setting} layout supports {min}-{max} objects, got {found}")]
    ObjectCount {
        setting: &'static str,
        min: usize,
        max: usize,
        found: usize,
    },
    #[error("unsupported relation {0:?}")]
    UnsupportedRelation(String),
    #[error("layout error: {0}")]
    Invalid(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("view {index} out of range (map has {count} views)")]
    ViewOutOfRange { index: usize, count: usize },
    #[error("anchor {0:?} is not in the map")]
    UnknownAnchor(String),
    #[error("question needs an anchor object")]
    MissingAnchor,
    #[error("question needs a direction")]
    MissingDirection,
    #[error("ambiguous: {0} and {1} tie at the same direction and distance")]
    Ambiguous(String, String),
    #[error("unanswerable: {0}")]
    Unanswerable(String),
    #[error("cannot interpret question {0:?}")]
    UnparseableQuestion(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TemplateError {
    #[error("template {file}: {message}")]
    Syntax { file: String, message: String },
    #[error("template {file}: key {key:?} uses unknown slot {{{slot}}}")]
    UnknownSlot {
        file: String,
        key: String,
        slot: String,
    },
    #[error("template {file}: missing key {key:?}")]
    MissingKey { file: String, key: String },
    #[error("template {file}: unknown key {key:?}")]
    UnknownKey { file: String, key: String },
    #[error("cannot read template {file}: {message}")]
    Io { file: String, message: String },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChainError {
    #[error("no reasoning template for the {0} setting")]
    UnsupportedSetting(String),
    #[error("ungroundable chain: {0}")]
    Ungroundable(String),
    #[error("gold answer {gold} contradicts the map, which implies {derived}")]
    Inconsistent { gold: char, derived: char },
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

#[derive(Debug, Error)]
pub enum ComposeError {
    #[error("item {id}: {message}")]
    Missing { id: String, message: String },
    #[error("item {id}: {source}")]
    Layout {
        id: String,
        #[source]
        source: LayoutError,
    },
    #[error("item {id}: {source}")]
    Chain {
        id: String,
        #[source]
        source: ChainError,
    },
    #[error("item {id}: {source}")]
    Schema {
        id: String,
        #[source]
        source: CogmapError,
    },
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl ComposeError {
    /// Id of the offending item, when the error concerns one.
    pub fn item_id(&self) -> Option<&str> {
        match self {
            ComposeError::Missing { id, .. }
            | ComposeError::Layout { id, .. }
            | ComposeError::Chain { id, .. }
            | ComposeError::Schema { id, .. } => Some(id),
            ComposeError::Io { .. } => None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CogmapError {
    #[error("invalid cogmap: {0}")]
    Invalid(String),
    #[error("plain schema cannot hold duplicate object name {0:?}")]
    DuplicateName(String),
}

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no gradable results")]
    EmptyRun,
}

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("cannot read fixture {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("fixture {name} is corrupt: checksum {actual} does not match committed {expected}")]
    Checksum {
        name: String,
        expected: String,
        actual: String,
    },
    #[error("fixture {name}: {message}")]
    Format { name: String, message: String },
}
