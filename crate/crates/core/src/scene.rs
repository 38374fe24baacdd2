//! Domain types shared by every stage of the pipeline, plus the facing and
//! direction algebra on the 10x10 grid.
//!
//! Coordinate convention: `x` grows to the right, `y` grows downward, so
//! `up` is `(0, -1)`.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::SceneError;

/// Side length of the cognitive-map grid.
pub const GRID_SIZE: i32 = 10;

/// A cell on the grid, serialized as `[x, y]`.
///
/// Values built with [`GridPos::new`] are always on the grid. Positions parsed
/// from model output may lie off the grid; those are built with
/// [`GridPos::raw`] and can be checked with [`GridPos::on_grid`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GridPos {
    pub x: i32,
    pub y: i32,
}

impl GridPos {
    pub fn new(x: i32, y: i32) -> Result<Self, SceneError> {
        let pos = Self { x, y };
        if pos.on_grid() {
            Ok(pos)
        } else {
            Err(SceneError::OffGrid { x, y })
        }
    }

    pub const fn raw(x: i32, y: i32) -> Self {
        Self { x, y }
    }

    pub fn on_grid(&self) -> bool {
        (0..GRID_SIZE).contains(&self.x) && (0..GRID_SIZE).contains(&self.y)
    }

    /// Moves by `steps` cells along `facing`. The result may be off the grid.
    pub fn step(self, facing: Facing, steps: i32) -> Self {
        let (dx, dy) = facing.vector();
        Self::raw(self.x + dx * steps, self.y + dy * steps)
    }

    pub fn translate(self, dx: i32, dy: i32) -> Self {
        Self::raw(self.x + dx, self.y + dy)
    }

    pub fn manhattan(self, other: GridPos) -> i32 {
        (self.x - other.x).abs() + (self.y - other.y).abs()
    }
}

impl fmt::Display for GridPos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.x, self.y)
    }
}

impl Serialize for GridPos {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        [self.x, self.y].serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for GridPos {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let coords = Vec::<i64>::deserialize(deserializer)?;
        match coords.as_slice() {
            [x, y] => {
                let x = i32::try_from(*x).map_err(D::Error::custom)?;
                let y = i32::try_from(*y).map_err(D::Error::custom)?;
                Ok(Self::raw(x, y))
            }
            _ => Err(D::Error::custom(format!(
                "position must have 2 coordinates, got {}",
                coords.len()
            ))),
        }
    }
}

/// Facing direction on the grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Facing {
    Up,
    Right,
    Down,
    Left,
}

impl Facing {
    /// Clockwise order starting from `up`.
    pub const ALL: [Facing; 4] = [Facing::Up, Facing::Right, Facing::Down, Facing::Left];

    pub fn vector(self) -> (i32, i32) {
        match self {
            Facing::Up => (0, -1),
            Facing::Down => (0, 1),
            Facing::Left => (-1, 0),
            Facing::Right => (1, 0),
        }
    }

    pub fn from_vector(v: (i32, i32)) -> Option<Facing> {
        Facing::ALL.into_iter().find(|f| f.vector() == v)
    }

    fn index(self) -> i32 {
        match self {
            Facing::Up => 0,
            Facing::Right => 1,
            Facing::Down => 2,
            Facing::Left => 3,
        }
    }

    /// Rotates by `quarter_turns` clockwise quarter turns (negative turns
    /// counterclockwise).
    pub fn turn(self, quarter_turns: i32) -> Facing {
        Facing::ALL[(self.index() + quarter_turns).rem_euclid(4) as usize]
    }

    /// Number of clockwise quarter turns (0..4) taking `from` to `self`.
    pub fn quarter_turns_from(self, from: Facing) -> i32 {
        (self.index() - from.index()).rem_euclid(4)
    }

    /// Facing after a clockwise turn of `degrees` from `up`; `degrees` must be
    /// a multiple of 90.
    pub fn from_camera_angle(degrees: i32) -> Option<Facing> {
        (degrees % 90 == 0).then(|| Facing::Up.turn(degrees / 90))
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Facing::Up => "up",
            Facing::Down => "down",
            Facing::Left => "left",
            Facing::Right => "right",
        }
    }
}

impl fmt::Display for Facing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Facing {
    type Err = SceneError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "up" => Ok(Facing::Up),
            "down" => Ok(Facing::Down),
            "left" => Ok(Facing::Left),
            "right" => Ok(Facing::Right),
            _ => Err(SceneError::UnknownFacing(s.to_string())),
        }
    }
}

/// Free-function form of [`Facing::vector`].
pub fn facing_vector(facing: Facing) -> (i32, i32) {
    facing.vector()
}

/// Free-function form of [`Facing::turn`].
pub fn turn(facing: Facing, quarter_turns_clockwise: i32) -> Facing {
    facing.turn(quarter_turns_clockwise)
}

/// Scene-arrangement family, encoded in each item's id.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Setting {
    Rotation,
    Among,
    Around,
    Translation,
}

impl Setting {
    pub const ALL: [Setting; 4] = [
        Setting::Around,
        Setting::Among,
        Setting::Translation,
        Setting::Rotation,
    ];

    /// Settings that are graded and broken out in reports.
    pub const REPORTED: [Setting; 3] = [Setting::Rotation, Setting::Among, Setting::Around];

    pub fn as_str(self) -> &'static str {
        match self {
            Setting::Around => "around",
            Setting::Among => "among",
            Setting::Translation => "translation",
            Setting::Rotation => "rotation",
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Setting {
    type Err = SceneError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        Setting::ALL
            .into_iter()
            .find(|setting| setting.as_str() == lower)
            .ok_or_else(|| SceneError::UnknownSetting(s.to_string()))
    }
}

/// Direction relative to a viewer's facing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Front,
    Behind,
    Left,
    Right,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::Front,
        Direction::Behind,
        Direction::Left,
        Direction::Right,
    ];

    pub fn opposite(self) -> Direction {
        match self {
            Direction::Front => Direction::Behind,
            Direction::Behind => Direction::Front,
            Direction::Left => Direction::Right,
            Direction::Right => Direction::Left,
        }
    }

    /// Grid vector of this direction for a viewer with the given facing.
    pub fn vector_for(self, viewer: Facing) -> (i32, i32) {
        let (fx, fy) = viewer.vector();
        match self {
            Direction::Front => (fx, fy),
            Direction::Behind => (-fx, -fy),
            Direction::Left => (fy, -fx),
            Direction::Right => (-fy, fx),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Front => "front",
            Direction::Behind => "behind",
            Direction::Left => "left",
            Direction::Right => "right",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Direction {
    type Err = SceneError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "front" | "in front" | "in front of" => Ok(Direction::Front),
            "behind" | "back" => Ok(Direction::Behind),
            "left" => Ok(Direction::Left),
            "right" => Ok(Direction::Right),
            _ => Err(SceneError::UnknownDirection(s.to_string())),
        }
    }
}

/// Direction of `to` as seen from `from` by a viewer facing `viewer`.
///
/// Returns `Ok(None)` for off-axis displacements; they are never rounded to a
/// quadrant.
pub fn relative_direction(
    viewer: Facing,
    from: GridPos,
    to: GridPos,
) -> Result<Option<Direction>, SceneError> {
    let (dx, dy) = (to.x - from.x, to.y - from.y);
    if dx == 0 && dy == 0 {
        return Err(SceneError::Degenerate(from));
    }
    if dx != 0 && dy != 0 {
        return Ok(None);
    }
    let unit = (dx.signum(), dy.signum());
    Ok(Direction::ALL
        .into_iter()
        .find(|d| d.vector_for(viewer) == unit))
}

/// One multiple-choice option.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerOption {
    pub letter: char,
    pub text: String,
}

impl AnswerOption {
    pub fn new(letter: char, text: impl Into<String>) -> Self {
        Self {
            letter,
            text: text.into(),
        }
    }

    /// `"L. text"` as used in answer blocks and prompts.
    pub fn label(&self) -> String {
        format!("{}. {}", self.letter, self.text)
    }
}

/// An annotated object in `meta_info`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orientation: Option<Facing>,
}

impl ObjectSpec {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            orientation: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RotationSense {
    #[default]
    Clockwise,
    Counterclockwise,
}

impl RotationSense {
    pub fn as_str(self) -> &'static str {
        match self {
            RotationSense::Clockwise => "clockwise",
            RotationSense::Counterclockwise => "counterclockwise",
        }
    }
}

/// Camera setup: clockwise angles in degrees, one per image, measured from the
/// first view's heading. An empty list means "consecutive 90-degree steps".
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CameraSetup {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub angles: Vec<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation: Option<RotationSense>,
}

/// A spatial relation between two objects (translation setting), e.g.
/// `cup on table`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relation {
    pub subject: String,
    pub relation: String,
    pub object: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionKind {
    /// "From image k, what is to the <direction> of <anchor>?"
    RelativeToAnchorFromView,
    /// "From image k, what is behind you?"
    BehindViewerFromView,
    /// "From image k, what is in front of you (beyond the anchor)?"
    FrontObjectInView,
}

/// Structured form of an item's question, either annotated directly in
/// `meta_info.query` or recovered from the question text.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuerySpec {
    pub kind: QuestionKind,
    pub view: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Direction>,
}

/// Object annotations and camera setup for one scene.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetaInfo {
    pub objects: Vec<ObjectSpec>,
    #[serde(default)]
    pub camera: CameraSetup,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub relations: Vec<Relation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query: Option<QuerySpec>,
    #[serde(flatten)]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

/// One annotated scene with its multiple-choice question.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneItem {
    pub id: String,
    pub images: Vec<String>,
    pub meta_info: MetaInfo,
    pub question: String,
    pub options: Vec<AnswerOption>,
    pub gold_answer: char,
    pub setting: Setting,
    /// Input fields outside the known schema, kept for re-emission.
    pub extra: serde_json::Map<String, serde_json::Value>,
}

impl SceneItem {
    pub fn option(&self, letter: char) -> Option<&AnswerOption> {
        let letter = letter.to_ascii_uppercase();
        self.options.iter().find(|o| o.letter == letter)
    }

    pub fn gold_option(&self) -> Option<&AnswerOption> {
        self.option(self.gold_answer)
    }

    /// Checks the item-level invariants.
    pub fn validate(&self) -> Result<(), SceneError> {
        if self.images.is_empty() {
            return Err(SceneError::InvalidItem("at least one image is required".into()));
        }
        if self.options.len() < 2 {
            return Err(SceneError::InvalidItem("at least two options are required".into()));
        }
        let mut letters = HashSet::new();
        for option in &self.options {
            if !letters.insert(option.letter) {
                return Err(SceneError::InvalidItem(format!(
                    "duplicate option letter {}",
                    option.letter
                )));
            }
        }
        if self.gold_option().is_none() {
            return Err(SceneError::InvalidItem(format!(
                "gold answer {} is not among the options",
                self.gold_answer
            )));
        }
        Ok(())
    }

    /// JSON form of the item in the input schema, extra fields included.
    pub fn to_json(&self) -> serde_json::Value {
        let mut obj = serde_json::Map::new();
        obj.insert("id".into(), self.id.clone().into());
        obj.insert("images".into(), serde_json::json!(self.images));
        obj.insert(
            "meta_info".into(),
            serde_json::to_value(&self.meta_info).expect("meta_info serializes"),
        );
        obj.insert("question".into(), self.question.clone().into());
        obj.insert(
            "options".into(),
            serde_json::json!(self.options.iter().map(AnswerOption::label).collect::<Vec<_>>()),
        );
        obj.insert("gt_answer".into(), self.gold_answer.to_string().into());
        for (key, value) in &self.extra {
            obj.entry(key.clone()).or_insert_with(|| value.clone());
        }
        serde_json::Value::Object(obj)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapObject {
    pub name: String,
    pub position: GridPos,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub facing: Option<Facing>,
}

impl MapObject {
    pub fn new(name: impl Into<String>, position: GridPos) -> Self {
        Self {
            name: name.into(),
            position,
            facing: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapView {
    pub name: String,
    pub position: GridPos,
    pub facing: Facing,
}

impl MapView {
    pub fn new(index: usize, position: GridPos, facing: Facing) -> Self {
        Self {
            name: view_name(index),
            position,
            facing,
        }
    }
}

/// Canonical 1-based view name, `"Image k"`.
pub fn view_name(index: usize) -> String {
    format!("Image {index}")
}

/// Objects and camera views laid out on the grid.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CognitiveMap {
    pub objects: Vec<MapObject>,
    #[serde(default)]
    pub views: Vec<MapView>,
}

impl CognitiveMap {
    pub fn object(&self, name: &str) -> Option<&MapObject> {
        let needle = name.trim();
        self.objects
            .iter()
            .find(|o| o.name.trim().eq_ignore_ascii_case(needle))
    }

    /// View by 1-based index.
    pub fn view(&self, index: usize) -> Option<&MapView> {
        index.checked_sub(1).and_then(|i| self.views.get(i))
    }

    /// Checks unique names, consecutive view numbering and on-grid positions.
    pub fn validate(&self) -> Result<(), SceneError> {
        let mut names = HashSet::new();
        for object in &self.objects {
            if !names.insert(object.name.as_str()) {
                return Err(SceneError::DuplicateName(object.name.clone()));
            }
            if !object.position.on_grid() {
                return Err(SceneError::OffGrid {
                    x: object.position.x,
                    y: object.position.y,
                });
            }
        }
        for (i, view) in self.views.iter().enumerate() {
            if view.name != view_name(i + 1) {
                return Err(SceneError::ViewNumbering {
                    expected: view_name(i + 1),
                    found: view.name.clone(),
                });
            }
            if !view.position.on_grid() {
                return Err(SceneError::OffGrid {
                    x: view.position.x,
                    y: view.position.y,
                });
            }
        }
        Ok(())
    }

    /// Distance along `facing` from `origin` to `target`, if `target` lies
    /// strictly ahead on that ray.
    pub fn ray_distance(origin: GridPos, facing: Facing, target: GridPos) -> Option<i32> {
        let (fx, fy) = facing.vector();
        let (dx, dy) = (target.x - origin.x, target.y - origin.y);
        let cross = dx * fy - dy * fx;
        let dot = dx * fx + dy * fy;
        (cross == 0 && dot > 0).then_some(dot)
    }

    /// The anchor: the first object lying ahead on every view's ray. Maps
    /// without views have no anchor.
    pub fn anchor(&self) -> Option<&MapObject> {
        if self.views.is_empty() {
            return None;
        }
        self.objects.iter().find(|object| {
            self.views.iter().all(|view| {
                Self::ray_distance(view.position, view.facing, object.position).is_some()
            })
        })
    }
}
