//! Rule-based cognitive-map layout per setting, and the two JSON schemas the
//! maps are emitted in.
//!
//! Camera angles are clockwise degrees from the first view's heading; a view
//! at angle `a` faces `up` turned by `a / 90` quarter turns. Views are named
//! `Image k` in input image order.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{CogmapError, LayoutError};
use crate::scene::{
    CognitiveMap, Facing, GridPos, MapObject, MapView, RotationSense, SceneItem, Setting,
};

/// Grid center shared by all layouts.
pub const CENTER: GridPos = GridPos::raw(5, 5);

/// Slots for the surrounding objects of an among layout, in meta_info order.
pub const AMONG_SLOTS: [GridPos; 4] = [
    GridPos::raw(5, 8),
    GridPos::raw(2, 5),
    GridPos::raw(5, 2),
    GridPos::raw(8, 5),
];

/// Distance from the camera to each view's focal object in a rotation layout.
pub const ROTATION_RADIUS: i32 = 3;

const TRANSLATION_OBJECT_X: i32 = 5;
const TRANSLATION_VIEW_X: i32 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CogmapSchema {
    Augmented,
    Plain,
}

impl CogmapSchema {
    pub fn as_str(self) -> &'static str {
        match self {
            CogmapSchema::Augmented => "augmented",
            CogmapSchema::Plain => "plain",
        }
    }

    pub fn serialize(self, map: &CognitiveMap) -> Result<String, CogmapError> {
        match self {
            CogmapSchema::Augmented => Ok(serialize_augmented(map)),
            CogmapSchema::Plain => serialize_plain(map),
        }
    }
}

impl FromStr for CogmapSchema {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "augmented" | "aug" => Ok(CogmapSchema::Augmented),
            "plain" => Ok(CogmapSchema::Plain),
            other => Err(format!("unknown cogmap schema {other:?} (expected augmented or plain)")),
        }
    }
}

/// Lays out objects and views for an item according to its setting.
pub fn generate_cogmap(item: &SceneItem) -> Result<CognitiveMap, LayoutError> {
    let mut map = match item.setting {
        Setting::Around => layout_around(item)?,
        Setting::Among => layout_among(item)?,
        Setting::Translation => layout_translation(item)?,
        Setting::Rotation => layout_rotation(item)?,
    };
    for (object, spec) in map.objects.iter_mut().zip(&item.meta_info.objects) {
        object.facing = spec.orientation;
    }
    map.validate()
        .map_err(|e| LayoutError::Invalid(e.to_string()))?;
    Ok(map)
}

fn check_count(
    setting: Setting,
    found: usize,
    min: usize,
    max: usize,
) -> Result<(), LayoutError> {
    if (min..=max).contains(&found) {
        Ok(())
    } else {
        Err(LayoutError::ObjectCount {
            setting: setting.as_str(),
            min,
            max,
            found,
        })
    }
}

/// One facing per image, from the camera angles or consecutive quarter turns.
fn view_facings(item: &SceneItem) -> Result<Vec<Facing>, LayoutError> {
    let images = item.images.len();
    let camera = &item.meta_info.camera;
    if camera.angles.is_empty() {
        let step = match camera.rotation.unwrap_or_default() {
            RotationSense::Clockwise => 1,
            RotationSense::Counterclockwise => -1,
        };
        if images > 4 {
            return Err(LayoutError::Invalid(format!(
                "{images} images need explicit camera angles"
            )));
        }
        return Ok((0..images as i32).map(|k| Facing::Up.turn(k * step)).collect());
    }
    if camera.angles.len() != images {
        return Err(LayoutError::Invalid(format!(
            "{} camera angles for {images} images",
            camera.angles.len()
        )));
    }
    let facings = camera
        .angles
        .iter()
        .map(|&angle| {
            Facing::from_camera_angle(angle).ok_or_else(|| {
                LayoutError::Invalid(format!("camera angle {angle} is not a multiple of 90"))
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut seen = HashSet::new();
    if let Some(dup) = facings.iter().find(|f| !seen.insert(**f)) {
        return Err(LayoutError::Invalid(format!("two views both face {dup}")));
    }
    Ok(facings)
}

fn objects_at(item: &SceneItem, positions: impl IntoIterator<Item = GridPos>) -> Vec<MapObject> {
    item.meta_info
        .objects
        .iter()
        .zip(positions)
        .map(|(spec, pos)| MapObject::new(spec.name.clone(), pos))
        .collect()
}

fn views_from(placements: impl IntoIterator<Item = (GridPos, Facing)>) -> Vec<MapView> {
    placements
        .into_iter()
        .enumerate()
        .map(|(i, (pos, facing))| MapView::new(i + 1, pos, facing))
        .collect()
}

/// Objects in a row from `[4, 5]`; each view sits on the side its facing
/// looks in from, one cell off the row ends or two cells off the row's middle.
fn layout_around(item: &SceneItem) -> Result<CognitiveMap, LayoutError> {
    let n = item.meta_info.objects.len();
    check_count(Setting::Around, n, 2, 4)?;
    let first_x = 4;
    let last_x = first_x + n as i32 - 1;
    let mid_x = first_x + (n as i32 - 1) / 2;
    let objects = objects_at(item, (0..n as i32).map(|i| GridPos::raw(first_x + i, 5)));
    let views = view_facings(item)?.into_iter().map(|facing| {
        let pos = match facing {
            Facing::Up => GridPos::raw(mid_x, 7),
            Facing::Down => GridPos::raw(mid_x, 3),
            Facing::Right => GridPos::raw(first_x - 1, 5),
            Facing::Left => GridPos::raw(last_x + 1, 5),
        };
        (pos, facing)
    });
    let views = views_from(views);
    Ok(CognitiveMap { objects, views })
}

/// Center object at `[5, 5]`, surrounding objects on the four cross slots,
/// each view one cell from the center facing it.
fn layout_among(item: &SceneItem) -> Result<CognitiveMap, LayoutError> {
    let n = item.meta_info.objects.len();
    check_count(Setting::Among, n, 2, 1 + AMONG_SLOTS.len())?;
    let objects = objects_at(item, std::iter::once(CENTER).chain(AMONG_SLOTS));
    let views = view_facings(item)?
        .into_iter()
        .map(|facing| (CENTER.step(facing, -1), facing));
    Ok(CognitiveMap {
        objects,
        views: views_from(views),
    })
}

/// Camera fixed at the center; object k is the focal object of view k, three
/// cells ahead of it.
fn layout_rotation(item: &SceneItem) -> Result<CognitiveMap, LayoutError> {
    let facings = view_facings(item)?;
    let n = item.meta_info.objects.len();
    check_count(Setting::Rotation, n, 1, 4)?;
    if n != facings.len() {
        return Err(LayoutError::Invalid(format!(
            "rotation needs one focal object per view: {n} objects for {} views",
            facings.len()
        )));
    }
    let objects = objects_at(item, facings.iter().map(|&f| CENTER.step(f, ROTATION_RADIUS)));
    Ok(CognitiveMap {
        objects,
        views: views_from(facings.into_iter().map(|f| (CENTER, f))),
    })
}

/// Vertical offset of `subject` relative to `object` for a relation word.
fn relation_offset(relation: &str) -> Result<i32, LayoutError> {
    match relation.trim().to_ascii_lowercase().as_str() {
        "on" | "on top of" | "above" | "up" | "up to" | "over" => Ok(-1),
        "under" | "below" | "beneath" | "down" | "down to" | "underneath" => Ok(1),
        _ => Err(LayoutError::UnsupportedRelation(relation.to_string())),
    }
}

/// Objects stacked on `x = 5` following the relations; views at `x = 3`
/// facing right, level with successive objects.
fn layout_translation(item: &SceneItem) -> Result<CognitiveMap, LayoutError> {
    let specs = &item.meta_info.objects;
    let n = specs.len();
    check_count(Setting::Translation, n, 2, 4)?;
    let index: HashMap<&str, usize> = specs
        .iter()
        .enumerate()
        .map(|(i, s)| (s.name.as_str(), i))
        .collect();
    let mut constraints = Vec::new();
    for rel in &item.meta_info.relations {
        let offset = relation_offset(&rel.relation)?;
        let lookup = |name: &str| {
            index.get(name).copied().ok_or_else(|| {
                LayoutError::Invalid(format!("relation mentions unknown object {name:?}"))
            })
        };
        constraints.push((lookup(&rel.subject)?, lookup(&rel.object)?, offset));
    }

    let mut ys: Vec<Option<i32>> = vec![None; n];
    ys[0] = Some(0);
    loop {
        let mut changed = false;
        for &(subject, object, offset) in &constraints {
            match (ys[subject], ys[object]) {
                (Some(s), Some(o)) if s != o + offset => {
                    return Err(LayoutError::Invalid(format!(
                        "conflicting relations place {:?} inconsistently",
                        specs[subject].name
                    )))
                }
                (None, Some(o)) => {
                    ys[subject] = Some(o + offset);
                    changed = true;
                }
                (Some(s), None) => {
                    ys[object] = Some(s - offset);
                    changed = true;
                }
                _ => {}
            }
        }
        if !changed {
            break;
        }
    }
    let ys: Vec<i32> = ys
        .iter()
        .enumerate()
        .map(|(i, y)| {
            y.ok_or_else(|| {
                LayoutError::Invalid(format!("no relation places {:?}", specs[i].name))
            })
        })
        .collect::<Result<_, _>>()?;
    let mut seen = HashSet::new();
    if ys.iter().any(|y| !seen.insert(*y)) {
        return Err(LayoutError::Invalid("relations stack two objects on one cell".into()));
    }
    let (lo, hi) = (*ys.iter().min().unwrap(), *ys.iter().max().unwrap());
    let shift = 5 - (lo + hi).div_euclid(2);
    let objects = objects_at(
        item,
        ys.iter().map(|y| GridPos::raw(TRANSLATION_OBJECT_X, y + shift)),
    );
    let views = views_from((0..item.images.len()).map(|k| {
        let y = objects[k.min(n - 1)].position.y;
        (GridPos::raw(TRANSLATION_VIEW_X, y), Facing::Right)
    }));
    Ok(CognitiveMap { objects, views })
}

fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("string serializes")
}

/// Augmented schema: `objects` then `views`, one entry per line, 2-space
/// indentation.
pub fn serialize_augmented(map: &CognitiveMap) -> String {
    if map.objects.is_empty() && map.views.is_empty() {
        return r#"{"objects": [], "views": []}"#.to_string();
    }
    let objects: Vec<String> = map
        .objects
        .iter()
        .map(|o| {
            let mut entry = format!(
                "{{\"name\": {}, \"position\": [{}, {}]",
                json_str(&o.name),
                o.position.x,
                o.position.y
            );
            if let Some(facing) = o.facing {
                let _ = write!(entry, ", \"facing\": \"{facing}\"");
            }
            entry.push('}');
            entry
        })
        .collect();
    let views: Vec<String> = map
        .views
        .iter()
        .map(|v| {
            format!(
                "{{\"name\": {}, \"position\": [{}, {}], \"facing\": \"{}\"}}",
                json_str(&v.name),
                v.position.x,
                v.position.y,
                v.facing
            )
        })
        .collect();
    let mut out = String::from("{\n");
    push_array(&mut out, "objects", &objects, true);
    push_array(&mut out, "views", &views, false);
    out.push('}');
    out
}

fn push_array(out: &mut String, key: &str, entries: &[String], trailing_comma: bool) {
    let comma = if trailing_comma { "," } else { "" };
    if entries.is_empty() {
        let _ = writeln!(out, "  \"{key}\": []{comma}");
        return;
    }
    let _ = writeln!(out, "  \"{key}\": [");
    for (i, entry) in entries.iter().enumerate() {
        let sep = if i + 1 < entries.len() { "," } else { "" };
        let _ = writeln!(out, "    {entry}{sep}");
    }
    let _ = writeln!(out, "  ]{comma}");
}

/// Plain schema: object name to `{"position": [x, y]}`, 4-space indentation.
/// Views and facings are dropped.
pub fn serialize_plain(map: &CognitiveMap) -> Result<String, CogmapError> {
    let mut seen = HashSet::new();
    for object in &map.objects {
        if !seen.insert(object.name.as_str()) {
            return Err(CogmapError::DuplicateName(object.name.clone()));
        }
    }
    if map.objects.is_empty() {
        return Ok("{}".to_string());
    }
    let mut out = String::from("{\n");
    for (i, o) in map.objects.iter().enumerate() {
        let sep = if i + 1 < map.objects.len() { "," } else { "" };
        let _ = writeln!(
            out,
            "    {}: {{\"position\": [{}, {}]}}{sep}",
            json_str(&o.name),
            o.position.x,
            o.position.y
        );
    }
    out.push('}');
    Ok(out)
}
