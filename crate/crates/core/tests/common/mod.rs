#![allow(dead_code)]

use std::path::PathBuf;

use cogforge::scene::{
    AnswerOption, CognitiveMap, Direction, Facing, GridPos, MapObject, MapView, SceneItem,
};
use proptest::prelude::*;

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel)
}

pub fn read_fixture(rel: &str) -> String {
    std::fs::read_to_string(fixture(rel)).unwrap()
}

pub fn worked_item() -> SceneItem {
    cogforge::ingest::parse_item(read_fixture("worked_among.jsonl").trim()).unwrap()
}

/// The gold map written out by hand, independent of the layout code.
pub fn worked_map() -> CognitiveMap {
    let o = |n: &str, x, y| MapObject::new(n, GridPos::raw(x, y));
    CognitiveMap {
        objects: vec![
            o("white jar", 5, 5),
            o("bed sheet with a floral pattern", 5, 8),
            o("white headboard", 2, 5),
            o("clothes rack", 5, 2),
            o("table with cups on it", 8, 5),
        ],
        views: vec![
            MapView::new(1, GridPos::raw(5, 6), Facing::Up),
            MapView::new(2, GridPos::raw(4, 5), Facing::Right),
            MapView::new(3, GridPos::raw(5, 4), Facing::Down),
            MapView::new(4, GridPos::raw(6, 5), Facing::Left),
        ],
    }
}

pub fn worked_options() -> Vec<AnswerOption> {
    vec![
        AnswerOption::new('A', "Table with cups on it"),
        AnswerOption::new('B', "Clothes rack"),
        AnswerOption::new('C', "Bed sheet with a floral pattern"),
        AnswerOption::new('D', "White headboard"),
    ]
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Compass {
    North,
    South,
    East,
    West,
}

/// Compass bearing of an axis-aligned displacement with y growing downward.
pub fn compass(dx: i32, dy: i32) -> Option<Compass> {
    match (dx.signum(), dy.signum()) {
        (0, -1) => Some(Compass::North),
        (0, 1) => Some(Compass::South),
        (1, 0) => Some(Compass::East),
        (-1, 0) => Some(Compass::West),
        _ => None,
    }
}

/// Written-out lookup: what a viewer facing `facing` calls a bearing.
pub fn egocentric(facing: Facing, bearing: Compass) -> Direction {
    use Compass::*;
    use Direction::*;
    match (facing, bearing) {
        (Facing::Up, North) => Front,
        (Facing::Up, South) => Behind,
        (Facing::Up, East) => Right,
        (Facing::Up, West) => Left,
        (Facing::Right, East) => Front,
        (Facing::Right, West) => Behind,
        (Facing::Right, South) => Right,
        (Facing::Right, North) => Left,
        (Facing::Down, South) => Front,
        (Facing::Down, North) => Behind,
        (Facing::Down, West) => Right,
        (Facing::Down, East) => Left,
        (Facing::Left, West) => Front,
        (Facing::Left, East) => Behind,
        (Facing::Left, North) => Right,
        (Facing::Left, South) => Left,
    }
}

/// Brute-force answer: every object whose bearing from the anchor is
/// `direction` for this facing, nearest by Manhattan distance. `Err` on a tie.
pub fn brute_relative(
    objects: &[(String, (i32, i32))],
    facing: Facing,
    anchor: &str,
    direction: Direction,
) -> Result<Option<String>, ()> {
    let (ax, ay) = objects.iter().find(|(n, _)| n == anchor).unwrap().1;
    let mut hits: Vec<(i32, &str)> = Vec::new();
    for (name, (x, y)) in objects {
        if name == anchor {
            continue;
        }
        let (dx, dy) = (x - ax, y - ay);
        if let Some(bearing) = compass(dx, dy) {
            if egocentric(facing, bearing) == direction {
                hits.push((dx.abs() + dy.abs(), name));
            }
        }
    }
    hits.sort();
    match hits.as_slice() {
        [] => Ok(None),
        [(d0, _), (d1, _), ..] if d0 == d1 => Err(()),
        [(_, name), ..] => Ok(Some(name.to_string())),
    }
}

pub fn options_with_none(names: &[String]) -> Vec<AnswerOption> {
    names
        .iter()
        .map(String::as_str)
        .chain(std::iter::once("none of the above"))
        .zip('A'..)
        .map(|(text, letter)| AnswerOption::new(letter, text))
        .collect()
}

pub fn translate(map: &CognitiveMap, dx: i32, dy: i32) -> CognitiveMap {
    let mut out = map.clone();
    for o in &mut out.objects {
        o.position = o.position.translate(dx, dy);
    }
    for v in &mut out.views {
        v.position = v.position.translate(dx, dy);
    }
    out
}

/// Quarter turn clockwise about the grid center, positions and facings.
pub fn quarter_turn(map: &CognitiveMap) -> CognitiveMap {
    let rot = |p: GridPos| GridPos::raw(9 - p.y, p.x);
    let mut out = map.clone();
    for o in &mut out.objects {
        o.position = rot(o.position);
        o.facing = o.facing.map(|f| f.turn(1));
    }
    for v in &mut out.views {
        v.position = rot(v.position);
        v.facing = v.facing.turn(1);
    }
    out
}

pub fn facing_strategy() -> impl Strategy<Value = Facing> {
    prop::sample::select(Facing::ALL.to_vec())
}

/// Names with spaces, punctuation and a quote that JSON must escape.
pub fn name_strategy() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9 \"/-]{0,14}[a-z]"
}

/// Valid maps: unique names, on-grid cells, consecutively numbered views.
pub fn map_strategy() -> impl Strategy<Value = CognitiveMap> {
    let objects = prop::collection::btree_map(
        name_strategy(),
        ((0..10i32, 0..10i32), prop::option::of(facing_strategy())),
        0..7,
    );
    let views = prop::collection::vec(((0..10i32, 0..10i32), facing_strategy()), 0..5);
    (objects, views, any::<u64>()).prop_map(|(objects, views, shuffle)| {
        let mut objects: Vec<MapObject> = objects
            .into_iter()
            .map(|(name, ((x, y), facing))| MapObject {
                name,
                position: GridPos::raw(x, y),
                facing,
            })
            .collect();
        if !objects.is_empty() {
            let k = (shuffle % objects.len() as u64) as usize;
            objects.rotate_left(k);
        }
        let views = views
            .into_iter()
            .enumerate()
            .map(|(i, ((x, y), f))| MapView::new(i + 1, GridPos::raw(x, y), f))
            .collect();
        CognitiveMap { objects, views }
    })
}

/// Scattered layouts for the symmetry properties: 2 to 6 objects on distinct
/// cells inside `[2, 7]` and 1 to 4 views, leaving room to translate.
pub fn layout_strategy() -> impl Strategy<Value = CognitiveMap> {
    let cells = prop::collection::btree_set((2..8i32, 2..8i32), 2..7);
    let views = prop::collection::vec(((2..8i32, 2..8i32), facing_strategy()), 1..5);
    (cells, views).prop_map(|(cells, views)| CognitiveMap {
        objects: cells
            .into_iter()
            .enumerate()
            .map(|(i, (x, y))| MapObject::new(format!("object {i}"), GridPos::raw(x, y)))
            .collect(),
        views: views
            .into_iter()
            .enumerate()
            .map(|(i, ((x, y), f))| MapView::new(i + 1, GridPos::raw(x, y), f))
            .collect(),
    })
}
