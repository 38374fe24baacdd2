//! Coordinate-geometry answers to multiple-choice spatial questions.
//!
//! This is the ground truth used to write reasoning chains, audit gold answers
//! and cross-check everything else in tests.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::OracleError;
use crate::scene::{
    relative_direction, AnswerOption, CognitiveMap, Direction, MapObject, MapView,
    QuerySpec, QuestionKind, SceneItem,
};

const NONE_OF_THE_ABOVE: &str = "none of the above";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub kind: QuestionKind,
    /// 1-based.
    pub view_index: usize,
    pub anchor: Option<String>,
    pub direction: Option<Direction>,
    pub options: Vec<AnswerOption>,
}

impl Question {
    pub fn from_spec(spec: &QuerySpec, options: Vec<AnswerOption>) -> Self {
        Self {
            kind: spec.kind,
            view_index: spec.view,
            anchor: spec.anchor.clone(),
            direction: spec.direction,
            options,
        }
    }

    pub fn relative(
        view_index: usize,
        anchor: impl Into<String>,
        direction: Direction,
        options: Vec<AnswerOption>,
    ) -> Self {
        Self {
            kind: QuestionKind::RelativeToAnchorFromView,
            view_index,
            anchor: Some(anchor.into()),
            direction: Some(direction),
            options,
        }
    }

    pub fn behind_viewer(view_index: usize, options: Vec<AnswerOption>) -> Self {
        Self {
            kind: QuestionKind::BehindViewerFromView,
            view_index,
            anchor: None,
            direction: None,
            options,
        }
    }

    pub fn front_object(view_index: usize, options: Vec<AnswerOption>) -> Self {
        Self {
            kind: QuestionKind::FrontObjectInView,
            view_index,
            anchor: None,
            direction: None,
            options,
        }
    }
}

/// How the queried object was found.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Route {
    Direct,
    /// Through the view facing the opposite way (1-based index).
    OppositeView(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Deduction {
    pub object: Option<String>,
    pub route: Route,
}

fn view_at(map: &CognitiveMap, index: usize) -> Result<&MapView, OracleError> {
    map.view(index).ok_or(OracleError::ViewOutOfRange {
        index,
        count: map.views.len(),
    })
}

fn anchor_object<'a>(map: &'a CognitiveMap, name: &str) -> Result<&'a MapObject, OracleError> {
    map.object(name)
        .ok_or_else(|| OracleError::UnknownAnchor(name.to_string()))
}

/// Picks the candidate with the smallest key, failing on a tie.
fn nearest<'a>(
    candidates: impl IntoIterator<Item = (i32, &'a MapObject)>,
) -> Result<Option<&'a MapObject>, OracleError> {
    let mut best: Option<(i32, &MapObject)> = None;
    let mut tied: Option<&MapObject> = None;
    for (key, object) in candidates {
        match best {
            Some((k, _)) if key > k => {}
            Some((k, _)) if key == k => tied = Some(object),
            _ => {
                best = Some((key, object));
                tied = None;
            }
        }
    }
    match (best, tied) {
        (Some((_, a)), Some(b)) => Err(OracleError::Ambiguous(a.name.clone(), b.name.clone())),
        (best, _) => Ok(best.map(|(_, o)| o)),
    }
}

/// Nearest object ahead of `view`, skipping `anchor` and anything between the
/// view and the anchor when the anchor lies on the ray.
fn front_beyond<'a>(
    map: &'a CognitiveMap,
    view: &MapView,
    anchor: Option<&MapObject>,
) -> Result<Option<&'a MapObject>, OracleError> {
    let min_distance = anchor
        .and_then(|a| CognitiveMap::ray_distance(view.position, view.facing, a.position))
        .unwrap_or(0);
    nearest(map.objects.iter().filter_map(|o| {
        if anchor.is_some_and(|a| a.name == o.name) {
            return None;
        }
        CognitiveMap::ray_distance(view.position, view.facing, o.position)
            .filter(|&d| d > min_distance)
            .map(|d| (d, o))
    }))
}

/// Object seen in front of view `view_index`, beyond the map's anchor.
pub fn front_object(map: &CognitiveMap, view_index: usize) -> Result<Option<String>, OracleError> {
    let view = view_at(map, view_index)?;
    Ok(front_beyond(map, view, map.anchor())?.map(|o| o.name.clone()))
}

/// Nearest object straight ahead of a view, anchor or not.
pub fn nearest_in_view(
    map: &CognitiveMap,
    view_index: usize,
) -> Result<Option<String>, OracleError> {
    let view = view_at(map, view_index)?;
    Ok(front_beyond(map, view, None)?.map(|o| o.name.clone()))
}

/// Index of the lowest-numbered view facing the opposite way.
pub fn opposite_view(map: &CognitiveMap, view_index: usize) -> Option<usize> {
    let facing = map.view(view_index)?.facing.turn(2);
    map.views
        .iter()
        .position(|v| v.facing == facing)
        .map(|i| i + 1)
}

/// Objects in direction `direction` of `anchor` for a viewer facing like
/// `view`, nearest first.
pub fn objects_in_direction<'a>(
    map: &'a CognitiveMap,
    view: &MapView,
    anchor: &MapObject,
    direction: Direction,
) -> Vec<&'a MapObject> {
    let mut hits: Vec<(i32, &MapObject)> = map
        .objects
        .iter()
        .filter(|o| o.position != anchor.position)
        .filter(|o| {
            matches!(relative_direction(view.facing, anchor.position, o.position), Ok(Some(d)) if d == direction)
        })
        .map(|o| (o.position.manhattan(anchor.position), o))
        .collect();
    hits.sort_by_key(|(d, _)| *d);
    hits.into_iter().map(|(_, o)| o).collect()
}

fn behind_viewer<'a>(
    map: &'a CognitiveMap,
    view_index: usize,
    view: &MapView,
) -> Result<(Option<&'a MapObject>, Route), OracleError> {
    let position = view.position;
    if let Some(opposite) = opposite_view(map, view_index) {
        let other = &map.views[opposite - 1];
        let viewer_distance = if other.position == position {
            Some(0)
        } else {
            CognitiveMap::ray_distance(other.position, other.facing, position)
        };
        if let Some(threshold) = viewer_distance {
            let found = nearest(map.objects.iter().filter_map(|o| {
                CognitiveMap::ray_distance(other.position, other.facing, o.position)
                    .filter(|&d| d > threshold)
                    .map(|d| (d, o))
            }))?;
            return Ok((found, Route::OppositeView(opposite)));
        }
    }
    let backward = view.facing.turn(2);
    let found = nearest(map.objects.iter().filter_map(|o| {
        CognitiveMap::ray_distance(position, backward, o.position).map(|d| (d, o))
    }))?;
    Ok((found, Route::Direct))
}

/// Finds the object a question asks about.
pub fn deduce(map: &CognitiveMap, question: &Question) -> Result<Deduction, OracleError> {
    let view = view_at(map, question.view_index)?;
    let (object, route) = match question.kind {
        QuestionKind::RelativeToAnchorFromView => {
            let anchor = anchor_object(map, question.anchor.as_deref().ok_or(OracleError::MissingAnchor)?)?;
            let direction = question.direction.ok_or(OracleError::MissingDirection)?;
            let candidates = map.objects.iter().filter(|o| o.name != anchor.name).filter_map(|o| {
                match relative_direction(view.facing, anchor.position, o.position) {
                    Ok(Some(d)) if d == direction => Some(Ok((o.position.manhattan(anchor.position), o))),
                    Ok(_) => None,
                    Err(e) => Some(Err(OracleError::from(e))),
                }
            });
            let candidates: Vec<_> = candidates.collect::<Result<_, _>>()?;
            (nearest(candidates)?, Route::Direct)
        }
        QuestionKind::BehindViewerFromView => behind_viewer(map, question.view_index, view)?,
        QuestionKind::FrontObjectInView => {
            let anchor = match question.anchor.as_deref() {
                Some(name) => Some(anchor_object(map, name)?),
                None => map.anchor(),
            };
            (front_beyond(map, view, anchor)?, Route::Direct)
        }
    };
    Ok(Deduction {
        object: object.map(|o| o.name.clone()),
        route,
    })
}

/// Letter of the option naming `object`, matched case-insensitively.
pub fn option_for(options: &[AnswerOption], object: Option<&str>) -> Result<char, OracleError> {
    let target = object.unwrap_or(NONE_OF_THE_ABOVE).trim();
    options
        .iter()
        .find(|o| o.text.trim().eq_ignore_ascii_case(target))
        .map(|o| o.letter)
        .ok_or_else(|| match object {
            Some(name) => OracleError::Unanswerable(format!("no option names {name:?}")),
            None => OracleError::Unanswerable("no object in the queried direction".into()),
        })
}

pub fn answer_question(map: &CognitiveMap, question: &Question) -> Result<char, OracleError> {
    let deduction = deduce(map, question)?;
    option_for(&question.options, deduction.object.as_deref())
}

fn view_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\b(?:image|view)\s*#?\s*(\d+)").unwrap())
}

fn viewer_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)\b(behind|in front of)\s+(?:you|me)\b").unwrap()
    })
}

fn relation_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)\b(?:to|on)?\s*(?:the\s+)?(left|right)\s+(?:side\s+)?of\s+(?:the\s+)?|\b(behind|in front of)\s+(?:the\s+)?")
            .unwrap()
    })
}

/// Recovers a structured question from free text such as
/// "From the perspective of image 4, what is to the left of the white jar?".
pub fn parse_question_text(
    text: &str,
    map: &CognitiveMap,
    options: Vec<AnswerOption>,
) -> Result<Question, OracleError> {
    let unparseable = || OracleError::UnparseableQuestion(text.to_string());
    let view_index: usize = view_regex()
        .captures(text)
        .and_then(|c| c[1].parse().ok())
        .ok_or_else(unparseable)?;
    if let Some(c) = viewer_regex().captures(text) {
        return Ok(if c[1].eq_ignore_ascii_case("behind") {
            Question::behind_viewer(view_index, options)
        } else {
            Question::front_object(view_index, options)
        });
    }
    for c in relation_regex().captures_iter(text) {
        let keyword = c.get(1).or_else(|| c.get(2)).expect("one group matches");
        let direction = match keyword.as_str().to_ascii_lowercase().as_str() {
            "left" => Direction::Left,
            "right" => Direction::Right,
            "behind" => Direction::Behind,
            _ => Direction::Front,
        };
        let rest = text[c.get(0).unwrap().end()..].to_ascii_lowercase();
        let anchor = map
            .objects
            .iter()
            .filter(|o| rest.starts_with(&o.name.to_ascii_lowercase()))
            .max_by_key(|o| o.name.len());
        if let Some(anchor) = anchor {
            return Ok(Question::relative(view_index, anchor.name.clone(), direction, options));
        }
    }
    Err(unparseable())
}

/// The item's question in structured form: the `meta_info.query` annotation
/// when present, otherwise parsed from the question text.
pub fn question_for_item(item: &SceneItem, map: &CognitiveMap) -> Result<Question, OracleError> {
    match &item.meta_info.query {
        Some(spec) => Ok(Question::from_spec(spec, item.options.clone())),
        None => parse_question_text(&item.question, map, item.options.clone()),
    }
}
