//! Grounded free-form reasoning chains.
//!
//! A chain walks through each image, ties the views together, works out the
//! queried relation from the map, and ends with the answer. Every object named
//! in a chain comes from the oracle's reading of the map, and the chain is
//! refused when the stored gold answer disagrees with the oracle.

use serde::{Deserialize, Serialize};

use crate::error::ChainError;
use crate::oracle::{self, Question};
use crate::scene::{
    relative_direction, CognitiveMap, Direction, GridPos, RotationSense, SceneItem, Setting,
};
use crate::templates::{TemplateSet, Templates};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReasoningChain {
    pub setting: Setting,
    pub text: String,
    pub bound_answer: char,
}

const ORDINALS: [&str; 10] = [
    "first", "second", "third", "fourth", "fifth", "sixth", "seventh", "eighth", "ninth", "tenth",
];
const NUMBERS: [&str; 10] = [
    "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
];

fn ordinal(k: usize) -> String {
    ORDINALS
        .get(k.wrapping_sub(1))
        .map(|s| s.to_string())
        .unwrap_or_else(|| format!("{k}th"))
}

fn image_count(n: usize) -> String {
    let number = NUMBERS
        .get(n.wrapping_sub(1))
        .map(|s| s.to_string())
        .unwrap_or_else(|| n.to_string());
    if n == 1 {
        format!("{number} image")
    } else {
        format!("{number} images")
    }
}

/// "a", "a and b", "a, b and c".
fn join_list(parts: &[String]) -> String {
    match parts {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} and {last}", init.join(", ")),
    }
}

fn direction_key(prefix: &str, direction: Direction) -> String {
    format!("{prefix}_{direction}")
}

/// Order in which perspective statements are listed.
const STATEMENT_ORDER: [Direction; 4] = [
    Direction::Right,
    Direction::Behind,
    Direction::Left,
    Direction::Front,
];

/// Builds the chain for `item` over `map`.
pub fn generate_reasoning(
    item: &SceneItem,
    map: &CognitiveMap,
    templates: &Templates,
) -> Result<ReasoningChain, ChainError> {
    let set = templates
        .chain(item.setting)
        .ok_or_else(|| ChainError::UnsupportedSetting(item.setting.to_string()))?;
    let question = oracle::question_for_item(item, map)?;
    let derived = oracle::answer_question(map, &question)?;
    if derived != item.gold_answer.to_ascii_uppercase() {
        return Err(ChainError::Inconsistent {
            gold: item.gold_answer,
            derived,
        });
    }
    let option = item
        .option(derived)
        .ok_or_else(|| ChainError::Ungroundable(format!("no option {derived}")))?;

    let mut sentences = match item.setting {
        Setting::Among => among_body(map, &question, set)?,
        Setting::Rotation => rotation_body(item, map, &question, set)?,
        Setting::Around => around_body(map, &question, set)?,
        Setting::Translation => unreachable!("no translation templates"),
    };
    let letter = derived.to_string();
    let text = option.text.trim().trim_end_matches('.');
    sentences.push(set.render("answer", &[("letter", &letter), ("option", text)]));
    Ok(ReasoningChain {
        setting: item.setting,
        text: sentences.join(" "),
        bound_answer: derived,
    })
}

fn require_views(map: &CognitiveMap) -> Result<(), ChainError> {
    if map.views.is_empty() {
        Err(ChainError::Ungroundable("map has no views".into()))
    } else {
        Ok(())
    }
}

fn direction_of(
    viewer: crate::scene::Facing,
    from: GridPos,
    to: GridPos,
    what: &str,
) -> Result<Direction, ChainError> {
    relative_direction(viewer, from, to)
        .map_err(|e| ChainError::Ungroundable(e.to_string()))?
        .ok_or_else(|| ChainError::Ungroundable(format!("{what} is off-axis")))
}

/// Rotation-identification sentences relative to image 1.
fn rotation_sentences(
    map: &CognitiveMap,
    sense: RotationSense,
    set: &TemplateSet,
) -> Result<Vec<String>, ChainError> {
    let mut out = vec![
        set.render("rotation_lead", &[]),
        set.render("rotation_initial", &[]),
    ];
    let quarter = |to: crate::scene::Facing, from: crate::scene::Facing| {
        let cw = to.quarter_turns_from(from);
        match sense {
            RotationSense::Clockwise => cw,
            RotationSense::Counterclockwise => (4 - cw) % 4,
        }
    };
    let first = map.views[0].facing;
    for (i, pair) in map.views.windows(2).enumerate() {
        let k = i + 2;
        let step = quarter(pair[1].facing, pair[0].facing) * 90;
        if step == 0 {
            return Err(ChainError::Ungroundable(format!(
                "image {k} faces the same way as image {}",
                k - 1
            )));
        }
        let total = quarter(pair[1].facing, first) * 90;
        let (k, step, total) = (k.to_string(), step.to_string(), total.to_string());
        let key = match i {
            0 => "rotation_first",
            1 => "rotation_next",
            _ => "rotation_further",
        };
        out.push(set.render(
            key,
            &[("k", &k), ("step", &step), ("sense", sense.as_str()), ("total", &total)],
        ));
    }
    Ok(out)
}

fn among_body(
    map: &CognitiveMap,
    question: &Question,
    set: &TemplateSet,
) -> Result<Vec<String>, ChainError> {
    require_views(map)?;
    let anchor = map
        .anchor()
        .ok_or_else(|| ChainError::Ungroundable("no object is visible in every view".into()))?;
    let a = anchor.name.as_str();
    let mut out = vec![
        set.render("intro", &[("count", &image_count(map.views.len()))]),
        set.render("anchor", &[("anchor", a)]),
    ];
    let mut seen = Vec::with_capacity(map.views.len());
    for k in 1..=map.views.len() {
        let object = oracle::front_object(map, k)?.ok_or_else(|| {
            ChainError::Ungroundable(format!("nothing is visible beyond {a} in image {k}"))
        })?;
        out.push(set.render(
            "observation",
            &[("k", &k.to_string()), ("anchor", a), ("object", &object)],
        ));
        seen.push(object);
    }
    out.push(set.render("integration", &[]));
    out.extend(rotation_sentences(map, RotationSense::Clockwise, set)?);

    let reference = &map.views[0];
    let opposite = oracle::opposite_view(map, 1);
    out.push(set.render("inference_lead", &[]));
    let mut first = true;
    for k in 2..=map.views.len() {
        if Some(k) == opposite {
            continue;
        }
        let object = &seen[k - 1];
        let position = map.object(object).expect("oracle names map objects").position;
        let direction = direction_of(reference.facing, anchor.position, position, object)?;
        let relation = set.render(&direction_key("relation", direction), &[]);
        let key = if first { "inference_first" } else { "inference_next" };
        first = false;
        out.push(set.render(
            key,
            &[
                ("object", object),
                ("anchor", a),
                ("ordinal", &ordinal(k)),
                ("relation", &relation),
            ],
        ));
    }
    if let Some(k) = opposite {
        out.push(set.render(
            "opposite",
            &[("object", &seen[k - 1]), ("anchor", a), ("ordinal", &ordinal(k))],
        ));
    }
    out.push(set.render("closing", &[]));

    let view = map.view(question.view_index).expect("oracle checked the view");
    let mut statements = Vec::new();
    for direction in STATEMENT_ORDER {
        let key = direction_key("statement", direction);
        if !set.has(&key) {
            continue;
        }
        for object in oracle::objects_in_direction(map, view, anchor, direction) {
            statements.push(set.render(&key, &[("object", &object.name), ("anchor", a)]));
        }
    }
    out.push(perspective(set, question.view_index, &statements));
    Ok(out)
}

fn perspective(set: &TemplateSet, k: usize, statements: &[String]) -> String {
    set.render(
        "perspective",
        &[("k", &k.to_string()), ("statements", &statements.join(", "))],
    )
}

fn rotation_body(
    item: &SceneItem,
    map: &CognitiveMap,
    question: &Question,
    set: &TemplateSet,
) -> Result<Vec<String>, ChainError> {
    require_views(map)?;
    let mut out = vec![
        set.render("intro", &[("count", &image_count(map.views.len()))]),
        set.render("anchor", &[]),
    ];
    let mut seen = Vec::with_capacity(map.views.len());
    for k in 1..=map.views.len() {
        let object = oracle::nearest_in_view(map, k)?.ok_or_else(|| {
            ChainError::Ungroundable(format!("nothing is in front of the camera in image {k}"))
        })?;
        out.push(set.render("observation", &[("k", &k.to_string()), ("object", &object)]));
        seen.push(object);
    }
    let sense = item.meta_info.camera.rotation.unwrap_or_default();
    out.extend(rotation_sentences(map, sense, set)?);

    let reference = &map.views[0];
    let opposite = oracle::opposite_view(map, 1);
    if map.views.len() > 1 {
        out.push(set.render("inference_lead", &[]));
        let mut first = true;
        for k in 2..=map.views.len() {
            if Some(k) == opposite {
                continue;
            }
            let object = &seen[k - 1];
            let position = map.object(object).expect("oracle names map objects").position;
            let direction = direction_of(reference.facing, reference.position, position, object)?;
            let relation = set.render(&direction_key("relation", direction), &[]);
            let key = if first { "inference_first" } else { "inference_next" };
            first = false;
            out.push(set.render(
                key,
                &[("object", object), ("ordinal", &ordinal(k)), ("relation", &relation)],
            ));
        }
        if let Some(k) = opposite {
            out.push(set.render(
                "opposite",
                &[("object", &seen[k - 1]), ("ordinal", &ordinal(k))],
            ));
        }
        out.push(set.render("closing", &[]));
    }

    let view = map.view(question.view_index).expect("oracle checked the view");
    let mut statements = Vec::new();
    for direction in [Direction::Front, Direction::Right, Direction::Behind, Direction::Left] {
        let key = direction_key("statement", direction);
        if !set.has(&key) {
            continue;
        }
        for object in &map.objects {
            if object.position == view.position {
                continue;
            }
            if matches!(relative_direction(view.facing, view.position, object.position), Ok(Some(d)) if d == direction)
            {
                statements.push(set.render(&key, &[("object", &object.name)]));
            }
        }
    }
    out.push(perspective(set, question.view_index, &statements));
    Ok(out)
}

fn around_body(
    map: &CognitiveMap,
    question: &Question,
    set: &TemplateSet,
) -> Result<Vec<String>, ChainError> {
    require_views(map)?;
    let anchor = map
        .anchor()
        .ok_or_else(|| ChainError::Ungroundable("no object is visible in every view".into()))?;
    let a = anchor.name.as_str();
    let mut out = vec![
        set.render("intro", &[("count", &image_count(map.views.len()))]),
        set.render("anchor", &[("anchor", a)]),
    ];
    for (i, view) in map.views.iter().enumerate() {
        let mut relations = Vec::new();
        for direction in [Direction::Left, Direction::Right, Direction::Front, Direction::Behind] {
            for object in oracle::objects_in_direction(map, view, anchor, direction) {
                relations.push(set.render(
                    &direction_key("seen", direction),
                    &[("object", &object.name)],
                ));
            }
        }
        if relations.is_empty() {
            return Err(ChainError::Ungroundable(format!(
                "no object lines up with {a} in image {}",
                i + 1
            )));
        }
        out.push(set.render(
            "observation",
            &[
                ("k", &(i + 1).to_string()),
                ("anchor", a),
                ("relations", &join_list(&relations)),
            ],
        ));
    }
    out.push(set.render("integration", &[("anchor", a)]));

    let subject = match question.anchor.as_deref() {
        Some(name) => map
            .object(name)
            .ok_or_else(|| ChainError::Ungroundable(format!("unknown anchor {name:?}")))?,
        None => anchor,
    };
    let view = map.view(question.view_index).expect("oracle checked the view");
    let mut statements = Vec::new();
    for direction in STATEMENT_ORDER {
        let key = direction_key("statement", direction);
        if !set.has(&key) {
            continue;
        }
        for object in oracle::objects_in_direction(map, view, subject, direction) {
            statements.push(set.render(
                &key,
                &[("object", &object.name), ("anchor", &subject.name)],
            ));
        }
    }
    out.push(perspective(set, question.view_index, &statements));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counting_words() {
        assert_eq!(image_count(4), "four images");
        assert_eq!(image_count(1), "one image");
        assert_eq!(ordinal(3), "third");
        assert_eq!(ordinal(12), "12th");
        assert_eq!(join_list(&["a".into(), "b".into(), "c".into()]), "a, b and c");
        assert_eq!(join_list(&["a".into()]), "a");
    }

    #[test]
    fn worked_among_chain() {
        let line = include_str!("../fixtures/worked_among.jsonl");
        let item = crate::ingest::parse_item(line.trim()).unwrap();
        let map = crate::cogmap::generate_cogmap(&item).unwrap();
        let chain = generate_reasoning(&item, &map, &Templates::builtin()).unwrap();
        assert_eq!(chain.bound_answer, 'C');
        assert_eq!(chain.text, include_str!("../fixtures/worked_among_chain.txt").trim_end());
    }

    #[test]
    fn wrong_gold_is_refused() {
        let line = include_str!("../fixtures/worked_among.jsonl").replace("\"gt_answer\": \"C\"", "\"gt_answer\": \"A\"");
        let item = crate::ingest::parse_item(line.trim()).unwrap();
        let map = crate::cogmap::generate_cogmap(&item).unwrap();
        let err = generate_reasoning(&item, &map, &Templates::builtin()).unwrap_err();
        assert_eq!(err, ChainError::Inconsistent { gold: 'A', derived: 'C' });
    }
}
