//! Seeded synthetic scene items for among, around and rotation.
//!
//! Every item carries a structured `meta_info.query` and a question text the
//! oracle can also parse; the gold letter is read off the generated map. The
//! same seed always yields the same corpus.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cogmap::generate_cogmap;
use crate::oracle::{answer_question, Question};
use crate::scene::{
    AnswerOption, CameraSetup, Direction, Facing, MetaInfo, ObjectSpec, QuerySpec, QuestionKind,
    SceneItem, Setting,
};

const NAMES: [&str; 32] = [
    "white jar", "clothes rack", "table with cups on it", "white headboard",
    "bed sheet with a floral pattern", "red chair", "potted plant", "desk lamp",
    "blue sofa", "wooden bookshelf", "floor lamp", "coffee table", "green vase",
    "black backpack", "laundry basket", "toy truck", "ceramic bowl", "wall clock",
    "office chair", "shoe rack", "paper bag", "metal bucket", "yellow pillow",
    "glass bottle", "cardboard box", "guitar case", "tennis racket", "trash can",
    "small stool", "picture frame", "flower pot", "kettle",
];

/// Settings produced by [`synth_corpus`], in rotation.
pub const SYNTH_SETTINGS: [Setting; 3] = [Setting::Among, Setting::Around, Setting::Rotation];

fn angle(facing: Facing) -> i32 {
    facing.quarter_turns_from(Facing::Up) * 90
}

/// View facings: always `Up` first, then a clockwise-ordered subset of
/// `available`.
fn pick_facings(rng: &mut ChaCha8Rng, available: &[Facing], count: usize) -> Vec<Facing> {
    let mut rest: Vec<Facing> = available.iter().copied().filter(|f| *f != Facing::Up).collect();
    rest.shuffle(rng);
    rest.truncate(count.saturating_sub(1));
    rest.sort_by_key(|f| angle(*f));
    std::iter::once(Facing::Up).chain(rest).collect()
}

fn question_text(spec: &QuerySpec) -> String {
    let view = spec.view;
    match (spec.kind, spec.anchor.as_deref(), spec.direction) {
        (QuestionKind::BehindViewerFromView, ..) => {
            format!("From the perspective of image {view}, what is behind you?")
        }
        (QuestionKind::FrontObjectInView, ..) => {
            format!("From the perspective of image {view}, what is in front of you?")
        }
        (_, Some(anchor), Some(Direction::Left | Direction::Right)) => format!(
            "From the perspective of image {view}, what is to the {} of the {anchor}?",
            spec.direction.unwrap()
        ),
        (_, Some(anchor), Some(Direction::Behind)) => {
            format!("From the perspective of image {view}, what is behind the {anchor}?")
        }
        (_, Some(anchor), _) => {
            format!("From the perspective of image {view}, what is in front of the {anchor}?")
        }
        _ => unreachable!("relative questions carry an anchor and direction"),
    }
}

fn draft(id: String, setting: Setting, names: &[&str], facings: &[Facing], query: QuerySpec) -> SceneItem {
    let images = (1..=facings.len()).map(|k| format!("{id}/{k}.jpg")).collect();
    SceneItem {
        images,
        meta_info: MetaInfo {
            objects: names.iter().map(|n| ObjectSpec::new(*n)).collect(),
            camera: CameraSetup {
                angles: facings.iter().map(|f| angle(*f)).collect(),
                rotation: None,
            },
            query: Some(query.clone()),
            ..MetaInfo::default()
        },
        question: question_text(&query),
        options: Vec::new(),
        gold_answer: 'A',
        setting,
        id,
        extra: Default::default(),
    }
}

fn random_query(rng: &mut ChaCha8Rng, setting: Setting, names: &[&str], views: usize) -> QuerySpec {
    let view = rng.random_range(1..=views);
    let relative = |rng: &mut ChaCha8Rng, anchor: &str| QuerySpec {
        kind: QuestionKind::RelativeToAnchorFromView,
        view,
        anchor: Some(anchor.to_string()),
        direction: Some(*Direction::ALL.choose(rng).unwrap()),
    };
    match setting {
        Setting::Among => match rng.random_range(0..4) {
            0 => QuerySpec {
                kind: QuestionKind::BehindViewerFromView,
                view,
                anchor: None,
                direction: None,
            },
            _ => relative(rng, names[0]),
        },
        Setting::Around => {
            let anchor = *names.choose(rng).unwrap();
            relative(rng, anchor)
        }
        _ => QuerySpec {
            kind: if rng.random_bool(0.5) {
                QuestionKind::BehindViewerFromView
            } else {
                QuestionKind::FrontObjectInView
            },
            view,
            anchor: None,
            direction: None,
        },
    }
}

/// Correct option plus up to three distractors, shuffled and lettered.
fn options_for(rng: &mut ChaCha8Rng, answer: &str, scene: &[&str]) -> Vec<AnswerOption> {
    let mut distractors: Vec<&str> = scene.iter().copied().filter(|n| *n != answer).collect();
    distractors.shuffle(rng);
    let mut fillers: Vec<&str> = NAMES.iter().copied().filter(|n| !scene.contains(n)).collect();
    fillers.shuffle(rng);
    distractors.extend(fillers);
    let mut texts: Vec<&str> = std::iter::once(answer).chain(distractors.into_iter().take(3)).collect();
    texts.shuffle(rng);
    texts
        .into_iter()
        .zip('A'..)
        .map(|(text, letter)| AnswerOption::new(letter, capitalize(text)))
        .collect()
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

fn layout(rng: &mut ChaCha8Rng, setting: Setting) -> (Vec<&'static str>, Vec<Facing>) {
    let mut pool = NAMES.to_vec();
    pool.shuffle(rng);
    match setting {
        Setting::Among => {
            // Surrounding slots fill in the order down, left, up, right, and a
            // view facing f looks at the slot in direction f.
            let surrounding = rng.random_range(3..=4);
            let filled = [Facing::Down, Facing::Left, Facing::Up, Facing::Right];
            let views = rng.random_range(2..=surrounding);
            let facings = pick_facings(rng, &filled[..surrounding], views);
            (pool[..=surrounding].to_vec(), facings)
        }
        Setting::Around => {
            let objects = rng.random_range(2..=4);
            let views = rng.random_range(1..=4);
            (pool[..objects].to_vec(), pick_facings(rng, &Facing::ALL, views))
        }
        _ => {
            let views = rng.random_range(2..=4);
            let facings = pick_facings(rng, &Facing::ALL, views);
            (pool[..views].to_vec(), facings)
        }
    }
}

/// One item whose question has a unique answer on its own map.
pub fn synth_item(rng: &mut ChaCha8Rng, setting: Setting, id: String) -> SceneItem {
    loop {
        let (names, facings) = layout(rng, setting);
        let query = random_query(rng, setting, &names, facings.len());
        let mut item = draft(id.clone(), setting, &names, &facings, query.clone());
        let Ok(map) = generate_cogmap(&item) else { continue };
        let probe = Question::from_spec(&query, Vec::new());
        let Ok(deduction) = crate::oracle::deduce(&map, &probe) else { continue };
        let Some(answer) = deduction.object else { continue };
        item.options = options_for(rng, &answer, &names);
        let question = Question::from_spec(&query, item.options.clone());
        item.gold_answer = answer_question(&map, &question).expect("answer is among the options");
        return item;
    }
}

/// `count` items cycling through [`SYNTH_SETTINGS`].
pub fn synth_corpus(count: usize, seed: u64) -> Vec<SceneItem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let setting = SYNTH_SETTINGS[i % SYNTH_SETTINGS.len()];
            synth_item(&mut rng, setting, format!("{setting}_{:04}", i + 1))
        })
        .collect()
}
