mod common;

use std::collections::{BTreeMap, BTreeSet};

use cogforge::cogmap::{AMONG_SLOTS, CENTER, ROTATION_RADIUS};
use cogforge::ingest::parse_items;
use cogforge::oracle::{answer_question, front_object, nearest_in_view, question_for_item};
use cogforge::scene::{
    relative_direction, CognitiveMap, Direction, Facing, GridPos, Setting,
};
use cogforge::synth::{synth_corpus, synth_item};
use cogforge::{
    cogmap_metrics, generate_cogmap, generate_reasoning, parse_answer, parse_response, qa_accuracy,
    GradedResult, Tally, Templates,
};
use proptest::prelude::*;
use proptest::strategy::ValueTree;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::*;

fn setting_strategy() -> impl Strategy<Value = Setting> {
    prop::sample::select(Setting::ALL.to_vec())
}

fn result_strategy() -> impl Strategy<Value = GradedResult> {
    let letter = prop::sample::select(vec!['A', 'B', 'C', 'D']);
    (setting_strategy(), prop::option::of(letter.clone()), letter, 0..10_000u32).prop_map(
        |(setting, predicted, gold, n)| GradedResult {
            id: format!("{setting}_{n}"),
            setting,
            predicted,
            gold,
        },
    )
}

/// Percentage with two decimals, rounded half up, by long division.
fn percent_string(correct: u64, total: u64) -> String {
    let scaled = correct * 10_000;
    let (q, r) = (scaled / total, scaled % total);
    let hundredths = if 2 * r >= total { q + 1 } else { q };
    format!("{}.{:02}", hundredths / 100, hundredths % 100)
}

proptest! {
    #[test]
    fn turning_composes(f in facing_strategy(), a in -9..9i32, b in -9..9i32) {
        prop_assert_eq!(f.turn(a).turn(b), f.turn(a + b));
        prop_assert_eq!(f.turn(4), f);
        let (x, y) = f.vector();
        prop_assert_eq!(f.turn(1).vector(), (-y, x));
        prop_assert_eq!(Facing::from_vector(f.vector()), Some(f));
    }

    #[test]
    fn relative_direction_matches_compass_table(
        f in facing_strategy(),
        from in (0..10i32, 0..10i32),
        to in (0..10i32, 0..10i32),
    ) {
        let got = relative_direction(f, GridPos::raw(from.0, from.1), GridPos::raw(to.0, to.1));
        let (dx, dy) = (to.0 - from.0, to.1 - from.1);
        if (dx, dy) == (0, 0) {
            prop_assert!(got.is_err());
        } else {
            prop_assert_eq!(got.unwrap(), compass(dx, dy).map(|c| egocentric(f, c)));
        }
    }

    #[test]
    fn opposite_directions_swap(
        f in facing_strategy(),
        a in (0..10i32, 0..10i32),
        b in (0..10i32, 0..10i32),
    ) {
        prop_assume!(a != b);
        let (pa, pb) = (GridPos::raw(a.0, a.1), GridPos::raw(b.0, b.1));
        let there = relative_direction(f, pa, pb).unwrap();
        let back = relative_direction(f, pb, pa).unwrap();
        prop_assert_eq!(there.map(Direction::opposite), back);
    }

    #[test]
    fn parse_answer_never_panics(text in ".{0,300}") {
        let _ = parse_answer(&text);
        let _ = parse_response(&text);
    }

    #[test]
    fn no_capital_letter_no_answer(text in "[a-z0-9 .,:()<>/\\n]{0,200}") {
        prop_assert_eq!(parse_answer(&text), None);
        let wrapped = format!("<answer>{text}</answer>");
        prop_assert_eq!(parse_response(&wrapped).answer, None);
    }

    #[test]
    fn answer_block_letter_is_found(
        letter in prop::sample::select(vec!['A', 'B', 'C', 'D', 'E']),
        option in "[a-z ]{1,30}",
        prefix in "[a-z .]{0,40}",
    ) {
        let text = format!("{prefix}<answer>{letter}. {option}</answer>");
        prop_assert_eq!(parse_response(&text).answer, Some(letter));
    }

    #[test]
    fn accuracy_ignores_order(mut results in prop::collection::vec(result_strategy(), 1..200), seed in any::<u64>()) {
        prop_assume!(results.iter().any(|r| r.setting != Setting::Translation));
        let a = qa_accuracy(&results).unwrap();
        let k = (seed % results.len() as u64) as usize;
        results.rotate_left(k);
        results.reverse();
        let b = qa_accuracy(&results).unwrap();
        prop_assert_eq!(a.overall, b.overall);
        prop_assert_eq!(a.per_setting, b.per_setting);
    }

    #[test]
    fn merged_reports_add_up(
        left in prop::collection::vec(result_strategy(), 1..100),
        right in prop::collection::vec(result_strategy(), 1..100),
    ) {
        let (Ok(l), Ok(r)) = (qa_accuracy(&left), qa_accuracy(&right)) else {
            return Err(TestCaseError::reject("a side is all translation"));
        };
        let merged = l.merge(&r);
        let all: Vec<_> = left.iter().chain(&right).cloned().collect();
        let whole = qa_accuracy(&all).unwrap();
        prop_assert_eq!(merged.overall, whole.overall);
        prop_assert_eq!(merged.per_setting, whole.per_setting);
        prop_assert_eq!(merged.excluded, whole.excluded);
    }

    #[test]
    fn tally_display_is_half_up(correct in 0..5000u64, extra in 0..5000u64) {
        let total = correct + extra;
        prop_assume!(total > 0);
        prop_assert_eq!(Tally::new(correct, total).display(), percent_string(correct, total));
    }

    #[test]
    fn graph_scores_are_bounded(pred in map_strategy(), gold in map_strategy()) {
        let m = cogmap_metrics(&[(Some(&pred), &gold)]);
        for v in [m.validity, m.object_recall, m.object_precision, m.position_match, m.facing_match, m.isomorphic_score] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        prop_assert!(m.isomorphic_score >= m.position_match);
    }

    #[test]
    fn quarter_turned_prediction_is_isomorphic(gold in layout_strategy()) {
        let turned = quarter_turn(&gold);
        let m = cogmap_metrics(&[(Some(&turned), &gold)]);
        prop_assert!(m.position_match < 1.0);
        prop_assert_eq!(m.isomorphic_score, 1.0);
        let same = cogmap_metrics(&[(Some(&gold), &gold)]);
        prop_assert_eq!(same.position_match, 1.0);
        prop_assert_eq!(same.facing_match, 1.0);
    }

    #[test]
    fn translated_prediction_keeps_positions(gold in layout_strategy(), dx in -2..=2i32, dy in -2..=2i32) {
        let m = cogmap_metrics(&[(Some(&translate(&gold, dx, dy)), &gold)]);
        prop_assert_eq!(m.position_match, 1.0);
        prop_assert_eq!(m.object_recall, 1.0);
    }

    #[test]
    fn line_errors_account_for_every_line(
        seed in any::<u64>(),
        junk in prop::collection::vec("[a-z{}\\[\\]:\" ]{1,20}", 0..6),
        blanks in 0..4usize,
    ) {
        let items = synth_corpus(5, seed);
        let mut lines: Vec<String> = items.iter().map(|i| i.to_json().to_string()).collect();
        lines.extend(junk.iter().map(|j| format!("junk {j}")));
        lines.extend(std::iter::repeat_n(String::new(), blanks));
        let nonblank = lines.iter().filter(|l| !l.trim().is_empty()).count();
        let text = lines.join("\n");
        let file = parse_items(&text, std::path::Path::new("mem.jsonl"));
        prop_assert_eq!(file.items.len() + file.line_errors.len(), nonblank);
        prop_assert_eq!(file.items.len(), 5);
    }
}

#[test]
fn ten_thousand_results_match_a_recount() {
    let mut runner = proptest::test_runner::TestRunner::deterministic();
    let strategy = prop::collection::vec(result_strategy(), 10_000);
    let results = strategy.new_tree(&mut runner).unwrap().current();
    let report = qa_accuracy(&results).unwrap();
    let mut recount: BTreeMap<Setting, (u64, u64)> = BTreeMap::new();
    for r in &results {
        let entry = recount.entry(r.setting).or_default();
        entry.1 += 1;
        if r.predicted == Some(r.gold) {
            entry.0 += 1;
        }
    }
    let excluded = recount.get(&Setting::Translation).map_or(0, |t| t.1);
    assert_eq!(report.excluded, excluded);
    let (mut c, mut t) = (0, 0);
    for setting in Setting::REPORTED {
        let (sc, st) = recount.get(&setting).copied().unwrap_or_default();
        assert_eq!(report.setting(setting), Tally::new(sc, st));
        assert_eq!(report.setting(setting).display(), percent_string(sc, st));
        c += sc;
        t += st;
    }
    assert_eq!(report.overall, Tally::new(c, t));
}

fn among_maps() -> Vec<CognitiveMap> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    (0..200)
        .map(|i| synth_item(&mut rng, Setting::Among, format!("among_{i}")))
        .map(|item| generate_cogmap(&item).unwrap())
        .collect()
}

#[test]
fn among_distances() {
    for map in among_maps() {
        assert_eq!(map.objects[0].position, CENTER);
        for (object, slot) in map.objects[1..].iter().zip(AMONG_SLOTS) {
            assert_eq!(object.position, slot);
            assert_eq!(object.position.manhattan(CENTER), 3);
        }
        assert_eq!(map.anchor().map(|a| a.name.as_str()), Some(map.objects[0].name.as_str()));
        for (k, view) in map.views.iter().enumerate() {
            assert_eq!(view.position.manhattan(CENTER), 1);
            assert_eq!(nearest_in_view(&map, k + 1).unwrap().as_deref(), Some(map.objects[0].name.as_str()));
            let front = front_object(&map, k + 1).unwrap().unwrap();
            let seen = map.object(&front).unwrap();
            assert_eq!(CENTER.step(view.facing, 3), seen.position);
        }
    }
}

#[test]
fn among_answers_survive_name_permutation() {
    for map in among_maps().into_iter().take(50) {
        let mut renamed = map.clone();
        let n = renamed.objects.len();
        let names: Vec<String> = map.objects.iter().map(|o| o.name.clone()).collect();
        for (i, object) in renamed.objects.iter_mut().enumerate() {
            object.name = names[(i + 1) % n].clone();
        }
        let options = options_with_none(&names);
        for view in 1..=map.views.len() {
            for (i, anchor) in names.iter().enumerate() {
                for d in Direction::ALL {
                    let q = cogforge::Question::relative(view, anchor.clone(), d, options.clone());
                    let renamed_anchor = names[(i + 1) % n].clone();
                    let rq = cogforge::Question::relative(view, renamed_anchor, d, options.clone());
                    let letter = |m: &CognitiveMap, q| answer_question(m, q).ok();
                    let a = letter(&map, &q).map(|l| options.iter().position(|o| o.letter == l).unwrap());
                    let b = letter(&renamed, &rq).map(|l| options.iter().position(|o| o.letter == l).unwrap());
                    let shifted = a.map(|j| if j < n { (j + 1) % n } else { j });
                    assert_eq!(shifted, b);
                }
            }
        }
    }
}

#[test]
fn rotation_views_share_the_center() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for i in 0..200 {
        let item = synth_item(&mut rng, Setting::Rotation, format!("rotation_{i}"));
        let map = generate_cogmap(&item).unwrap();
        assert_eq!(map.objects.len(), map.views.len());
        for (k, (view, object)) in map.views.iter().zip(&map.objects).enumerate() {
            assert_eq!(view.position, CENTER);
            assert_eq!(object.position, CENTER.step(view.facing, ROTATION_RADIUS));
            assert_eq!(nearest_in_view(&map, k + 1).unwrap().as_deref(), Some(object.name.as_str()));
        }
    }
}

#[test]
fn chains_conclude_with_the_oracle_answer() {
    let templates = Templates::builtin();
    for item in synth_corpus(150, 77) {
        let map = generate_cogmap(&item).unwrap();
        let chain = generate_reasoning(&item, &map, &templates).unwrap();
        let oracle = answer_question(&map, &question_for_item(&item, &map).unwrap()).unwrap();
        assert_eq!(chain.bound_answer, oracle, "{}", item.id);
        let tail = format!("So the answer is {oracle}. ");
        assert!(chain.text.contains(&tail), "{}: {}", item.id, chain.text);
        let last = &chain.text[chain.text.rfind("So the answer").unwrap()..];
        assert_eq!(parse_response(&format!("<answer>{last}</answer>")).answer, Some(oracle));
    }
}

#[test]
fn chains_only_name_mapped_objects() {
    let templates = Templates::builtin();
    let pool: BTreeSet<String> = synth_corpus(300, 1)
        .iter()
        .flat_map(|i| i.meta_info.objects.iter().map(|o| o.name.clone()))
        .collect();
    for item in synth_corpus(150, 78) {
        let map = generate_cogmap(&item).unwrap();
        let chain = generate_reasoning(&item, &map, &templates).unwrap();
        let body = &chain.text[..chain.text.rfind("So the answer").unwrap()];
        for name in &pool {
            if body.contains(&format!("the {name} ")) || body.contains(&format!("the {name},")) {
                assert!(map.object(name).is_some(), "{}: chain names {name}", item.id);
            }
        }
    }
}

#[test]
fn two_view_around_chain() {
    let mut item = cogforge::synth::synth_corpus(3, 4).remove(1);
    assert_eq!(item.setting, Setting::Around);
    item.images.truncate(2);
    item.meta_info.camera.angles = vec![0, 180];
    let names: Vec<String> = item.meta_info.objects.iter().map(|o| o.name.clone()).collect();
    item.meta_info.query = Some(cogforge::scene::QuerySpec {
        kind: cogforge::scene::QuestionKind::RelativeToAnchorFromView,
        view: 2,
        anchor: Some(names[0].clone()),
        direction: Some(Direction::Left),
    });
    let map = generate_cogmap(&item).unwrap();
    let question = question_for_item(&item, &map).unwrap();
    let expected = {
        let mut coords = Vec::new();
        for o in &map.objects {
            coords.push((o.name.clone(), (o.position.x, o.position.y)));
        }
        brute_relative(&coords, Facing::Down, &names[0], Direction::Left).unwrap()
    };
    item.options = options_with_none(&names);
    item.gold_answer = cogforge::oracle::option_for(&item.options, expected.as_deref()).unwrap();
    let question = cogforge::Question { options: item.options.clone(), ..question };
    assert_eq!(answer_question(&map, &question).unwrap(), item.gold_answer);
    let chain = generate_reasoning(&item, &map, &Templates::builtin()).unwrap();
    assert_eq!(chain.text.matches("In image ").count(), 2, "{}", chain.text);
    assert!(!chain.text.contains("rotation"), "{}", chain.text);
    assert!(chain.text.contains("two images"), "{}", chain.text);
}

#[test]
fn objects_keep_their_orientation() {
    let mut item = worked_item();
    item.meta_info.objects[0].orientation = Some(Facing::Left);
    let map = generate_cogmap(&item).unwrap();
    assert_eq!(map.objects[0].facing, Some(Facing::Left));
    assert_eq!(
        map.objects[1..].iter().map(|o| o.facing).collect::<Vec<_>>(),
        vec![None; 4]
    );
}
