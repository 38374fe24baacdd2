//! QA accuracy with per-setting breakdown, cognitive-map quality metrics and
//! report rendering.
//!
//! Percentages are computed from integer counts and rounded half-up to two
//! decimals, so rendering never depends on float formatting.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::MetricsError;
use crate::scene::{CognitiveMap, Facing, GridPos, Setting};

pub fn grade(predicted: Option<char>, gold: char) -> bool {
    predicted.is_some_and(|p| p.eq_ignore_ascii_case(&gold))
}

/// Correct and total counts for one cell.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Tally {
    pub correct: u64,
    pub total: u64,
}

impl Tally {
    pub fn new(correct: u64, total: u64) -> Self {
        assert!(correct <= total, "{correct} correct of {total}");
        Self { correct, total }
    }

    pub fn add(&mut self, correct: bool) {
        self.total += 1;
        self.correct += u64::from(correct);
    }

    pub fn merge(self, other: Tally) -> Tally {
        Tally::new(self.correct + other.correct, self.total + other.total)
    }

    /// Percentage in hundredths of a percent, rounded half-up.
    pub fn hundredths(self) -> Option<u64> {
        (self.total > 0).then(|| (self.correct * 20_000 + self.total) / (2 * self.total))
    }

    pub fn percent(self) -> Option<f64> {
        self.hundredths().map(|h| h as f64 / 100.0)
    }

    /// `"52.28"`, or `"--"` for an empty cell.
    pub fn display(self) -> String {
        match self.hundredths() {
            Some(h) => format!("{}.{:02}", h / 100, h % 100),
            None => "--".to_string(),
        }
    }
}

/// One graded response.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GradedResult {
    pub id: String,
    pub setting: Setting,
    pub predicted: Option<char>,
    pub gold: char,
}

impl GradedResult {
    pub fn correct(&self) -> bool {
        grade(self.predicted, self.gold)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct GraphMetrics {
    pub pairs: u64,
    pub validity: f64,
    pub object_recall: f64,
    pub object_precision: f64,
    pub position_match: f64,
    pub facing_match: f64,
    pub isomorphic_score: f64,
    /// Pairs whose gold map has any facing; the facing average runs over these.
    #[serde(skip)]
    facing_pairs: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub overall: Tally,
    pub per_setting: BTreeMap<Setting, Tally>,
    pub graph: Option<GraphMetrics>,
    /// Results left out of every cell (translation items).
    pub excluded: u64,
    pub warnings: Vec<String>,
}

impl EvalReport {
    pub fn overall_acc(&self) -> Option<f64> {
        self.overall.percent()
    }

    pub fn setting(&self, setting: Setting) -> Tally {
        self.per_setting.get(&setting).copied().unwrap_or_default()
    }

    pub fn per_setting_acc(&self, setting: Setting) -> Option<f64> {
        self.setting(setting).percent()
    }

    /// Report over the union of two disjoint result sets.
    pub fn merge(&self, other: &EvalReport) -> EvalReport {
        let mut per_setting = self.per_setting.clone();
        for (setting, tally) in &other.per_setting {
            let cell = per_setting.entry(*setting).or_default();
            *cell = cell.merge(*tally);
        }
        let graph = match (&self.graph, &other.graph) {
            (Some(a), Some(b)) => Some(a.merge(b)),
            (a, b) => a.clone().or_else(|| b.clone()),
        };
        let mut warnings = self.warnings.clone();
        warnings.extend(other.warnings.iter().cloned());
        EvalReport {
            overall: self.overall.merge(other.overall),
            per_setting,
            graph,
            excluded: self.excluded + other.excluded,
            warnings,
        }
    }

    pub fn to_json(&self) -> Value {
        let pct = |t: Tally| t.percent().map_or(Value::Null, Value::from);
        let mut per_setting = serde_json::Map::new();
        let mut counts = serde_json::Map::new();
        counts.insert("overall".into(), json!(self.overall));
        for setting in Setting::REPORTED {
            per_setting.insert(setting.to_string(), pct(self.setting(setting)));
            counts.insert(setting.to_string(), json!(self.setting(setting)));
        }
        json!({
            "overall": pct(self.overall),
            "per_setting": per_setting,
            "graph": self.graph,
            "counts": counts,
            "excluded": self.excluded,
            "warnings": self.warnings,
        })
    }
}

/// Tallies results overall and per setting. Translation results are left out
/// with a warning.
pub fn qa_accuracy(results: &[GradedResult]) -> Result<EvalReport, MetricsError> {
    let mut report = EvalReport {
        overall: Tally::default(),
        per_setting: Setting::REPORTED.iter().map(|s| (*s, Tally::default())).collect(),
        graph: None,
        excluded: 0,
        warnings: Vec::new(),
    };
    for result in results {
        match report.per_setting.get_mut(&result.setting) {
            Some(cell) => {
                let correct = result.correct();
                cell.add(correct);
                report.overall.add(correct);
            }
            None => report.excluded += 1,
        }
    }
    if report.excluded > 0 {
        report.warnings.push(format!(
            "{} result(s) from unreported settings were excluded",
            report.excluded
        ));
    }
    if report.overall.total == 0 {
        return Err(MetricsError::EmptyRun);
    }
    Ok(report)
}

fn norm(name: &str) -> String {
    name.trim().to_lowercase()
}

/// The eight linear symmetries of the square grid, applied to a vector.
fn symmetry(k: usize, (x, y): (i32, i32)) -> (i32, i32) {
    let (x, y) = if k >= 4 { (-x, y) } else { (x, y) };
    match k % 4 {
        0 => (x, y),
        1 => (-y, x),
        2 => (-x, -y),
        _ => (y, -x),
    }
}

/// Largest number of pairs that coincide after translating `pred` points.
fn best_translation(pairs: &[(GridPos, GridPos)]) -> usize {
    let mut votes: HashMap<(i32, i32), usize> = HashMap::new();
    for (pred, gold) in pairs {
        *votes.entry((gold.x - pred.x, gold.y - pred.y)).or_default() += 1;
    }
    votes.into_values().max().unwrap_or(0)
}

/// Per-pair scores before averaging.
struct PairScore {
    valid: bool,
    recall: f64,
    precision: f64,
    position: f64,
    isomorphic: f64,
    facing: Option<f64>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn score_pair(pred: Option<&CognitiveMap>, gold: &CognitiveMap) -> PairScore {
    let gold_facings = gold.views.len() + gold.objects.iter().filter(|o| o.facing.is_some()).count();
    let has_facings = gold_facings > 0;
    let Some(pred) = pred else {
        return PairScore {
            valid: false,
            recall: 0.0,
            precision: 0.0,
            position: 0.0,
            isomorphic: 0.0,
            facing: has_facings.then_some(0.0),
        };
    };
    let pred_objects: HashMap<String, (GridPos, Option<Facing>)> = pred
        .objects
        .iter()
        .map(|o| (norm(&o.name), (o.position, o.facing)))
        .collect();
    let mut matched = Vec::new();
    let mut facing_hits = 0;
    for object in &gold.objects {
        if let Some((position, facing)) = pred_objects.get(&norm(&object.name)) {
            matched.push((*position, object.position));
            if object.facing.is_some() && *facing == object.facing {
                facing_hits += 1;
            }
        }
    }
    let pred_views: HashMap<String, Facing> =
        pred.views.iter().map(|v| (norm(&v.name), v.facing)).collect();
    facing_hits += gold
        .views
        .iter()
        .filter(|v| pred_views.get(&norm(&v.name)) == Some(&v.facing))
        .count();

    let gold_names: std::collections::HashSet<String> =
        gold.objects.iter().map(|o| norm(&o.name)).collect();
    let recall = if gold_names.is_empty() {
        1.0
    } else {
        ratio(matched.len(), gold_names.len())
    };
    let precision = if pred_objects.is_empty() {
        if gold_names.is_empty() { 1.0 } else { 0.0 }
    } else {
        ratio(
            pred_objects.keys().filter(|n| gold_names.contains(*n)).count(),
            pred_objects.len(),
        )
    };
    let aligned = |k: usize| {
        let transformed: Vec<_> = matched
            .iter()
            .map(|(p, g)| {
                let (x, y) = symmetry(k, (p.x, p.y));
                (GridPos::raw(x, y), *g)
            })
            .collect();
        ratio(best_translation(&transformed), matched.len())
    };
    let position = aligned(0);
    let isomorphic = (0..8).map(aligned).fold(0.0, f64::max);
    PairScore {
        valid: true,
        recall,
        precision,
        position,
        isomorphic,
        facing: has_facings.then(|| ratio(facing_hits, gold_facings)),
    }
}

impl GraphMetrics {
    fn from_scores(scores: &[PairScore]) -> Self {
        let n = scores.len() as f64;
        let mean = |f: fn(&PairScore) -> f64| {
            if scores.is_empty() {
                0.0
            } else {
                scores.iter().map(f).sum::<f64>() / n
            }
        };
        let facings: Vec<f64> = scores.iter().filter_map(|s| s.facing).collect();
        GraphMetrics {
            pairs: scores.len() as u64,
            validity: mean(|s| f64::from(u8::from(s.valid))),
            object_recall: mean(|s| s.recall),
            object_precision: mean(|s| s.precision),
            position_match: mean(|s| s.position),
            isomorphic_score: mean(|s| s.isomorphic),
            facing_match: if facings.is_empty() {
                0.0
            } else {
                facings.iter().sum::<f64>() / facings.len() as f64
            },
            facing_pairs: facings.len() as u64,
        }
    }

    /// Pair-weighted combination of two disjoint sets.
    pub fn merge(&self, other: &GraphMetrics) -> GraphMetrics {
        let (a, b) = (self.pairs as f64, other.pairs as f64);
        let total = a + b;
        let mix = |x: f64, y: f64| if total == 0.0 { 0.0 } else { (x * a + y * b) / total };
        let (fa, fb) = (self.facing_pairs as f64, other.facing_pairs as f64);
        GraphMetrics {
            pairs: self.pairs + other.pairs,
            validity: mix(self.validity, other.validity),
            object_recall: mix(self.object_recall, other.object_recall),
            object_precision: mix(self.object_precision, other.object_precision),
            position_match: mix(self.position_match, other.position_match),
            isomorphic_score: mix(self.isomorphic_score, other.isomorphic_score),
            facing_match: if fa + fb == 0.0 {
                0.0
            } else {
                (self.facing_match * fa + other.facing_match * fb) / (fa + fb)
            },
            facing_pairs: self.facing_pairs + other.facing_pairs,
        }
    }
}

/// Averages per-pair map scores. `None` marks an invalid prediction, which
/// scores 0 on every metric.
pub fn cogmap_metrics(pairs: &[(Option<&CognitiveMap>, &CognitiveMap)]) -> GraphMetrics {
    let scores: Vec<PairScore> = pairs.iter().map(|(p, g)| score_pair(*p, g)).collect();
    GraphMetrics::from_scores(&scores)
}

const COLUMNS: [&str; 4] = ["Overall", "Rotation", "Among", "Around"];

/// Fixed-width table with one row per labelled report.
pub fn render_table(rows: &[(&str, &EvalReport)]) -> String {
    let width = rows
        .iter()
        .map(|(label, _)| label.chars().count())
        .chain(std::iter::once("Method".len()))
        .max()
        .unwrap_or(0);
    let mut out = format!("{:<width$}", "Method");
    for column in COLUMNS {
        write!(out, "  {column:>8}").unwrap();
    }
    out.push('\n');
    for (label, report) in rows {
        write!(out, "{label:<width$}").unwrap();
        let cells = [report.overall]
            .into_iter()
            .chain(Setting::REPORTED.iter().map(|s| report.setting(*s)));
        for cell in cells {
            write!(out, "  {:>8}", cell.display()).unwrap();
        }
        out.push('\n');
    }
    out
}

/// CSV of accuracy and graph metrics over training steps.
pub fn step_series_csv(rows: &[(u64, &EvalReport)]) -> String {
    let mut out = String::from(
        "step,overall,rotation,among,around,validity,object_recall,object_precision,position_match,facing_match,isomorphic_score\n",
    );
    for (step, report) in rows {
        let cell = |t: Tally| match t.hundredths() {
            Some(_) => t.display(),
            None => String::new(),
        };
        write!(out, "{step},{}", cell(report.overall)).unwrap();
        for setting in Setting::REPORTED {
            write!(out, ",{}", cell(report.setting(setting))).unwrap();
        }
        match &report.graph {
            Some(g) => {
                for v in [
                    g.validity,
                    g.object_recall,
                    g.object_precision,
                    g.position_match,
                    g.facing_match,
                    g.isomorphic_score,
                ] {
                    write!(out, ",{v:.4}").unwrap();
                }
            }
            None => out.push_str(",,,,,,"),
        }
        out.push('\n');
    }
    out
}
