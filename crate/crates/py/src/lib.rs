//! Python bindings for the cogforge pipeline.

use std::collections::BTreeMap;

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;

use cogforge::scene::{AnswerOption, Direction, Facing, GridPos, MapObject, MapView, Setting};
use cogforge::tasks::{emit_sft_manifest, SftManifest};
use cogforge::{ComposeError, IngestError, TaskConfig, Templates};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn config(name: &str) -> PyResult<TaskConfig> {
    name.parse().map_err(value_err)
}

fn setting(name: &str) -> PyResult<Setting> {
    name.parse().map_err(value_err)
}

fn letter(s: &str) -> PyResult<char> {
    let mut chars = s.trim().chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) if c.is_ascii_alphabetic() => Ok(c.to_ascii_uppercase()),
        _ => Err(PyValueError::new_err(format!("expected one option letter, got {s:?}"))),
    }
}

fn compose_err(e: ComposeError) -> PyErr {
    match e {
        ComposeError::Io { .. } => PyOSError::new_err(e.to_string()),
        other => value_err(other),
    }
}

type Point = (i32, i32);
type LineError = (usize, String);

/// A scene item with its question and gold answer.
#[pyclass(name = "SceneItem", module = "cogforge", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PySceneItem {
    pub inner: cogforge::scene::SceneItem,
}

#[pymethods]
impl PySceneItem {
    #[staticmethod]
    fn from_json(line: &str) -> PyResult<Self> {
        cogforge::ingest::parse_item(line)
            .map(|inner| Self { inner })
            .map_err(|(id, message)| match id {
                Some(id) => PyValueError::new_err(format!("item {id}: {message}")),
                None => PyValueError::new_err(message),
            })
    }

    fn to_json(&self) -> String {
        self.inner.to_json().to_string()
    }

    #[getter]
    fn id(&self) -> &str {
        &self.inner.id
    }

    #[getter]
    fn setting(&self) -> &'static str {
        self.inner.setting.as_str()
    }

    #[getter]
    fn question(&self) -> &str {
        &self.inner.question
    }

    #[getter]
    fn images(&self) -> Vec<String> {
        self.inner.images.clone()
    }

    #[getter]
    fn objects(&self) -> Vec<String> {
        self.inner.meta_info.objects.iter().map(|o| o.name.clone()).collect()
    }

    #[getter]
    fn options(&self) -> Vec<(String, String)> {
        self.inner
            .options
            .iter()
            .map(|o| (o.letter.to_string(), o.text.clone()))
            .collect()
    }

    #[getter]
    fn gold_answer(&self) -> String {
        self.inner.gold_answer.to_string()
    }

    fn __repr__(&self) -> String {
        format!("SceneItem(id={:?}, setting={:?})", self.inner.id, self.inner.setting.as_str())
    }
}

/// A grid cognitive map: named objects and camera views.
#[pyclass(name = "CognitiveMap", module = "cogforge", frozen, eq, skip_from_py_object)]
#[derive(Clone, PartialEq)]
pub struct PyCognitiveMap {
    pub inner: cogforge::scene::CognitiveMap,
}

#[pymethods]
impl PyCognitiveMap {
    /// Builds a map from `(name, (x, y), facing or None)` objects and
    /// `((x, y), facing)` views numbered from 1.
    #[new]
    #[pyo3(signature = (objects, views = Vec::new()))]
    fn new(objects: Vec<(String, Point, Option<String>)>, views: Vec<(Point, String)>) -> PyResult<Self> {
        let objects = objects
            .into_iter()
            .map(|(name, (x, y), facing)| {
                Ok(MapObject {
                    name,
                    position: GridPos::raw(x, y),
                    facing: facing.map(|f| f.parse::<Facing>()).transpose().map_err(value_err)?,
                })
            })
            .collect::<PyResult<Vec<_>>>()?;
        let views = views
            .into_iter()
            .enumerate()
            .map(|(i, ((x, y), facing))| {
                Ok(MapView::new(i + 1, GridPos::raw(x, y), facing.parse().map_err(value_err)?))
            })
            .collect::<PyResult<Vec<_>>>()?;
        let inner = cogforge::scene::CognitiveMap { objects, views };
        inner.validate().map_err(value_err)?;
        Ok(Self { inner })
    }

    /// Parses cogmap JSON in either schema, with the response parser's
    /// tolerance for fences and wrappers.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        cogforge::parse_cogmap(text)
            .map(|p| Self { inner: p.map })
            .map_err(value_err)
    }

    fn to_augmented(&self) -> String {
        cogforge::cogmap::serialize_augmented(&self.inner)
    }

    fn to_plain(&self) -> PyResult<String> {
        cogforge::cogmap::serialize_plain(&self.inner).map_err(value_err)
    }

    #[getter]
    fn objects(&self) -> Vec<(String, Point, Option<&'static str>)> {
        self.inner
            .objects
            .iter()
            .map(|o| (o.name.clone(), (o.position.x, o.position.y), o.facing.map(Facing::as_str)))
            .collect()
    }

    #[getter]
    fn views(&self) -> Vec<(String, Point, &'static str)> {
        self.inner
            .views
            .iter()
            .map(|v| (v.name.clone(), (v.position.x, v.position.y), v.facing.as_str()))
            .collect()
    }

    #[getter]
    fn anchor(&self) -> Option<String> {
        self.inner.anchor().map(|o| o.name.clone())
    }

    fn __repr__(&self) -> String {
        format!(
            "CognitiveMap({} objects, {} views)",
            self.inner.objects.len(),
            self.inner.views.len()
        )
    }
}

/// Result of parsing one model response.
#[pyclass(name = "ParsedResponse", module = "cogforge", frozen, get_all)]
pub struct PyParsedResponse {
    answer: Option<String>,
    cogmap: Option<PyCognitiveMap>,
    cogmap_valid: bool,
    think: Option<String>,
    notes: Vec<String>,
    off_grid: bool,
}

/// A composed training record.
#[pyclass(name = "TrainingRecord", module = "cogforge", frozen)]
pub struct PyTrainingRecord {
    inner: cogforge::TrainingRecord,
}

#[pymethods]
impl PyTrainingRecord {
    #[getter]
    fn id(&self) -> &str {
        &self.inner.id
    }

    #[getter]
    fn images(&self) -> Vec<String> {
        self.inner.images.clone()
    }

    #[getter]
    fn input(&self) -> &str {
        &self.inner.input
    }

    #[getter]
    fn target(&self) -> &str {
        &self.inner.target
    }

    #[getter]
    fn config(&self) -> &'static str {
        self.inner.config.name()
    }

    #[getter]
    fn setting(&self) -> &'static str {
        self.inner.setting.as_str()
    }

    /// The JSONL line written to datasets.
    fn to_json(&self) -> String {
        self.inner.to_json().to_string()
    }
}

/// Accuracy overall and per setting, plus cogmap metrics when graded.
#[pyclass(name = "EvalReport", module = "cogforge", frozen)]
pub struct PyEvalReport {
    inner: cogforge::EvalReport,
}

#[pymethods]
impl PyEvalReport {
    /// Overall accuracy in percent, `None` for an empty run.
    #[getter]
    fn overall(&self) -> Option<f64> {
        self.inner.overall_acc()
    }

    #[getter]
    fn per_setting(&self) -> BTreeMap<&'static str, Option<f64>> {
        Setting::REPORTED
            .into_iter()
            .map(|s| (s.as_str(), self.inner.per_setting_acc(s)))
            .collect()
    }

    #[getter]
    fn counts(&self) -> BTreeMap<&'static str, (u64, u64)> {
        let mut out: BTreeMap<_, _> = Setting::REPORTED
            .into_iter()
            .map(|s| {
                let t = self.inner.setting(s);
                (s.as_str(), (t.correct, t.total))
            })
            .collect();
        out.insert("overall", (self.inner.overall.correct, self.inner.overall.total));
        out
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.inner.warnings.clone()
    }

    #[pyo3(signature = (label = "model"))]
    fn render_table(&self, label: &str) -> String {
        cogforge::render_table(&[(label, &self.inner)])
    }

    fn to_json(&self) -> String {
        self.inner.to_json().to_string()
    }
}

#[pyfunction]
fn parse_setting(item_id: &str) -> PyResult<&'static str> {
    cogforge::parse_setting(item_id).map(Setting::as_str).map_err(value_err)
}

/// Reads a JSONL file; returns the items and `(line, message)` for each
/// rejected line.
#[pyfunction]
fn load_items(path: &str) -> PyResult<(Vec<PySceneItem>, Vec<LineError>)> {
    let file = cogforge::load_items(path).map_err(|e| match e {
        IngestError::Io { .. } => PyOSError::new_err(e.to_string()),
        other => value_err(other),
    })?;
    let items = file.items.into_iter().map(|inner| PySceneItem { inner }).collect();
    let errors = file.line_errors.into_iter().map(|e| (e.line, e.message)).collect();
    Ok((items, errors))
}

#[pyfunction]
fn synth_corpus(count: usize, seed: u64) -> Vec<PySceneItem> {
    cogforge::synth::synth_corpus(count, seed)
        .into_iter()
        .map(|inner| PySceneItem { inner })
        .collect()
}

#[pyfunction]
fn generate_cogmap(item: &PySceneItem) -> PyResult<PyCognitiveMap> {
    cogforge::generate_cogmap(&item.inner)
        .map(|inner| PyCognitiveMap { inner })
        .map_err(value_err)
}

#[pyfunction]
fn generate_reasoning(item: &PySceneItem) -> PyResult<String> {
    let map = cogforge::generate_cogmap(&item.inner).map_err(value_err)?;
    cogforge::generate_reasoning(&item.inner, &map, &Templates::builtin())
        .map(|c| c.text)
        .map_err(value_err)
}

/// Answers a question on `map`. `kind` is "relative", "behind_viewer" or
/// "front_object"; options are `(letter, text)` pairs.
#[pyfunction]
#[pyo3(signature = (map, kind, view, options, anchor = None, direction = None))]
fn answer_question(
    map: &PyCognitiveMap,
    kind: &str,
    view: usize,
    options: Vec<(String, String)>,
    anchor: Option<String>,
    direction: Option<String>,
) -> PyResult<String> {
    let options = options
        .into_iter()
        .map(|(l, text)| Ok(AnswerOption::new(letter(&l)?, text)))
        .collect::<PyResult<Vec<_>>>()?;
    let question = match kind {
        "relative" => {
            let anchor = anchor.ok_or_else(|| PyValueError::new_err("relative questions need an anchor"))?;
            let direction: Direction = direction
                .ok_or_else(|| PyValueError::new_err("relative questions need a direction"))?
                .parse()
                .map_err(value_err)?;
            cogforge::Question::relative(view, anchor, direction, options)
        }
        "behind_viewer" => cogforge::Question::behind_viewer(view, options),
        "front_object" => cogforge::Question::front_object(view, options),
        other => return Err(PyValueError::new_err(format!("unknown question kind {other:?}"))),
    };
    cogforge::answer_question(&map.inner, &question)
        .map(String::from)
        .map_err(value_err)
}

/// Oracle answer for an item's own question on its generated map.
#[pyfunction]
fn answer_item(item: &PySceneItem) -> PyResult<String> {
    let map = cogforge::generate_cogmap(&item.inner).map_err(value_err)?;
    let question = cogforge::oracle::question_for_item(&item.inner, &map).map_err(value_err)?;
    cogforge::answer_question(&map, &question)
        .map(String::from)
        .map_err(value_err)
}

#[pyfunction]
fn parse_response(text: &str) -> PyParsedResponse {
    let p = cogforge::parse_response(text);
    PyParsedResponse {
        answer: p.answer.map(String::from),
        cogmap: p.cogmap.map(|inner| PyCognitiveMap { inner }),
        cogmap_valid: p.cogmap_valid,
        think: p.think,
        notes: p.notes,
        off_grid: p.off_grid,
    }
}

#[pyfunction]
fn parse_answer(text: &str) -> Option<String> {
    cogforge::parse_answer(text).map(String::from)
}

#[pyfunction]
#[pyo3(signature = (predicted, gold))]
fn grade(predicted: Option<&str>, gold: &str) -> PyResult<bool> {
    let predicted = predicted.map(letter).transpose()?;
    Ok(cogforge::grade(predicted, letter(gold)?))
}

/// Tallies `(id, setting, predicted or None, gold)` rows.
#[pyfunction]
fn qa_accuracy(results: Vec<(String, String, Option<String>, String)>) -> PyResult<PyEvalReport> {
    let results = results
        .into_iter()
        .map(|(id, s, predicted, gold)| {
            Ok(cogforge::GradedResult {
                id,
                setting: setting(&s)?,
                predicted: predicted.as_deref().map(letter).transpose()?,
                gold: letter(&gold)?,
            })
        })
        .collect::<PyResult<Vec<_>>>()?;
    cogforge::qa_accuracy(&results)
        .map(|inner| PyEvalReport { inner })
        .map_err(value_err)
}

/// Mean graph metrics over `(predicted or None, gold)` pairs.
#[pyfunction]
fn cogmap_metrics(pairs: Vec<(Option<PyRef<'_, PyCognitiveMap>>, PyRef<'_, PyCognitiveMap>)>) -> BTreeMap<&'static str, f64> {
    let refs: Vec<_> = pairs
        .iter()
        .map(|(p, g)| (p.as_ref().map(|p| &p.inner), &g.inner))
        .collect();
    let m = cogforge::cogmap_metrics(&refs);
    BTreeMap::from([
        ("pairs", m.pairs as f64),
        ("validity", m.validity),
        ("object_recall", m.object_recall),
        ("object_precision", m.object_precision),
        ("position_match", m.position_match),
        ("facing_match", m.facing_match),
        ("isomorphic_score", m.isomorphic_score),
    ])
}

#[pyfunction]
fn task_configs() -> Vec<&'static str> {
    TaskConfig::ALL.iter().map(|c| c.name()).collect()
}

#[pyfunction]
fn build_record(item: &PySceneItem, config_name: &str) -> PyResult<PyTrainingRecord> {
    cogforge::build_record(&item.inner, config(config_name)?, &Templates::builtin())
        .map(|inner| PyTrainingRecord { inner })
        .map_err(compose_err)
}

/// Writes one JSONL record per item; fails without writing on any bad item.
#[pyfunction]
fn emit_dataset(items: Vec<PyRef<'_, PySceneItem>>, config_name: &str, out_path: &str) -> PyResult<usize> {
    let items: Vec<_> = items.iter().map(|i| i.inner.clone()).collect();
    cogforge::emit_dataset(&items, config(config_name)?, out_path, &Templates::builtin())
        .map_err(compose_err)
}

/// Manifest text; also written to `out_path` when given.
#[pyfunction]
#[pyo3(signature = (config_name, dataset_path, out_path = None))]
fn sft_manifest(config_name: &str, dataset_path: &str, out_path: Option<&str>) -> PyResult<String> {
    let config = config(config_name)?;
    match out_path {
        Some(path) => emit_sft_manifest(config, dataset_path, path).map_err(compose_err),
        None => Ok(SftManifest::new(config, dataset_path).to_text()),
    }
}

#[pymodule]
#[pyo3(name = "cogforge")]
pub fn cogforge_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySceneItem>()?;
    m.add_class::<PyCognitiveMap>()?;
    m.add_class::<PyParsedResponse>()?;
    m.add_class::<PyTrainingRecord>()?;
    m.add_class::<PyEvalReport>()?;
    m.add_function(wrap_pyfunction!(parse_setting, m)?)?;
    m.add_function(wrap_pyfunction!(load_items, m)?)?;
    m.add_function(wrap_pyfunction!(synth_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(generate_cogmap, m)?)?;
    m.add_function(wrap_pyfunction!(generate_reasoning, m)?)?;
    m.add_function(wrap_pyfunction!(answer_question, m)?)?;
    m.add_function(wrap_pyfunction!(answer_item, m)?)?;
    m.add_function(wrap_pyfunction!(parse_response, m)?)?;
    m.add_function(wrap_pyfunction!(parse_answer, m)?)?;
    m.add_function(wrap_pyfunction!(grade, m)?)?;
    m.add_function(wrap_pyfunction!(qa_accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(cogmap_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(task_configs, m)?)?;
    m.add_function(wrap_pyfunction!(build_record, m)?)?;
    m.add_function(wrap_pyfunction!(emit_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(sft_manifest, m)?)?;
    Ok(())
}
