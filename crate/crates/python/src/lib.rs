//! Python bindings. Structured values cross the boundary as plain dicts and
//! lists (via the `json` module), labels as their variant names.

use ::dfactscore as dfs;
use dfs::analysis::{self, PairedSeries};
use dfs::judge::{self, JudgeScript, ScriptedJudge};
use dfs::knowledge::{self, PassageStore};
use dfs::pipeline::{self, AssignMode, EvalMode, EvalOptions, ParagraphInput};
use dfs::retrieval::{self, Retriever, RetrieverConfig, DEFAULT_K};
use dfs::{categorize, FactGroup, FactLabel, Fraction, PageId};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let json = obj.py().import("json")?;
    let text: String = json.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(value_err)
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(value_err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn labels(names: Vec<String>) -> PyResult<Vec<FactLabel>> {
    names
        .into_iter()
        .map(|n| serde_json::from_value(serde_json::Value::String(n.clone())).map_err(|_| value_err(format!("unknown label {n:?}"))))
        .collect()
}

fn pair(f: Fraction) -> (u64, u64) {
    (*f.numer(), *f.denom())
}

/// Exact FActScore as `(supported, relevant)`.
#[pyfunction]
fn fact_score(labels_: Vec<String>) -> PyResult<(u64, u64)> {
    dfs::fact_score(&labels(labels_)?).map(pair).map_err(value_err)
}

/// Exact D-FActScore as `(supported, relevant)`. `groups` are dicts with
/// `member_fact_ids` and `linked_entity`; `labels` maps fact id to label.
#[pyfunction]
fn d_fact_score(groups: &Bound<'_, PyAny>, labels: &Bound<'_, PyAny>) -> PyResult<(u64, u64)> {
    let groups: Vec<FactGroup> = from_py(groups)?;
    let labels = from_py(labels)?;
    dfs::d_fact_score(&groups, &labels).map(pair).map_err(value_err)
}

#[pyfunction(name = "categorize")]
fn categorize_py(py: Python<'_>, num_bios: usize, num_entities: usize) -> PyResult<Bound<'_, PyAny>> {
    to_py(py, &categorize(num_bios, num_entities))
}

#[pyfunction]
fn make_query(name: &str) -> String {
    retrieval::make_query(name)
}

#[pyfunction]
fn split_passages<'py>(py: Python<'py>, page_id: &str, title: &str, text: &str) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &knowledge::split_passages(&PageId::from(page_id.to_string()), title, text))
}

#[pyfunction]
fn parse_verdict<'py>(py: Python<'py>, response: &str) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &judge::parse_verdict(response))
}

/// Verification prompt for `fact` over passage dicts as returned by
/// `split_passages` or `Store.retrieve`.
#[pyfunction]
fn render_verify_prompt(fact: &str, evidence: &Bound<'_, PyAny>) -> PyResult<String> {
    let passages: Vec<knowledge::Passage> = from_py(evidence)?;
    let refs: Vec<&knowledge::Passage> = passages.iter().collect();
    judge::render_verify_prompt(fact, &refs).map_err(value_err)
}

#[pyfunction]
fn render_group_prompt(paragraph: &str, facts: Vec<String>) -> String {
    judge::render_group_prompt(paragraph, &facts)
}

fn assign_mode(mode: &str) -> PyResult<AssignMode> {
    from_str_enum(mode)
}

fn from_str_enum<T: DeserializeOwned>(s: &str) -> PyResult<T> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| value_err(format!("unknown mode {s:?}")))
}

/// Group-to-candidate assignment over a support-count matrix.
#[pyfunction]
#[pyo3(signature = (matrix, mode = "independent"))]
fn assign_entities(matrix: Vec<Vec<u64>>, mode: &str) -> PyResult<Vec<Option<usize>>> {
    Ok(pipeline::assign_entities(&matrix, assign_mode(mode)?))
}

#[pyfunction]
fn pearson_r(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    let series = PairedSeries::unlabeled(x, y).map_err(value_err)?;
    analysis::pearson_r(&series).map_err(value_err)
}

#[pyfunction]
fn agreement_rate(a: Vec<String>, b: Vec<String>) -> PyResult<(u64, u64)> {
    analysis::agreement_rate(&labels(a)?, &labels(b)?).map(pair).map_err(value_err)
}

/// Passage store with a lexical retriever built over it.
#[pyclass(frozen)]
struct Store {
    store: PassageStore,
    retriever: Retriever,
}

impl Store {
    fn build(store: PassageStore, k: usize) -> PyResult<Self> {
        let retriever = Retriever::new(RetrieverConfig::lexical(k), &store).map_err(value_err)?;
        Ok(Store { store, retriever })
    }
}

#[pymethods]
impl Store {
    /// Build from JSONL text with one `{"title", "text"}` record per line.
    #[staticmethod]
    #[pyo3(signature = (jsonl, k = DEFAULT_K))]
    fn from_jsonl(jsonl: &str, k: usize) -> PyResult<Self> {
        Self::build(PassageStore::ingest_dump(jsonl.as_bytes()).map_err(value_err)?, k)
    }

    #[staticmethod]
    #[pyo3(signature = (path, k = DEFAULT_K))]
    fn from_dump(path: &str, k: usize) -> PyResult<Self> {
        let store = PassageStore::ingest_dump_file(path.as_ref()).map_err(|e| PyIOError::new_err(e.to_string()))?;
        Self::build(store, k)
    }

    fn titles(&self) -> Vec<String> {
        self.store.pages().iter().map(|p| p.entity.title.clone()).collect()
    }

    fn __len__(&self) -> usize {
        self.store.pages().len()
    }

    /// Top-k passages for the biography query of `name`.
    fn retrieve<'py>(&self, py: Python<'py>, name: &str) -> PyResult<Bound<'py, PyAny>> {
        let hits = self.retriever.retrieve(&self.store, &retrieval::make_query(name)).map_err(value_err)?;
        to_py(py, &hits)
    }

    /// Evaluate paragraph dicts against a scripted judge (support, relevance,
    /// grouping, decomposition and citation tables). Returns report dicts.
    #[pyo3(signature = (paragraphs, script, mode = "both", assign = "independent", workers = 1))]
    fn evaluate<'py>(
        &self,
        py: Python<'py>,
        paragraphs: &Bound<'py, PyAny>,
        script: &Bound<'py, PyAny>,
        mode: &str,
        assign: &str,
        workers: usize,
    ) -> PyResult<Bound<'py, PyAny>> {
        let inputs: Vec<ParagraphInput> = from_py(paragraphs)?;
        let judge = ScriptedJudge::from_script(from_py::<JudgeScript>(script)?);
        let opts = EvalOptions { mode: from_str_enum::<EvalMode>(mode)?, assign: assign_mode(assign)?, ..EvalOptions::default() };
        let evals = py
            .detach(|| pipeline::evaluate_corpus(&inputs, &self.store, &self.retriever, &judge, &opts, workers))
            .map_err(value_err)?;
        let reports: Vec<_> = evals.into_iter().map(|e| e.report).collect();
        to_py(py, &reports)
    }
}

#[pymodule]
fn dfactscore(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Store>()?;
    m.add_function(wrap_pyfunction!(fact_score, m)?)?;
    m.add_function(wrap_pyfunction!(d_fact_score, m)?)?;
    m.add_function(wrap_pyfunction!(categorize_py, m)?)?;
    m.add_function(wrap_pyfunction!(make_query, m)?)?;
    m.add_function(wrap_pyfunction!(split_passages, m)?)?;
    m.add_function(wrap_pyfunction!(parse_verdict, m)?)?;
    m.add_function(wrap_pyfunction!(render_verify_prompt, m)?)?;
    m.add_function(wrap_pyfunction!(render_group_prompt, m)?)?;
    m.add_function(wrap_pyfunction!(assign_entities, m)?)?;
    m.add_function(wrap_pyfunction!(pearson_r, m)?)?;
    m.add_function(wrap_pyfunction!(agreement_rate, m)?)?;
    Ok(())
}
