//! Python bindings: instances, patterns, the label model and the pipeline.

use std::path::PathBuf;

use patdiag_core::agent::{reward_value, ActionSequence};
use patdiag_core::corpus::{generate_synthetic, EntitySpan, Instance, Label, SyntheticSpec};
use patdiag_core::eval::prf1;
use patdiag_core::pattern::{induce, matches, Pattern};
use patdiag_core::wlf::{self, WlfParams, DEFAULT_DELTA};
use patdiag_pipeline::{AnnotationSource, Pipeline, PipelineConfig, StageOutcome};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

create_exception!(patdiag, PatdiagError, PyException);

fn err(e: impl std::fmt::Display) -> PyErr {
    PatdiagError::new_err(e.to_string())
}

fn label_from(value: i64) -> PyResult<Label> {
    match value {
        1 => Ok(Label::Positive),
        -1 => Ok(Label::Negative),
        other => Err(PyValueError::new_err(format!(
            "label must be 1 or -1, got {other}"
        ))),
    }
}

type Span = (usize, usize, String);

#[pyclass(name = "Instance", module = "patdiag", from_py_object)]
#[derive(Clone)]
pub struct PyInstance {
    inner: Instance,
}

#[pymethods]
impl PyInstance {
    #[new]
    #[pyo3(signature = (id, tokens, head, tail, relation, ds_label, gold_label=None))]
    fn new(
        id: String,
        tokens: Vec<String>,
        head: Span,
        tail: Span,
        relation: String,
        ds_label: i64,
        gold_label: Option<i64>,
    ) -> PyResult<Self> {
        let toks: Vec<&str> = tokens.iter().map(String::as_str).collect();
        let mut inner = Instance::new(
            id,
            &toks,
            EntitySpan::new(head.0, head.1, head.2),
            EntitySpan::new(tail.0, tail.1, tail.2),
            relation,
            label_from(ds_label)?,
        );
        inner.gold_label = gold_label.map(label_from).transpose()?;
        inner
            .validate(0, usize::MAX)
            .map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(PyInstance { inner })
    }

    #[getter]
    fn id(&self) -> &str {
        &self.inner.id
    }

    #[getter]
    fn tokens(&self) -> Vec<String> {
        self.inner.tokens.clone()
    }

    #[getter]
    fn head(&self) -> Span {
        let s = &self.inner.head;
        (s.start, s.end, s.entity_type.clone())
    }

    #[getter]
    fn tail(&self) -> Span {
        let s = &self.inner.tail;
        (s.start, s.end, s.entity_type.clone())
    }

    #[getter]
    fn ds_label(&self) -> i8 {
        self.inner.ds_label.sign()
    }

    #[getter]
    fn gold_label(&self) -> Option<i8> {
        self.inner.gold_label.map(Label::sign)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Instance({:?}, {:?})",
            self.inner.id,
            self.inner.tokens.join(" ")
        )
    }
}

#[pyclass(name = "Pattern", module = "patdiag", eq, hash, frozen, from_py_object)]
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct PyPattern {
    inner: Pattern,
}

#[pymethods]
impl PyPattern {
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        text.parse()
            .map(|inner| PyPattern { inner })
            .map_err(|e: patdiag_core::pattern::PatternError| PyValueError::new_err(e.to_string()))
    }

    fn matches(&self, instance: &PyInstance) -> bool {
        matches(&self.inner, &instance.inner)
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Pattern({:?})", self.inner.to_string())
    }
}

/// Pattern induced from an instance and a 0/1 erase mask.
#[pyfunction]
fn induce_pattern(instance: &PyInstance, actions: Vec<u8>) -> PyResult<PyPattern> {
    if actions.iter().any(|&a| a > 1) {
        return Err(PyValueError::new_err(
            "actions must be 0 (retain) or 1 (erase)",
        ));
    }
    induce(&instance.inner, &ActionSequence::new(actions))
        .map(|inner| PyPattern { inner })
        .map_err(err)
}

#[pyfunction]
#[pyo3(signature = (n_instances=5000, seed=0, fn_rate=0.6, fp_rate=0.1))]
fn synthetic_corpus(
    n_instances: usize,
    seed: u64,
    fn_rate: f64,
    fp_rate: f64,
) -> PyResult<Vec<PyInstance>> {
    let spec = SyntheticSpec {
        n_instances,
        seed,
        fn_rate,
        fp_rate,
        ..SyntheticSpec::default()
    };
    let corpus = generate_synthetic(&spec).map_err(err)?;
    Ok(corpus
        .instances
        .into_iter()
        .map(|inner| PyInstance { inner })
        .collect())
}

fn params(alpha: Vec<f64>, beta: Vec<f64>) -> WlfParams {
    let lf_names = (0..alpha.len()).map(|i| format!("lf{i}")).collect();
    WlfParams {
        alpha,
        beta,
        lf_names,
    }
}

/// `P(y = +1 | row)` under per-function accuracies and coverages.
#[pyfunction]
fn posterior(row: Vec<i8>, alpha: Vec<f64>, beta: Vec<f64>) -> PyResult<f64> {
    wlf::posterior(&row, &params(alpha, beta)).map_err(err)
}

/// Closed-form accuracies and coverages from labelled rows.
#[pyfunction]
#[pyo3(signature = (rows, labels, delta=DEFAULT_DELTA))]
fn estimate(rows: Vec<Vec<i8>>, labels: Vec<i64>, delta: f64) -> PyResult<(Vec<f64>, Vec<f64>)> {
    if rows.len() != labels.len() {
        return Err(PyValueError::new_err("rows and labels differ in length"));
    }
    let m = rows.first().map_or(0, Vec::len);
    let data = rows
        .into_iter()
        .zip(labels)
        .map(|(r, y)| Ok((r, label_from(y)?)))
        .collect::<PyResult<Vec<_>>>()?;
    let names: Vec<String> = (0..m).map(|i| format!("lf{i}")).collect();
    let p = wlf::estimate(&data, &names, delta).map_err(err)?;
    Ok((p.alpha, p.beta))
}

#[pyfunction]
fn reward(log_p_hat: f64, log_p: f64, eta: f64, t: usize, t_hat: usize) -> f64 {
    reward_value(log_p_hat, log_p, eta, t, t_hat)
}

/// Precision, recall and F1 of thresholded probabilities against +1/-1 gold.
#[pyfunction]
#[pyo3(signature = (probs, gold, threshold=0.5))]
fn metrics(probs: Vec<f64>, gold: Vec<i8>, threshold: f64) -> PyResult<(f64, f64, f64)> {
    let m = prf1(&probs, &gold, threshold).map_err(err)?;
    Ok((m.precision, m.recall, m.f1))
}

#[pyclass(name = "Pipeline", module = "patdiag", unsendable)]
pub struct PyPipeline {
    inner: Pipeline,
}

fn outcome(o: StageOutcome) -> &'static str {
    match o {
        StageOutcome::Ran => "ran",
        StageOutcome::UpToDate => "up_to_date",
        StageOutcome::Pending => "pending",
    }
}

fn to_py(py: Python<'_>, value: &impl serde::Serialize) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(err)?;
    let json = py.import("json")?;
    Ok(json.call_method1("loads", (text,))?.unbind())
}

#[pymethods]
impl PyPipeline {
    /// `config` is the path of a TOML config; `overrides` is TOML text
    /// applied on top of it (or of the defaults when no path is given).
    #[new]
    #[pyo3(signature = (config=None, workdir=None, overrides=None))]
    fn new(
        config: Option<PathBuf>,
        workdir: Option<PathBuf>,
        overrides: Option<&str>,
    ) -> PyResult<Self> {
        let mut cfg = match (&config, overrides) {
            (Some(path), None) => PipelineConfig::load(path).map_err(err)?,
            (None, Some(text)) => PipelineConfig::from_toml_str(text).map_err(err)?,
            (None, None) => PipelineConfig::default(),
            (Some(path), Some(text)) => {
                let base = std::fs::read_to_string(path).map_err(err)?;
                PipelineConfig::from_toml_str(&format!("{base}\n{text}")).map_err(err)?
            }
        };
        if let Some(w) = workdir {
            cfg.workdir = w;
        }
        Ok(PyPipeline {
            inner: Pipeline::new(cfg).map_err(err)?,
        })
    }

    #[getter]
    fn workdir(&self) -> PathBuf {
        self.inner.config().workdir.clone()
    }

    fn config_toml(&self) -> String {
        self.inner.config().to_toml_string()
    }

    fn synth(&self) -> PyResult<&'static str> {
        self.inner.synth().map(outcome).map_err(err)
    }

    fn ingest(&self) -> PyResult<&'static str> {
        self.inner.ingest().map(outcome).map_err(err)
    }

    fn train_nre(&self) -> PyResult<&'static str> {
        self.inner.train_nre().map(outcome).map_err(err)
    }

    fn extract(&self) -> PyResult<&'static str> {
        self.inner.extract().map(outcome).map_err(err)
    }

    /// Annotates with gold labels when `oracle` is set, replays `journal`
    /// when given, and otherwise only writes the session.
    #[pyo3(signature = (oracle=false, journal=None))]
    fn refine(&self, oracle: bool, journal: Option<PathBuf>) -> PyResult<&'static str> {
        let source = match (oracle, journal) {
            (true, Some(_)) => {
                return Err(PyValueError::new_err("oracle and journal are exclusive"))
            }
            (true, None) => AnnotationSource::Oracle,
            (false, Some(j)) => AnnotationSource::Journal(j),
            (false, None) => AnnotationSource::None,
        };
        self.inner.refine(&source).map(outcome).map_err(err)
    }

    fn fuse(&self) -> PyResult<&'static str> {
        self.inner.fuse().map(outcome).map_err(err)
    }

    fn retrain(&self) -> PyResult<&'static str> {
        self.inner.retrain().map(outcome).map_err(err)
    }

    fn eval(&self) -> PyResult<&'static str> {
        self.inner.eval().map(outcome).map_err(err)
    }

    fn report(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        self.inner.report().map_err(err)?;
        to_py(py, &self.inner.read_report().map_err(err)?)
    }

    fn report_text(&self) -> PyResult<String> {
        Ok(self.inner.read_report().map_err(err)?.render_text())
    }

    fn diagnose(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.diagnose().map_err(err)?)
    }

    fn run_synthetic_oracle(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.run_synthetic_oracle().map_err(err)?)
    }
}

#[pymodule]
fn patdiag(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("PatdiagError", m.py().get_type::<PatdiagError>())?;
    m.add_class::<PyInstance>()?;
    m.add_class::<PyPattern>()?;
    m.add_class::<PyPipeline>()?;
    m.add_function(wrap_pyfunction!(induce_pattern, m)?)?;
    m.add_function(wrap_pyfunction!(synthetic_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(posterior, m)?)?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(reward, m)?)?;
    m.add_function(wrap_pyfunction!(metrics, m)?)?;
    Ok(())
}
