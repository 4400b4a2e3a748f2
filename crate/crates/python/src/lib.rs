//! Python bindings. Structured results come back as plain dicts and lists.

use std::collections::BTreeSet;
use std::path::PathBuf;

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use pmn_harvest_core::report::{conservation_violations, summarize};
use pmn_harvest_core::resolver::{self, AnalysisResult, DEFAULT_CANDIDATE_COUNT};
use pmn_harvest_core::review::{self, ReviewError};
use pmn_harvest_core::snapshot::{self as snap, IndexedSnapshot, SnapshotError, SnapshotSet};
use pmn_harvest_core::{levenshtein as core_levenshtein, pmn};

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn snapshot_err(e: SnapshotError) -> PyErr {
    match e {
        SnapshotError::FileUnreadable { .. } => PyOSError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn review_err(e: ReviewError) -> PyErr {
    match e {
        ReviewError::LogUnwritable(_) | ReviewError::LogUnreadable(_) => {
            PyOSError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// True when the note contains the "was indexed under" keyword.
#[pyfunction]
fn matches_indexed_pattern(text: &str) -> bool {
    pmn::matches_indexed_pattern(text)
}

#[pyfunction]
fn split_sentences(text: &str) -> Vec<String> {
    pmn::split_sentences(text).into_iter().map(str::to_string).collect()
}

/// Parses a public MeSH note into `{"intro_year", "clauses", "warnings"}`.
#[pyfunction]
fn parse_pmn<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &pmn::parse_pmn(text))
}

#[pyfunction]
fn levenshtein(a: &str, b: &str) -> usize {
    core_levenshtein(a, b)
}

#[pyfunction]
fn normalize_part(part: &str) -> String {
    resolver::normalize_part(part)
}

/// Multiset of normalized parts, as a dict of part to count.
#[pyfunction]
fn tokenize_parts(text: &str) -> std::collections::BTreeMap<String, usize> {
    resolver::tokenize_parts(text)
}

/// Returns the agreement class name for SCR-derived and note-reported hosts.
#[pyfunction]
fn classify_host_agreement(resolved: BTreeSet<String>, pmn: BTreeSet<String>) -> &'static str {
    review::classify_host_agreement(&resolved, &pmn).as_str()
}

/// A validated, indexed yearly snapshot.
#[pyclass(frozen)]
struct Snapshot {
    inner: IndexedSnapshot,
}

#[pymethods]
impl Snapshot {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let snapshot = snap::load_snapshot(&path).map_err(snapshot_err)?;
        Self::wrap(snapshot)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let snapshot = snap::Snapshot::from_json_str(text).map_err(snapshot_err)?;
        Self::wrap(snapshot)
    }

    #[getter]
    fn year(&self) -> i32 {
        self.inner.snapshot.year
    }

    #[getter]
    fn descriptor_count(&self) -> usize {
        self.inner.snapshot.descriptors.len()
    }

    #[getter]
    fn scr_count(&self) -> usize {
        self.inner.snapshot.scrs.len()
    }

    fn lookup_scrs_by_term(&self, term: &str) -> Vec<String> {
        self.inner.index.lookup_scrs_by_term(term).into_iter().collect()
    }

    fn lookup_descriptor_by_name(&self, name: &str) -> Option<String> {
        self.inner.index.lookup_descriptor_by_name(name).map(str::to_string)
    }

    /// Descriptors the SCR is mapped to, or `None` for an unknown SCR.
    fn hosts_of(&self, scr_ui: &str) -> Option<Vec<String>> {
        self.inner.index.hosts_of(scr_ui).map(<[String]>::to_vec)
    }

    fn __repr__(&self) -> String {
        format!(
            "Snapshot(year={}, descriptors={}, scrs={})",
            self.year(),
            self.descriptor_count(),
            self.scr_count()
        )
    }
}

impl Snapshot {
    fn wrap(snapshot: snap::Snapshot) -> PyResult<Self> {
        let inner = IndexedSnapshot::new(snapshot).map_err(snapshot_err)?;
        Ok(Snapshot { inner })
    }
}

fn snapshot_set(snapshots: &[PyRef<'_, Snapshot>]) -> PyResult<SnapshotSet> {
    let mut set = SnapshotSet::new();
    for s in snapshots {
        if set.insert(s.year(), s.inner.clone()).is_some() {
            return Err(PyValueError::new_err(format!(
                "second snapshot for year {}",
                s.year()
            )));
        }
    }
    Ok(set)
}

/// Result of a pipeline run.
#[pyclass(frozen)]
struct Analysis {
    inner: AnalysisResult,
}

#[pymethods]
impl Analysis {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        AnalysisResult::from_json(text)
            .map(|inner| Analysis { inner })
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn range(&self) -> (i32, i32) {
        (self.inner.range[0], self.inner.range[1])
    }

    fn __len__(&self) -> usize {
        self.inner.outcomes.len()
    }

    fn descriptor_uis(&self) -> Vec<String> {
        self.inner
            .outcomes
            .iter()
            .map(|o| o.descriptor_ui.clone())
            .collect()
    }

    fn outcome<'py>(&self, py: Python<'py>, descriptor_ui: &str) -> PyResult<Bound<'py, PyAny>> {
        match self.inner.outcome(descriptor_ui) {
            Some(o) => to_py(py, o),
            None => Err(PyValueError::new_err(format!(
                "no outcome for {descriptor_ui}"
            ))),
        }
    }

    /// Summary rows as `(label, count)` pairs.
    fn summary(&self) -> Vec<(String, usize)> {
        summarize(&self.inner).rows
    }

    fn conservation_violations(&self) -> Vec<String> {
        conservation_violations(&self.inner)
    }

    fn review_queue<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &review::build_review_queue(&self.inner))
    }

    /// Applies a decision log, returning a new analysis.
    fn apply_decisions(&self, log_path: PathBuf) -> PyResult<Analysis> {
        review::apply_decisions(&self.inner, &log_path)
            .map(|inner| Analysis { inner })
            .map_err(review_err)
    }

    fn cross_validate<'py>(
        &self,
        py: Python<'py>,
        snapshots: Vec<PyRef<'py, Snapshot>>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let set = snapshot_set(&snapshots)?;
        let agreements = review::cross_validate(&self.inner, &set).map_err(review_err)?;
        to_py(py, &agreements)
    }
}

/// Runs the resolution cascade over descriptors introduced in `[start, end]`.
#[pyfunction]
#[pyo3(signature = (snapshots, start, end, k = DEFAULT_CANDIDATE_COUNT))]
fn run_pipeline(
    py: Python<'_>,
    snapshots: Vec<PyRef<'_, Snapshot>>,
    start: i32,
    end: i32,
    k: usize,
) -> PyResult<Analysis> {
    let set = snapshot_set(&snapshots)?;
    py.detach(|| resolver::run_pipeline(&set, [start, end], k))
        .map(|inner| Analysis { inner })
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pymodule]
fn pmn_harvest(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(matches_indexed_pattern, m)?)?;
    m.add_function(wrap_pyfunction!(split_sentences, m)?)?;
    m.add_function(wrap_pyfunction!(parse_pmn, m)?)?;
    m.add_function(wrap_pyfunction!(levenshtein, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_part, m)?)?;
    m.add_function(wrap_pyfunction!(tokenize_parts, m)?)?;
    m.add_function(wrap_pyfunction!(classify_host_agreement, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    m.add_class::<Snapshot>()?;
    m.add_class::<Analysis>()?;
    Ok(())
}
