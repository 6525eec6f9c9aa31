//! Python bindings for the newsrisk pipeline.

use std::collections::BTreeMap;
use std::path::PathBuf;

use chrono::{DateTime, Utc};
use pyo3::exceptions::{PyFileNotFoundError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use newsrisk::backtest;
use newsrisk::centrality;
use newsrisk::conet::{smooth, NetworkKind, NodeSet, QuarterNetwork};
use newsrisk::corpus::{self, AnalysisWindow};
use newsrisk::fixture::{generate, write_fixture, FixtureSpec};
use newsrisk::pipeline::{self, fixture_config, RunConfig};
use newsrisk::riskrank::{build_players, riskrank_node, RiskCalibration};
use newsrisk::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::MissingArtifact { .. } => PyFileNotFoundError::new_err(e.to_string()),
        Error::Validation(_) | Error::Parse { .. } | Error::UnknownCompany(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Calendar quarter such as `2013Q2`.
#[pyclass(name = "Quarter", frozen, eq, ord, hash, skip_from_py_object)]
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct PyQuarter(corpus::Quarter);

#[pymethods]
impl PyQuarter {
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        text.parse().map(PyQuarter).map_err(to_py)
    }

    #[getter]
    fn year(&self) -> i32 {
        self.0.year()
    }

    #[getter]
    fn index(&self) -> u8 {
        self.0.index()
    }

    fn first_day(&self) -> String {
        self.0.first_day().to_string()
    }

    fn last_day(&self) -> String {
        self.0.last_day().to_string()
    }

    fn next(&self) -> Self {
        PyQuarter(self.0.next())
    }

    fn __str__(&self) -> String {
        self.0.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Quarter('{}')", self.0)
    }
}

/// Quarter of an RFC 3339 timestamp, as `YYYYQn`.
#[pyfunction]
fn quarter_of(timestamp: &str) -> PyResult<String> {
    let ts = chrono_parse(timestamp)?;
    Ok(corpus::quarter_of(ts).to_string())
}

fn chrono_parse(timestamp: &str) -> PyResult<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(timestamp)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| PyValueError::new_err(format!("bad timestamp `{timestamp}`: {e}")))
}

fn network(n: usize, edges: &[(usize, usize, u32)]) -> PyResult<QuarterNetwork> {
    let width = n.to_string().len();
    let ids: Vec<String> = (0..n).map(|i| format!("{i:0width$}")).collect();
    let q = corpus::Quarter::new(2000, 1).map_err(to_py)?;
    let mut net = QuarterNetwork::empty(q, NetworkKind::Mixed, NodeSet::new(ids));
    for &(i, j, w) in edges {
        if i >= n || j >= n || i == j {
            return Err(PyValueError::new_err(format!("bad edge ({i}, {j})")));
        }
        net.set_edge(i, j, w);
    }
    Ok(net)
}

/// Information centrality of a network with `n` nodes and integer edge
/// weights, after adding `alpha` to every pair.
#[pyfunction]
#[pyo3(signature = (n, edges, alpha = 0.1))]
fn information_centrality(
    n: usize,
    edges: Vec<(usize, usize, u32)>,
    alpha: f64,
) -> PyResult<Vec<f64>> {
    let net = network(n, &edges)?;
    let smoothed = smooth(&net, alpha).map_err(to_py)?;
    centrality::information_centrality(&smoothed).map_err(to_py)
}

/// Min-max rescaling to `[0, 1]`.
#[pyfunction]
fn minmax_rescale(values: Vec<f64>) -> Vec<f64> {
    centrality::minmax_rescale(&values).values
}

/// RiskRank of node `focal` given per-node exposures. Returns a dict with
/// `own`, `direct`, `indirect` and `total`.
#[pyfunction]
#[pyo3(signature = (n, edges, focal, exposures, lam = 0.5, mu = 0.5, theta = 0.5))]
#[allow(clippy::too_many_arguments)]
fn riskrank<'py>(
    py: Python<'py>,
    n: usize,
    edges: Vec<(usize, usize, u32)>,
    focal: usize,
    exposures: Vec<f64>,
    lam: f64,
    mu: f64,
    theta: f64,
) -> PyResult<Bound<'py, PyDict>> {
    if exposures.len() != n || focal >= n {
        return Err(PyValueError::new_err(
            "need one exposure per node and focal < n",
        ));
    }
    let net = network(n, &edges)?;
    let cal = RiskCalibration {
        lambda: lam,
        mu,
        theta,
    };
    cal.validate().map_err(to_py)?;
    let id = net.nodes().id(focal).to_owned();
    let players = build_players(&net, &id, &cal).map_err(to_py)?;
    let x: Vec<f64> = players
        .ids
        .iter()
        .map(|p| exposures[net.nodes().index_of(p).expect("known node")])
        .collect();
    let c = riskrank_node(&players, &x).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("own", c.own)?;
    out.set_item("direct", c.direct)?;
    out.set_item("indirect", c.indirect)?;
    out.set_item("total", c.total)?;
    Ok(out)
}

#[pyfunction]
fn std_outperformance(abs_diff: f64, std: f64) -> Option<f64> {
    backtest::std_outperformance(abs_diff, std)
}

#[pyfunction]
fn proportion_stderr(p1: f64, n1: usize, p2: f64, n2: usize) -> PyResult<f64> {
    if n1 == 0 || n2 == 0 {
        return Err(PyValueError::new_err("sample sizes must be positive"));
    }
    Ok(backtest::proportion_stderr(p1, n1, p2, n2))
}

/// Writes a synthetic fixture into `directory`; returns the file names.
#[pyfunction]
#[pyo3(signature = (directory, seed = 7, null = false))]
fn write_synthetic_fixture(directory: PathBuf, seed: u64, null: bool) -> PyResult<Vec<String>> {
    let mut spec = FixtureSpec {
        seed,
        ..FixtureSpec::default()
    };
    if null {
        spec = spec.null();
    }
    let fixture = generate(&spec).map_err(to_py)?;
    write_fixture(&fixture, &directory).map_err(to_py)?;
    Ok(newsrisk::fixture::FIXTURE_FILES
        .iter()
        .map(|s| s.to_string())
        .collect())
}

/// Runs the whole pipeline in memory on a seeded fixture and returns the
/// headline statistics.
#[pyfunction]
#[pyo3(signature = (seed = 7, null = false))]
fn run_fixture<'py>(py: Python<'py>, seed: u64, null: bool) -> PyResult<Bound<'py, PyDict>> {
    let mut spec = FixtureSpec {
        seed,
        ..FixtureSpec::default()
    };
    if null {
        spec = spec.null();
    }
    let fixture = generate(&spec).map_err(to_py)?;
    let run = py
        .detach(|| pipeline::run_in_memory(&fixture, &fixture_config(&spec)))
        .map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("articles", fixture.articles.len())?;
    out.set_item("datapoints", run.risk.datapoints.len())?;
    out.set_item("valid_datapoints", run.backtest.valid_datapoints)?;
    out.set_item("disqualified", run.backtest.disqualified)?;
    let mut rows: BTreeMap<String, Option<f64>> = BTreeMap::new();
    if let Some(t) = run.backtest.table2_at(1.0) {
        for r in &t.rows {
            rows.insert(format!("{}-{}", r.start, r.end), r.std_outperformance);
        }
    }
    out.set_item("std_outperformance_t1", rows)?;
    Ok(out)
}

/// Runs every stage from a TOML config, writing artifacts to its output
/// directory.
#[pyfunction]
#[pyo3(signature = (config_toml = "", quarters = None))]
fn run_pipeline(py: Python<'_>, config_toml: &str, quarters: Option<&str>) -> PyResult<()> {
    let mut cfg = RunConfig::from_toml(config_toml).map_err(to_py)?;
    if let Some(q) = quarters {
        cfg.window = q.parse::<AnalysisWindow>().map_err(to_py)?;
    }
    py.detach(|| pipeline::cmd_run_all(&cfg)).map_err(to_py)
}

#[pymodule]
fn newsrisk_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyQuarter>()?;
    m.add_function(wrap_pyfunction!(quarter_of, m)?)?;
    m.add_function(wrap_pyfunction!(information_centrality, m)?)?;
    m.add_function(wrap_pyfunction!(minmax_rescale, m)?)?;
    m.add_function(wrap_pyfunction!(riskrank, m)?)?;
    m.add_function(wrap_pyfunction!(std_outperformance, m)?)?;
    m.add_function(wrap_pyfunction!(proportion_stderr, m)?)?;
    m.add_function(wrap_pyfunction!(write_synthetic_fixture, m)?)?;
    m.add_function(wrap_pyfunction!(run_fixture, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    Ok(())
}
