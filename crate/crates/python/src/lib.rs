//! Python bindings: protocols, exact and sampled runs, per-agent ledgers,
//! mode comparison and the reasoning audit.

use std::collections::BTreeMap;

use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use qledger::audit::{builtin_table1_chain, run_audit, run_rebased_audit, AuditReport, InferenceChain};
use qledger::ledger::{divergence, LedgerSet};
use qledger::protocol::{builtin, parse, validate, CompiledProtocol, Protocol, StepBody, BUILTIN_NAMES};
use qledger::runner::{compare_modes, run_exact as exact, run_sampled, Engine, Semantics};
use qledger::{TimeStamp, EQ_TOL};

create_exception!(pyqledger, QledgerError, PyException, "Invalid protocol, chain, record or argument.");

fn fail(e: impl ToString) -> PyErr {
    QledgerError::new_err(e.to_string())
}

fn semantics(mode: &str) -> PyResult<Semantics> {
    match mode {
        "collapse" | "exact-collapse" => Ok(Semantics::Collapse),
        "external" | "exact-external" => Ok(Semantics::External),
        _ => Err(fail(format!("unknown mode `{mode}` (collapse, external)"))),
    }
}

fn time(s: &str) -> PyResult<TimeStamp> {
    s.parse().map_err(fail)
}

fn compile(p: &Protocol) -> PyResult<CompiledProtocol> {
    p.compile()
        .map_err(|d| fail(d.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n")))
}

/// A protocol document.
#[pyclass(name = "Protocol", module = "pyqledger", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyProtocol {
    inner: Protocol,
}

#[pymethods]
impl PyProtocol {
    /// One of `builtin_names()`.
    #[staticmethod]
    fn builtin(name: &str) -> PyResult<Self> {
        builtin(name).map(|inner| Self { inner }).ok_or_else(|| fail(format!("unknown builtin `{name}`")))
    }

    #[staticmethod]
    fn builtin_names() -> Vec<&'static str> {
        BUILTIN_NAMES.to_vec()
    }

    /// Parse and validate a JSON protocol document.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        parse(text.as_bytes()).map(|inner| Self { inner }).map_err(fail)
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    /// Copy in which every measurement is announced to every other agent.
    #[pyo3(signature = (delay = 1))]
    fn synchronized(&self, delay: u32) -> Self {
        Self { inner: self.inner.synchronized(delay) }
    }

    /// Diagnostics; empty when the protocol is valid.
    fn validate(&self) -> Vec<String> {
        validate(&self.inner).iter().map(ToString::to_string).collect()
    }

    #[getter]
    fn agents(&self) -> Vec<String> {
        self.inner.agents.clone()
    }

    #[getter]
    fn subsystems(&self) -> Vec<(String, Vec<String>)> {
        self.inner.subsystems.iter().map(|s| (s.name.clone(), s.basis.clone())).collect()
    }

    #[getter]
    fn measurements(&self) -> Vec<String> {
        self.inner
            .steps
            .iter()
            .filter(|s| matches!(s.body, StepBody::Measure(_)))
            .map(|s| s.name.clone())
            .collect()
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!(
            "Protocol(subsystems={}, agents={:?}, steps={})",
            self.inner.subsystems.len(),
            self.inner.agents,
            self.inner.steps.len()
        )
    }
}

/// Exact outcome tree as `{"measurements": [...], "nodes": [...]}`; nodes
/// are in depth-first order, root first.
#[pyfunction]
#[pyo3(signature = (protocol, mode = "collapse", external_agents = None))]
fn run_exact<'py>(
    py: Python<'py>,
    protocol: &PyProtocol,
    mode: &str,
    external_agents: Option<Vec<String>>,
) -> PyResult<Bound<'py, PyDict>> {
    let compiled = compile(&protocol.inner)?;
    let tree = exact(&compiled, semantics(mode)?, external_agents.as_deref()).map_err(fail)?;
    let nodes = tree
        .nodes
        .iter()
        .map(|n| {
            let d = PyDict::new(py);
            d.set_item("path", n.path.clone())?;
            d.set_item("p_cond", n.p_cond)?;
            d.set_item("p_cum", n.p_cum)?;
            d.set_item("leaf", n.leaf)?;
            Ok(d)
        })
        .collect::<PyResult<Vec<_>>>()?;
    let out = PyDict::new(py);
    out.set_item("measurements", tree.measurements.clone())?;
    out.set_item("nodes", nodes)?;
    Ok(out)
}

/// Total probability of the leaves matching `{measurement: label}`.
#[pyfunction]
#[pyo3(signature = (protocol, constraints, mode = "collapse", external_agents = None))]
fn marginal(
    protocol: &PyProtocol,
    constraints: BTreeMap<String, String>,
    mode: &str,
    external_agents: Option<Vec<String>>,
) -> PyResult<f64> {
    let compiled = compile(&protocol.inner)?;
    let tree = exact(&compiled, semantics(mode)?, external_agents.as_deref()).map_err(fail)?;
    let pairs: Vec<(&str, &str)> = constraints.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect();
    Ok(tree.marginal(&pairs))
}

/// Seeded frequencies: a list of `{"path", "count", "frequency"}`.
#[pyfunction]
#[pyo3(signature = (protocol, trials, seed = 0, mode = "collapse", external_agents = None))]
fn sample<'py>(
    py: Python<'py>,
    protocol: &PyProtocol,
    trials: u64,
    seed: u64,
    mode: &str,
    external_agents: Option<Vec<String>>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let compiled = compile(&protocol.inner)?;
    let table =
        run_sampled(&compiled, semantics(mode)?, external_agents.as_deref(), trials, seed).map_err(fail)?;
    table
        .rows
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("path", r.path.clone())?;
            d.set_item("count", r.count)?;
            d.set_item("frequency", r.frequency)?;
            Ok(d)
        })
        .collect()
}

/// One executed outcome path and every agent's ledger along it.
#[pyclass(name = "Trace", module = "pyqledger", frozen)]
struct PyTrace {
    #[pyo3(get)]
    probability: f64,
    records: Vec<(String, String, f64, String)>,
    ledgers: LedgerSet,
}

#[pymethods]
impl PyTrace {
    /// `(measurement, label, conditional probability, time)` in order.
    #[getter]
    fn records(&self) -> Vec<(String, String, f64, String)> {
        self.records.clone()
    }

    #[getter]
    fn agents(&self) -> Vec<String> {
        self.ledgers.iter().map(|l| l.agent().to_string()).collect()
    }

    /// History of one agent: dicts with `time`, `kind`, `measurement`,
    /// `label`, `from`, `name` (when applicable) and `amplitudes`.
    fn ledger<'py>(&self, py: Python<'py>, agent: &str) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let ledger = self.ledgers.get(agent).map_err(fail)?;
        ledger
            .history()
            .iter()
            .map(|e| {
                let d = PyDict::new(py);
                d.set_item("time", e.time.to_string())?;
                d.set_item("kind", e.event.kind())?;
                if let Some(r) = e.event.record() {
                    d.set_item("measurement", r.measurement.clone())?;
                    d.set_item("label", r.label.clone())?;
                    d.set_item("probability", r.probability)?;
                }
                match &e.event {
                    qledger::ledger::KnowledgeEvent::ReceivedOutcome { from, .. } => d.set_item("from", from.clone())?,
                    qledger::ledger::KnowledgeEvent::ModeledUnitary { name } => d.set_item("name", name.clone())?,
                    _ => {}
                }
                let amps: Vec<(Vec<String>, Complex64)> = e
                    .state
                    .terms(EQ_TOL)
                    .into_iter()
                    .map(|(labels, a)| (labels.into_iter().map(String::from).collect(), a))
                    .collect();
                d.set_item("amplitudes", amps)?;
                Ok(d)
            })
            .collect()
    }

    /// Full amplitude vector an agent holds at `time` (row-major order).
    fn state(&self, agent: &str, time: &str) -> PyResult<Vec<Complex64>> {
        let t = self::time(time)?;
        let ledger = self.ledgers.get(agent).map_err(fail)?;
        let entry = ledger.entry_at(t).ok_or_else(|| fail(format!("{agent} holds no state at {t}")))?;
        Ok(entry.state.amps().iter().copied().collect())
    }

    /// Ray infidelity between two agents' states at `time`.
    fn divergence(&self, a: &str, b: &str, time: &str) -> PyResult<f64> {
        let t = self::time(time)?;
        divergence(self.ledgers.get(a).map_err(fail)?, self.ledgers.get(b).map_err(fail)?, t).map_err(fail)
    }

    fn consensus(&self, time: &str) -> PyResult<bool> {
        self.ledgers.consensus(self::time(time)?).map_err(fail)
    }
}

/// Follow one recorded outcome path, e.g. `{"r": "tail", "z": "up"}`.
#[pyfunction]
#[pyo3(signature = (protocol, record, mode = "collapse", external_agents = None))]
fn run_path(
    protocol: &PyProtocol,
    record: BTreeMap<String, String>,
    mode: &str,
    external_agents: Option<Vec<String>>,
) -> PyResult<PyTrace> {
    let compiled = compile(&protocol.inner)?;
    let engine = Engine::new(&compiled, semantics(mode)?, external_agents.as_deref()).map_err(fail)?;
    let trace = engine.run_path(&record).map_err(fail)?;
    Ok(PyTrace {
        probability: trace.probability,
        records: trace
            .records
            .iter()
            .map(|r| (r.measurement.clone(), r.label.clone(), r.probability, r.time.to_string()))
            .collect(),
        ledgers: trace.ledgers,
    })
}

/// Rows comparing external, per-step collapse and synchronised probabilities.
#[pyfunction]
#[pyo3(signature = (protocol, external_agents = None))]
fn compare<'py>(
    py: Python<'py>,
    protocol: &PyProtocol,
    external_agents: Option<Vec<String>>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let table = compare_modes(&protocol.inner, external_agents.as_deref()).map_err(fail)?;
    table
        .rows
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("labels", r.labels.clone())?;
            d.set_item("external", r.external)?;
            d.set_item("collapse_total", r.collapse_total)?;
            d.set_item("synced_path", r.synced_path)?;
            d.set_item("synced_paths", r.synced_paths.clone())?;
            d.set_item("diff_collapse", r.diff_collapse)?;
            d.set_item("diff_synced", r.diff_synced)?;
            Ok(d)
        })
        .collect()
}

/// The built-in two-lab reasoning chain as JSON.
#[pyfunction]
fn table1_chain() -> String {
    builtin_table1_chain().to_json()
}

fn audit_rows<'py>(py: Python<'py>, report: &AuditReport) -> PyResult<Vec<Bound<'py, PyDict>>> {
    report
        .rows
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("statement_id", r.statement_id.clone())?;
            d.set_item("agent", r.agent.clone())?;
            d.set_item("verdict", r.verdict.to_string())?;
            d.set_item("used_time", r.used_time.to_string())?;
            d.set_item("latest_time", r.latest_time.to_string())?;
            d.set_item("p_used", r.p_used)?;
            d.set_item("p_latest", r.p_latest)?;
            d.set_item("asserted", r.asserted)?;
            d.set_item("inherited_from", r.inherited_from.clone())?;
            d.set_item("missing", r.missing.clone())?;
            Ok(d)
        })
        .collect()
}

/// Audit a chain (JSON text; the built-in chain when omitted). Returns
/// `{"clean": bool, "violations": int, "rows": [...]}`.
#[pyfunction]
#[pyo3(signature = (protocol, chain = None, rebase = false))]
fn audit<'py>(
    py: Python<'py>,
    protocol: &PyProtocol,
    chain: Option<&str>,
    rebase: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let chain = match chain {
        None => builtin_table1_chain(),
        Some(text) => InferenceChain::from_json(text).map_err(fail)?,
    };
    let report = if rebase {
        run_rebased_audit(&protocol.inner, &chain).map_err(fail)?.1
    } else {
        run_audit(&protocol.inner, &chain).map_err(fail)?
    };
    let out = PyDict::new(py);
    out.set_item("clean", report.is_clean())?;
    out.set_item("violations", report.violations().len())?;
    out.set_item("rows", audit_rows(py, &report)?)?;
    Ok(out)
}

#[pymodule]
pub fn pyqledger(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("QledgerError", m.py().get_type::<QledgerError>())?;
    m.add_class::<PyProtocol>()?;
    m.add_class::<PyTrace>()?;
    m.add_function(wrap_pyfunction!(run_exact, m)?)?;
    m.add_function(wrap_pyfunction!(marginal, m)?)?;
    m.add_function(wrap_pyfunction!(sample, m)?)?;
    m.add_function(wrap_pyfunction!(run_path, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(table1_chain, m)?)?;
    m.add_function(wrap_pyfunction!(audit, m)?)?;
    Ok(())
}
