//! Python bindings for the contextuality analyzer.
//!
//! Exposes the main types and operations in-process: parsing and
//! serializing systems, connections and multimaximal couplings, the
//! cyclic criterion, the exact LP decision, the deterministic assignment
//! search, and the example gallery. Probabilities and expectations cross
//! the boundary as `fractions.Fraction`, so everything stays exact.

use std::collections::BTreeMap;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use cbd_core::coupling;
use cbd_core::cyclic;
use cbd_core::deterministic::{self, ParityOutcome};
use cbd_core::gallery::{self, GalleryOutput, GalleryParams};
use cbd_core::lp::{self, Mode, DEFAULT_MAX_CELLS};
use cbd_core::model::{self, tuple_key};
use cbd_core::rational::{Probability, Rat};
use cbd_core::report::{self, ReportMeta};

/// (property, [(context, p)], delta) rows returned by `connections`.
type ConnectionRow = (String, Vec<(String, Rat)>, Rat);
/// (assignment or None, count or None) returned by `assignment_search`.
type SearchResult = (Option<BTreeMap<String, u8>>, Option<u64>);

fn value_err(err: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(err.to_string())
}

fn parse_mode(mode: &str) -> PyResult<Mode> {
    mode.parse::<Mode>().map_err(value_err)
}

fn modes_from(mode: &str) -> PyResult<Vec<Mode>> {
    if mode == "both" {
        Ok(vec![Mode::Cbd, Mode::Traditional])
    } else {
        Ok(vec![parse_mode(mode)?])
    }
}

/// A system of binary measurements with per-context joint distributions.
#[pyclass(frozen)]
struct System {
    inner: model::System,
}

#[pymethods]
impl System {
    /// Parses a cbd-system/1 JSON document.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(System {
            inner: model::System::from_json_str(text).map_err(value_err)?,
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json_string()
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name().to_string()
    }

    fn cell_count(&self) -> usize {
        self.inner.cell_count()
    }

    fn consistently_connected(&self) -> bool {
        self.inner.is_consistently_connected()
    }

    /// Connections as (property, [(context, p)], delta) triples, with the
    /// entries in ascending-marginal order.
    fn connections(&self) -> Vec<ConnectionRow> {
        self.inner
            .connections()
            .into_iter()
            .map(|c| {
                let delta = c.delta();
                let entries = c
                    .entries
                    .iter()
                    .map(|e| (e.context.as_str().to_string(), e.p.as_rat().clone()))
                    .collect();
                (c.property.as_str().to_string(), entries, delta)
            })
            .collect()
    }

    /// Canonical cyclic arrangement as (rank, properties, contexts), or
    /// None for non-cyclic systems.
    fn detect_cyclic(&self) -> Option<(usize, Vec<String>, Vec<String>)> {
        cyclic::detect_cyclic(&self.inner).map(|a| {
            (
                a.rank(),
                a.properties().iter().map(|q| q.as_str().to_string()).collect(),
                a.contexts().iter().map(|c| c.as_str().to_string()).collect(),
            )
        })
    }

    /// Closed-form criterion as (lhs, rhs, slack, contextual), or None
    /// for non-cyclic systems.
    fn cyclic_verdict(&self) -> Option<(Rat, Rat, Rat, bool)> {
        let arrangement = cyclic::detect_cyclic(&self.inner)?;
        let v = cyclic::cyclic_contextuality(&self.inner, &arrangement)
            .expect("detected arrangement is valid");
        Some((v.lhs, v.rhs, v.slack, v.contextual))
    }

    /// Decides contextuality; returns (contextual, method).
    #[pyo3(signature = (mode = "cbd", max_cells = DEFAULT_MAX_CELLS))]
    fn decide(&self, mode: &str, max_cells: usize) -> PyResult<(bool, String)> {
        let verdict =
            lp::decide(&self.inner, parse_mode(mode)?, max_cells).map_err(value_err)?;
        Ok((verdict.contextual, verdict.method.to_string()))
    }

    /// Full analysis as a cbd-report/1 JSON string. `mode` may be "cbd",
    /// "traditional", or "both".
    #[pyo3(signature = (mode = "cbd", max_cells = DEFAULT_MAX_CELLS))]
    fn analyze_json(&self, mode: &str, max_cells: usize) -> PyResult<String> {
        let analysis =
            report::analyze(&self.inner, &modes_from(mode)?, max_cells).map_err(value_err)?;
        Ok(report::report_json(&analysis, &ReportMeta::default()))
    }

    /// The multimaximal coupling of one connection: the ordered context
    /// list plus the staircase table keyed by tuple strings.
    fn multimaximal_coupling(&self, property: &str) -> PyResult<(Vec<String>, BTreeMap<String, Rat>)> {
        let connection = self
            .inner
            .connections()
            .into_iter()
            .find(|c| c.property.as_str() == property)
            .ok_or_else(|| value_err(format!("property {property:?} is not measured here")))?;
        let coupling = coupling::construct_multimaximal(&connection);
        let contexts = coupling
            .contexts()
            .iter()
            .map(|c| c.as_str().to_string())
            .collect();
        let table = coupling
            .table()
            .iter()
            .map(|(t, p)| (tuple_key(t), p.as_rat().clone()))
            .collect();
        Ok((contexts, table))
    }

    /// Removes one measurement cell, marginalizing the affected context.
    fn delete_cell(&self, property: &str, context: &str) -> PyResult<System> {
        let q = model::PropertyId::new(property).map_err(value_err)?;
        let c = model::ContextId::new(context).map_err(value_err)?;
        Ok(System {
            inner: self.inner.delete_cell(&q, &c).map_err(value_err)?,
        })
    }

    /// Relabels +1 and -1 for one property everywhere it is measured.
    fn flip_property(&self, property: &str) -> PyResult<System> {
        let q = model::PropertyId::new(property).map_err(value_err)?;
        Ok(System {
            inner: self.inner.flip_property_outcomes(&q).map_err(value_err)?,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "System(name={:?}, contexts={}, cells={})",
            self.inner.name(),
            self.inner.contexts().len(),
            self.inner.cell_count()
        )
    }
}

/// A set of properties under per-context logical constraints.
#[pyclass(frozen, name = "ConstraintSystem")]
struct PyConstraintSystem {
    inner: deterministic::ConstraintSystem,
}

#[pymethods]
impl PyConstraintSystem {
    /// Parses a cbd-constraints/1 JSON document.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyConstraintSystem {
            inner: deterministic::ConstraintSystem::from_json_str(text).map_err(value_err)?,
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json_string()
    }

    fn properties(&self) -> Vec<String> {
        self.inner
            .properties()
            .iter()
            .map(|q| q.as_str().to_string())
            .collect()
    }

    /// Searches for a satisfying 0/1 assignment; returns
    /// (assignment or None, count or None).
    #[pyo3(signature = (count = false))]
    fn assignment_search(&self, count: bool) -> PyResult<SearchResult> {
        let outcome = self.inner.assignment_search(count).map_err(value_err)?;
        let assignment = outcome.assignment.map(|a| {
            a.into_iter()
                .map(|(q, v)| (q.as_str().to_string(), u8::from(v)))
                .collect()
        });
        Ok((assignment, outcome.count))
    }

    /// The exactly-one parity argument: "contradiction", "inconclusive",
    /// or "inapplicable: <reason>".
    fn parity_check(&self) -> String {
        match self.inner.parity_check() {
            ParityOutcome::Contradiction(r) => {
                format!("contradiction ({} contexts)", r.num_contexts)
            }
            ParityOutcome::Inconclusive(r) => {
                format!("inconclusive ({} contexts)", r.num_contexts)
            }
            ParityOutcome::Inapplicable { reason } => format!("inapplicable: {reason}"),
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "ConstraintSystem(properties={}, constraints={})",
            self.inner.properties().len(),
            self.inner.constraints().len()
        )
    }
}

/// Parses a cbd-system/1 JSON document.
#[pyfunction]
fn parse_system(text: &str) -> PyResult<System> {
    System::from_json(text)
}

/// Parses a cbd-constraints/1 JSON document.
#[pyfunction]
fn parse_constraints(text: &str) -> PyResult<PyConstraintSystem> {
    PyConstraintSystem::from_json(text)
}

/// Builds a gallery example; returns a System or a ConstraintSystem.
#[pyfunction]
#[pyo3(signature = (key, marginals = None, correlations = None))]
fn build_example(
    py: Python<'_>,
    key: &str,
    marginals: Option<Vec<Rat>>,
    correlations: Option<Vec<Rat>>,
) -> PyResult<Py<PyAny>> {
    let params = GalleryParams {
        marginals,
        correlations,
    };
    match gallery::build(key, &params).map_err(value_err)? {
        GalleryOutput::Probabilistic(inner) => {
            Ok(Py::new(py, System { inner })?.into_any())
        }
        GalleryOutput::Constraints(inner) => {
            Ok(Py::new(py, PyConstraintSystem { inner })?.into_any())
        }
    }
}

/// Gallery keys with kinds and descriptions.
#[pyfunction]
fn example_keys() -> Vec<(String, String, String)> {
    gallery::entries()
        .into_iter()
        .map(|e| (e.key.to_string(), e.kind.to_string(), e.description.to_string()))
        .collect()
}

/// Maximal achievable Pr[S = S'] for two binary variables with the given
/// Pr[= +1] marginals: 1 - |p - q|.
#[pyfunction]
fn max_pair_equality(p: Rat, q: Rat) -> PyResult<Rat> {
    let p = Probability::new(p).map_err(value_err)?;
    let q = Probability::new(q).map_err(value_err)?;
    Ok(coupling::max_pair_equality(&p, &q).into_rat())
}

/// Maximum of sum(s_i * lambda_i) over sign vectors with product -1.
#[pyfunction]
fn odd_sign_max(lambda: Vec<Rat>) -> PyResult<Rat> {
    if lambda.is_empty() {
        return Err(value_err("odd_sign_max needs at least one term"));
    }
    Ok(cyclic::odd_sign_max(&lambda))
}

#[pymodule]
fn cbd_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("DEFAULT_MAX_CELLS", DEFAULT_MAX_CELLS)?;
    m.add_class::<System>()?;
    m.add_class::<PyConstraintSystem>()?;
    m.add_function(wrap_pyfunction!(parse_system, m)?)?;
    m.add_function(wrap_pyfunction!(parse_constraints, m)?)?;
    m.add_function(wrap_pyfunction!(build_example, m)?)?;
    m.add_function(wrap_pyfunction!(example_keys, m)?)?;
    m.add_function(wrap_pyfunction!(max_pair_equality, m)?)?;
    m.add_function(wrap_pyfunction!(odd_sign_max, m)?)?;
    Ok(())
}
