//! Python bindings: scenario generation, pricing, offline solving, and
//! campaign simulation. Structured results cross the boundary as plain
//! dicts/lists built from the crate's serde representations.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyDict, PyList, PyString};

use mcsc_core::io::{self, ParamSetSpec};
use mcsc_core::model::Scenario as CoreScenario;
use mcsc_core::offline::{self, GpScaConfig, UisrfcConfig};
use mcsc_core::online::OnlineAlgo;
use mcsc_core::quotes::build_quote_profile;
use mcsc_core::risk::{RiskEvalConfig, RiskMode};
use mcsc_core::sim::{self, CampaignConfig, CampaignMode, OfflineAlgo};
use mcsc_core::stats::{RngStream, TruncNormal};

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn json_to_py(py: Python<'_>, value: &serde_json::Value) -> PyResult<Py<PyAny>> {
    Ok(match value {
        serde_json::Value::Null => py.None(),
        serde_json::Value::Bool(b) => PyBool::new(py, *b).to_owned().into_any().unbind(),
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.into_pyobject(py)?.into_any().unbind()
            } else {
                n.as_f64()
                    .unwrap_or(f64::NAN)
                    .into_pyobject(py)?
                    .into_any()
                    .unbind()
            }
        }
        serde_json::Value::String(s) => PyString::new(py, s).into_any().unbind(),
        serde_json::Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.into_any().unbind()
        }
        serde_json::Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, v) in map {
                dict.set_item(k, json_to_py(py, v)?)?;
            }
            dict.into_any().unbind()
        }
    })
}

fn to_py_via_json<T: serde::Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let json = serde_json::to_value(value).map_err(err)?;
    json_to_py(py, &json)
}

/// An immutable worker/task roster with all distribution parameters.
#[pyclass(skip_from_py_object)]
#[derive(Clone)]
struct Scenario {
    inner: CoreScenario,
}

#[pymethods]
impl Scenario {
    #[getter]
    fn num_workers(&self) -> usize {
        self.inner.num_workers()
    }

    #[getter]
    fn num_tasks(&self) -> usize {
        self.inner.num_tasks()
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.inner).map_err(err)
    }

    #[staticmethod]
    fn from_json(data: &str) -> PyResult<Self> {
        let inner: CoreScenario = serde_json::from_str(data).map_err(err)?;
        let violations = inner.validate();
        if !violations.is_empty() {
            return Err(PyValueError::new_err(violations.join("; ")));
        }
        Ok(Self { inner })
    }

    fn validate(&self) -> Vec<String> {
        self.inner.validate()
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario(workers={}, tasks={})",
            self.inner.num_workers(),
            self.inner.num_tasks()
        )
    }
}

/// Sample a scenario from one of the stock parameter sets (1 or 2).
#[pyfunction]
#[pyo3(signature = (set_id, tasks, workers, seed=0))]
fn generate_scenario(set_id: u32, tasks: usize, workers: usize, seed: u64) -> PyResult<Scenario> {
    let spec = ParamSetSpec::by_id(set_id).map_err(err)?;
    let inner =
        io::generate_scenario(&spec, tasks, workers, &RngStream::new(seed, 0)).map_err(err)?;
    Ok(Scenario { inner })
}

/// Expected qualities and reserve prices per (worker, task).
#[pyfunction]
fn quote_profile(py: Python<'_>, scenario: &Scenario) -> PyResult<Py<PyAny>> {
    let q = build_quote_profile(&scenario.inner).map_err(err)?;
    to_py_via_json(py, &q)
}

/// Mean of a truncated normal distribution.
#[pyfunction]
fn trunc_normal_mean(mu: f64, sigma: f64, lo: f64, hi: f64) -> PyResult<f64> {
    Ok(TruncNormal::new(mu, sigma, lo, hi).map_err(err)?.mean())
}

/// CDF of a truncated normal distribution.
#[pyfunction]
fn trunc_normal_cdf(mu: f64, sigma: f64, lo: f64, hi: f64, y: f64) -> PyResult<f64> {
    Ok(TruncNormal::new(mu, sigma, lo, hi).map_err(err)?.cdf(y))
}

fn risk_cfg(mode: &str, mc_samples: usize, seed: u64) -> PyResult<RiskEvalConfig> {
    let mode = match mode {
        "exact" => RiskMode::ExactEnumeration,
        "mc" => RiskMode::MonteCarlo,
        other => return Err(PyValueError::new_err(format!("unknown risk mode {other}"))),
    };
    Ok(RiskEvalConfig { mode, mc_samples, mc_seed: seed, ..RiskEvalConfig::default() })
}

/// Solve the long-term recruitment problem. Returns a dict with the
/// objective, feasibility, and the signed contracts.
#[pyfunction]
#[pyo3(signature = (scenario, algo="esa", iters=100_000, eps=1e-4, risk="exact", mc_samples=100_000, seed=0))]
#[allow(clippy::too_many_arguments)]
fn solve_offline(
    py: Python<'_>,
    scenario: &Scenario,
    algo: &str,
    iters: u64,
    eps: f64,
    risk: &str,
    mc_samples: usize,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    let s = &scenario.inner;
    let q = build_quote_profile(s).map_err(err)?;
    let cfg = risk_cfg(risk, mc_samples, seed)?;
    let result = match algo {
        "esa" => offline::esa(s, &q, &cfg),
        "uisrfc" => offline::uisrfc(
            s,
            &q,
            &cfg,
            &UisrfcConfig { iterations: iters, rng: RngStream::new(seed, 1) },
        ),
        "gp-sca" => offline::gp_sca_offline(s, &q, &GpScaConfig { eps, seed, ..Default::default() }),
        other => return Err(PyValueError::new_err(format!("unknown algorithm {other}"))),
    }
    .map_err(err)?;
    let contracts = offline::sign_contracts(&result, &q)
        .map(|b| b.contracts)
        .unwrap_or_default();
    let dict = PyDict::new(py);
    dict.set_item("objective", result.objective)?;
    dict.set_item("feasible", result.feasible)?;
    dict.set_item("iterations", result.iterations)?;
    dict.set_item("contracts", to_py_via_json(py, &contracts)?)?;
    Ok(dict.into_any().unbind())
}

/// Run a trading campaign and return the full report as a dict.
#[pyfunction]
#[pyo3(signature = (scenario, mode="hybrid", tradings=300, offline_algo="esa", online_algo="esa",
                    iters=10_000, eps=1e-4, risk="exact", mc_samples=100_000, seed=0))]
#[allow(clippy::too_many_arguments)]
fn simulate(
    py: Python<'_>,
    scenario: &Scenario,
    mode: &str,
    tradings: usize,
    offline_algo: &str,
    online_algo: &str,
    iters: u64,
    eps: f64,
    risk: &str,
    mc_samples: usize,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    let cfg = CampaignConfig {
        tradings,
        mode: match mode {
            "hybrid" => CampaignMode::Hybrid,
            "online" => CampaignMode::OnlineOnly,
            other => return Err(PyValueError::new_err(format!("unknown mode {other}"))),
        },
        offline_algo: match offline_algo {
            "esa" => OfflineAlgo::Esa,
            "uisrfc" => OfflineAlgo::Uisrfc { iterations: iters },
            "gp-sca" => OfflineAlgo::GpSca { eps, max_outer: 200 },
            other => return Err(PyValueError::new_err(format!("unknown algorithm {other}"))),
        },
        online_algo: match online_algo {
            "esa" => OnlineAlgo::Esa,
            "uisrfc" => OnlineAlgo::Uisrfc { iterations: iters },
            "gp-sca" => OnlineAlgo::GpSca { eps, max_outer: 200 },
            "mcrs" => OnlineAlgo::Mcrs { iterations: iters },
            "sqprefer" => OnlineAlgo::SqPrefer,
            other => return Err(PyValueError::new_err(format!("unknown algorithm {other}"))),
        },
        risk: risk_cfg(risk, mc_samples, seed)?,
        master_seed: seed,
    };
    let report = sim::run_campaign(&scenario.inner, &cfg).map_err(err)?;
    to_py_via_json(py, &report)
}

#[pymodule]
fn mcsc_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Scenario>()?;
    m.add_function(wrap_pyfunction!(generate_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(quote_profile, m)?)?;
    m.add_function(wrap_pyfunction!(trunc_normal_mean, m)?)?;
    m.add_function(wrap_pyfunction!(trunc_normal_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(solve_offline, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}
