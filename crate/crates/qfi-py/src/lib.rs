//! Python bindings: metrics, constrained systems, QFI construction and
//! evaluation, trajectory integration and the scenario runner.

// The pyo3 macros expand to conversions clippy flags as useless.
#![allow(clippy::useless_conversion)]

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use qfi_core::catalog::{self, TodaParams};
use qfi_core::dynamics as dyn_;
use qfi_core::error::Error;
use qfi_core::qfi;
use qfi_core::sampling::CertConfig;
use qfi_core::scenarios;
use std::collections::HashMap;
use std::sync::Arc;

fn err_to_py(e: Error) -> PyErr {
    match &e {
        Error::Parse(_) | Error::BadConfig(_) | Error::UnknownFamily(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn json_to_py(py: Python<'_>, v: &serde_json::Value) -> PyObject {
    match v {
        serde_json::Value::Null => py.None(),
        serde_json::Value::Bool(b) => b.into_py(py),
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.into_py(py)
            } else {
                n.as_f64().unwrap_or(f64::NAN).into_py(py)
            }
        }
        serde_json::Value::String(s) => s.into_py(py),
        serde_json::Value::Array(a) => {
            let list = PyList::new_bound(py, a.iter().map(|x| json_to_py(py, x)));
            list.into_py(py)
        }
        serde_json::Value::Object(o) => {
            let dict = PyDict::new_bound(py);
            for (k, val) in o {
                dict.set_item(k, json_to_py(py, val)).unwrap();
            }
            dict.into_py(py)
        }
    }
}

/// Kinetic metric on R^2 (or R^n for the Euclidean family).
#[pyclass(name = "Metric")]
#[derive(Clone)]
struct PyMetric {
    inner: qfi_core::geometry::MetricSpec,
}

#[pymethods]
impl PyMetric {
    #[staticmethod]
    fn e2() -> Self {
        PyMetric {
            inner: catalog::euclidean(2),
        }
    }

    #[staticmethod]
    fn constant_curvature(k: f64) -> PyResult<Self> {
        if k == 0.0 {
            return Err(PyValueError::new_err("k must be non-zero"));
        }
        Ok(PyMetric {
            inner: catalog::constant_curvature(k),
        })
    }

    #[staticmethod]
    fn no_kv() -> Self {
        PyMetric {
            inner: catalog::no_kv_metric(),
        }
    }

    #[staticmethod]
    fn toda(k1: f64, k2: f64, b1: f64, b2: f64, b3: f64) -> PyResult<Self> {
        let p = TodaParams { k1, k2, b1, b2, b3 };
        Ok(PyMetric {
            inner: catalog::toda_metric(&p).map_err(err_to_py)?,
        })
    }

    #[staticmethod]
    fn flat_lorentzian() -> Self {
        PyMetric {
            inner: catalog::flat_lorentzian_x(),
        }
    }

    /// Off-diagonal family gamma = f [[0,1],[1,0]] from an expression in
    /// x, y, r and the given parameters.
    #[staticmethod]
    #[pyo3(signature = (f_expr, params = None))]
    fn off_diagonal(f_expr: &str, params: Option<HashMap<String, f64>>) -> PyResult<Self> {
        let f = qfi_core::expr::scalar_field_2d(f_expr, &params.unwrap_or_default())
            .map_err(err_to_py)?;
        Ok(PyMetric {
            inner: catalog::off_diagonal(f, "off-diagonal"),
        })
    }

    #[getter]
    fn id(&self) -> String {
        self.inner.id.clone()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.n
    }

    /// Metric components at a point, as a nested list.
    fn value(&self, q: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        let m = self.inner.value(&q);
        Ok((0..self.inner.n)
            .map(|a| (0..self.inner.n).map(|b| m[(a, b)]).collect())
            .collect())
    }

    /// Christoffel symbols Gamma^a_{bc} at a point, indexed [a][b][c].
    fn christoffel(&self, q: Vec<f64>) -> PyResult<Vec<Vec<Vec<f64>>>> {
        let conn = qfi_core::geometry::christoffel(&self.inner, &q).map_err(err_to_py)?;
        let n = self.inner.n;
        Ok((0..n)
            .map(|a| {
                (0..n)
                    .map(|b| (0..n).map(|c| conn.gamma.get(a, b, c)).collect())
                    .collect()
            })
            .collect())
    }

    /// 2D Ricci scalar at a point.
    fn ricci_scalar(&self, q: Vec<f64>) -> PyResult<f64> {
        qfi_core::geometry::ricci_scalar_2d(&self.inner, &q).map_err(err_to_py)
    }

    /// Residual certificate of a CKV candidate given by component
    /// expressions; returns (max_residual, psi_values_sample).
    #[pyo3(signature = (lx, ly, params = None, n_points = 200))]
    fn ckv_certificate(
        &self,
        lx: &str,
        ly: &str,
        params: Option<HashMap<String, f64>>,
        n_points: usize,
    ) -> PyResult<(f64, Vec<f64>)> {
        let params = params.unwrap_or_default();
        let cx = qfi_core::expr::scalar_field_2d(lx, &params).map_err(err_to_py)?;
        let cy = qfi_core::expr::scalar_field_2d(ly, &params).map_err(err_to_py)?;
        let vector = qfi_core::field::covector_from_components(vec![cx, cy]);
        let bx = catalog::sample_box_for(&self.inner);
        let dom = self.inner.domain().intersect(&vector.domain());
        let pts = qfi_core::sampling::sample_points(&bx, &dom, n_points, 0);
        let mut max_res: f64 = 0.0;
        let mut psis = Vec::new();
        for q in &pts {
            let (psi, res) = qfi_core::symmetry::ckv_residual(&self.inner, vector.as_ref(), q)
                .map_err(err_to_py)?;
            max_res = max_res.max(res.norm());
            psis.push(psi);
        }
        Ok((max_res, psis))
    }
}

/// Conservative system constrained to the energy level H = E0.
#[pyclass(name = "System")]
#[derive(Clone)]
struct PySystem {
    inner: qfi::ConstrainedSystem,
}

#[pymethods]
impl PySystem {
    /// Geodesic system (zero potential).
    #[staticmethod]
    fn geodesic(metric: PyMetric, e0: f64) -> Self {
        PySystem {
            inner: qfi::ConstrainedSystem::geodesic(metric.inner, e0),
        }
    }

    /// System with a potential given as an expression in x, y, r.
    #[staticmethod]
    #[pyo3(signature = (metric, v_expr, e0, params = None))]
    fn with_potential(
        metric: PyMetric,
        v_expr: &str,
        e0: f64,
        params: Option<HashMap<String, f64>>,
    ) -> PyResult<Self> {
        let v = qfi_core::expr::scalar_field_2d(v_expr, &params.unwrap_or_default())
            .map_err(err_to_py)?;
        Ok(PySystem {
            inner: qfi::ConstrainedSystem::new(metric.inner, v, e0),
        })
    }

    #[getter]
    fn energy(&self) -> f64 {
        self.inner.energy
    }

    fn hamiltonian(&self, q: Vec<f64>, qdot: Vec<f64>) -> f64 {
        self.inner.hamiltonian(&q, &qdot)
    }

    fn on_shell(&self, q: Vec<f64>, qdot: Vec<f64>, tol: f64) -> bool {
        self.inner.on_shell(&q, &qdot, tol)
    }

    fn acceleration(&self, q: Vec<f64>, qdot: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.acceleration(&q, &qdot).map_err(err_to_py)
    }

    /// Scale `direction` so the state lands on the energy shell.
    fn initial_state(&self, q0: Vec<f64>, direction: Vec<f64>) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let s = dyn_::initial_state_on_shell(&self.inner, &q0, &direction).map_err(err_to_py)?;
        Ok((s.q, s.qdot))
    }

    /// Integrate and return a dict with the sampled states and drift report.
    #[pyo3(signature = (q0, qdot0, horizon, tol = 1e-10))]
    fn integrate(
        &self,
        py: Python<'_>,
        q0: Vec<f64>,
        qdot0: Vec<f64>,
        horizon: f64,
        tol: f64,
    ) -> PyResult<PyObject> {
        let s0 = dyn_::State {
            t: 0.0,
            q: q0,
            qdot: qdot0,
        };
        let traj = dyn_::integrate(&self.inner, &s0, horizon, tol, &[], &[]).map_err(err_to_py)?;
        let rep = dyn_::monitor_report(&traj);
        let dict = PyDict::new_bound(py);
        dict.set_item("t", traj.states.iter().map(|s| s.t).collect::<Vec<_>>())?;
        dict.set_item(
            "q",
            traj.states.iter().map(|s| s.q.clone()).collect::<Vec<_>>(),
        )?;
        dict.set_item(
            "qdot",
            traj.states
                .iter()
                .map(|s| s.qdot.clone())
                .collect::<Vec<_>>(),
        )?;
        dict.set_item("h_minus_e0", traj.energy_residual.clone())?;
        dict.set_item("max_energy_drift", rep.max_energy_drift)?;
        dict.set_item("steps", traj.integrator_stats.steps)?;
        Ok(dict.into_py(py))
    }
}

/// A built quadratic first integral with its condition certificate.
#[pyclass(name = "Qfi")]
struct PyQfi {
    spec: Arc<qfi::QfiSpec>,
    sys: qfi::ConstrainedSystem,
}

#[pymethods]
impl PyQfi {
    /// The Hamiltonian as a QFI of the J1 family.
    #[staticmethod]
    fn hamiltonian(system: PySystem) -> PyResult<Self> {
        let cfg = CertConfig::with_tol(qfi::QFI_CONDITION_TOL);
        let spec = qfi::hamiltonian_qfi(&system.inner, &cfg).map_err(err_to_py)?;
        Ok(PyQfi {
            spec: Arc::new(spec),
            sys: system.inner,
        })
    }

    /// The autonomous LFI J2 from a built-in CKV of the system's metric
    /// (e2 catalog names: trans-x, trans-y, rotation, hv, sckv-b1, sckv-b2).
    #[staticmethod]
    fn lfi_from_ckv(system: PySystem, ckv_name: &str) -> PyResult<Self> {
        let entries = match system.inner.metric.id.as_str() {
            "e2" => catalog::e2_catalog(),
            "const-curvature" => catalog::constant_curvature_kvs(1.0),
            other => {
                return Err(PyValueError::new_err(format!(
                    "no built-in CKV catalog for metric `{other}`"
                )))
            }
        };
        let entry = entries
            .into_iter()
            .find(|e| e.name == ckv_name)
            .ok_or_else(|| PyValueError::new_err(format!("no CKV named `{ckv_name}`")))?;
        let obj = qfi_core::symmetry::certify_ckv(
            &system.inner.metric,
            &entry,
            &CertConfig::default(),
        )
        .map_err(err_to_py)?;
        let spec = qfi::build_j2(
            &system.inner,
            &obj,
            &CertConfig::with_tol(qfi::QFI_CONDITION_TOL),
        )
        .map_err(err_to_py)?;
        Ok(PyQfi {
            spec: Arc::new(spec),
            sys: system.inner,
        })
    }

    #[getter]
    fn name(&self) -> String {
        self.spec.name.clone()
    }

    #[getter]
    fn max_condition_residual(&self) -> f64 {
        self.spec.max_condition_residual()
    }

    fn evaluate(&self, t: f64, q: Vec<f64>, qdot: Vec<f64>) -> PyResult<f64> {
        self.spec.evaluate(t, &q, &qdot).map_err(err_to_py)
    }

    /// dI/dt along the flow (forward AD) and the multiplier factorization
    /// side, at an arbitrary state.
    fn flow_derivative(&self, t: f64, q: Vec<f64>, qdot: Vec<f64>) -> PyResult<(f64, f64)> {
        let lhs = self
            .spec
            .ddt_along_flow(&self.sys, t, &q, &qdot)
            .map_err(err_to_py)?;
        let rhs = self
            .spec
            .multiplier_rhs(&self.sys, t, &q, &qdot)
            .map_err(err_to_py)?;
        Ok((lhs, rhs))
    }

    /// Max |I(t) - I(0)| along an integrated trajectory.
    #[pyo3(signature = (q0, qdot0, horizon, tol = 1e-10))]
    fn drift(&self, q0: Vec<f64>, qdot0: Vec<f64>, horizon: f64, tol: f64) -> PyResult<f64> {
        let s0 = dyn_::State {
            t: 0.0,
            q: q0,
            qdot: qdot0,
        };
        let mon = dyn_::FiMonitor::from_qfi(&self.spec);
        let traj = dyn_::integrate(&self.sys, &s0, horizon, tol, &[mon], &[]).map_err(err_to_py)?;
        Ok(dyn_::monitor_report(&traj).fis[0].max_drift)
    }
}

/// Run a named scenario with optional parameter overrides; returns the
/// report as a dict: {name, params, checks, artifacts}.
#[pyfunction]
#[pyo3(signature = (name, tol = 1e-10, **overrides))]
fn run_scenario(
    py: Python<'_>,
    name: &str,
    tol: f64,
    overrides: Option<&Bound<'_, PyDict>>,
) -> PyResult<PyObject> {
    let cfg = scenarios::RunCfg { tol, seed: 0 };
    let get = |key: &str| -> PyResult<Option<f64>> {
        match overrides {
            None => Ok(None),
            Some(d) => match d.get_item(key)? {
                None => Ok(None),
                Some(v) => Ok(Some(v.extract::<f64>()?)),
            },
        }
    };
    let out = match name {
        "ermakov-spiral" => {
            let mut p = scenarios::ErmakovParams::default();
            if let Some(k) = get("k")? {
                p.k = k;
            }
            if let Some(i2) = get("I2")? {
                p.i2 = i2;
            }
            if let Some(h) = get("horizon")? {
                p.horizon = h;
            }
            scenarios::run_ermakov_spiral(&p, &cfg)
        }
        "sckv-circles" => {
            let mut p = scenarios::CirclesParams::default();
            if let Some(c1) = get("c1")? {
                p.c1 = c1;
            }
            if let Some(m) = get("M")? {
                p.m = m;
            }
            if let Some(i02) = get("I02")? {
                p.i02 = i02;
            }
            if let Some(h) = get("horizon")? {
                p.horizon = h;
            }
            scenarios::run_sckv_circles(&p, &cfg)
        }
        "constant-curvature" => {
            let mut p = scenarios::ConstCurvParams::default();
            if let Some(k) = get("k")? {
                p.k = k;
            }
            if let Some(e0) = get("E0")? {
                p.e0 = e0;
                p.branch = if p.e0 / p.k > 0.0 {
                    scenarios::CurvatureBranch::A3Zero
                } else {
                    scenarios::CurvatureBranch::A3Nonzero
                };
            }
            if let Some(h) = get("horizon")? {
                p.horizon = h;
            }
            scenarios::run_constant_curvature(&p, &cfg)
        }
        "flat-lorentzian" => {
            let mut p = scenarios::Remark1Params::default();
            if let Some(e0) = get("E0")? {
                p.e0 = e0;
            }
            scenarios::run_flat_lorentzian_remark1(&p, &cfg)
        }
        "no-kv" => {
            let mut p = scenarios::NoKvParams::default();
            if let Some(e0) = get("E0")? {
                p.e0 = e0;
            }
            if let Some(c1) = get("c1")? {
                p.c1 = c1;
            }
            if let Some(x0) = get("x0")? {
                p.x0 = x0;
            }
            if let Some(h) = get("horizon")? {
                p.horizon = h;
            }
            scenarios::run_no_kv_metric(&p, &cfg)
        }
        "toda" => {
            let mut p = scenarios::TodaScenarioParams::default();
            if let Some(v) = get("k1")? {
                p.toda.k1 = v;
            }
            if let Some(v) = get("k2")? {
                p.toda.k2 = v;
            }
            if let Some(v) = get("b1")? {
                p.toda.b1 = v;
            }
            if let Some(v) = get("b2")? {
                p.toda.b2 = v;
            }
            if let Some(v) = get("b3")? {
                p.toda.b3 = v;
            }
            if let Some(e0) = get("E0")? {
                p.e0 = e0;
            }
            if let Some(h) = get("horizon")? {
                p.horizon = h;
            }
            scenarios::run_toda(&p, &cfg)
        }
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown scenario `{other}`"
            )))
        }
    }
    .map_err(err_to_py)?;

    let json = serde_json::to_value(&out.report)
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(json_to_py(py, &json))
}

#[pyfunction]
fn scenario_names() -> Vec<String> {
    scenarios::SCENARIO_NAMES
        .iter()
        .map(|s| s.to_string())
        .collect()
}

#[pymodule]
fn qfi_lab(_py: Python<'_>, m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMetric>()?;
    m.add_class::<PySystem>()?;
    m.add_class::<PyQfi>()?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(scenario_names, m)?)?;
    Ok(())
}
