//! Python bindings: processes, schedules, closed forms, simulation and
//! verification.

use std::collections::BTreeMap;

use horizon_core::analytic::{self, Quantity};
use horizon_core::exact::format_rational;
use horizon_core::montecarlo::{self, EnsembleConfig, Verdict, DEFAULT_Z_MAX};
use horizon_core::process::{self, DEFAULT_ENUMERATION_CAP};
use horizon_core::stats;
use horizon_core::{ProcessSpec, Schedule as CoreSchedule};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn py_err(e: horizon_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A return process.
#[pyclass(frozen, module = "horizon_risk")]
struct Process {
    spec: ProcessSpec,
}

#[pymethods]
impl Process {
    /// Parses the command-line syntax, e.g. `"gaussian:mu=0.05,sigma=0.2"` or `"die"`.
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        text.parse().map(|spec| Process { spec }).map_err(py_err)
    }

    #[staticmethod]
    fn gaussian(mu: f64, sigma: f64) -> PyResult<Self> {
        ProcessSpec::gaussian(mu, sigma).map(|spec| Process { spec }).map_err(py_err)
    }

    #[staticmethod]
    #[pyo3(signature = (nu, mu=0.0, scale=1.0))]
    fn student_t(nu: f64, mu: f64, scale: f64) -> PyResult<Self> {
        ProcessSpec::student_t(mu, scale, nu).map(|spec| Process { spec }).map_err(py_err)
    }

    #[staticmethod]
    fn discrete(values: Vec<f64>, probs: Vec<f64>) -> PyResult<Self> {
        ProcessSpec::discrete(values, probs).map(|spec| Process { spec }).map_err(py_err)
    }

    #[staticmethod]
    #[pyo3(signature = (phi, mu=0.0, sigma=1.0))]
    fn ar1(phi: f64, mu: f64, sigma: f64) -> PyResult<Self> {
        ProcessSpec::ar1(mu, sigma, phi).map(|spec| Process { spec }).map_err(py_err)
    }

    #[staticmethod]
    fn die() -> Self {
        Process { spec: ProcessSpec::die() }
    }

    /// `mu`, `sigma2`, `fourth_central` and `var_y`; `None` where a moment is infinite.
    fn moments(&self) -> BTreeMap<&'static str, Option<f64>> {
        let m = process::moments(&self.spec);
        BTreeMap::from([
            ("mu", m.mu),
            ("sigma2", m.sigma2),
            ("fourth_central", m.fourth_central),
            ("var_y", m.var_y),
        ])
    }

    /// Path `index` of the ensemble generated by `seed`.
    #[pyo3(signature = (horizon, seed=0, index=0))]
    fn sample_path(&self, horizon: usize, seed: u64, index: u64) -> Vec<f64> {
        let mut rng = montecarlo::path_stream(seed, index);
        process::sample_path(&self.spec, horizon, &mut rng)
    }

    fn __str__(&self) -> String {
        self.spec.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Process('{}')", self.spec)
    }
}

/// Cumulative exposures `a_1..a_t` of an investment schedule.
#[pyclass(frozen, module = "horizon_risk")]
struct Schedule {
    inner: CoreSchedule,
}

#[pymethods]
impl Schedule {
    /// Parses `"lump:12"`, `"dca:12"`, `"unit:12"`, `"last:12"` or
    /// `"custom:0.5,0.5"`; `horizon` fills in a bare family name.
    #[new]
    #[pyo3(signature = (text, horizon=None))]
    fn new(text: &str, horizon: Option<usize>) -> PyResult<Self> {
        let spec: horizon_core::exposure::ScheduleSpec = text.parse().map_err(py_err)?;
        spec.build(horizon).map(|inner| Schedule { inner }).map_err(py_err)
    }

    #[staticmethod]
    fn lump_sum(horizon: usize) -> PyResult<Self> {
        CoreSchedule::lump_sum(horizon).map(|inner| Schedule { inner }).map_err(py_err)
    }

    #[staticmethod]
    fn dca(horizon: usize) -> PyResult<Self> {
        CoreSchedule::dca(horizon).map(|inner| Schedule { inner }).map_err(py_err)
    }

    #[staticmethod]
    fn uniform_exposure(horizon: usize) -> PyResult<Self> {
        CoreSchedule::uniform_exposure(horizon).map(|inner| Schedule { inner }).map_err(py_err)
    }

    #[staticmethod]
    fn last_period(horizon: usize) -> PyResult<Self> {
        CoreSchedule::last_period(horizon).map(|inner| Schedule { inner }).map_err(py_err)
    }

    /// Schedule from per-period investment weights.
    #[staticmethod]
    fn custom(weights: Vec<f64>) -> PyResult<Self> {
        CoreSchedule::custom(&weights).map(|inner| Schedule { inner }).map_err(py_err)
    }

    #[getter]
    fn horizon(&self) -> usize {
        self.inner.horizon()
    }

    #[getter]
    fn exposures(&self) -> Vec<f64> {
        self.inner.exposures().to_vec()
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.inner.weights()
    }

    /// `e_time`, `e1`, `e2` and `e4`.
    fn measures(&self) -> BTreeMap<&'static str, f64> {
        let m = self.inner.measures();
        BTreeMap::from([("e_time", m.e_time), ("e1", m.e1), ("e2", m.e2), ("e4", m.e4)])
    }

    fn __repr__(&self) -> String {
        format!("Schedule('{}')", self.inner.label())
    }
}

/// Moments of `U` and `V`, with standard errors when estimated.
#[pyclass(frozen, get_all, module = "horizon_risk")]
struct Report {
    mean_u: Option<f64>,
    var_u: Option<f64>,
    mean_v: Option<f64>,
    var_v: Option<f64>,
    var_u_norm: Option<f64>,
    std_errors: Option<BTreeMap<&'static str, Option<f64>>>,
    n_paths: Option<u64>,
    provenance: String,
    assumptions: Vec<String>,
}

#[pymethods]
impl Report {
    fn __repr__(&self) -> String {
        format!(
            "Report(provenance='{}', mean_u={:?}, var_u={:?}, mean_v={:?}, var_v={:?})",
            self.provenance, self.mean_u, self.var_u, self.mean_v, self.var_v
        )
    }
}

impl From<analytic::MomentReport> for Report {
    fn from(r: analytic::MomentReport) -> Self {
        let std_errors = r.std_errors.map(|se| {
            BTreeMap::from([
                ("mean_u", se.mean_u),
                ("var_u", se.var_u),
                ("mean_v", se.mean_v),
                ("var_v", se.var_v),
                ("var_u_norm", se.var_u_norm),
            ])
        });
        Report {
            mean_u: r.mean_u,
            var_u: r.var_u,
            mean_v: r.mean_v,
            var_v: r.var_v,
            var_u_norm: r.var_u_norm,
            std_errors,
            n_paths: r.n_paths,
            provenance: r.provenance.to_string(),
            assumptions: r.assumptions.iter().map(|a| a.to_string()).collect(),
        }
    }
}

/// One quantity of a verification run.
#[pyclass(frozen, get_all, module = "horizon_risk")]
struct Check {
    quantity: String,
    analytic: Option<f64>,
    estimate: Option<f64>,
    std_error: Option<f64>,
    z_score: Option<f64>,
    status: String,
    reason: Option<String>,
}

#[pymethods]
impl Check {
    #[getter]
    fn passed(&self) -> bool {
        self.status != "fail"
    }

    fn __repr__(&self) -> String {
        format!("Check('{}', {}, z={:?})", self.quantity, self.status, self.z_score)
    }
}

impl From<montecarlo::VerificationResult> for Check {
    fn from(r: montecarlo::VerificationResult) -> Self {
        let (status, reason) = match r.verdict {
            Verdict::Pass => ("pass", None),
            Verdict::Fail => ("fail", None),
            Verdict::Skipped(why) => ("skipped", Some(why)),
        };
        Check {
            quantity: r.quantity.name().to_string(),
            analytic: r.analytic,
            estimate: r.estimate,
            std_error: r.std_error,
            z_score: r.z_score,
            status: status.to_string(),
            reason,
        }
    }
}

/// Closed-form moments of `U` and `V`.
#[pyfunction]
fn analytic_moments(process: &Process, schedule: &Schedule) -> Report {
    analytic::moment_report(&process.spec, &schedule.inner).into()
}

/// Closed-form moments as exact fractions (`"35/2"`), for i.i.d. processes
/// with rational parameters.
#[pyfunction]
fn exact_moments(process: &Process, schedule: &Schedule) -> BTreeMap<&'static str, Option<String>> {
    Quantity::ALL
        .iter()
        .map(|&q| {
            let value = analytic::exact::quantity(&process.spec, &schedule.inner, q).ok();
            (q.name(), value.as_ref().map(format_rational))
        })
        .collect()
}

/// Per-period return, volatility and their ratio for a lump sum over `horizon`.
#[pyfunction]
fn annualized(process: &Process, horizon: usize) -> PyResult<(f64, f64, f64)> {
    let a = analytic::annualized(&process.spec, horizon).map_err(py_err)?;
    Ok((a.a_return, a.a_risk, a.rr))
}

/// Relative excess of DCA's expected risk over uniform exposure.
#[pyfunction]
fn dca_unit_risk_gap(horizon: usize) -> f64 {
    analytic::dca_unit_risk_gap(horizon)
}

/// `u`, `v_mu`, `u_norm`, `v_norm`, `m` and `v_sample` of one realized path.
#[pyfunction]
fn path_stats(path: Vec<f64>, schedule: &Schedule, mu: f64) -> PyResult<BTreeMap<&'static str, f64>> {
    let s = stats::path_stats(&path, &schedule.inner, mu).map_err(py_err)?;
    Ok(BTreeMap::from([
        ("u", s.u),
        ("v_mu", s.v_mu),
        ("u_norm", s.u_norm),
        ("v_norm", s.v_norm),
        ("m", s.m),
        ("v_sample", s.v_sample),
    ]))
}

/// Monte Carlo estimates over `n_paths` paths. Releases the GIL while running.
#[pyfunction]
#[pyo3(signature = (process, schedule, n_paths, seed=0, workers=0))]
fn simulate(
    py: Python<'_>,
    process: &Process,
    schedule: &Schedule,
    n_paths: u64,
    seed: u64,
    workers: usize,
) -> PyResult<Report> {
    let cfg = EnsembleConfig::new(n_paths, schedule.inner.horizon(), seed).with_workers(workers);
    py.detach(|| montecarlo::run_ensemble(&process.spec, &schedule.inner, &cfg))
        .map(Report::from)
        .map_err(py_err)
}

/// Exact moments by enumerating every path of a discrete process.
#[pyfunction]
fn enumerate(process: &Process, schedule: &Schedule) -> PyResult<Report> {
    montecarlo::enumeration_report(&process.spec, &schedule.inner, DEFAULT_ENUMERATION_CAP)
        .map(Report::from)
        .map_err(py_err)
}

/// Compares closed forms with simulation (z-test) or, with `exact=True`,
/// with enumeration.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (process, schedule, n_paths=100_000, seed=0, z_max=DEFAULT_Z_MAX, exact=false, workers=0))]
fn verify(
    py: Python<'_>,
    process: &Process,
    schedule: &Schedule,
    n_paths: u64,
    seed: u64,
    z_max: f64,
    exact: bool,
    workers: usize,
) -> PyResult<Vec<Check>> {
    let results = py.detach(|| {
        if exact {
            montecarlo::enumerate_verify(&process.spec, &schedule.inner, DEFAULT_ENUMERATION_CAP)
        } else {
            let cfg = EnsembleConfig::new(n_paths, schedule.inner.horizon(), seed).with_workers(workers);
            montecarlo::verify(&process.spec, &schedule.inner, &cfg, z_max)
        }
    });
    Ok(results.map_err(py_err)?.into_iter().map(Check::from).collect())
}

#[pymodule]
fn horizon_risk(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Process>()?;
    m.add_class::<Schedule>()?;
    m.add_class::<Report>()?;
    m.add_class::<Check>()?;
    m.add_function(wrap_pyfunction!(analytic_moments, m)?)?;
    m.add_function(wrap_pyfunction!(exact_moments, m)?)?;
    m.add_function(wrap_pyfunction!(annualized, m)?)?;
    m.add_function(wrap_pyfunction!(dca_unit_risk_gap, m)?)?;
    m.add_function(wrap_pyfunction!(path_stats, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
