//! Python bindings: each function takes the configuration text plus optional
//! `section.key=value` overrides and returns plain dictionaries.

use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use galbrun_core::background::validate_background as validate_bg;
use galbrun_core::config::{parse_config_with, RunConfig};
use galbrun_core::convergence::convergence_study;
use galbrun_core::diagnostics::CSV_HEADER;
use galbrun_core::opcheck::check_operators as op_checks;
use galbrun_core::particles::validate_particles;
use galbrun_core::run::{run_simulation, simulate, CheckResult, Setup, SimOptions};
use galbrun_core::Error;

create_exception!(galbrun, ConfigError, PyValueError);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::Cfl { .. } => ConfigError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn config(text: &str, overrides: Option<Vec<String>>) -> PyResult<RunConfig> {
    parse_config_with(text, &overrides.unwrap_or_default()).map_err(to_py)
}

fn checks_list<'py>(py: Python<'py>, checks: &[CheckResult]) -> PyResult<Bound<'py, PyList>> {
    let list = PyList::empty(py);
    for c in checks {
        let d = PyDict::new(py);
        d.set_item("name", &c.name)?;
        d.set_item("pass", c.pass)?;
        d.set_item("value", c.value)?;
        list.append(d)?;
    }
    Ok(list)
}

/// Validates a configuration; raises `ConfigError` listing every bad key.
#[pyfunction]
#[pyo3(signature = (text, overrides=None))]
fn check_config(text: &str, overrides: Option<Vec<String>>) -> PyResult<()> {
    config(text, overrides).map(|_| ())
}

/// Runs the coupled system. With `write_outputs` the CSV, snapshots and
/// `summary.txt` go to the configured output directory.
///
/// Returns `{"status", "checks", "columns", "records", "stats"}` where
/// `records` is a list of rows matching `columns`.
#[pyfunction]
#[pyo3(signature = (text, overrides=None, write_outputs=false))]
fn run<'py>(
    py: Python<'py>,
    text: &str,
    overrides: Option<Vec<String>>,
    write_outputs: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = config(text, overrides)?;
    let (status, out) = if write_outputs {
        let (s, o) = run_simulation(&cfg).map_err(to_py)?;
        (s.code(), o)
    } else {
        let o = simulate(&cfg, &SimOptions::default(), |_, _| Ok(())).map_err(to_py)?;
        let code = if o.checks.iter().all(|c| c.pass) { 0 } else { 1 };
        (code, o)
    };
    let d = PyDict::new(py);
    d.set_item("status", status)?;
    d.set_item("checks", checks_list(py, &out.checks)?)?;
    d.set_item("columns", CSV_HEADER.split(',').collect::<Vec<_>>())?;
    let rows: Vec<Vec<f64>> = out.records.iter().map(|r| r.values().to_vec()).collect();
    d.set_item("records", rows)?;
    let s = &out.stats;
    let stats = PyDict::new(py);
    stats.set_item("nsteps", s.nsteps)?;
    stats.set_item("dt", s.dt)?;
    stats.set_item("h_ratio", s.h_ratio)?;
    stats.set_item("max_h_drift", s.max_h_drift)?;
    stats.set_item("max_energy_residual", s.max_energy_residual)?;
    stats.set_item("max_galbrun_primary", s.max_galbrun_primary)?;
    stats.set_item("max_galbrun_diff", s.max_galbrun_diff)?;
    stats.set_item("min_mild_slack", s.min_mild_slack)?;
    stats.set_item("min_galbrun_slack", s.min_galbrun_slack)?;
    stats.set_item("oracle_error", s.oracle_error)?;
    stats.set_item("lambda0", s.lambda0)?;
    stats.set_item("nu", s.nu)?;
    d.set_item("stats", stats)?;
    Ok(d)
}

/// Background validation report.
#[pyfunction]
#[pyo3(signature = (text, overrides=None))]
fn validate_background<'py>(
    py: Python<'py>,
    text: &str,
    overrides: Option<Vec<String>>,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = config(text, overrides)?;
    let setup = Setup::new(&cfg).map_err(to_py)?;
    let r = validate_bg(&setup.bg, cfg.background_tol).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("pass", r.pass)?;
    d.set_item("lambda0", r.lambda0)?;
    d.set_item("derivative_order", r.derivative_order)?;
    d.set_item("rho_range", (r.bounds.rho_min, r.bounds.rho_max))?;
    d.set_item("c_range", (r.bounds.c_min, r.bounds.c_max))?;
    d.set_item("failures", r.failures)?;
    Ok(d)
}

/// Refinement study: `{"pass", "levels", "monitors": {name: {...}}}`.
#[pyfunction]
#[pyo3(signature = (text, overrides=None))]
fn convergence<'py>(
    py: Python<'py>,
    text: &str,
    overrides: Option<Vec<String>>,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = config(text, overrides)?;
    let t = convergence_study(&cfg).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("pass", t.pass())?;
    let levels: Vec<(usize, usize, f64)> = t.levels.iter().map(|l| (l.nx, l.ny, l.dt)).collect();
    d.set_item("levels", levels)?;
    let monitors = PyDict::new(py);
    for s in &t.series {
        let m = PyDict::new(py);
        m.set_item("nominal", s.nominal)?;
        m.set_item("errors", s.errors.clone())?;
        m.set_item("orders", s.orders.clone())?;
        m.set_item("pass", s.pass)?;
        monitors.set_item(s.monitor.name(), m)?;
    }
    d.set_item("monitors", monitors)?;
    Ok(d)
}

/// Particle-path comparison; needs `initial.w_mode = zero`.
#[pyfunction]
#[pyo3(signature = (text, overrides=None, budget_bytes=256 << 20))]
fn trace_particles<'py>(
    py: Python<'py>,
    text: &str,
    overrides: Option<Vec<String>>,
    budget_bytes: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = config(text, overrides)?;
    let r = validate_particles(&cfg, budget_bytes).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("epsilons", r.epsilons.clone())?;
    d.set_item("errors", r.errors.clone())?;
    d.set_item("ratios", r.ratios.clone())?;
    d.set_item(
        "pass",
        r.ratios_within(cfg.particles.ratio_min, cfg.particles.ratio_max),
    )?;
    Ok(d)
}

/// Operator checks: IBP, Lie identity orders and boundary subspaces.
#[pyfunction]
#[pyo3(signature = (text, overrides=None))]
fn check_operators<'py>(
    py: Python<'py>,
    text: &str,
    overrides: Option<Vec<String>>,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = config(text, overrides)?;
    let r = op_checks(&cfg).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("pass", r.pass())?;
    d.set_item("ibp_max", r.ibp_max)?;
    d.set_item("lie_orders", r.lie_orders)?;
    d.set_item("subspace_max", r.subspace_max)?;
    d.set_item("subspace_samples", r.subspace_samples)?;
    Ok(d)
}

#[pymodule]
fn galbrun(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("ConfigError", m.py().get_type::<ConfigError>())?;
    m.add("CSV_HEADER", CSV_HEADER)?;
    m.add_function(wrap_pyfunction!(check_config, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(validate_background, m)?)?;
    m.add_function(wrap_pyfunction!(convergence, m)?)?;
    m.add_function(wrap_pyfunction!(trace_particles, m)?)?;
    m.add_function(wrap_pyfunction!(check_operators, m)?)?;
    Ok(())
}
