//! Python module `shelab`. Build with
//! `cargo build -p shelab-py --release --features extension-module` and copy
//! `libshelab.so` to `shelab.so` on the import path.

// pyo3 0.22 #[pyfunction] expansion converts PyErr into itself
#![allow(clippy::useless_conversion)]

use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use ::shelab::asymptotics_lab as lab;
use ::shelab::fredholm_pfaffian::{self as fp, FredholmContext};
use ::shelab::goe_kernel::{self as gk, EvaluationPoints, Formula, KernelEntrySelector};
use ::shelab::she_moments as sm;
use ::shelab::special_functions as sf;
use ::shelab::Error;

fn to_py(e: Error) -> PyErr {
    if e.is_validation() {
        PyValueError::new_err(e.to_string())
    } else {
        PyArithmeticError::new_err(e.to_string())
    }
}

fn context(window: Option<(f64, f64)>, m: usize, lmax: usize) -> PyResult<FredholmContext> {
    FredholmContext::new(window.unwrap_or(gk::DEFAULT_WINDOW), m, lmax).map_err(to_py)
}

/// (Ai(x), Ai'(x)).
#[pyfunction]
fn airy(x: f64) -> PyResult<(f64, f64)> {
    let v = sf::airy(x).map_err(to_py)?;
    Ok((v.ai, v.ai_prime))
}

/// K12(x, x), the one-point density.
#[pyfunction]
fn k12_diag(x: f64) -> PyResult<f64> {
    gk::k12_diag_plain(x).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (row, col, x, y, alternate = false))]
fn kernel_entry(row: u8, col: u8, x: f64, y: f64, alternate: bool) -> PyResult<f64> {
    let sel = KernelEntrySelector::new(row, col).map_err(to_py)?;
    let formula = if alternate { Formula::Alternate } else { Formula::Primary };
    gk::k_entry(sel, x, y, formula).map_err(to_py)
}

/// rho_L at the given points.
#[pyfunction]
fn correlation(points: Vec<f64>) -> PyResult<f64> {
    let pts = EvaluationPoints::new(points).map_err(to_py)?;
    gk::correlation(&pts).map_err(to_py)
}

/// Pfaffian of a real antisymmetric matrix given as a list of rows.
#[pyfunction]
fn pfaffian(rows: Vec<Vec<f64>>) -> PyResult<f64> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("matrix must be square"));
    }
    let a = ::shelab::antisym_linalg::AntisymMatrix::new(n, rows.concat()).map_err(to_py)?;
    ::shelab::antisym_linalg::pfaffian(&a).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (s, t, window = None, m = fp::DEFAULT_M, lmax = fp::DEFAULT_L_MAX))]
fn laplace_transform(py: Python<'_>, s: f64, t: f64, window: Option<(f64, f64)>, m: usize, lmax: usize) -> PyResult<f64> {
    let ctx = context(window, m, lmax)?;
    py.allow_threads(|| fp::laplace_transform(s, t, &ctx)).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (s0, m = fp::DEFAULT_M))]
fn goe_cdf(py: Python<'_>, s0: f64, m: usize) -> PyResult<f64> {
    let ctx = context(None, m, fp::DEFAULT_L_MAX)?;
    py.allow_threads(|| fp::goe_cdf(s0, &ctx)).map_err(to_py)
}

/// log A_p(t).
#[pyfunction]
fn log_leading_term(py: Python<'_>, p: f64, t: f64) -> PyResult<f64> {
    let params = sm::moment_params(p, t).map_err(to_py)?;
    let v = py.allow_threads(|| sm::leading_term(&params, sm::Route::Split)).map_err(to_py)?;
    Ok(v.log_mag)
}

/// Breakdown of E[X^p] as a dict of log-magnitudes and signs.
#[pyfunction]
#[pyo3(signature = (p, t, lmax = 3))]
fn fractional_moment<'py>(py: Python<'py>, p: f64, t: f64, lmax: usize) -> PyResult<Bound<'py, PyDict>> {
    let params = sm::moment_params(p, t).map_err(to_py)?;
    let b = py.allow_threads(|| sm::fractional_moment(&params, lmax)).map_err(to_py)?;
    let d = PyDict::new_bound(py);
    d.set_item("log_leading", b.leading.log_mag)?;
    let higher: Vec<(i8, f64)> = b.higher.iter().map(|v| (v.sign, v.log_mag)).collect();
    d.set_item("higher", higher)?;
    d.set_item("log_total", b.total.log_mag)?;
    d.set_item("sign_total", b.total.sign)?;
    d.set_item("remainder_bound", b.remainder_bound)?;
    Ok(d)
}

/// (value, argmax p) of sup_p (p s - p^3/3).
#[pyfunction]
fn rate_function(s: f64) -> PyResult<(f64, f64)> {
    lab::rate_function(s).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (s, t, p_grid = None))]
fn chernoff_tail(py: Python<'_>, s: f64, t: f64, p_grid: Option<Vec<f64>>) -> PyResult<f64> {
    let grid = p_grid.unwrap_or_else(|| (1..=8).map(|k| 0.25 * k as f64).collect());
    py.allow_threads(|| lab::chernoff_tail(s, t, &grid)).map_err(to_py)
}

type AuditRow = (String, f64, f64, usize);

/// Whether a suite passes, with (inequality, constant, drift, violations) rows.
#[pyfunction]
#[pyo3(signature = (suite, density = 40))]
fn audit(py: Python<'_>, suite: &str, density: usize) -> PyResult<(bool, Vec<AuditRow>)> {
    let suite: lab::AuditSuite = suite.parse().map_err(to_py)?;
    let r = py.allow_threads(|| lab::audit_bounds(suite, &lab::GridSpec { density })).map_err(to_py)?;
    let rows = r.entries.iter().map(|e| (e.inequality.clone(), e.constant, e.drift, e.violations)).collect();
    Ok((r.passes(), rows))
}

/// Runs the command line with `args` (without the program name) and returns
/// (exit code, stdout, stderr).
#[pyfunction]
fn run_cli(args: Vec<String>) -> (u8, String, String) {
    let mut full = vec!["shelab".to_string()];
    full.extend(args);
    ::shelab::cli_reporting::main_with_args(full)
}

#[pymodule]
fn shelab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(airy, m)?)?;
    m.add_function(wrap_pyfunction!(k12_diag, m)?)?;
    m.add_function(wrap_pyfunction!(kernel_entry, m)?)?;
    m.add_function(wrap_pyfunction!(correlation, m)?)?;
    m.add_function(wrap_pyfunction!(pfaffian, m)?)?;
    m.add_function(wrap_pyfunction!(laplace_transform, m)?)?;
    m.add_function(wrap_pyfunction!(goe_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(log_leading_term, m)?)?;
    m.add_function(wrap_pyfunction!(fractional_moment, m)?)?;
    m.add_function(wrap_pyfunction!(rate_function, m)?)?;
    m.add_function(wrap_pyfunction!(chernoff_tail, m)?)?;
    m.add_function(wrap_pyfunction!(audit, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    Ok(())
}
