//! Python bindings. Structured results cross the boundary as JSON strings,
//! which the caller decodes with `json.loads`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use polyfract::conditions::theorem_dispatch_with_depth;
use polyfract::energy::{default_radius, EnergyContext};
use polyfract::fixtures::{fixture, FIXTURES};
use polyfract::render::{render_svg, Overlay, RenderSpec};
use polyfract::system::{axiom_report, load_system, load_validated, ValidatedSystem};

fn system(text: &str) -> PyResult<ValidatedSystem> {
    load_validated(text).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn json<T: serde::Serialize>(value: &T) -> PyResult<String> {
    serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// Names of the builtin example systems.
#[pyfunction]
fn examples() -> Vec<&'static str> {
    FIXTURES.iter().map(|f| f.name).collect()
}

/// TOML text of a builtin example.
#[pyfunction]
fn example_text(name: &str) -> PyResult<&'static str> {
    fixture(name).map(|f| f.text).ok_or_else(|| PyValueError::new_err(format!("unknown example {name}")))
}

/// Axiom report as JSON.
#[pyfunction]
fn validate(text: &str) -> PyResult<String> {
    let desc = load_system(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let report = axiom_report(&desc).map_err(|e| PyValueError::new_err(e.to_string()))?;
    json(&report)
}

/// Theorem verdict as JSON.
#[pyfunction]
#[pyo3(signature = (text, max_level = 3))]
fn analyze(py: Python<'_>, text: &str, max_level: usize) -> PyResult<String> {
    let sys = system(text)?;
    let verdict = py
        .detach(|| theorem_dispatch_with_depth(&sys, max_level))
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    json(&verdict)
}

/// Conductance scaling estimate as JSON.
#[pyfunction]
#[pyo3(signature = (text, p, m_max = 3, radius = None))]
fn scaling(py: Python<'_>, text: &str, p: f64, m_max: usize, radius: Option<usize>) -> PyResult<String> {
    let sys = system(text)?;
    let radius = radius.unwrap_or_else(|| default_radius(sys.j));
    let est = py
        .detach(|| EnergyContext::new(&sys, radius, m_max).and_then(|ctx| ctx.scaling(p, m_max)))
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    json(&est)
}

/// SVG drawing of level `level`.
#[pyfunction]
#[pyo3(signature = (text, level, overlay = "none"))]
fn render(text: &str, level: usize, overlay: &str) -> PyResult<String> {
    let sys = system(text)?;
    let overlay: Overlay = overlay.parse().map_err(PyValueError::new_err)?;
    let bytes = render_svg(&sys, &RenderSpec::new(level, overlay)).map_err(|e| PyValueError::new_err(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

#[pymodule]
fn polyfract_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(examples, m)?)?;
    m.add_function(wrap_pyfunction!(example_text, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(scaling, m)?)?;
    m.add_function(wrap_pyfunction!(render, m)?)?;
    Ok(())
}
