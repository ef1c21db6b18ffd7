//! Python bindings for `spinres`.
//!
//! Methods are passed as strings (`"exact"`, `"avg"`, `"ms"`, `"numeric"`).
//! Invalid arguments raise `ValueError`; numerical failures raise
//! `spinres.NumericalError`.

use pyo3::create_exception;
use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use spinres::analytic::{self, EffectiveQuantities, MethodId};
use spinres::numeric::{self, Method, SweepResult, TimeSeries, Trajectory};
use spinres::special;
use spinres::{DriveParams, Error, Spinor, Vec3, C64};

create_exception!(spinres, NumericalError, PyArithmeticError);

fn to_py(e: Error) -> PyErr {
    if e.is_numerical() {
        NumericalError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn method_id(name: &str) -> PyResult<MethodId> {
    name.parse().map_err(to_py)
}

fn method(name: &str) -> PyResult<Method> {
    name.parse().map_err(to_py)
}

fn triple(v: Vec3) -> (f64, f64, f64) {
    (v.x, v.y, v.z)
}

#[pyclass(name = "DriveParams", module = "spinres", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
struct PyDriveParams(DriveParams);

#[pymethods]
impl PyDriveParams {
    #[new]
    #[pyo3(signature = (omega_perp, omega_par, Omega_HF, r, phi_hf))]
    #[allow(non_snake_case)]
    fn new(omega_perp: f64, omega_par: f64, Omega_HF: f64, r: f64, phi_hf: f64) -> PyResult<Self> {
        DriveParams::new(omega_perp, omega_par, Omega_HF, r, phi_hf)
            .map(Self)
            .map_err(to_py)
    }

    #[getter]
    fn omega_perp(&self) -> f64 {
        self.0.omega_perp()
    }

    #[getter]
    fn omega_par(&self) -> f64 {
        self.0.omega_par()
    }

    #[getter(Omega_HF)]
    fn hf_frequency(&self) -> f64 {
        self.0.hf_frequency()
    }

    #[getter]
    fn r(&self) -> f64 {
        self.0.r()
    }

    #[getter]
    fn phi_hf(&self) -> f64 {
        self.0.phi_hf()
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.0.epsilon()
    }

    #[getter]
    fn hf_period(&self) -> f64 {
        self.0.hf_period()
    }

    fn theta(&self, t: f64) -> f64 {
        self.0.theta(t)
    }

    fn with_omega_par(&self, omega_par: f64) -> PyResult<Self> {
        self.0.with_omega_par(omega_par).map(Self).map_err(to_py)
    }

    fn with_phi_hf(&self, phi_hf: f64) -> PyResult<Self> {
        self.0.with_phi_hf(phi_hf).map(Self).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        let p = &self.0;
        format!(
            "DriveParams(omega_perp={}, omega_par={}, Omega_HF={}, r={}, phi_hf={})",
            p.omega_perp(),
            p.omega_par(),
            p.hf_frequency(),
            p.r(),
            p.phi_hf()
        )
    }
}

#[pyclass(name = "Spinor", module = "spinres", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
struct PySpinor(Spinor);

#[pymethods]
impl PySpinor {
    #[new]
    fn new(up: C64, down: C64) -> PyResult<Self> {
        Spinor::new(up, down).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn plus() -> Self {
        Self(Spinor::plus())
    }

    #[staticmethod]
    fn minus() -> Self {
        Self(Spinor::minus())
    }

    /// `c|+⟩ + e^{i·phase}·sqrt(1 − c²)|−⟩`
    #[staticmethod]
    fn superposition(c: f64, phase: f64) -> PyResult<Self> {
        Spinor::superposition(c, phase).map(Self).map_err(to_py)
    }

    #[getter]
    fn up(&self) -> C64 {
        self.0.up()
    }

    #[getter]
    fn down(&self) -> C64 {
        self.0.down()
    }

    fn expect_sz(&self) -> f64 {
        spinres::su2::expect_sz(&self.0)
    }

    fn __repr__(&self) -> String {
        format!("Spinor(up={}, down={})", self.0.up(), self.0.down())
    }
}

#[pyclass(name = "TimeSeries", module = "spinres", frozen, skip_from_py_object)]
struct PyTimeSeries(TimeSeries);

#[pymethods]
impl PyTimeSeries {
    #[getter]
    fn times(&self) -> Vec<f64> {
        self.0.times().to_vec()
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.0.values().to_vec()
    }

    #[getter]
    fn method(&self) -> &'static str {
        self.0.method().name()
    }

    #[getter]
    fn hf_averaged(&self) -> bool {
        self.0.is_hf_averaged()
    }

    #[getter]
    fn params(&self) -> PyDriveParams {
        PyDriveParams(*self.0.params())
    }

    fn to_csv(&self) -> String {
        self.0.to_csv()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

#[pyclass(name = "Trajectory", module = "spinres", frozen, skip_from_py_object)]
struct PyTrajectory(Trajectory);

#[pymethods]
impl PyTrajectory {
    #[getter]
    fn series(&self) -> PyTimeSeries {
        PyTimeSeries(self.0.series.clone())
    }

    #[getter]
    fn final_state(&self) -> PySpinor {
        PySpinor(self.0.final_state)
    }

    #[getter]
    fn renormalization_drift(&self) -> f64 {
        self.0.renormalization_drift
    }

    #[getter]
    fn steps(&self) -> usize {
        self.0.steps
    }

    #[getter]
    fn rejected(&self) -> usize {
        self.0.rejected
    }
}

#[pyfunction]
fn bessel_j0(x: f64) -> f64 {
    special::bessel_j0(x)
}

#[pyfunction]
fn bessel_j1(x: f64) -> f64 {
    special::bessel_j1(x)
}

#[pyfunction]
fn struve_h0(x: f64) -> f64 {
    special::struve_h0(x)
}

#[pyfunction]
fn bessel_j0_zero(j: usize) -> PyResult<f64> {
    special::bessel_j0_zero(j).map_err(to_py)
}

#[pyfunction]
fn gamma1(r: f64) -> PyResult<f64> {
    analytic::gamma1(r).map_err(to_py)
}

#[pyfunction]
fn gamma2(r: f64) -> PyResult<f64> {
    analytic::gamma2(r).map_err(to_py)
}

#[pyfunction]
fn eta(p: PyRef<'_, PyDriveParams>) -> PyResult<f64> {
    analytic::eta(&p.0).map_err(to_py)
}

#[pyfunction]
fn omega_eff(p: PyRef<'_, PyDriveParams>) -> f64 {
    analytic::omega_eff(&p.0)
}

#[pyfunction]
fn ms_frequency(p: PyRef<'_, PyDriveParams>) -> PyResult<f64> {
    analytic::ms_frequency(&p.0).map_err(to_py)
}

/// Derived quantities as a dict; vectors are (x, y, z) tuples.
#[pyfunction]
fn effective_quantities<'py>(
    py: Python<'py>,
    p: PyRef<'_, PyDriveParams>,
) -> PyResult<Bound<'py, PyDict>> {
    let q = EffectiveQuantities::compute(&p.0).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("omega0", q.omega0)?;
    d.set_item("omega_eff", q.omega_eff)?;
    d.set_item("n", q.n.map(triple))?;
    d.set_item("j0r", q.j0r)?;
    d.set_item("a", q.a)?;
    d.set_item("b", q.b)?;
    d.set_item("m", triple(q.m))?;
    d.set_item("q", triple(q.q))?;
    d.set_item("alpha_x", q.alpha_x)?;
    d.set_item("alpha_y", q.alpha_y)?;
    d.set_item("alpha_z", q.alpha_z)?;
    d.set_item("gamma1", q.gamma1)?;
    d.set_item("gamma2", q.gamma2)?;
    d.set_item("eta", q.eta)?;
    d.set_item("omega_ms", q.omega_ms)?;
    d.set_item("amplitude_avg", q.amplitude_avg)?;
    d.set_item("amplitude_ms", q.amplitude_ms)?;
    d.set_item("resonant_branch", q.resonant_branch)?;
    Ok(d)
}

/// 2×2 matrix of the closed-form propagator as nested lists.
#[pyfunction]
fn propagator(method: &str, t: f64, p: PyRef<'_, PyDriveParams>) -> PyResult<[[C64; 2]; 2]> {
    analytic::propagator(method_id(method)?, t, &p.0)
        .map(|u| u.to_matrix())
        .map_err(to_py)
}

#[pyfunction]
fn expect_sz_closed(
    method: &str,
    t: f64,
    p: PyRef<'_, PyDriveParams>,
    init: PyRef<'_, PySpinor>,
) -> PyResult<f64> {
    analytic::expect_sz_closed(method_id(method)?, t, &p.0, &init.0).map_err(to_py)
}

#[pyfunction]
fn amplitude_closed(method: &str, p: PyRef<'_, PyDriveParams>) -> PyResult<f64> {
    analytic::amplitude_closed(method_id(method)?, &p.0).map_err(to_py)
}

#[pyfunction]
fn closed_form_series(
    method: &str,
    p: PyRef<'_, PyDriveParams>,
    init: PyRef<'_, PySpinor>,
    times: Vec<f64>,
) -> PyResult<PyTimeSeries> {
    numeric::closed_form_series(method_id(method)?, &p.0, &init.0, &times)
        .map(PyTimeSeries)
        .map_err(to_py)
}

/// Lab-frame integration from t = 0, sampled every `sample_dt` over
/// [t_start, t_end]. `sample_dt` defaults to a 32nd of the drive period.
#[pyfunction]
#[pyo3(signature = (p, init, t_end, sample_dt=None, tol=1e-9, t_start=0.0))]
fn integrate(
    py: Python<'_>,
    p: PyRef<'_, PyDriveParams>,
    init: PyRef<'_, PySpinor>,
    t_end: f64,
    sample_dt: Option<f64>,
    tol: f64,
    t_start: f64,
) -> PyResult<PyTrajectory> {
    let (params, psi) = (p.0, init.0);
    let dt = sample_dt.unwrap_or(params.hf_period() / 32.0);
    py.detach(|| numeric::integrate_window(&params, &psi, t_start, t_end, dt, tol))
        .map(PyTrajectory)
        .map_err(to_py)
}

#[pyfunction]
fn hf_average(series: PyRef<'_, PyTimeSeries>) -> PyResult<PyTimeSeries> {
    numeric::hf_average(&series.0, series.0.params())
        .map(PyTimeSeries)
        .map_err(to_py)
}

#[pyfunction]
fn extract_amplitude(series: PyRef<'_, PyTimeSeries>) -> PyResult<f64> {
    numeric::extract_amplitude(&series.0, series.0.params()).map_err(to_py)
}

/// Resonance amplitudes on an ω∥ grid. Returns a dict with `omega_par`,
/// one list per method (None marks a failed point) and `failures`.
#[pyfunction]
#[pyo3(signature = (p, grid, methods, tol=1e-9))]
fn resonance_sweep<'py>(
    py: Python<'py>,
    p: PyRef<'_, PyDriveParams>,
    grid: Vec<f64>,
    methods: Vec<String>,
    tol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let methods = methods
        .iter()
        .map(|m| method(m))
        .collect::<PyResult<Vec<_>>>()?;
    let params = p.0;
    let res: SweepResult = py
        .detach(|| numeric::resonance_sweep_collect(&params, &grid, &methods, tol))
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("omega_par", res.omega_par_grid.clone())?;
    for (m, col) in res.methods.iter().zip(&res.amplitudes) {
        d.set_item(m.name(), col.clone())?;
    }
    let failures: Vec<(f64, &str, String)> = res
        .failures
        .iter()
        .map(|f| (f.omega_par, f.method.name(), f.message.clone()))
        .collect();
    d.set_item("failures", failures)?;
    Ok(d)
}

#[pymodule]
#[pyo3(name = "spinres")]
pub fn spinres_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("NumericalError", m.py().get_type::<NumericalError>())?;
    m.add_class::<PyDriveParams>()?;
    m.add_class::<PySpinor>()?;
    m.add_class::<PyTimeSeries>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_function(wrap_pyfunction!(bessel_j0, m)?)?;
    m.add_function(wrap_pyfunction!(bessel_j1, m)?)?;
    m.add_function(wrap_pyfunction!(struve_h0, m)?)?;
    m.add_function(wrap_pyfunction!(bessel_j0_zero, m)?)?;
    m.add_function(wrap_pyfunction!(gamma1, m)?)?;
    m.add_function(wrap_pyfunction!(gamma2, m)?)?;
    m.add_function(wrap_pyfunction!(eta, m)?)?;
    m.add_function(wrap_pyfunction!(omega_eff, m)?)?;
    m.add_function(wrap_pyfunction!(ms_frequency, m)?)?;
    m.add_function(wrap_pyfunction!(effective_quantities, m)?)?;
    m.add_function(wrap_pyfunction!(propagator, m)?)?;
    m.add_function(wrap_pyfunction!(expect_sz_closed, m)?)?;
    m.add_function(wrap_pyfunction!(amplitude_closed, m)?)?;
    m.add_function(wrap_pyfunction!(closed_form_series, m)?)?;
    m.add_function(wrap_pyfunction!(integrate, m)?)?;
    m.add_function(wrap_pyfunction!(hf_average, m)?)?;
    m.add_function(wrap_pyfunction!(extract_amplitude, m)?)?;
    m.add_function(wrap_pyfunction!(resonance_sweep, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn errors_map_to_python_exceptions() {
        Python::initialize();
        Python::attach(|py| {
            let domain = to_py(Error::Domain("bad".into()));
            assert!(domain.is_instance_of::<PyValueError>(py));
            let numeric = to_py(Error::IntegratorFailure("lost norm".into()));
            assert!(numeric.is_instance_of::<NumericalError>(py));
            assert!(numeric.is_instance_of::<PyArithmeticError>(py));
        });
    }

    #[test]
    fn method_names_parse() {
        assert_eq!(method_id("ms").unwrap(), MethodId::MultiScale);
        assert_eq!(method("numeric").unwrap(), Method::Numeric);
        Python::initialize();
        Python::attach(|_| assert!(method_id("numeric").is_err()));
    }
}
