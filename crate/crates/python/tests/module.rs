//! Drives the extension module from embedded Python.

use pyo3::prelude::*;
use pyo3::types::{PyDict, PyModule};

fn with_module(code: &std::ffi::CStr) {
    Python::initialize();
    Python::attach(|py| {
        let module = PyModule::new(py, "spinres").unwrap();
        spinres_py::spinres_py(&module).unwrap();
        let globals = PyDict::new(py);
        globals.set_item("spinres", module).unwrap();
        if let Err(e) = py.run(code, Some(&globals), None) {
            e.display(py);
            panic!("python check failed");
        }
    });
}

#[test]
fn constants_and_closed_forms() {
    with_module(
        cr#"
import math
r1 = spinres.bessel_j0_zero(1)
assert abs(r1 - 2.404825557696) < 1e-11
assert abs(spinres.gamma1(1.0) + 0.684533) < 1e-4
p = spinres.DriveParams(3.0, -1.0, 50.0, r1, math.pi / 2)
q = spinres.effective_quantities(p)
assert q["resonant_branch"] and q["eta"] is None and q["n"] is None
assert abs(spinres.ms_frequency(p) + 1.63076e-3) < 1e-6
assert spinres.amplitude_closed("ms", p) == 1.0
assert spinres.amplitude_closed("avg", p) == 0.0
init = spinres.Spinor.superposition(2 ** -0.5, 0.0)
t = 500.0
expected = -math.sin(r1) * math.sin(spinres.ms_frequency(p) * t)
assert abs(spinres.expect_sz_closed("ms", t, p, init) - expected) < 1e-9
"#,
    );
}

#[test]
fn numeric_pipeline_and_errors() {
    with_module(
        cr#"
p = spinres.DriveParams(3.0, 0.0, 50.0, 0.0, 0.0)
plus = spinres.Spinor.plus()
traj = spinres.integrate(p, plus, 20.0, sample_dt=0.05, tol=1e-10)
exact = spinres.closed_form_series("exact", p, plus, traj.series.times)
worst = max(abs(a - b) for a, b in zip(traj.series.values, exact.values))
assert worst < 1e-6, worst
assert traj.series.method == "numeric" and not traj.series.hf_averaged
assert spinres.extract_amplitude(exact) > 0.89
try:
    spinres.integrate(p, plus, 1.0, tol=1.0)
    raise AssertionError("tolerance accepted")
except ValueError:
    pass
try:
    spinres.extract_amplitude(spinres.closed_form_series("exact", p, plus, [0.0, 0.1, 0.2]))
    raise AssertionError("short span accepted")
except ValueError:
    pass
"#,
    );
}
