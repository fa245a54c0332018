use pyo3::prelude::*;
use pyo3::types::PyDict;

fn with_module<F: FnOnce(Python<'_>, &Bound<'_, PyDict>)>(f: F) {
    Python::initialize();
    Python::attach(|py| {
        let m = pyo3::wrap_pymodule!(chse_py::chse_py)(py);
        let globals = PyDict::new(py);
        globals.set_item("chse_py", m).unwrap();
        f(py, &globals);
    });
}

fn eval<'py>(py: Python<'py>, globals: &Bound<'py, PyDict>, code: &str) -> Bound<'py, PyAny> {
    let code = std::ffi::CString::new(code).unwrap();
    py.eval(&code, Some(globals), None).unwrap()
}

#[test]
fn words_and_moments_from_python() {
    with_module(|py, g| {
        let w: String = eval(py, g, "chse_py.fib_word(1, 13)").extract().unwrap();
        assert_eq!(w, "0100101001001");
        let trace: f64 = eval(py, g, "sum(chse_py.haar_moment(2, 2)[i][i].real for i in range(4))").extract().unwrap();
        assert!((trace - 1.0).abs() < 1e-15);
        let z: Vec<usize> = eval(py, g, "chse_py.zeckendorf_indices(100)").extract().unwrap();
        assert_eq!(z, vec![11, 6, 4]);
    });
}

#[test]
fn drive_decay_rows() {
    with_module(|py, g| {
        let n: usize = eval(py, g, "len(chse_py.Drive('haar', seed=3).decay(1, 12, bits=256))").extract().unwrap();
        assert_eq!(n, 12);
        let d: f64 = eval(py, g, "chse_py.Drive('xz', theta_x=0.0).decay(2, 10, states=[[1, 0]])[-1]['delta']").extract().unwrap();
        // A0 = 1 and |0⟩ only picks up phases under A1: Δ stays at 1 − 1/3.
        assert!((d - 2.0 / 3.0).abs() < 1e-12, "{d}");
    });
}

#[test]
fn errors_map_to_python_exceptions() {
    with_module(|py, g| {
        let code = std::ffi::CString::new("chse_py.Drive('nonsense')").unwrap();
        let err = py.eval(&code, Some(g), None).unwrap_err();
        assert!(err.is_instance_of::<pyo3::exceptions::PyValueError>(py));
        let code = std::ffi::CString::new("chse_py.Chain(40, 10)").unwrap();
        let err = py.eval(&code, Some(g), None).unwrap_err();
        assert!(err.is_instance_of::<pyo3::exceptions::PyMemoryError>(py));
    });
}
