//! Python bindings for the `chse` crate.

use num_bigint::BigUint;
use num_complex::Complex64;
use pyo3::exceptions::{PyMemoryError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use chse::cli::{coin_delta_series, CoinConfig};
use chse::drive::{decay_series, DriveRecipe, GateRecipe, Ladder};
use chse::haar::{haar_moment_state, mc_haar_moment};
use chse::manybody::{
    deep_therm_series, haar_projected_reference, log_checkpoints, log_windows, manybody_delta_series, random_product_states,
    ChainPropagator, ChainSpec, WINDOWS_PER_DECADE,
};
use chse::stationary::{delta2_time_independent, HamiltonianSpec};
use chse::sweep::{random_states, QubitAngles};
use chse::words::{code_rotation, fib_word_concat, zeckendorf};
use chse::{Error, PrecisionPolicy};

fn py_err(e: Error) -> PyErr {
    let msg = format!("[{}] {e}", e.category());
    match e.category() {
        "config" => PyValueError::new_err(msg),
        "resource" => PyMemoryError::new_err(msg),
        _ => PyRuntimeError::new_err(msg),
    }
}

fn policy(bits: u32) -> PyResult<PrecisionPolicy> {
    PrecisionPolicy::from_bits(bits).map_err(py_err)
}

/// Prefix of the generalized Fibonacci word as a string of `0`/`1`.
#[pyfunction]
#[pyo3(signature = (m, length, theta0 = 0.0))]
fn fib_word(m: u32, length: usize, theta0: f64) -> PyResult<String> {
    let w = if theta0 == 0.0 { fib_word_concat(m, length) } else { code_rotation(m, theta0, length) };
    Ok(w.map_err(py_err)?.to_string())
}

/// Zeckendorf indices `c` with `t = Σ F_c`, largest first.
#[pyfunction]
fn zeckendorf_indices(t: u64) -> PyResult<Vec<usize>> {
    zeckendorf(&BigUint::from(t)).map_err(py_err)
}

/// Dense k-th Haar moment of dimension `d`, as nested lists of complex numbers.
#[pyfunction]
fn haar_moment(d: usize, k: usize) -> PyResult<Vec<Vec<Complex64>>> {
    let rho = haar_moment_state::<f64>(d, k, &PrecisionPolicy::Double).map_err(py_err)?;
    let n = rho.matrix.rows();
    Ok((0..n).map(|i| (0..n).map(|j| { let z = rho.matrix.get(i, j); Complex64::new(z.re, z.im) }).collect()).collect())
}

/// Trace distance between a Monte Carlo estimate and the exact Haar moment.
#[pyfunction]
#[pyo3(signature = (d, k, samples, seed = 0))]
fn haar_mc_distance(d: usize, k: usize, samples: usize, seed: u64) -> PyResult<f64> {
    let exact = haar_moment_state::<f64>(d, k, &PrecisionPolicy::Double).map_err(py_err)?;
    let mc = mc_haar_moment(d, k, samples, seed).map_err(py_err)?;
    mc.trace_distance(&exact).map_err(py_err)
}

#[pyfunction]
fn bound_b(d: usize) -> PyResult<f64> {
    chse::stationary::bound_b(d).map_err(py_err)
}

/// `(delta, dephased_bound, bound)` for random time-independent instances.
#[pyfunction]
#[pyo3(signature = (d, instances, seed = 0))]
fn bound_check(d: usize, instances: usize, seed: u64) -> PyResult<Vec<(f64, f64, f64)>> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..instances)
        .map(|_| {
            let ham = HamiltonianSpec::random(d, &mut rng)?;
            let c = delta2_time_independent(&ham)?;
            Ok((c.delta, c.dephased, c.bound))
        })
        .collect::<Result<_, Error>>()
        .map_err(py_err)
}

/// Two-level (or Haar-random d-level) Fibonacci drive.
#[pyclass(module = "chse_py")]
struct Drive {
    recipe: DriveRecipe,
}

#[pymethods]
impl Drive {
    /// `gates` is `"haar"` (with `d`, `seed`), `"xz"` (with
    /// `theta_x`, `theta_z`) or `"qubit"` (with `theta1..3`); angles in units of π.
    #[new]
    #[pyo3(signature = (gates = "haar", m = 1, d = 2, seed = 0, theta_x = 0.39, theta_z = 0.39, theta1 = 0.3, theta2 = 0.33, theta3 = 0.5))]
    #[allow(clippy::too_many_arguments)]
    fn new(gates: &str, m: u32, d: usize, seed: u64, theta_x: f64, theta_z: f64, theta1: f64, theta2: f64, theta3: f64) -> PyResult<Self> {
        let gates = match gates {
            "haar" => GateRecipe::Haar { d, seed },
            "xz" => GateRecipe::Xz { theta_x, theta_z },
            "qubit" => GateRecipe::Qubit(QubitAngles::new(theta1, theta2, theta3).map_err(py_err)?),
            g => return Err(PyValueError::new_err(format!("unknown gate family `{g}`"))),
        };
        Ok(Self { recipe: DriveRecipe { m, gates, theta0: 0.0 } })
    }

    #[getter]
    fn d(&self) -> usize {
        self.recipe.gates.dim()
    }

    /// Δ^(k)(S_n) for `n = 1..=n_max`. `states` is a list of amplitude lists
    /// (complex numbers); by default `n_states` Haar-random states from
    /// `state_seed`. Returns a list of dicts with `n`, `t` (decimal string),
    /// `delta` and `delta_str`.
    #[pyo3(signature = (k, n_max, states = None, n_states = 1, state_seed = 1, bits = 256, escalate = true))]
    #[allow(clippy::too_many_arguments)]
    fn decay<'py>(
        &self,
        py: Python<'py>,
        k: usize,
        n_max: usize,
        states: Option<Vec<Vec<Complex64>>>,
        n_states: usize,
        state_seed: u64,
        bits: u32,
        escalate: bool,
    ) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let states = match states {
            Some(s) => s.iter().map(|v| v.iter().map(|z| (z.re, z.im)).collect()).collect(),
            None => random_states(self.recipe.gates.dim(), n_states, state_seed),
        };
        let ladder = Ladder { start: policy(bits)?, escalate, max_bits: 8192 };
        let series = py.detach(|| decay_series(&self.recipe, k, &states, n_max, &ladder)).map_err(py_err)?;
        series
            .points
            .iter()
            .map(|p| {
                let row = PyDict::new(py);
                row.set_item("n", p.n)?;
                row.set_item("t", p.t.to_string())?;
                row.set_item("delta", p.delta_f64())?;
                row.set_item("delta_str", &p.delta)?;
                row.set_item("bits", p.bits)?;
                Ok(row)
            })
            .collect()
    }
}

/// Mean Δ^(k)(T) of a Bernoulli(p) drive at log-spaced times.
#[pyfunction]
#[pyo3(signature = (p = 0.5, t_max = 1000, k = 2, d = 2, seed = 0, sequence_seed = 1, state_seed = 2, n_states = 10))]
#[allow(clippy::too_many_arguments)]
fn coin_baseline(py: Python<'_>, p: f64, t_max: usize, k: usize, d: usize, seed: u64, sequence_seed: u64, state_seed: u64, n_states: usize) -> PyResult<Vec<(usize, f64)>> {
    let cfg = CoinConfig { p, t_max, d, k, seed, sequence_seed, state_seed, n_states, per_decade: 10 };
    py.detach(|| coin_delta_series(&cfg)).map_err(py_err)
}

/// Fibonacci-driven Ising chain.
#[pyclass(module = "chse_py")]
struct Chain {
    prop: ChainPropagator,
}

#[pymethods]
impl Chain {
    #[new]
    #[pyo3(signature = (l, t_max, tau = 1.0, edge = 0.1))]
    fn new(l: usize, t_max: usize, tau: f64, edge: f64) -> PyResult<Self> {
        let spec = ChainSpec { l, tau, edge, m: 1 };
        spec.validate().map_err(py_err)?;
        Ok(Self { prop: ChainPropagator::new(spec, t_max).map_err(py_err)? })
    }

    #[getter]
    fn l(&self) -> usize {
        self.prop.spec.l
    }

    /// `(T, Δ^(k)(T))` at log-spaced checkpoints in `[t_min, t_max]`.
    #[pyo3(signature = (k, n_states = 10, seed = 0, t_min = 10, per_decade = 10))]
    fn delta_series(&self, py: Python<'_>, k: usize, n_states: usize, seed: u64, t_min: usize, per_decade: usize) -> PyResult<Vec<(String, f64)>> {
        let t_max = self.prop.t_max();
        let states = random_product_states(self.prop.spec.l, n_states, seed);
        let checkpoints = log_checkpoints(t_min, t_max, per_decade);
        let pts = py
            .detach(|| {
                let windows = log_windows(t_max, WINDOWS_PER_DECADE)?;
                manybody_delta_series(&self.prop, k, &states, &checkpoints, &windows)
            })
            .map_err(py_err)?;
        Ok(pts.iter().map(|p| (p.t.to_string(), p.delta_f64())).collect())
    }

    /// `(t, Δ_E, leakage)` for every `t ∈ [0, t_max]`.
    #[pyo3(signature = (n_a, k = 1, n_states = 10, seed = 0))]
    fn deep_therm(&self, py: Python<'_>, n_a: usize, k: usize, n_states: usize, seed: u64) -> PyResult<Vec<(usize, f64, f64)>> {
        let states = random_product_states(self.prop.spec.l, n_states, seed);
        let s = py.detach(|| deep_therm_series(&self.prop, k, n_a, &states, self.prop.t_max())).map_err(py_err)?;
        Ok(s.iter().map(|p| (p.t, p.delta_e, p.leakage)).collect())
    }
}

/// Monte Carlo Δ_E^(k) of the projected ensemble of Haar-random states.
#[pyfunction]
#[pyo3(signature = (d_a, d_b, k = 1, samples = 1000, seed = 0))]
fn projected_reference(py: Python<'_>, d_a: usize, d_b: usize, k: usize, samples: usize, seed: u64) -> PyResult<f64> {
    py.detach(|| haar_projected_reference(d_a, d_b, k, samples, seed)).map_err(py_err)
}

/// Runs the command-line front end; returns its exit status.
#[pyfunction]
fn run_cli(py: Python<'_>, args: Vec<String>) -> i32 {
    let argv: Vec<String> = std::iter::once("chse".to_string()).chain(args).collect();
    py.detach(|| chse::cli::run_from_args(argv))
}

#[pymodule]
pub fn chse_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(fib_word, m)?)?;
    m.add_function(wrap_pyfunction!(zeckendorf_indices, m)?)?;
    m.add_function(wrap_pyfunction!(haar_moment, m)?)?;
    m.add_function(wrap_pyfunction!(haar_mc_distance, m)?)?;
    m.add_function(wrap_pyfunction!(bound_b, m)?)?;
    m.add_function(wrap_pyfunction!(bound_check, m)?)?;
    m.add_function(wrap_pyfunction!(coin_baseline, m)?)?;
    m.add_function(wrap_pyfunction!(projected_reference, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    m.add_class::<Drive>()?;
    m.add_class::<Chain>()?;
    Ok(())
}
