//! Single-qubit drives over the angle grid: gates, decay exponents and their
//! convergence diagnostic.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bigmat::{expm_hermitian, CMatrix};
use crate::drive::{decay_series, DecayPoint, DriveRecipe, GateRecipe, Ladder};
use crate::error::{Error, Result};
use crate::haar::sample_haar_state;
use crate::precision::{PrecisionPolicy, Real};

pub use crate::fit::{powerlaw_fit, powerlaw_fit_state, FitResult, FitWindow};

/// Convergence threshold on ζ.
pub const ZETA_THRESHOLD: f64 = 0.1;

/// Gate angles in units of π, so that `0.5` is exactly `π/2` at any precision.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QubitAngles {
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
}

impl QubitAngles {
    pub fn new(theta1: f64, theta2: f64, theta3: f64) -> Result<Self> {
        if ![theta1, theta2, theta3].iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidArgument("qubit angles must be finite".into()));
        }
        Ok(Self { theta1, theta2, theta3 })
    }

    /// X–Z point `(θ_X, θ_Z)`, in units of π. Conjugating the X–Z pair
    /// `A0 = e^{−iθ_X X}`, `A1 = e^{−iθ_Z Z}` by a Hadamard on the qubit gives
    /// `U0 = e^{−iθ_X Z}`, `U1 = e^{−iθ_Z X}`, i.e. `θ1 = θ_X`, `θ2 = θ_Z`,
    /// `θ3 = π/2`, with `|0⟩ ↔ |+⟩`.
    pub fn from_xz(theta_x: f64, theta_z: f64) -> Self {
        Self { theta1: theta_x, theta2: theta_z, theta3: 0.5 }
    }
}

fn pauli<R: Real>(name: char, policy: &PrecisionPolicy) -> CMatrix<R> {
    let e = match name {
        'x' => [(0.0, 0.0), (1.0, 0.0), (1.0, 0.0), (0.0, 0.0)],
        'z' => [(1.0, 0.0), (0.0, 0.0), (0.0, 0.0), (-1.0, 0.0)],
        _ => unreachable!(),
    };
    CMatrix::from_f64(2, 2, &e, policy).expect("2x2")
}

/// `x π` evaluated in the working precision.
pub fn pi_times<R: Real>(x: f64, policy: &PrecisionPolicy) -> R {
    R::from_f64(x, policy).mul(&R::pi(policy))
}

/// `U0 = exp(−iθ1 Z)`, `U1 = exp(−iθ2 (cos θ3 Z + sin θ3 X))`.
pub fn qubit_gates<R: Real>(a: &QubitAngles, policy: &PrecisionPolicy) -> Result<(CMatrix<R>, CMatrix<R>)> {
    let th1 = pi_times::<R>(a.theta1, policy);
    let th2 = pi_times::<R>(a.theta2, policy);
    let th3 = pi_times::<R>(a.theta3, policy);
    let z = pauli::<R>('z', policy);
    let x = pauli::<R>('x', policy);
    let u0 = expm_hermitian(&z, &th1)?;
    let axis = z.scale(&th3.cos()).add(&x.scale(&th3.sin()))?;
    let u1 = expm_hermitian(&axis, &th2)?;
    Ok((u0, u1))
}

/// `A0 = exp(−iθ_X X)`, `A1 = exp(−iθ_Z Z)`;
/// angles in units of π.
pub fn xz_gates<R: Real>(theta_x: f64, theta_z: f64, policy: &PrecisionPolicy) -> Result<(CMatrix<R>, CMatrix<R>)> {
    let a0 = expm_hermitian(&pauli::<R>('x', policy), &pi_times(theta_x, policy))?;
    let a1 = expm_hermitian(&pauli::<R>('z', policy), &pi_times(theta_z, policy))?;
    Ok((a0, a1))
}

/// `ζ = |γ_n − γ_m| / |γ_m|` for an earlier fit `n` and a later fit `m`;
/// `None` when `γ_m = 0`.
pub fn zeta(fit_n: &FitResult, fit_m: &FitResult) -> Option<f64> {
    if fit_m.rate == 0.0 || !fit_m.rate.is_finite() || !fit_n.rate.is_finite() {
        return None;
    }
    Some((fit_n.rate - fit_m.rate).abs() / fit_m.rate.abs())
}

pub fn is_converged(z: Option<f64>) -> bool {
    z.is_some_and(|z| z < ZETA_THRESHOLD)
}

/// Grid of `(θ1, θ2)` at fixed `θ3` (units of π), row-major in `θ1`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AngleGrid {
    pub theta1: Vec<f64>,
    pub theta2: Vec<f64>,
    pub theta3: f64,
}

impl AngleGrid {
    pub fn points(&self) -> Vec<QubitAngles> {
        let mut out = Vec::with_capacity(self.theta1.len() * self.theta2.len());
        for &t1 in &self.theta1 {
            for &t2 in &self.theta2 {
                out.push(QubitAngles { theta1: t1, theta2: t2, theta3: self.theta3 });
            }
        }
        out
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GammaOptions {
    pub k: usize,
    pub n_max: usize,
    pub n_states: usize,
    pub seed: u64,
    pub ladder: Ladder,
    pub window: FitWindow,
    /// Index `n < n_max` of the earlier fit entering ζ.
    pub zeta_index: usize,
}

impl GammaOptions {
    pub fn new(k: usize, n_max: usize, seed: u64) -> Self {
        Self {
            k,
            n_max,
            n_states: 2,
            seed,
            ladder: Ladder { start: PrecisionPolicy::BigFloat { bits: 512 }, ..Ladder::default() },
            window: FitWindow::default(),
            zeta_index: 5 * n_max / 6,
        }
    }
}

/// One grid point of a γ map.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GammaPoint {
    pub angles: QubitAngles,
    pub k: usize,
    pub fit: Option<FitResult>,
    pub zeta: Option<f64>,
    pub converged: bool,
    pub final_delta: Option<String>,
    pub bits: u32,
    pub flags: Vec<String>,
}

/// `n_states` Haar-random qubit states from `seed`, as `(re, im)` pairs.
pub fn random_states(d: usize, n_states: usize, seed: u64) -> Vec<Vec<(f64, f64)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_states)
        .map(|_| sample_haar_state::<f64, _>(d, &mut rng, &PrecisionPolicy::Double).iter().map(|z| (z.re, z.im)).collect())
        .collect()
}

fn fit_prefix(points: &[DecayPoint], n_last: usize, window: FitWindow) -> Result<FitResult> {
    let cut = points.iter().take_while(|p| p.n.is_some_and(|n| n <= n_last)).count();
    powerlaw_fit(&points[..cut], window)
}

/// Evaluates one grid point; failures become flags.
pub fn gamma_point(angles: QubitAngles, opts: &GammaOptions) -> GammaPoint {
    let states = random_states(2, opts.n_states, opts.seed);
    let recipe = DriveRecipe { m: 1, gates: GateRecipe::Qubit(angles), theta0: 0.0 };
    let mut point = GammaPoint {
        angles,
        k: opts.k,
        fit: None,
        zeta: None,
        converged: false,
        final_delta: None,
        bits: opts.ladder.start.bits(),
        flags: Vec::new(),
    };
    let series = match decay_series(&recipe, opts.k, &states, opts.n_max, &opts.ladder) {
        Ok(s) => s,
        Err(e) => {
            point.flags.push(e.category().to_string());
            return point;
        }
    };
    point.bits = series.bits;
    if series.restarts > 0 {
        point.flags.push(format!("escalated:{}", series.restarts));
    }
    point.final_delta = series.points.last().map(|p| p.delta.clone());
    match powerlaw_fit(&series.points, opts.window) {
        Ok(fit) => {
            if fit.rate.abs() <= (3.0 * fit.sigma).max(0.02) {
                point.flags.push("gamma-zero".into());
            }
            if let Ok(early) = fit_prefix(&series.points, opts.zeta_index, opts.window) {
                point.zeta = zeta(&early, &fit);
            }
            point.converged = is_converged(point.zeta);
            if point.zeta.is_none() {
                point.flags.push("zeta-undefined".into());
            }
            point.fit = Some(fit);
        }
        Err(_) => point.flags.push("fit-failed".into()),
    }
    point
}

/// γ over a grid, evaluated in parallel and returned in grid order.
pub fn gamma_map(grid: &AngleGrid, opts: &GammaOptions) -> Result<Vec<GammaPoint>> {
    if opts.zeta_index >= opts.n_max {
        return Err(Error::InvalidArgument("zeta index must be below n_max".into()));
    }
    Ok(grid.points().into_par_iter().map(|a| gamma_point(a, opts)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bigmat::unitarity_error;
    
    const D: PrecisionPolicy = PrecisionPolicy::Double;

    #[test]
    fn gate_closed_forms() {
        let (u0, u1) = qubit_gates::<f64>(&QubitAngles::new(0.0, 0.5, 0.5).unwrap(), &D).unwrap();
        assert!(u0.max_abs_diff(&CMatrix::identity(2, &D)).unwrap() < 1e-15);
        // −iX.
        let want = CMatrix::from_f64(2, 2, &[(0.0, 0.0), (0.0, -1.0), (0.0, -1.0), (0.0, 0.0)], &D).unwrap();
        assert!(u1.max_abs_diff(&want).unwrap() < 1e-15);
        for a in [QubitAngles::new(0.3, 1.1, 0.4).unwrap(), QubitAngles::new(2.0, -0.7, 0.1).unwrap()] {
            let (u0, u1) = qubit_gates::<f64>(&a, &D).unwrap();
            for u in [u0, u1] {
                assert!(unitarity_error(&u).unwrap() < 1e-14);
                let det = u.det().unwrap();
                assert!((det.re - 1.0).abs() < 1e-14 && det.im.abs() < 1e-14);
            }
        }
    }

    #[test]
    fn xz_pair_is_hadamard_conjugate() {
        let (tx, tz) = (0.26, 0.39);
        let (a0, a1) = xz_gates::<f64>(tx, tz, &D).unwrap();
        let (u0, u1) = qubit_gates::<f64>(&QubitAngles::from_xz(tx, tz), &D).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let h = CMatrix::from_f64(2, 2, &[(s, 0.0), (s, 0.0), (s, 0.0), (-s, 0.0)], &D).unwrap();
        let conj = |a: &CMatrix<f64>| h.matmul(a).unwrap().matmul(&h).unwrap();
        assert!(conj(&a0).max_abs_diff(&u0).unwrap() < 1e-15);
        assert!(conj(&a1).max_abs_diff(&u1).unwrap() < 1e-15);
    }

    #[test]
    fn zeta_arithmetic() {
        let f = |rate| FitResult { rate, intercept: 0.0, residual: 0.0, sigma: 0.0, window: (0, 4), n_points: 4 };
        assert_eq!(zeta(&f(0.5), &f(0.5)), Some(0.0));
        assert!((zeta(&f(0.55), &f(0.5)).unwrap() - 0.1).abs() < 1e-12);
        assert!(is_converged(zeta(&f(0.52), &f(0.5))));
        assert!(!is_converged(zeta(&f(0.56), &f(0.5))));
        assert_eq!(zeta(&f(0.3), &f(0.0)), None);
    }
}
