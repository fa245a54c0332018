//! Time-independent evolution: the infinite-time two-replica state, the
//! dephasing channel, and the lower bound `B(d)` on its distance from Haar.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bigmat::{eig_hermitian, kron, CMatrix, Cplx};
use crate::error::{Error, Result};
use crate::haar::{haar_moment_state, sample_haar_state, MomentState};
use crate::precision::PrecisionPolicy;

const D: PrecisionPolicy = PrecisionPolicy::Double;

/// Relative tolerance on energy sums: `|ΔE| ≤ ENERGY_TOL · ‖H‖_∞`.
pub const ENERGY_TOL: f64 = 1e-10;

/// Slack allowed in the certificate's inequality chain.
pub const CHAIN_TOL: f64 = 1e-12;

/// `B(d) = 1/(d+1) − √(1/(2d(d+1)))`.
pub fn bound_b(d: usize) -> Result<f64> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("B(d) needs d >= 2, got {d}")));
    }
    let d = d as f64;
    Ok(1.0 / (d + 1.0) - (1.0 / (2.0 * d * (d + 1.0))).sqrt())
}

/// A Hamiltonian with its eigendecomposition and an initial state expanded in
/// the eigenbasis.
#[derive(Clone, Debug)]
pub struct HamiltonianSpec {
    pub h: CMatrix<f64>,
    /// Ascending.
    pub energies: Vec<f64>,
    /// Column `α` is `|α⟩`.
    pub vectors: CMatrix<f64>,
    /// `c_α = ⟨α|ψ⟩`.
    pub overlaps: Vec<Cplx<f64>>,
}

impl HamiltonianSpec {
    pub fn new(h: CMatrix<f64>, psi: &[Cplx<f64>]) -> Result<Self> {
        let d = h.require_square()?;
        if psi.len() != d {
            return Err(Error::DimensionMismatch(format!("state of dimension {} for d = {d}", psi.len())));
        }
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidArgument(format!("initial state is not normalized (norm^2 = {norm})")));
        }
        let eig = eig_hermitian(&h, true)?;
        let vectors = eig.vectors.expect("eigenvectors requested");
        let overlaps = vectors.adjoint().matvec(psi)?;
        let spec = Self { h, energies: eig.values, vectors, overlaps };
        let err = spec.reconstruction_error()?;
        let scale = spec.norm().max(1.0);
        if err > 1e-10 * scale {
            return Err(Error::InvalidArgument(format!("eigen-reconstruction error {err:e}")));
        }
        Ok(spec)
    }

    /// Random instance: GUE-like `H = (G + G†)/2` and a Haar-random state.
    pub fn random<G: Rng + ?Sized>(d: usize, rng: &mut G) -> Result<Self> {
        let mut g = CMatrix::<f64>::zeros(d, d, &D);
        for i in 0..d {
            for j in 0..d {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                g.set(i, j, Cplx::new(re, im));
            }
        }
        let h = g.add(&g.adjoint())?.scale(&0.5);
        let psi = sample_haar_state::<f64, _>(d, rng, &D);
        Self::new(h, &psi)
    }

    pub fn d(&self) -> usize {
        self.energies.len()
    }

    /// `‖H‖_∞ = max |E_α|`.
    pub fn norm(&self) -> f64 {
        self.energies.iter().fold(0.0f64, |a, e| a.max(e.abs()))
    }

    /// `max |V diag(E) V† − H|`.
    pub fn reconstruction_error(&self) -> Result<f64> {
        let e = CMatrix::from_real_diag(&self.energies, &D);
        let r = self.vectors.matmul(&e)?.matmul(&self.vectors.adjoint())?;
        r.max_abs_diff(&self.h)
    }

    /// `|c_α|²`.
    pub fn populations(&self) -> Vec<f64> {
        self.overlaps.iter().map(|c| c.norm_sqr()).collect()
    }

    fn two_copy_basis(&self) -> Result<CMatrix<f64>> {
        kron(&self.vectors, &self.vectors)
    }
}

/// Infinite-time average of `(e^{−iHt}|ψ⟩⟨ψ|e^{iHt})^{⊗2}`.
pub fn rho_inf_2(ham: &HamiltonianSpec) -> Result<MomentState<f64>> {
    let d = ham.d();
    let tol = ENERGY_TOL * ham.norm().max(f64::MIN_POSITIVE);
    let c = &ham.overlaps;
    let e = &ham.energies;
    let n = d * d;
    let mut rho = CMatrix::<f64>::zeros(n, n, &D);
    for a in 0..d {
        for b in 0..d {
            let cab = &c[a] * &c[b];
            for a2 in 0..d {
                for b2 in 0..d {
                    if (e[a] + e[b] - e[a2] - e[b2]).abs() <= tol {
                        let v = &cab * &(&c[a2] * &c[b2]).conj();
                        rho.set(a * d + b, a2 * d + b2, v);
                    }
                }
            }
        }
    }
    let w = ham.two_copy_basis()?;
    MomentState::new(d, 2, w.matmul(&rho)?.matmul(&w.adjoint())?)
}

fn keep_entry(d: usize, row: usize, col: usize) -> bool {
    let (a, b) = (row / d, row % d);
    let (a2, b2) = (col / d, col % d);
    (a == a2 && b == b2) || (a == b2 && b == a2)
}

/// Dephasing channel in the basis given by the columns of `basis`: keeps the
/// `|αβ⟩⟨αβ|` and `|αβ⟩⟨βα|` entries, i.e. pinches onto the blocks
/// `span{|αβ⟩, |βα⟩}`.
pub fn dephase2(rho: &MomentState<f64>, basis: &CMatrix<f64>) -> Result<MomentState<f64>> {
    if rho.k != 2 {
        return Err(Error::InvalidArgument(format!("dephasing acts on k = 2 moments, got k = {}", rho.k)));
    }
    let d = rho.d;
    if basis.rows() != d || basis.cols() != d {
        return Err(Error::DimensionMismatch(format!("basis is {}x{} for d = {d}", basis.rows(), basis.cols())));
    }
    let w = kron(basis, basis)?;
    let mut inner = w.adjoint().matmul(&rho.matrix)?.matmul(&w)?;
    let n = d * d;
    for i in 0..n {
        for j in 0..n {
            if !keep_entry(d, i, j) {
                inner.set(i, j, Cplx::zero(&D));
            }
        }
    }
    MomentState::new(d, 2, w.matmul(&inner)?.matmul(&w.adjoint())?)
}

/// The chain `Δ ≥ dephased ≥ diagonal ≥ B(d)` for one instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCertificate {
    pub d: usize,
    /// `½‖ρ_Haar^(2) − ρ∞^(2)‖₁`.
    pub delta: f64,
    /// `½ Σ_{αβ} | |c_α|²|c_β|² − (1+δ_{αβ})/(d(d+1)) |`.
    pub dephased: f64,
    /// `½ Σ_α | |c_α|⁴ − 2/(d(d+1)) |`.
    pub diagonal: f64,
    pub bound: f64,
}

impl BoundCertificate {
    /// `Δ − B(d)`.
    pub fn margin(&self) -> f64 {
        self.delta - self.bound
    }

    pub fn check(&self) -> Result<()> {
        let steps = [
            ("delta", self.delta, "dephased", self.dephased),
            ("dephased", self.dephased, "diagonal", self.diagonal),
            ("diagonal", self.diagonal, "B(d)", self.bound),
        ];
        for (an, a, bn, b) in steps {
            if a < b - CHAIN_TOL {
                return Err(Error::BoundViolated(format!("{an} = {a:e} < {bn} = {b:e} at d = {}", self.d)));
            }
        }
        Ok(())
    }
}

/// `½ Σ_{αβ} | p_α p_β − (1+δ_{αβ})/(d(d+1)) |` and its diagonal part.
pub fn dephased_sums(p: &[f64]) -> (f64, f64) {
    let d = p.len() as f64;
    let norm = d * (d + 1.0);
    let mut total = 0.0;
    let mut diag = 0.0;
    for (a, pa) in p.iter().enumerate() {
        for (b, pb) in p.iter().enumerate() {
            let haar = if a == b { 2.0 } else { 1.0 } / norm;
            let t = (pa * pb - haar).abs();
            total += t;
            if a == b {
                diag += t;
            }
        }
    }
    (0.5 * total, 0.5 * diag)
}

/// `Δ^(2)` of the infinite-time average, with the certified inequality chain.
pub fn delta2_time_independent(ham: &HamiltonianSpec) -> Result<BoundCertificate> {
    let d = ham.d();
    let rho = rho_inf_2(ham)?;
    let haar = haar_moment_state::<f64>(d, 2, &D)?;
    let delta = rho.trace_distance(&haar)?;
    let (dephased, diagonal) = dephased_sums(&ham.populations());
    let cert = BoundCertificate { d, delta, dephased, diagonal, bound: bound_b(d)? };
    cert.check()?;
    Ok(cert)
}

fn require_simplex(a: &[f64]) -> Result<()> {
    let sum: f64 = a.iter().sum();
    if a.is_empty() || a.iter().any(|&x| !(0.0..=1.0).contains(&x)) || (sum - 1.0).abs() > 1e-12 {
        return Err(Error::OffSimplex(format!("{a:?} (sum {sum})")));
    }
    Ok(())
}

/// `F(a) = Σ_n |a_n² − ξ²|`.
pub fn lemma_f(a: &[f64], xi: f64) -> Result<f64> {
    require_simplex(a)?;
    Ok(f_unchecked(a, xi))
}

fn f_unchecked(a: &[f64], xi: f64) -> f64 {
    let x2 = xi * xi;
    a.iter().map(|v| (v * v - x2).abs()).sum()
}

/// `ξ²(d − 1/ξ)`.
pub fn lemma_f_bound(d: usize, xi: f64) -> f64 {
    xi * xi * (d as f64 - 1.0 / xi)
}

/// Minimum of `F` over the simplex grid with spacing `1/⌈1/grid_step⌉`.
pub fn brute_min_f(d: usize, xi: f64, grid_step: f64) -> Result<f64> {
    if d < 1 {
        return Err(Error::InvalidArgument("need d >= 1".into()));
    }
    if !(grid_step > 0.0 && grid_step <= 0.01) {
        return Err(Error::InvalidArgument(format!("grid step {grid_step} outside (0, 0.01]")));
    }
    if !(xi >= 1.0 / d as f64 && xi <= 1.0) {
        return Err(Error::InvalidArgument(format!("xi = {xi} outside [1/d, 1]")));
    }
    let n = (1.0 / grid_step).round() as usize;
    let h = 1.0 / n as f64;
    let x2 = xi * xi;
    let term = |i: usize| {
        let v = i as f64 * h;
        (v * v - x2).abs()
    };
    // Minimum over compositions of `rest` into `parts` non-negative integers.
    fn go(parts: usize, rest: usize, term: &dyn Fn(usize) -> f64) -> f64 {
        if parts == 1 {
            return term(rest);
        }
        (0..=rest).map(|i| term(i) + go(parts - 1, rest - i, term)).fold(f64::INFINITY, f64::min)
    }
    if d == 1 {
        return Ok(term(n));
    }
    Ok((0..=n)
        .into_par_iter()
        .map(|i| term(i) + go(d - 1, n - i, &term))
        .reduce(|| f64::INFINITY, f64::min))
}
