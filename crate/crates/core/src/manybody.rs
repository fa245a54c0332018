//! Fibonacci drives of an Ising-type spin chain: exact gate application on
//! state vectors, window-parallel moment accumulation, full-system Δ^(k) and
//! projected-ensemble observables.
//!
//! Site 1 is the most significant bit of a basis index and `|0⟩` is the `Z = +1`
//! state.

use nalgebra::{Complex, DMatrix};
use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bigmat::{CMatrix, Cplx};
use crate::drive::{block_unitaries, DecayPoint, DriveSpec};
use crate::error::{Error, Result};
use crate::haar::{haar_moment_state, sample_haar_state, MomentState, MAX_DENSE_SIDE};
use crate::precision::PrecisionPolicy;
use crate::words::{fib_word_concat, zeckendorf};

pub type C64 = Complex<f64>;

const D: PrecisionPolicy = PrecisionPolicy::Double;

/// Largest chain with dense gates and Hamiltonians.
pub const DENSE_MAX_L: usize = 10;
/// Largest chain whose Zeckendorf blocks are stored as dense matrices.
pub const ZECKENDORF_DENSE_MAX_L: usize = 8;
/// Largest chain held as a state vector.
pub const STATE_MAX_L: usize = 24;
/// Projected-ensemble outcomes below this probability are dropped.
pub const PROJECTED_CUTOFF: f64 = 1e-14;
pub const WINDOWS_PER_DECADE: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub l: usize,
    pub tau: f64,
    pub edge: f64,
    pub m: u32,
}

impl ChainSpec {
    pub fn new(l: usize) -> Result<Self> {
        let s = Self { l, tau: 1.0, edge: 0.1, m: 1 };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.l < 2 {
            return Err(Error::InvalidArgument(format!("chain needs L >= 2, got {}", self.l)));
        }
        if self.l > STATE_MAX_L {
            return Err(Error::ResourceLimit(format!("state vector of 2^{} amplitudes", self.l)));
        }
        if self.m == 0 {
            return Err(Error::InvalidArgument("word order m must be at least 1".into()));
        }
        if !self.tau.is_finite() || !self.edge.is_finite() {
            return Err(Error::InvalidArgument("tau and edge coefficient must be finite".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        1 << self.l
    }
}

/// `h(z) = Σ z_j + Σ z_{j−1} z_j + edge · z_L` for the spin configuration of
/// basis index `idx`, i.e. the diagonal of `H1`.
pub fn ising_energy(spec: &ChainSpec, idx: usize) -> f64 {
    let l = spec.l;
    let z = |j: usize| if (idx >> (l - j)) & 1 == 0 { 1.0 } else { -1.0 };
    let mut e = 0.0;
    for j in 1..=l {
        e += z(j);
        if j >= 2 {
            e += z(j - 1) * z(j);
        }
    }
    e + spec.edge * z(l)
}

fn require_dense(spec: &ChainSpec, max_l: usize) -> Result<()> {
    spec.validate()?;
    if spec.l > max_l {
        return Err(Error::ResourceLimit(format!("dense 2^{} operators above L = {max_l}", spec.l)));
    }
    Ok(())
}

/// Dense `(H0, H1)`, built term by term from Pauli strings.
pub fn chain_hamiltonians(spec: &ChainSpec) -> Result<(CMatrix<f64>, CMatrix<f64>)> {
    require_dense(spec, 12)?;
    let (l, n) = (spec.l, spec.dim());
    let flip = |j: usize| 1usize << (l - j);
    let mut h0 = CMatrix::<f64>::zeros(n, n, &D);
    let mut h1 = CMatrix::<f64>::zeros(n, n, &D);
    for i in 0..n {
        h1.set(i, i, Cplx::new(ising_energy(spec, i), 0.0));
        let mut add = |mask: usize, c: f64| {
            let j = i ^ mask;
            let v = h0.get(i, j).re + c;
            h0.set(i, j, Cplx::new(v, 0.0));
        };
        for j in 1..=l {
            add(flip(j), 1.0);
            if j >= 2 {
                add(flip(j - 1) | flip(j), 1.0);
            }
        }
        add(flip(l), spec.edge);
    }
    Ok((h0, h1))
}

/// In-place unnormalized Walsh-Hadamard transform.
pub fn fwht(v: &mut [C64]) {
    let n = v.len();
    let mut h = 1;
    while h < n {
        for block in (0..n).step_by(2 * h) {
            for i in block..block + h {
                let (a, b) = (v[i], v[i + h]);
                v[i] = a + b;
                v[i + h] = a - b;
            }
        }
        h *= 2;
    }
}

/// Applies chain gates to state vectors. `A1 = diag(e^{−iτ h(z)})`, and since
/// `H0 = H^{⊗L} H1 H^{⊗L}`, `A0` is the same diagonal between two Hadamard
/// layers. Both factorizations are exact.
#[derive(Clone, Debug)]
pub struct ChainPropagator {
    pub spec: ChainSpec,
    phases: Vec<C64>,
    word: Vec<u8>,
    /// Dense `U(F_c)` blocks indexed by `c − 1`, for the Zeckendorf fast-forward.
    blocks: Option<Vec<CMatrix<f64>>>,
}

impl ChainPropagator {
    /// Prepares gates and the first `t_max` drive symbols.
    pub fn new(spec: ChainSpec, t_max: usize) -> Result<Self> {
        spec.validate()?;
        let phases = gate_phases(&spec);
        let word = if t_max == 0 { Vec::new() } else { fib_word_concat(spec.m, t_max)?.symbols };
        let mut prop = Self { spec, phases, word, blocks: None };
        if spec.m == 1 && spec.l <= ZECKENDORF_DENSE_MAX_L && t_max >= 2 {
            let (a0, a1) = chain_gates(&spec)?;
            let drive = DriveSpec::new(1, a0, a1)?;
            let top = zeckendorf(&BigUint::from(t_max))?[0];
            prop.blocks = Some(block_unitaries(&drive, top - 1)?);
        }
        Ok(prop)
    }

    pub fn t_max(&self) -> usize {
        self.word.len()
    }

    pub fn symbols(&self) -> &[u8] {
        &self.word
    }

    /// One gate: `A_symbol ψ`.
    pub fn apply(&self, symbol: u8, psi: &mut [C64]) {
        apply_gate(&self.phases, symbol, psi);
    }

    /// Applies `ω_{from+1} … ω_to`.
    pub fn evolve(&self, psi: &mut [C64], from: usize, to: usize) -> Result<()> {
        if to > self.word.len() || from > to {
            return Err(Error::InvalidArgument(format!("steps {from}..{to} outside the prepared word of {}", self.word.len())));
        }
        for &s in &self.word[from..to] {
            self.apply(s, psi);
        }
        Ok(())
    }

    /// `U(t) ψ0`: Zeckendorf blocks when available, otherwise gate by gate.
    pub fn fast_forward(&self, psi0: &[C64], t: usize) -> Result<Vec<C64>> {
        let mut psi = psi0.to_vec();
        if t == 0 {
            return Ok(psi);
        }
        match &self.blocks {
            Some(blocks) if t <= self.word.len() => {
                for c in zeckendorf(&BigUint::from(t))? {
                    psi = matvec(&blocks[c - 1], &psi);
                }
            }
            _ => self.evolve(&mut psi, 0, t)?,
        }
        Ok(psi)
    }

    /// Dense `U(t)` for each requested time, by evolving every basis vector.
    pub fn unitaries_stepwise(&self, times: &[usize]) -> Result<Vec<CMatrix<f64>>> {
        require_dense(&self.spec, DENSE_MAX_L)?;
        let n = self.spec.dim();
        let mut order: Vec<usize> = (0..times.len()).collect();
        order.sort_by_key(|&i| times[i]);
        let cols: Vec<Vec<Vec<C64>>> = (0..n)
            .into_par_iter()
            .map(|c| {
                let mut psi = vec![C64::new(0.0, 0.0); n];
                psi[c] = C64::new(1.0, 0.0);
                let mut now = 0;
                let mut snaps = vec![Vec::new(); times.len()];
                for &i in &order {
                    self.evolve(&mut psi, now, times[i])?;
                    now = times[i];
                    snaps[i] = psi.clone();
                }
                Ok(snaps)
            })
            .collect::<Result<_>>()?;
        Ok((0..times.len())
            .map(|i| {
                let mut u = CMatrix::<f64>::zeros(n, n, &D);
                for (c, col) in cols.iter().enumerate() {
                    for (r, z) in col[i].iter().enumerate() {
                        u.set(r, c, Cplx::new(z.re, z.im));
                    }
                }
                u
            })
            .collect())
    }
}

fn gate_phases(spec: &ChainSpec) -> Vec<C64> {
    (0..spec.dim()).map(|i| C64::from_polar(1.0, -spec.tau * ising_energy(spec, i))).collect()
}

fn apply_gate(phases: &[C64], symbol: u8, psi: &mut [C64]) {
    if symbol == 1 {
        for (x, p) in psi.iter_mut().zip(phases) {
            *x *= p;
        }
    } else {
        fwht(psi);
        let scale = 1.0 / psi.len() as f64;
        for (x, p) in psi.iter_mut().zip(phases) {
            *x *= p * scale;
        }
        fwht(psi);
    }
}

fn matvec(a: &CMatrix<f64>, v: &[C64]) -> Vec<C64> {
    let n = a.cols();
    a.data()
        .chunks(n)
        .map(|row| row.iter().zip(v).fold(C64::new(0.0, 0.0), |acc, (x, y)| acc + C64::new(x.re, x.im) * y))
        .collect()
}

/// Dense `(A0, A1)` from the factorized gates.
pub fn chain_gates(spec: &ChainSpec) -> Result<(CMatrix<f64>, CMatrix<f64>)> {
    require_dense(spec, DENSE_MAX_L)?;
    let n = spec.dim();
    let phases = gate_phases(spec);
    let mut a0 = CMatrix::<f64>::zeros(n, n, &D);
    let mut a1 = CMatrix::<f64>::zeros(n, n, &D);
    for c in 0..n {
        let mut e = vec![C64::new(0.0, 0.0); n];
        e[c] = C64::new(1.0, 0.0);
        apply_gate(&phases, 0, &mut e);
        for (r, z) in e.iter().enumerate() {
            a0.set(r, c, Cplx::new(z.re, z.im));
        }
        let p = phases[c];
        a1.set(c, c, Cplx::new(p.re, p.im));
    }
    Ok((a0, a1))
}

/// `|φ⟩^{⊗L}` for a Haar-random qubit state `φ`.
pub fn random_product_state<G: Rng + ?Sized>(l: usize, rng: &mut G) -> Vec<C64> {
    let phi: Vec<C64> = sample_haar_state::<f64, _>(2, rng, &D).iter().map(|z| C64::new(z.re, z.im)).collect();
    product_state(&vec![phi; l])
}

/// `|φ_1⟩ ⊗ … ⊗ |φ_L⟩`, site 1 first.
pub fn product_state(sites: &[Vec<C64>]) -> Vec<C64> {
    let mut psi = vec![C64::new(1.0, 0.0)];
    for phi in sites {
        psi = psi.iter().flat_map(|a| phi.iter().map(move |b| a * b)).collect();
    }
    psi
}

/// `n` random product states from `seed`.
pub fn random_product_states(l: usize, n: usize, seed: u64) -> Vec<Vec<C64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| random_product_state(l, &mut rng)).collect()
}

/// Windows `[T_j, T_{j+1})` covering `[0, t_max)`, logarithmically spaced with
/// `per_decade` boundaries per decade.
pub fn log_windows(t_max: usize, per_decade: usize) -> Result<Vec<(usize, usize)>> {
    if t_max == 0 || per_decade == 0 {
        return Err(Error::InvalidArgument("need t_max >= 1 and at least one window per decade".into()));
    }
    let mut edges = vec![0usize, 1];
    let mut i = 1;
    loop {
        let e = 10f64.powf(i as f64 / per_decade as f64).round() as usize;
        if e >= t_max {
            break;
        }
        if e > *edges.last().unwrap() {
            edges.push(e);
        }
        i += 1;
    }
    if *edges.last().unwrap() < t_max {
        edges.push(t_max);
    }
    edges.dedup();
    Ok(edges.windows(2).map(|w| (w[0], w[1])).collect())
}

fn check_windows(windows: &[(usize, usize)], t_max: usize) -> Result<()> {
    let mut prev = 0;
    for (i, &(a, b)) in windows.iter().enumerate() {
        if a >= b || (i == 0 && a != 0) || (i > 0 && a != prev) || b > t_max {
            return Err(Error::InvalidArgument(format!("windows must tile [0, T) in order; bad window {i}: [{a}, {b})")));
        }
        prev = b;
    }
    Ok(())
}

/// `ψ(t)` for every `t` in the windows. Each window starts from a fast-forwarded
/// state and is evolved independently; results are concatenated in order.
pub fn trajectory(prop: &ChainPropagator, psi0: &[C64], windows: &[(usize, usize)]) -> Result<Vec<Vec<C64>>> {
    check_windows(windows, prop.t_max().max(1))?;
    let parts: Vec<Vec<Vec<C64>>> = windows
        .par_iter()
        .map(|&(a, b)| {
            let mut psi = prop.fast_forward(psi0, a)?;
            let mut out = Vec::with_capacity(b - a);
            for t in a..b {
                if t > a {
                    prop.apply(prop.word[t - 1], &mut psi);
                }
                out.push(psi.clone());
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(parts.into_iter().flatten().collect())
}

fn replicate_c(psi: &[C64], k: usize) -> Vec<C64> {
    let mut v = vec![C64::new(1.0, 0.0)];
    for _ in 0..k {
        v = v.iter().flat_map(|a| psi.iter().map(move |b| a * b)).collect();
    }
    v
}

/// `Σ_t w |v_t⟩⟨v_t|` accumulated into a row-major buffer.
fn accumulate(acc: &mut [C64], v: &[C64], w: f64) {
    let n = v.len();
    for (i, vi) in v.iter().enumerate() {
        let vi = vi * w;
        let row = &mut acc[i * n..(i + 1) * n];
        for (x, vj) in row.iter_mut().zip(v) {
            *x += vi * vj.conj();
        }
    }
}

fn to_cmatrix(n: usize, data: &[C64]) -> Result<CMatrix<f64>> {
    CMatrix::from_vec(n, n, data.iter().map(|z| Cplx::new(z.re, z.im)).collect(), &D)
}

fn moment_side(spec: &ChainSpec, k: usize) -> Result<usize> {
    let side = (spec.dim() as u128).checked_pow(k as u32).filter(|&s| s <= MAX_DENSE_SIDE as u128);
    side.map(|s| s as usize).ok_or_else(|| {
        Error::ResourceLimit(format!("dense full-system moment of side 2^{} above {MAX_DENSE_SIDE}", spec.l * k))
    })
}

/// Per-window moments and the cumulative Δ^(k) after each window.
#[derive(Clone, Debug)]
pub struct WindowedMoments {
    pub windows: Vec<(usize, usize)>,
    pub moments: Vec<MomentState<f64>>,
    /// Length-weighted average over `[0, T_{j+1})`.
    pub cumulative: MomentState<f64>,
    pub cumulative_delta: Vec<f64>,
}

/// Dense windowed accumulation of `(1/len) Σ_t (|ψ(t)⟩⟨ψ(t)|)^{⊗k}`.
pub fn windowed_moment_series(prop: &ChainPropagator, k: usize, psi0: &[C64], windows: &[(usize, usize)]) -> Result<WindowedMoments> {
    let side = moment_side(&prop.spec, k)?;
    check_windows(windows, prop.t_max().max(1))?;
    let d = prop.spec.dim();
    let sums: Vec<Vec<C64>> = windows
        .par_iter()
        .map(|&(a, b)| {
            let mut psi = prop.fast_forward(psi0, a)?;
            let mut acc = vec![C64::new(0.0, 0.0); side * side];
            for t in a..b {
                if t > a {
                    prop.apply(prop.word[t - 1], &mut psi);
                }
                accumulate(&mut acc, &replicate_c(&psi, k), 1.0);
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let haar = haar_moment_state::<f64>(d, k, &D)?;
    let mut total = vec![C64::new(0.0, 0.0); side * side];
    let mut moments = Vec::with_capacity(windows.len());
    let mut cumulative_delta = Vec::with_capacity(windows.len());
    let mut cumulative = None;
    for (&(a, b), sum) in windows.iter().zip(&sums) {
        let len = (b - a) as f64;
        let w: Vec<C64> = sum.iter().map(|z| z / len).collect();
        moments.push(MomentState::new(d, k, to_cmatrix(side, &w)?)?);
        for (x, y) in total.iter_mut().zip(sum) {
            *x += y;
        }
        let avg: Vec<C64> = total.iter().map(|z| z / b as f64).collect();
        let rho = MomentState::new(d, k, to_cmatrix(side, &avg)?)?;
        cumulative_delta.push(rho.trace_distance(&haar)?);
        cumulative = Some(rho);
    }
    let cumulative = cumulative.ok_or_else(|| Error::InvalidArgument("no windows".into()))?;
    Ok(WindowedMoments { windows: windows.to_vec(), moments, cumulative, cumulative_delta })
}

/// `(1/T) Σ_{t<T} (|ψ(t)⟩⟨ψ(t)|)^{⊗k}` in one sequential pass.
pub fn single_pass_moment(prop: &ChainPropagator, k: usize, psi0: &[C64], t: usize) -> Result<MomentState<f64>> {
    let side = moment_side(&prop.spec, k)?;
    if t == 0 || t > prop.t_max() {
        return Err(Error::InvalidArgument(format!("T = {t} outside 1..={}", prop.t_max())));
    }
    let mut psi = psi0.to_vec();
    let mut acc = vec![C64::new(0.0, 0.0); side * side];
    for s in 0..t {
        if s > 0 {
            prop.apply(prop.word[s - 1], &mut psi);
        }
        accumulate(&mut acc, &replicate_c(&psi, k), 1.0 / t as f64);
    }
    MomentState::new(prop.spec.dim(), k, to_cmatrix(side, &acc)?)
}

/// Dimension of the symmetric subspace of `(C^d)^{⊗k}`.
pub fn sym_dim(d: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (d + i) as f64 / (i + 1) as f64)
}

/// Δ^(k) of the uniform average over `states` against the Haar moment, from the
/// Gram kernel `G_{st} = ⟨ψ_s|ψ_t⟩^k / T`. The average lives in the symmetric
/// subspace, where the Haar moment is `P_sym / D_k`; the nonzero spectrum of
/// the average equals that of `G`, so
/// `‖ρ_T − P_sym/D_k‖₁ = Σ_{i<r} |g_i − 1/D_k| + (D_k − r)/D_k`, `r = min(T, D_k)`.
pub fn gram_delta(states: &[Vec<C64>], k: usize) -> Result<f64> {
    let t = states.len();
    if t == 0 || k == 0 {
        return Err(Error::InvalidArgument("need at least one state and k >= 1".into()));
    }
    let dk = sym_dim(states[0].len(), k);
    let mut g = DMatrix::<C64>::zeros(t, t);
    let rows: Vec<Vec<C64>> = (0..t)
        .into_par_iter()
        .map(|s| {
            (0..=s)
                .map(|u| {
                    let ov = states[s].iter().zip(&states[u]).fold(C64::new(0.0, 0.0), |a, (x, y)| a + x.conj() * y);
                    ov.powu(k as u32) / t as f64
                })
                .collect()
        })
        .collect();
    for (s, row) in rows.iter().enumerate() {
        for (u, v) in row.iter().enumerate() {
            g[(s, u)] = *v;
            g[(u, s)] = v.conj();
        }
    }
    let mut vals: Vec<f64> = g.symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(|a, b| b.total_cmp(a));
    let r = (t as f64).min(dk) as usize;
    let tail = (dk - r as f64) / dk;
    let head: f64 = vals[..r].iter().map(|g| (g - 1.0 / dk).abs()).sum();
    Ok(0.5 * (head + tail))
}

/// Converts `(t, Δ per state)` rows into decay points with the mean Δ.
pub fn decay_points(rows: &[(usize, Vec<f64>)]) -> Vec<DecayPoint> {
    rows.iter()
        .map(|(t, per)| {
            let mean = per.iter().sum::<f64>() / per.len() as f64;
            DecayPoint {
                n: None,
                t: BigUint::from(*t),
                ln_t: (*t as f64).ln(),
                delta: mean.to_string(),
                ln_delta: mean.ln(),
                ln_delta_per_state: per.iter().map(|x| x.ln()).collect(),
                log10_epsilon: None,
                bits: 53,
            }
        })
        .collect()
}

/// Log-spaced checkpoint times in `[t_min, t_max]`.
pub fn log_checkpoints(t_min: usize, t_max: usize, per_decade: usize) -> Vec<usize> {
    let (lo, hi) = ((t_min.max(1) as f64).log10(), (t_max as f64).log10());
    let n = ((hi - lo) * per_decade as f64).ceil().max(0.0) as usize;
    let mut out: Vec<usize> = (0..=n)
        .map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / n.max(1) as f64).round() as usize)
        .collect();
    out.dedup();
    out
}

/// Full-system Δ^(k) at each checkpoint, averaged over initial states.
pub fn manybody_delta_series(
    prop: &ChainPropagator,
    k: usize,
    states: &[Vec<C64>],
    checkpoints: &[usize],
    windows: &[(usize, usize)],
) -> Result<Vec<DecayPoint>> {
    if states.is_empty() {
        return Err(Error::InvalidArgument("no initial states".into()));
    }
    let t_end = windows.last().map_or(0, |w| w.1);
    if checkpoints.iter().any(|&t| t == 0 || t > t_end) {
        return Err(Error::InvalidArgument(format!("checkpoints must lie in 1..={t_end}")));
    }
    let per_state: Vec<Vec<f64>> = states
        .iter()
        .map(|psi0| {
            let traj = trajectory(prop, psi0, windows)?;
            checkpoints.par_iter().map(|&t| gram_delta(&traj[..t], k)).collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let rows: Vec<(usize, Vec<f64>)> =
        checkpoints.iter().enumerate().map(|(i, &t)| (t, per_state.iter().map(|s| s[i]).collect())).collect();
    Ok(decay_points(&rows))
}

/// Outcomes of a computational-basis measurement of subsystem B (the last
/// `L − N_A` sites) and the conditional states of A.
#[derive(Clone, Debug)]
pub struct ProjectedEnsemble {
    pub d_a: usize,
    pub d_b: usize,
    pub probs: Vec<f64>,
    pub states: Vec<Vec<C64>>,
    /// Total probability of dropped outcomes.
    pub leakage: f64,
}

pub fn projected_ensemble(psi: &[C64], n_a: usize) -> Result<ProjectedEnsemble> {
    let n = psi.len();
    if !n.is_power_of_two() || n < 2 {
        return Err(Error::InvalidArgument(format!("state of length {n} is not a qubit register")));
    }
    let l = n.trailing_zeros() as usize;
    if n_a == 0 || n_a >= l {
        return Err(Error::InvalidArgument(format!("need 1 <= N_A < L = {l}, got {n_a}")));
    }
    let (d_a, d_b) = (1usize << n_a, 1usize << (l - n_a));
    let mut probs = Vec::new();
    let mut states = Vec::new();
    let mut leakage = 0.0;
    for beta in 0..d_b {
        let v: Vec<C64> = (0..d_a).map(|a| psi[a * d_b + beta]).collect();
        let p: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        if p < PROJECTED_CUTOFF {
            leakage += p;
            continue;
        }
        let s = 1.0 / p.sqrt();
        states.push(v.iter().map(|z| z * s).collect());
        probs.push(p);
    }
    let kept: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= kept;
    }
    Ok(ProjectedEnsemble { d_a, d_b, probs, states, leakage })
}

/// `Σ_β p_β (|ψ_β⟩⟨ψ_β|)^{⊗k}` on A.
pub fn projected_moment(ens: &ProjectedEnsemble, k: usize) -> Result<MomentState<f64>> {
    let side = (ens.d_a as u128).checked_pow(k as u32).filter(|&s| s <= MAX_DENSE_SIDE as u128);
    let side = side.ok_or_else(|| Error::ResourceLimit(format!("projected moment of side {}^{k}", ens.d_a)))? as usize;
    let mut acc = vec![C64::new(0.0, 0.0); side * side];
    for (p, psi) in ens.probs.iter().zip(&ens.states) {
        accumulate(&mut acc, &replicate_c(psi, k), *p);
    }
    MomentState::new(ens.d_a, k, to_cmatrix(side, &acc)?)
}

/// `½‖ρ_E^(k) − ρ_Haar^(k)‖₁` on A.
pub fn delta_e(moment: &MomentState<f64>) -> Result<f64> {
    moment.trace_distance(&haar_moment_state(moment.d, moment.k, &D)?)
}

/// Mean Δ_E over Haar-random global states of dimension `d_A d_B`.
pub fn haar_projected_reference(d_a: usize, d_b: usize, k: usize, n_samples: usize, seed: u64) -> Result<f64> {
    if !d_a.is_power_of_two() || !d_b.is_power_of_two() || d_a < 2 {
        return Err(Error::InvalidArgument(format!("d_A = {d_a}, d_B = {d_b} must be powers of two with d_A >= 2")));
    }
    if n_samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let n_a = d_a.trailing_zeros() as usize;
    let vals: Vec<f64> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let psi: Vec<C64> =
                sample_haar_state::<f64, _>(d_a * d_b, &mut rng, &D).iter().map(|z| C64::new(z.re, z.im)).collect();
            if d_b == 1 {
                let rho = crate::haar::pure_moment(&to_cplx(&psi), k, &D)?;
                return delta_e(&rho);
            }
            delta_e(&projected_moment(&projected_ensemble(&psi, n_a)?, k)?)
        })
        .collect::<Result<_>>()?;
    Ok(vals.iter().sum::<f64>() / n_samples as f64)
}

fn to_cplx(psi: &[C64]) -> Vec<Cplx<f64>> {
    psi.iter().map(|z| Cplx::new(z.re, z.im)).collect()
}

/// One time of a deep-thermalization series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeepThermPoint {
    pub t: usize,
    /// Mean over initial states.
    pub delta_e: f64,
    /// Largest dropped probability mass over initial states.
    pub leakage: f64,
}

/// Δ_E^(k)(t) at every `t ∈ [0, t_max]`, averaged over initial states.
pub fn deep_therm_series(prop: &ChainPropagator, k: usize, n_a: usize, states: &[Vec<C64>], t_max: usize) -> Result<Vec<DeepThermPoint>> {
    if states.is_empty() {
        return Err(Error::InvalidArgument("no initial states".into()));
    }
    if t_max > prop.t_max() {
        return Err(Error::InvalidArgument(format!("t_max = {t_max} beyond the prepared word of {}", prop.t_max())));
    }
    let per_state: Vec<Vec<(f64, f64)>> = states
        .par_iter()
        .map(|psi0| {
            let mut psi = psi0.clone();
            let mut out = Vec::with_capacity(t_max + 1);
            for t in 0..=t_max {
                if t > 0 {
                    prop.apply(prop.word[t - 1], &mut psi);
                }
                let ens = projected_ensemble(&psi, n_a)?;
                out.push((delta_e(&projected_moment(&ens, k)?)?, ens.leakage));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let n = states.len() as f64;
    Ok((0..=t_max)
        .map(|t| DeepThermPoint {
            t,
            delta_e: per_state.iter().map(|s| s[t].0).sum::<f64>() / n,
            leakage: per_state.iter().map(|s| s[t].1).fold(0.0, f64::max),
        })
        .collect())
}
