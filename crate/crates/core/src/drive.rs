//! Fibonacci-drive evolution operators, time-averaging channels and the
//! trace-distance decay series.
//!
//! Times are counted in gate applications: `U(t) = A_{ω_t} ⋯ A_{ω_1}`, so the
//! first symbol acts first and sits rightmost.

use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bigmat::{kron, tensor_power, unitarity_error, unvec, CMatrix, Cplx};
use crate::error::{Error, Result};
use crate::haar::{fix_determinant, haar_moment_state, projector, replicate, sample_haar_unitary, MomentState};
use crate::precision::{BigReal, PrecisionPolicy, Real};
use crate::sweep::{xz_gates, qubit_gates, QubitAngles};
use crate::words::{code_rotation, fib_word_concat, gen_fib_numbers, zeckendorf, FibWord, WordOrigin};

/// Where the drive symbols come from.
#[derive(Clone, Debug)]
pub enum WordSource {
    /// Generalized Fibonacci word of the spec's order, coded from phase θ0.
    Sturmian { theta0: f64 },
    /// A fixed finite sequence (e.g. the coin-flip baseline).
    Explicit(Arc<Vec<u8>>),
}

/// Gate pair and word defining a drive, at one working precision.
#[derive(Clone, Debug)]
pub struct DriveSpec<R> {
    pub m: u32,
    pub d: usize,
    pub a0: CMatrix<R>,
    pub a1: CMatrix<R>,
    pub word: WordSource,
    policy: PrecisionPolicy,
}

impl<R: Real> DriveSpec<R> {
    /// Validates unitarity and fixes both determinants to one.
    pub fn new(m: u32, a0: CMatrix<R>, a1: CMatrix<R>) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("word order m must be at least 1".into()));
        }
        a0.check_policy(&a1)?;
        let d = a0.require_square()?;
        if a1.require_square()? != d {
            return Err(Error::DimensionMismatch(format!("gates of size {d} and {}", a1.rows())));
        }
        let policy = *a0.policy();
        let tol = 1e3 * policy.ulp() * d as f64;
        for (name, g) in [("A0", &a0), ("A1", &a1)] {
            let err = unitarity_error(g)?.to_f64();
            if err > tol {
                return Err(Error::InvalidArgument(format!("{name} is not unitary (drift {err:e})")));
            }
        }
        let a0 = fix_determinant(&a0)?;
        let a1 = fix_determinant(&a1)?;
        Ok(Self { m, d, a0, a1, word: WordSource::Sturmian { theta0: 0.0 }, policy })
    }

    pub fn with_theta0(mut self, theta0: f64) -> Self {
        self.word = WordSource::Sturmian { theta0 };
        self
    }

    pub fn with_symbols(mut self, symbols: Vec<u8>) -> Self {
        self.word = WordSource::Explicit(Arc::new(symbols));
        self
    }

    pub fn policy(&self) -> &PrecisionPolicy {
        &self.policy
    }

    /// First `len` drive symbols `ω_1 … ω_len`.
    pub fn symbols(&self, len: usize) -> Result<Vec<u8>> {
        if len == 0 {
            return Ok(Vec::new());
        }
        match &self.word {
            WordSource::Sturmian { theta0 } if *theta0 == 0.0 => Ok(fib_word_concat(self.m, len)?.symbols),
            WordSource::Sturmian { theta0 } => Ok(code_rotation(self.m, *theta0, len)?.symbols),
            WordSource::Explicit(s) => {
                if s.len() < len {
                    return Err(Error::InvalidArgument(format!("explicit word has {} symbols, {len} needed", s.len())));
                }
                Ok(s[..len].to_vec())
            }
        }
    }

    fn gate(&self, symbol: u8) -> &CMatrix<R> {
        if symbol == 0 {
            &self.a0
        } else {
            &self.a1
        }
    }

    /// The block recursion only holds for the standard word (θ0 = 0).
    fn require_standard(&self) -> Result<()> {
        match self.word {
            WordSource::Sturmian { theta0: 0.0 } => Ok(()),
            _ => Err(Error::InvalidArgument(
                "block recursions require the standard generalized Fibonacci word (theta0 = 0)".into(),
            )),
        }
    }
}

/// `U(t)` as an ordered product over the word.
pub fn u_direct<R: Real>(spec: &DriveSpec<R>, t: usize) -> Result<CMatrix<R>> {
    let mut u = CMatrix::identity(spec.d, spec.policy());
    for s in spec.symbols(t)? {
        u = spec.gate(s).matmul(&u)?;
    }
    Ok(u)
}

/// Block unitaries `V_0 = A_1`, `V_1 = A_0`, `V_{j+1} = V_{j-1} V_j^m`, so that
/// `V_j = U(S_j)` for `j >= 1`. Returns `V_0 ..= V_n`.
pub fn block_unitaries<R: Real>(spec: &DriveSpec<R>, n: usize) -> Result<Vec<CMatrix<R>>> {
    spec.require_standard()?;
    let mut v = vec![spec.a1.clone(), spec.a0.clone()];
    for j in 1..n {
        let next = v[j - 1].matmul(&v[j].pow(spec.m as u64)?)?;
        v.push(next);
    }
    v.truncate(n + 1);
    Ok(v)
}

/// `U(S_n)` by the block recursion.
pub fn u_gen_fib<R: Real>(spec: &DriveSpec<R>, n: usize) -> Result<CMatrix<R>> {
    if n == 0 {
        return Err(Error::InvalidArgument("u_gen_fib needs n >= 1".into()));
    }
    Ok(block_unitaries(spec, n)?.pop().expect("nonempty"))
}

/// `U(T)` from the Zeckendorf expansion `T = F_{c_1} + … + F_{c_J}`:
/// the largest block acts first, `U(T) = U(F_{c_J}) ⋯ U(F_{c_1})`.
pub fn u_zeckendorf<R: Real>(spec: &DriveSpec<R>, t: &BigUint) -> Result<CMatrix<R>> {
    if spec.m != 1 {
        return Err(Error::InvalidArgument("Zeckendorf fast-forward is defined for m = 1".into()));
    }
    if t.is_zero() {
        return Ok(CMatrix::identity(spec.d, spec.policy()));
    }
    let idx = zeckendorf(t)?;
    // F_c = S_{c-1}.
    let blocks = block_unitaries(spec, idx[0] - 1)?;
    let mut u = CMatrix::identity(spec.d, spec.policy());
    for c in idx {
        u = blocks[c - 1].matmul(&u)?;
    }
    Ok(u)
}

/// Matrix of the channel `ρ ↦ U^{⊗k} ρ U^{†⊗k}` acting on column-stacked
/// vectors: `conj(U^{⊗k}) ⊗ U^{⊗k}`.
pub fn unitary_channel<R: Real>(u: &CMatrix<R>, k: usize) -> Result<CMatrix<R>> {
    let uk = tensor_power(u, k)?;
    kron(&uk.conj(), &uk)
}

/// Time-averaging channel `(1/T) Σ_{t<T} mat(U(t))` at time `t`.
#[derive(Clone, Debug)]
pub struct AvgChannelMat<R> {
    pub k: usize,
    pub d: usize,
    pub t: BigUint,
    pub matrix: CMatrix<R>,
}

/// Upper bound on `T` for the direct channel sum.
pub const DIRECT_T_MAX: usize = 1_000_000;

pub fn avg_channel_direct<R: Real>(spec: &DriveSpec<R>, k: usize, t: usize) -> Result<AvgChannelMat<R>> {
    if t == 0 || t > DIRECT_T_MAX {
        return Err(Error::InvalidArgument(format!("direct channel average needs 1 <= T <= {DIRECT_T_MAX}")));
    }
    let symbols = spec.symbols(t - 1)?;
    let side = spec.d.pow(2 * k as u32);
    let mut sum = CMatrix::zeros(side, side, spec.policy());
    let mut u = CMatrix::identity(spec.d, spec.policy());
    let one = R::from_f64(1.0, spec.policy());
    for step in 0..t {
        if step > 0 {
            u = spec.gate(symbols[step - 1]).matmul(&u)?;
        }
        sum.add_scaled_assign(&one, &unitary_channel(&u, k)?)?;
    }
    let inv = one.div(&R::from_f64(t as f64, spec.policy()));
    Ok(AvgChannelMat { k, d: spec.d, t: BigUint::from(t), matrix: sum.scale(&inv) })
}

/// One ledger row: unitarity drift of `U(S_n)` against the reported Δ.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub n: usize,
    /// `‖1 − U(S_n) U(S_n)†‖_∞`, full precision decimal.
    pub epsilon: String,
    pub log10_epsilon: f64,
    /// `log10 Δ(S_n)`, once known.
    pub log10_delta: Option<f64>,
    pub bits: u32,
}

impl LedgerEntry {
    /// `ε_n ≤ 10^{-3} Δ(S_n)`; entries without a Δ are vacuously fine.
    pub fn satisfied(&self) -> bool {
        match self.log10_delta {
            None => true,
            Some(ld) => self.log10_epsilon <= ld - 3.0,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ErrorLedger {
    pub entries: Vec<LedgerEntry>,
}

impl ErrorLedger {
    pub fn valid(&self) -> bool {
        self.entries.iter().all(LedgerEntry::satisfied)
    }

    pub fn first_violation(&self) -> Option<&LedgerEntry> {
        self.entries.iter().find(|e| !e.satisfied())
    }
}

fn log10_of<R: Real>(x: &R) -> f64 {
    x.ln_f64() / std::f64::consts::LN_10
}

fn biguint_to_real<R: Real>(x: &BigUint, policy: &PrecisionPolicy) -> R {
    if policy.is_double() {
        R::from_f64(x.to_f64().unwrap_or(f64::INFINITY), policy)
    } else {
        R::from_decimal(&x.to_string(), policy)
    }
}

/// Stepper for `N_{S_{j+1}} = Σ_{y=0}^{m} (S_{j−δ_{ym}} / S_{j+1}) N_{S_{j−δ_{ym}}} mat(U(S_j))^y`.
pub struct ChannelRecursion<'a, R> {
    spec: &'a DriveSpec<R>,
    k: usize,
    j: usize,
    s_prev: BigUint,
    s_cur: BigUint,
    v_prev: CMatrix<R>,
    v_cur: CMatrix<R>,
    n_prev: CMatrix<R>,
    n_cur: CMatrix<R>,
}

impl<'a, R: Real> ChannelRecursion<'a, R> {
    pub fn new(spec: &'a DriveSpec<R>, k: usize) -> Result<Self> {
        spec.require_standard()?;
        if k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        let side = spec.d.pow(2 * k as u32);
        let id = CMatrix::identity(side, spec.policy());
        Ok(Self {
            spec,
            k,
            j: 1,
            s_prev: BigUint::one(),
            s_cur: BigUint::one(),
            v_prev: spec.a1.clone(),
            v_cur: spec.a0.clone(),
            n_prev: id.clone(),
            n_cur: id,
        })
    }

    pub fn index(&self) -> usize {
        self.j
    }

    pub fn time(&self) -> &BigUint {
        &self.s_cur
    }

    /// `U(S_j)`.
    pub fn unitary(&self) -> &CMatrix<R> {
        &self.v_cur
    }

    /// `N_{S_j}`.
    pub fn channel(&self) -> AvgChannelMat<R> {
        AvgChannelMat { k: self.k, d: self.spec.d, t: self.s_cur.clone(), matrix: self.n_cur.clone() }
    }

    pub fn epsilon(&self) -> Result<R> {
        unitarity_error(&self.v_cur)
    }

    /// Advances from `j` to `j + 1`.
    pub fn step(&mut self) -> Result<()> {
        let m = self.spec.m as usize;
        let policy = *self.spec.policy();
        let s_next = &self.s_cur * self.spec.m + &self.s_prev;
        let den = biguint_to_real::<R>(&s_next, &policy);
        let w_cur = biguint_to_real::<R>(&self.s_cur, &policy).div(&den);
        let w_prev = biguint_to_real::<R>(&self.s_prev, &policy).div(&den);

        let mu = unitary_channel(&self.v_cur, self.k)?;
        // Σ_{y<m} N_cur M^y by Horner, then N_prev M^m.
        let mut acc = self.n_cur.clone();
        for _ in 1..m {
            acc = acc.matmul(&mu)?.add(&self.n_cur)?;
        }
        let mut tail = self.n_prev.clone();
        for _ in 0..m {
            tail = tail.matmul(&mu)?;
        }
        let n_next = acc.scale(&w_cur).add(&tail.scale(&w_prev))?;
        let v_next = self.v_prev.matmul(&self.v_cur.pow(self.spec.m as u64)?)?;

        self.n_prev = std::mem::replace(&mut self.n_cur, n_next);
        self.v_prev = std::mem::replace(&mut self.v_cur, v_next);
        self.s_prev = std::mem::replace(&mut self.s_cur, s_next);
        self.j += 1;
        Ok(())
    }
}

/// `N_{S_n}` by the channel recursion, recording `ε_j` for `j = 1..=n`.
pub fn avg_channel_recursive<R: Real>(
    spec: &DriveSpec<R>,
    k: usize,
    n: usize,
    ledger: &mut ErrorLedger,
) -> Result<AvgChannelMat<R>> {
    if n == 0 {
        return Err(Error::InvalidArgument("channel recursion needs n >= 1".into()));
    }
    let mut rec = ChannelRecursion::new(spec, k)?;
    loop {
        let eps = rec.epsilon()?;
        ledger.entries.push(LedgerEntry {
            n: rec.index(),
            epsilon: eps.to_decimal(),
            log10_epsilon: log10_of(&eps),
            log10_delta: None,
            bits: spec.policy().bits(),
        });
        if rec.index() == n {
            return Ok(rec.channel());
        }
        rec.step()?;
    }
}

/// Promotes `(re, im)` pairs to a state vector, checks the norm to 1e-8 and
/// renormalizes at working precision.
pub fn state_vector<R: Real>(psi: &[(f64, f64)], policy: &PrecisionPolicy) -> Result<Vec<Cplx<R>>> {
    let norm: f64 = psi.iter().map(|(a, b)| a * a + b * b).sum();
    if psi.is_empty() || (norm - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidArgument(format!("initial state is not normalized (norm^2 = {norm})")));
    }
    let mut v: Vec<Cplx<R>> = psi.iter().map(|&(a, b)| Cplx::from_f64(a, b, policy)).collect();
    crate::haar::normalize(&mut v);
    Ok(v)
}

/// `unvec(N · vec((|ψ⟩⟨ψ|)^{⊗k}))`.
pub fn temporal_moment<R: Real>(channel: &AvgChannelMat<R>, psi: &[Cplx<R>]) -> Result<MomentState<R>> {
    if psi.len() != channel.d {
        return Err(Error::DimensionMismatch(format!("state of dimension {} for d = {}", psi.len(), channel.d)));
    }
    let policy = *channel.matrix.policy();
    let norm = psi.iter().fold(R::from_f64(0.0, &policy), |a, z| a.add(&z.norm_sqr())).to_f64();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidArgument(format!("initial state is not normalized (norm^2 = {norm})")));
    }
    let rho = projector(&replicate(psi, channel.k), &policy);
    let side = rho.rows();
    // vec: column stacking.
    let mut v = Vec::with_capacity(side * side);
    for j in 0..side {
        for i in 0..side {
            v.push(rho.get(i, j).clone());
        }
    }
    let out = channel.matrix.matvec(&v)?;
    let out = unvec(&CMatrix::column(out, &policy)?, side)?;
    MomentState::new(channel.d, channel.k, out)
}

/// `Δ^(k) = ½ ‖ρ − ρ_Haar^(k)‖₁`.
pub fn delta_k<R: Real>(rho: &MomentState<R>) -> Result<R> {
    let haar = haar_moment_state(rho.d, rho.k, rho.policy())?;
    rho.trace_distance(&haar)
}

/// Δ at every time in `times` (sorted, ≥ 1) from direct state evolution:
/// `ρ_T = (1/T) Σ_{t<T} (|ψ_t⟩⟨ψ_t|)^{⊗k}`.
pub fn direct_delta_series<R: Real>(
    spec: &DriveSpec<R>,
    k: usize,
    psi: &[Cplx<R>],
    times: &[usize],
) -> Result<Vec<(usize, R)>> {
    if times.windows(2).any(|w| w[0] >= w[1]) || times.first().is_some_and(|&t| t == 0) {
        return Err(Error::InvalidArgument("times must be strictly increasing and positive".into()));
    }
    let Some(&t_max) = times.last() else { return Ok(Vec::new()) };
    let policy = *spec.policy();
    let symbols = spec.symbols(t_max)?;
    let haar = haar_moment_state(spec.d, k, &policy)?;
    let side = haar.matrix.rows();
    let mut sum = CMatrix::zeros(side, side, &policy);
    let one = R::from_f64(1.0, &policy);
    let mut state = psi.to_vec();
    let mut out = Vec::with_capacity(times.len());
    let mut next = 0;
    for t in 0..t_max {
        if t > 0 {
            state = spec.gate(symbols[t - 1]).matvec(&state)?;
        }
        sum.add_scaled_assign(&one, &projector(&replicate(&state, k), &policy))?;
        if t + 1 == times[next] {
            let avg = sum.scale(&one.div(&R::from_f64((t + 1) as f64, &policy)));
            let rho = MomentState::new(spec.d, k, avg)?;
            out.push((t + 1, rho.trace_distance(&haar)?));
            next += 1;
        }
    }
    Ok(out)
}

/// i.i.d. Bernoulli(`p1`) symbols.
pub fn coin_sequence(p1: f64, t: usize, seed: u64) -> Result<FibWord> {
    if !(p1 > 0.0 && p1 < 1.0) {
        return Err(Error::InvalidArgument(format!("p1 = {p1} must lie strictly between 0 and 1")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let symbols = (0..t).map(|_| u8::from(rng.random_bool(p1))).collect();
    Ok(FibWord { m: 0, symbols, origin: WordOrigin::External })
}

/// Gate pair description that can be instantiated at any precision.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GateRecipe {
    /// `U0 = exp(−iθ1 Z)`, `U1 = exp(−iθ2 (cos θ3 Z + sin θ3 X))`.
    Qubit(QubitAngles),
    /// `A0 = exp(−iθ_X X)`, `A1 = exp(−iθ_Z Z)`, angles in units of π.
    Xz { theta_x: f64, theta_z: f64 },
    /// Two Haar-random SU(d) gates drawn from `seed`.
    Haar { d: usize, seed: u64 },
}

impl GateRecipe {
    pub fn dim(&self) -> usize {
        match self {
            Self::Qubit(_) | Self::Xz { .. } => 2,
            Self::Haar { d, .. } => *d,
        }
    }

    pub fn build<R: Real>(&self, policy: &PrecisionPolicy) -> Result<(CMatrix<R>, CMatrix<R>)> {
        match self {
            Self::Qubit(a) => qubit_gates(a, policy),
            Self::Xz { theta_x, theta_z } => xz_gates(*theta_x, *theta_z, policy),
            Self::Haar { d, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let a0 = sample_haar_unitary(*d, &mut rng, policy)?;
                let a1 = sample_haar_unitary(*d, &mut rng, policy)?;
                Ok((a0, a1))
            }
        }
    }
}

/// Precision-independent drive description.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DriveRecipe {
    pub m: u32,
    pub gates: GateRecipe,
    #[serde(default)]
    pub theta0: f64,
}

impl DriveRecipe {
    pub fn spec<R: Real>(&self, policy: &PrecisionPolicy) -> Result<DriveSpec<R>> {
        let (a0, a1) = self.gates.build(policy)?;
        Ok(DriveSpec::new(self.m, a0, a1)?.with_theta0(self.theta0))
    }
}

/// One reported point of a decay series.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecayPoint {
    /// Generalized Fibonacci index, when the time is some `S_n`.
    pub n: Option<usize>,
    pub t: BigUint,
    pub ln_t: f64,
    /// Mean Δ over initial states, full-precision decimal.
    pub delta: String,
    pub ln_delta: f64,
    /// `ln Δ` per initial state.
    pub ln_delta_per_state: Vec<f64>,
    pub log10_epsilon: Option<f64>,
    pub bits: u32,
}

impl DecayPoint {
    pub fn delta_f64(&self) -> f64 {
        self.ln_delta.exp()
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct DecaySeries {
    pub k: usize,
    pub d: usize,
    pub points: Vec<DecayPoint>,
    pub ledger: ErrorLedger,
    /// Precision of the run that produced the points.
    pub bits: u32,
    /// Number of restarts at doubled precision.
    pub restarts: u32,
}

/// `ln` of a positive integer of any size.
pub fn ln_biguint(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().unwrap_or(f64::INFINITY).ln();
    }
    let shift = bits - 64;
    let top = (x >> shift).to_f64().unwrap_or(f64::INFINITY);
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// Precision schedule for [`decay_series`].
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Ladder {
    pub start: PrecisionPolicy,
    /// Restart at doubled precision on a ledger violation instead of failing.
    pub escalate: bool,
    pub max_bits: u32,
}

impl Default for Ladder {
    fn default() -> Self {
        Self { start: PrecisionPolicy::BigFloat { bits: 256 }, escalate: true, max_bits: 8192 }
    }
}

/// `Δ^(k)(S_n)` for `n = 1..=n_max`, averaged over `states`, with the
/// precision ledger enforced at every point.
pub fn decay_series(
    recipe: &DriveRecipe,
    k: usize,
    states: &[Vec<(f64, f64)>],
    n_max: usize,
    ladder: &Ladder,
) -> Result<DecaySeries> {
    if states.is_empty() {
        return Err(Error::InvalidArgument("need at least one initial state".into()));
    }
    if n_max == 0 {
        return Err(Error::InvalidArgument("n_max must be at least 1".into()));
    }
    let mut policy = ladder.start;
    let mut restarts = 0;
    loop {
        let attempt = match policy {
            PrecisionPolicy::Double => decay_at::<f64>(recipe, k, states, n_max, &policy),
            PrecisionPolicy::BigFloat { .. } => decay_at::<BigReal>(recipe, k, states, n_max, &policy),
        };
        match attempt {
            Err(Error::LedgerViolation { .. }) if ladder.escalate && policy.doubled().bits() <= ladder.max_bits => {
                policy = policy.doubled();
                restarts += 1;
            }
            Ok(mut series) => {
                series.restarts = restarts;
                return Ok(series);
            }
            Err(e) => return Err(e),
        }
    }
}

fn decay_at<R: Real>(
    recipe: &DriveRecipe,
    k: usize,
    states: &[Vec<(f64, f64)>],
    n_max: usize,
    policy: &PrecisionPolicy,
) -> Result<DecaySeries> {
    let spec: DriveSpec<R> = recipe.spec(policy)?;
    let psis: Vec<Vec<Cplx<R>>> = states.iter().map(|s| state_vector(s, policy)).collect::<Result<_>>()?;
    let haar = haar_moment_state(spec.d, k, policy)?;
    let mut rec = ChannelRecursion::new(&spec, k)?;
    let mut series = DecaySeries { k, d: spec.d, bits: policy.bits(), ..Default::default() };
    let count = R::from_f64(psis.len() as f64, policy);
    loop {
        let n = rec.index();
        let channel = rec.channel();
        let mut sum = R::from_f64(0.0, policy);
        let mut per_state = Vec::with_capacity(psis.len());
        let mut ln_min = f64::INFINITY;
        for psi in &psis {
            let delta = temporal_moment(&channel, psi)?.trace_distance(&haar)?;
            let ln = delta.ln_f64();
            ln_min = ln_min.min(ln);
            per_state.push(ln);
            sum = sum.add(&delta);
        }
        let mean = sum.div(&count);
        let eps = rec.epsilon()?;
        let entry = LedgerEntry {
            n,
            epsilon: eps.to_decimal(),
            log10_epsilon: log10_of(&eps),
            log10_delta: Some(ln_min / std::f64::consts::LN_10),
            bits: policy.bits(),
        };
        if !entry.satisfied() {
            return Err(Error::LedgerViolation {
                n,
                epsilon: eps.to_f64(),
                delta: ln_min.exp(),
                bits: policy.bits(),
            });
        }
        series.points.push(DecayPoint {
            n: Some(n),
            t: rec.time().clone(),
            ln_t: ln_biguint(rec.time()),
            delta: mean.to_decimal(),
            ln_delta: mean.ln_f64(),
            ln_delta_per_state: per_state,
            log10_epsilon: Some(entry.log10_epsilon),
            bits: policy.bits(),
        });
        series.ledger.entries.push(entry);
        if n == n_max {
            return Ok(series);
        }
        rec.step()?;
    }
}

/// Generalized Fibonacci times `S_1..=S_n` as machine integers, if they fit.
pub fn fib_times(m: u32, n: usize) -> Result<Vec<usize>> {
    let seq = gen_fib_numbers(m, n.max(1))?;
    seq.values[1..=n]
        .iter()
        .map(|v| v.to_usize().ok_or_else(|| Error::ResourceLimit(format!("S_n = {v} exceeds machine integers"))))
        .collect()
}
