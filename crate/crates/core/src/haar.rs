//! Haar moment states, Haar-random sampling, and replica bookkeeping.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::bigmat::{kron, partial_trace, trace_norm, CMatrix, Cplx};
use crate::error::{Error, Result};
use crate::precision::{PrecisionPolicy, Real};

/// Largest dense moment-matrix side the library will allocate.
pub const MAX_DENSE_SIDE: usize = 2048;

/// A `k`-replica density matrix on `(C^d)^{⊗k}`.
#[derive(Clone, Debug)]
pub struct MomentState<R> {
    pub d: usize,
    pub k: usize,
    pub matrix: CMatrix<R>,
}

impl<R: Real> MomentState<R> {
    pub fn new(d: usize, k: usize, matrix: CMatrix<R>) -> Result<Self> {
        let side = side(d, k)?;
        if matrix.rows() != side || matrix.cols() != side {
            return Err(Error::DimensionMismatch(format!(
                "moment state for d={d}, k={k} needs side {side}, got {}x{}",
                matrix.rows(),
                matrix.cols()
            )));
        }
        Ok(Self { d, k, matrix })
    }

    pub fn policy(&self) -> &PrecisionPolicy {
        self.matrix.policy()
    }

    pub fn trace(&self) -> Result<Cplx<R>> {
        self.matrix.trace()
    }

    /// Checks Hermiticity, unit trace and positivity at 10^3 ulp.
    pub fn validate(&self) -> Result<()> {
        self.matrix.require_hermitian()?;
        let tol = 1e3 * self.policy().ulp() * (self.matrix.rows() as f64).max(1.0);
        let tr = self.trace()?;
        let (re, im) = tr.to_f64();
        if (re - 1.0).abs() > tol || im.abs() > tol {
            return Err(Error::InvalidArgument(format!("moment state trace {re}+{im}i is not 1")));
        }
        let vals = crate::bigmat::eigvals_hermitian(&self.matrix)?;
        if let Some(min) = vals.first() {
            if min.to_f64() < -tol {
                return Err(Error::InvalidArgument(format!("moment state has eigenvalue {}", min.to_f64())));
            }
        }
        Ok(())
    }

    /// Traces out the last replica.
    pub fn drop_replica(&self) -> Result<Self> {
        if self.k < 2 {
            return Err(Error::InvalidArgument("cannot drop a replica from k = 1".into()));
        }
        let dims = vec![self.d; self.k];
        let keep: Vec<usize> = (0..self.k - 1).collect();
        Self::new(self.d, self.k - 1, partial_trace(&self.matrix, &dims, &keep)?)
    }

    /// `½ ‖self − other‖₁`.
    pub fn trace_distance(&self, other: &Self) -> Result<R> {
        if self.d != other.d || self.k != other.k {
            return Err(Error::DimensionMismatch(format!(
                "moment states ({}, {}) vs ({}, {})",
                self.d, self.k, other.d, other.k
            )));
        }
        Ok(trace_norm(&self.matrix.sub(&other.matrix)?)?.mul_f64(0.5))
    }
}

fn side(d: usize, k: usize) -> Result<usize> {
    if d < 1 || k < 1 {
        return Err(Error::InvalidArgument(format!("need d >= 1 and k >= 1, got d={d}, k={k}")));
    }
    let s = (d as u128).checked_pow(k as u32).filter(|&s| s <= MAX_DENSE_SIDE as u128);
    s.map(|s| s as usize)
        .ok_or_else(|| Error::ResourceLimit(format!("dense moment state of side {d}^{k} exceeds {MAX_DENSE_SIDE}")))
}

/// All permutations of `0..k` in lexicographic order.
pub fn permutations(k: usize) -> Vec<Vec<usize>> {
    fn go(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                go(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::with_capacity(k), &mut vec![false; k], &mut out);
    out
}

fn digits(mut idx: usize, d: usize, k: usize) -> Vec<usize> {
    let mut out = vec![0; k];
    for slot in out.iter_mut().rev() {
        *slot = idx % d;
        idx /= d;
    }
    out
}

fn undigits(ds: &[usize], d: usize) -> usize {
    ds.iter().fold(0, |acc, &x| acc * d + x)
}

/// Replica permutation operator: `P_π |i_0 … i_{k-1}⟩ = |i_{π(0)} … i_{π(k-1)}⟩`.
pub fn permutation_operator<R: Real>(d: usize, perm: &[usize], policy: &PrecisionPolicy) -> Result<CMatrix<R>> {
    let k = perm.len();
    let n = side(d, k)?;
    let mut p = CMatrix::zeros(n, n, policy);
    for col in 0..n {
        let src = digits(col, d, k);
        let dst: Vec<usize> = perm.iter().map(|&j| src[j]).collect();
        p.set(undigits(&dst, d), col, Cplx::one(policy));
    }
    Ok(p)
}

/// `Σ_π P_π / (d (d+1) ⋯ (d+k-1))`.
pub fn haar_moment_state<R: Real>(d: usize, k: usize, policy: &PrecisionPolicy) -> Result<MomentState<R>> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("Haar moments need d >= 2, got {d}")));
    }
    let n = side(d, k)?;
    let norm: f64 = (0..k).map(|j| (d + j) as f64).product();
    let w = R::from_f64(1.0, policy).div(&R::from_f64(norm, policy));
    let wc = Cplx::from_real(w);
    let mut m = CMatrix::zeros(n, n, policy);
    let perms = permutations(k);
    for col in 0..n {
        let src = digits(col, d, k);
        for perm in &perms {
            let dst: Vec<usize> = perm.iter().map(|&j| src[j]).collect();
            let row = undigits(&dst, d);
            let v = m.get(row, col) + &wc;
            m.set(row, col, v);
        }
    }
    MomentState::new(d, k, m)
}

/// Complex Gaussian matrix with unit-variance entries.
fn gaussian<R: Real, G: Rng + ?Sized>(d: usize, rng: &mut G, policy: &PrecisionPolicy) -> Vec<Cplx<R>> {
    (0..d * d)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Cplx::from_f64(re, im, policy)
        })
        .collect()
}

/// Haar-random element of SU(d) at the working precision of `policy`.
///
/// Columns of a complex Gaussian matrix are orthonormalized by modified
/// Gram–Schmidt, which leaves a positive diagonal in the triangular factor;
/// the determinant phase is then divided out.
pub fn sample_haar_unitary<R: Real, G: Rng + ?Sized>(d: usize, rng: &mut G, policy: &PrecisionPolicy) -> Result<CMatrix<R>> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("Haar sampling needs d >= 2, got {d}")));
    }
    let g = gaussian::<R, G>(d, rng, policy);
    let mut cols: Vec<Vec<Cplx<R>>> = (0..d).map(|j| (0..d).map(|i| g[i * d + j].clone()).collect()).collect();
    for j in 0..d {
        // Two passes keep orthogonality at working precision.
        for _ in 0..2 {
            for i in 0..j {
                let mut ip = Cplx::zero(policy);
                for (a, b) in cols[i].iter().zip(&cols[j]) {
                    ip.mul_add_assign(&a.conj(), b);
                }
                let (head, tail) = cols.split_at_mut(j);
                for (dst, src) in tail[0].iter_mut().zip(&head[i]) {
                    *dst = &*dst - &(src * &ip);
                }
            }
        }
        let norm = cols[j].iter().fold(R::from_f64(0.0, policy), |acc, z| acc.add(&z.norm_sqr())).sqrt();
        for z in cols[j].iter_mut() {
            *z = Cplx::new(z.re.div(&norm), z.im.div(&norm));
        }
    }
    let mut u = CMatrix::zeros(d, d, policy);
    for (j, col) in cols.into_iter().enumerate() {
        for (i, z) in col.into_iter().enumerate() {
            u.set(i, j, z);
        }
    }
    fix_determinant(&u)
}

/// Divides out `det(u)^{1/d}` so the result has unit determinant.
pub fn fix_determinant<R: Real>(u: &CMatrix<R>) -> Result<CMatrix<R>> {
    let d = u.require_square()?;
    let det = u.det()?;
    let phase = det.arg().div(&R::from_f64(d as f64, u.policy()));
    Ok(u.scale_c(&Cplx::cis(&phase.neg())))
}

/// Haar-random pure state: normalized complex Gaussian vector.
pub fn sample_haar_state<R: Real, G: Rng + ?Sized>(d: usize, rng: &mut G, policy: &PrecisionPolicy) -> Vec<Cplx<R>> {
    let mut v: Vec<Cplx<R>> = (0..d)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Cplx::from_f64(re, im, policy)
        })
        .collect();
    normalize(&mut v);
    v
}

pub fn normalize<R: Real>(v: &mut [Cplx<R>]) {
    if v.is_empty() {
        return;
    }
    let norm = v.iter().fold(v[0].re.zero_like(), |acc, z| acc.add(&z.norm_sqr())).sqrt();
    for z in v.iter_mut() {
        *z = Cplx::new(z.re.div(&norm), z.im.div(&norm));
    }
}

/// `ψ^{⊗k}` as a flat vector.
pub fn replicate<R: Real>(psi: &[Cplx<R>], k: usize) -> Vec<Cplx<R>> {
    let mut out = psi.to_vec();
    for _ in 1..k {
        let mut next = Vec::with_capacity(out.len() * psi.len());
        for a in &out {
            for b in psi {
                next.push(a * b);
            }
        }
        out = next;
    }
    out
}

/// `|v⟩⟨v|`.
pub fn projector<R: Real>(v: &[Cplx<R>], policy: &PrecisionPolicy) -> CMatrix<R> {
    let n = v.len();
    let mut m = CMatrix::zeros(n, n, policy);
    for i in 0..n {
        for j in 0..n {
            m.set(i, j, &v[i] * &v[j].conj());
        }
    }
    m
}

/// `(|ψ⟩⟨ψ|)^{⊗k}` as a moment state.
pub fn pure_moment<R: Real>(psi: &[Cplx<R>], k: usize, policy: &PrecisionPolicy) -> Result<MomentState<R>> {
    let d = psi.len();
    side(d, k)?;
    MomentState::new(d, k, projector(&replicate(psi, k), policy))
}

/// Samples per independent RNG stream in [`mc_haar_moment`].
pub const MC_CHUNK: usize = 1024;

/// Monte-Carlo estimate `(1/N) Σ_i (U_i|0⟩⟨0|U_i†)^{⊗k}` with Haar `U_i`.
pub fn mc_haar_moment(d: usize, k: usize, n_samples: usize, seed: u64) -> Result<MomentState<f64>> {
    if n_samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let n = side(d, k)?;
    let policy = PrecisionPolicy::Double;
    let chunks = n_samples.div_ceil(MC_CHUNK);
    let partial: Vec<Result<Vec<(f64, f64)>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let count = MC_CHUNK.min(n_samples - c * MC_CHUNK);
            let mut acc = vec![(0.0, 0.0); n * n];
            for _ in 0..count {
                let u: CMatrix<f64> = sample_haar_unitary(d, &mut rng, &policy)?;
                let psi: Vec<Cplx<f64>> = (0..d).map(|i| u.get(i, 0).clone()).collect();
                let v = replicate(&psi, k);
                for i in 0..n {
                    for j in 0..n {
                        let z = &v[i] * &v[j].conj();
                        acc[i * n + j].0 += z.re;
                        acc[i * n + j].1 += z.im;
                    }
                }
            }
            Ok(acc)
        })
        .collect();
    let mut total = vec![(0.0, 0.0); n * n];
    for p in partial {
        for (t, x) in total.iter_mut().zip(p?) {
            t.0 += x.0;
            t.1 += x.1;
        }
    }
    let inv = 1.0 / n_samples as f64;
    let entries: Vec<(f64, f64)> = total.into_iter().map(|(a, b)| (a * inv, b * inv)).collect();
    MomentState::new(d, k, CMatrix::from_f64(n, n, &entries, &policy)?)
}

/// `V^{⊗k}` for a single-copy operator.
pub fn replicate_operator<R: Real>(v: &CMatrix<R>, k: usize) -> Result<CMatrix<R>> {
    let mut out = v.clone();
    for _ in 1..k {
        out = kron(&out, v)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bigmat::unitarity_error;
    use crate::precision::BigReal;

    const D: PrecisionPolicy = PrecisionPolicy::Double;

    #[test]
    fn two_copy_state_is_identity_plus_swap() {
        let h: MomentState<f64> = haar_moment_state(2, 2, &D).unwrap();
        let swap = permutation_operator::<f64>(2, &[1, 0], &D).unwrap();
        let want = CMatrix::identity(4, &D).add(&swap).unwrap().scale(&(1.0 / 6.0));
        assert!(h.matrix.max_abs_diff(&want).unwrap() < 1e-16);
        // SWAP by explicit enumeration of |ab⟩ -> |ba⟩.
        for a in 0..2 {
            for b in 0..2 {
                assert_eq!(swap.get(b * 2 + a, a * 2 + b).re, 1.0);
            }
        }
    }

    #[test]
    fn single_copy_and_normalization() {
        for d in [2, 3] {
            let h: MomentState<f64> = haar_moment_state(d, 1, &D).unwrap();
            let want = CMatrix::identity(d, &D).scale(&(1.0 / d as f64));
            assert!(h.matrix.max_abs_diff(&want).unwrap() < 1e-16);
            for k in 1..=3 {
                let h: MomentState<f64> = haar_moment_state(d, k, &D).unwrap();
                assert!((h.trace().unwrap().re - 1.0).abs() < 1e-13);
                h.validate().unwrap();
            }
        }
        assert_eq!(permutations(3).len(), 6);
    }

    #[test]
    fn replica_partial_trace_is_consistent() {
        for d in [2, 3] {
            for k in [2, 3] {
                let h: MomentState<f64> = haar_moment_state(d, k, &D).unwrap();
                let lower: MomentState<f64> = haar_moment_state(d, k - 1, &D).unwrap();
                assert!(h.drop_replica().unwrap().matrix.max_abs_diff(&lower.matrix).unwrap() < 1e-14);
            }
        }
    }

    #[test]
    fn haar_state_commutes_with_replicated_unitaries() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h: MomentState<f64> = haar_moment_state(2, 3, &D).unwrap();
        for _ in 0..5 {
            let v: CMatrix<f64> = sample_haar_unitary(2, &mut rng, &D).unwrap();
            let vk = replicate_operator(&v, 3).unwrap();
            let lhs = vk.matmul(&h.matrix).unwrap();
            let rhs = h.matrix.matmul(&vk).unwrap();
            assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-14);
        }
    }

    #[test]
    fn sampled_unitaries_are_special_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for d in [2, 3, 5] {
            let u: CMatrix<f64> = sample_haar_unitary(d, &mut rng, &D).unwrap();
            assert!(unitarity_error(&u).unwrap() < 1e-12);
            let det = u.det().unwrap();
            assert!((det.re - 1.0).abs() < 1e-12 && det.im.abs() < 1e-12);
        }
        let p = PrecisionPolicy::big(256).unwrap();
        let u: CMatrix<BigReal> = sample_haar_unitary(2, &mut rng, &p).unwrap();
        assert!(unitarity_error(&u).unwrap().ln_f64() < -200.0 * std::f64::consts::LN_2);
    }

    #[test]
    fn haar_first_moment_vanishes() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 100_000;
        let mut mean = [(0.0, 0.0); 4];
        for _ in 0..n {
            let u: CMatrix<f64> = sample_haar_unitary(2, &mut rng, &D).unwrap();
            for (m, z) in mean.iter_mut().zip(u.data()) {
                m.0 += z.re / n as f64;
                m.1 += z.im / n as f64;
            }
        }
        for (re, im) in mean {
            assert!((re * re + im * im).sqrt() <= 5e-3);
        }
    }

    #[test]
    fn monte_carlo_moments() {
        let one = mc_haar_moment(2, 1, 1, 3).unwrap();
        assert!((one.trace().unwrap().re - 1.0).abs() < 1e-14);
        assert!(one.matrix.matmul(&one.matrix).unwrap().max_abs_diff(&one.matrix).unwrap() < 1e-12);

        let mc1 = mc_haar_moment(2, 1, 100_000, 9).unwrap();
        let h1: MomentState<f64> = haar_moment_state(2, 1, &D).unwrap();
        assert!(mc1.trace_distance(&h1).unwrap() <= 5e-3);
        let mc2 = mc_haar_moment(2, 2, 100_000, 9).unwrap();
        let h2: MomentState<f64> = haar_moment_state(2, 2, &D).unwrap();
        assert!(mc2.trace_distance(&h2).unwrap() <= 1e-2);
        let again = mc_haar_moment(2, 2, 100_000, 9).unwrap();
        assert_eq!(again.matrix.to_f64_pairs(), mc2.matrix.to_f64_pairs());
    }

    #[test]
    fn fixed_point_under_conjugation() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let h: MomentState<f64> = haar_moment_state(2, 2, &D).unwrap();
        let v: CMatrix<f64> = sample_haar_unitary(2, &mut rng, &D).unwrap();
        let vk = replicate_operator(&v, 2).unwrap();
        let conj = vk.matmul(&h.matrix).unwrap().matmul(&vk.adjoint()).unwrap();
        assert!(conj.max_abs_diff(&h.matrix).unwrap() < 1e-14);
    }
}
