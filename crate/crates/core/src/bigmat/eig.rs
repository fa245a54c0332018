//! Hermitian eigensolver and singular values by Jacobi rotations.

use nalgebra::{Complex, DMatrix};

use super::{CMatrix, Cplx};
use crate::error::{Error, Result};
use crate::precision::Real;

const MAX_SWEEPS: usize = 100;

/// Above this dimension double-precision problems go to LAPACK-style
/// tridiagonal QR from nalgebra instead of cyclic Jacobi.
pub const JACOBI_MAX_DIM_DOUBLE: usize = 64;

#[derive(Clone, Debug)]
pub struct HermitianEigen<R> {
    /// Ascending eigenvalues.
    pub values: Vec<R>,
    /// Orthonormal eigenvectors as columns, if requested.
    pub vectors: Option<CMatrix<R>>,
}

pub fn eigvals_hermitian<R: Real>(a: &CMatrix<R>) -> Result<Vec<R>> {
    Ok(eig_hermitian(a, false)?.values)
}

/// Eigendecomposition of a Hermitian matrix. Fails with `NotHermitian` when
/// the input deviates from Hermiticity by more than the policy tolerance.
pub fn eig_hermitian<R: Real>(a: &CMatrix<R>, vectors: bool) -> Result<HermitianEigen<R>> {
    let n = a.require_square()?;
    a.require_hermitian()?;
    if a.policy().is_double() && n > JACOBI_MAX_DIM_DOUBLE {
        return eig_nalgebra(a, vectors);
    }
    jacobi(a, vectors)
}

fn eig_nalgebra<R: Real>(a: &CMatrix<R>, vectors: bool) -> Result<HermitianEigen<R>> {
    let n = a.rows();
    let policy = *a.policy();
    let m = DMatrix::from_fn(n, n, |i, j| {
        let (re, im) = a.get(i, j).to_f64();
        Complex::new(re, im)
    });
    let eig = nalgebra::SymmetricEigen::try_new(m, f64::EPSILON, 0)
        .ok_or_else(|| Error::InvalidArgument("eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
    let values = order.iter().map(|&k| R::from_f64(eig.eigenvalues[k], &policy)).collect();
    let vecs = vectors.then(|| {
        let mut v = CMatrix::zeros(n, n, &policy);
        for (col, &k) in order.iter().enumerate() {
            for i in 0..n {
                let z = eig.eigenvectors[(i, k)];
                v.set(i, col, Cplx::from_f64(z.re, z.im, &policy));
            }
        }
        v
    });
    Ok(HermitianEigen { values, vectors: vecs })
}

fn jacobi<R: Real>(a: &CMatrix<R>, want_vectors: bool) -> Result<HermitianEigen<R>> {
    let n = a.rows();
    let policy = *a.policy();
    let mut m = a.clone();
    let mut w = want_vectors.then(|| CMatrix::identity(n, &policy));
    let ulp = R::from_f64(policy.ulp(), &policy);

    let frob = m.data().iter().fold(R::from_f64(0.0, &policy), |acc, z| acc.add(&z.norm_sqr())).sqrt();
    let tol = ulp.mul(&frob);
    let one = R::from_f64(1.0, &policy);

    let mut converged = n < 2;
    for sweep in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut off = R::from_f64(0.0, &policy);
        for p in 0..n {
            for q in p + 1..n {
                off = off.add(&m.get(p, q).norm_sqr());
            }
        }
        let off = off.sqrt();
        if !tol.lt(&off) {
            converged = true;
            break;
        }
        let thresh = if sweep < 3 { off.mul_f64(0.2 / (n * n) as f64) } else { off.zero_like() };

        for p in 0..n {
            for q in p + 1..n {
                let apq = m.get(p, q).clone();
                let g = apq.abs();
                if g.is_zero() || (sweep < 3 && g.lt(&thresh)) {
                    continue;
                }
                let app = m.get(p, p).re.clone();
                let aqq = m.get(q, q).re.clone();
                let theta = aqq.sub(&app).div(&g.mul_f64(2.0));
                let root = theta.mul(&theta).add(&one).sqrt();
                let mut t = one.div(&theta.abs().add(&root));
                if theta.lt(&theta.zero_like()) {
                    t = t.neg();
                }
                if t.is_zero() {
                    m.set(p, q, Cplx::zero(&policy));
                    m.set(q, p, Cplx::zero(&policy));
                    continue;
                }
                let c = one.div(&t.mul(&t).add(&one).sqrt());
                let s = t.mul(&c);
                // e^{-i phi} with phi = arg(a_pq).
                let e = Cplx::new(apq.re.div(&g), apq.im.div(&g).neg());
                let vpp = Cplx::from_real(c.clone());
                let vpq = Cplx::from_real(s.clone());
                let vqp = e.scale(&s.neg());
                let vqq = e.scale(&c);

                rotate_cols(&mut m, p, q, &vpp, &vpq, &vqp, &vqq);
                rotate_rows(&mut m, p, q, &vpp, &vpq, &vqp, &vqq);
                let zero = Cplx::zero(&policy);
                m.set(p, q, zero.clone());
                m.set(q, p, zero);
                if let Some(w) = w.as_mut() {
                    rotate_cols(w, p, q, &vpp, &vpq, &vqp, &vqq);
                }
            }
        }
    }
    if !converged {
        return Err(Error::InvalidArgument(format!("Jacobi eigensolver did not converge in {MAX_SWEEPS} sweeps")));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| {
        m.get(x, x).re.partial_cmp_real(&m.get(y, y).re).unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = order.iter().map(|&k| m.get(k, k).re.clone()).collect();
    let vectors = w.map(|w| {
        let mut v = CMatrix::zeros(n, n, &policy);
        for (col, &k) in order.iter().enumerate() {
            for i in 0..n {
                v.set(i, col, w.get(i, k).clone());
            }
        }
        v
    });
    Ok(HermitianEigen { values, vectors })
}

/// `M <- M V` restricted to columns `p`, `q`.
fn rotate_cols<R: Real>(m: &mut CMatrix<R>, p: usize, q: usize, vpp: &Cplx<R>, vpq: &Cplx<R>, vqp: &Cplx<R>, vqq: &Cplx<R>) {
    for i in 0..m.rows() {
        let mp = m.get(i, p).clone();
        let mq = m.get(i, q).clone();
        m.set(i, p, &(&mp * vpp) + &(&mq * vqp));
        m.set(i, q, &(&mp * vpq) + &(&mq * vqq));
    }
}

/// `M <- V^† M` restricted to rows `p`, `q`.
fn rotate_rows<R: Real>(m: &mut CMatrix<R>, p: usize, q: usize, vpp: &Cplx<R>, vpq: &Cplx<R>, vqp: &Cplx<R>, vqq: &Cplx<R>) {
    let (cpp, cpq, cqp, cqq) = (vpp.conj(), vpq.conj(), vqp.conj(), vqq.conj());
    for j in 0..m.cols() {
        let mp = m.get(p, j).clone();
        let mq = m.get(q, j).clone();
        m.set(p, j, &(&cpp * &mp) + &(&cqp * &mq));
        m.set(q, j, &(&cpq * &mp) + &(&cqq * &mq));
    }
}

/// Singular values in descending order (one-sided Jacobi).
pub fn singular_values<R: Real>(a: &CMatrix<R>) -> Result<Vec<R>> {
    let policy = *a.policy();
    let (rows, cols) = (a.rows(), a.cols());
    // Work on columns of the matrix.
    let mut colv: Vec<Vec<Cplx<R>>> = (0..cols).map(|j| (0..rows).map(|i| a.get(i, j).clone()).collect()).collect();
    let ulp = R::from_f64(policy.ulp(), &policy);
    let one = R::from_f64(1.0, &policy);
    let zero = R::from_f64(0.0, &policy);

    let mut converged = cols < 2;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let alpha = colv[p].iter().fold(zero.clone(), |acc, z| acc.add(&z.norm_sqr()));
                let beta = colv[q].iter().fold(zero.clone(), |acc, z| acc.add(&z.norm_sqr()));
                let mut gamma = Cplx::zero(&policy);
                for (u, v) in colv[p].iter().zip(&colv[q]) {
                    gamma.mul_add_assign(&u.conj(), v);
                }
                let g = gamma.abs();
                if g.is_zero() || !ulp.mul(&alpha.mul(&beta).sqrt()).lt(&g) {
                    continue;
                }
                rotated = true;
                let zeta = beta.sub(&alpha).div(&g.mul_f64(2.0));
                let mut t = one.div(&zeta.abs().add(&zeta.mul(&zeta).add(&one).sqrt()));
                if zeta.lt(&zero) {
                    t = t.neg();
                }
                let c = one.div(&t.mul(&t).add(&one).sqrt());
                let s = t.mul(&c);
                let e = Cplx::new(gamma.re.div(&g), gamma.im.div(&g).neg());
                let (head, tail) = colv.split_at_mut(q);
                for (x, y) in head[p].iter_mut().zip(tail[0].iter_mut()) {
                    let u = x.clone();
                    let v = &*y * &e;
                    *x = &u.scale(&c) - &v.scale(&s);
                    *y = &u.scale(&s) + &v.scale(&c);
                }
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(Error::InvalidArgument(format!("one-sided Jacobi did not converge in {MAX_SWEEPS} sweeps")));
    }
    let mut sv: Vec<R> =
        colv.iter().map(|c| c.iter().fold(zero.clone(), |acc, z| acc.add(&z.norm_sqr())).sqrt()).collect();
    sv.sort_by(|x, y| y.partial_cmp_real(x).unwrap_or(std::cmp::Ordering::Equal));
    sv.truncate(rows.min(cols));
    Ok(sv)
}
