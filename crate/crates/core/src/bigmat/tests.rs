use nalgebra::{Complex, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::precision::BigReal;

const D: PrecisionPolicy = PrecisionPolicy::Double;

fn random(n: usize, m: usize, seed: u64) -> CMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let e: Vec<(f64, f64)> = (0..n * m).map(|_| (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    CMatrix::from_f64(n, m, &e, &D).unwrap()
}

fn random_hermitian(n: usize, seed: u64) -> CMatrix<f64> {
    let a = random(n, n, seed);
    a.add(&a.adjoint()).unwrap().scale(&0.5)
}

fn to_na(a: &CMatrix<f64>) -> DMatrix<Complex<f64>> {
    DMatrix::from_fn(a.rows(), a.cols(), |i, j| Complex::new(a.get(i, j).re, a.get(i, j).im))
}

#[test]
fn vec_of_sandwich_matches_kronecker() {
    let (a, x, b) = (random(3, 3, 1), random(3, 3, 2), random(3, 3, 3));
    let lhs = vec(&a.matmul(&x).unwrap().matmul(&b).unwrap()).unwrap();
    let rhs = kron(&b.transpose(), &a).unwrap().matmul(&vec(&x).unwrap()).unwrap();
    assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-13);
    assert!(unvec(&vec(&x).unwrap(), 3).unwrap().max_abs_diff(&x).unwrap() == 0.0);
}

#[test]
fn kron_matches_nalgebra() {
    let (a, b) = (random(2, 3, 4), random(3, 2, 5));
    let k = kron(&a, &b).unwrap();
    let kn = to_na(&a).kronecker(&to_na(&b));
    for i in 0..6 {
        for j in 0..6 {
            let z = k.get(i, j);
            assert!((Complex::new(z.re, z.im) - kn[(i, j)]).norm() < 1e-15);
        }
    }
    assert_eq!(tensor_power(&a, 3).unwrap().rows(), 8);
}

#[test]
fn matmul_matches_nalgebra() {
    let (a, b) = (random(4, 5, 6), random(5, 3, 7));
    let c = a.matmul(&b).unwrap();
    let cn = to_na(&a) * to_na(&b);
    assert!((to_na(&c) - cn).norm() < 1e-13);
    assert!(a.matmul(&a).is_err());
}

#[test]
fn jacobi_eigenvalues_match_nalgebra() {
    for n in [1, 2, 5, 12] {
        let h = random_hermitian(n, 10 + n as u64);
        let eig = eig_hermitian(&h, true).unwrap();
        let mut reference: Vec<f64> = nalgebra::SymmetricEigen::new(to_na(&h)).eigenvalues.iter().copied().collect();
        reference.sort_by(f64::total_cmp);
        for (x, y) in eig.values.iter().zip(&reference) {
            assert!((x - y).abs() < 1e-12, "n={n}: {x} vs {y}");
        }
        let v = eig.vectors.unwrap();
        let lam = CMatrix::from_real_diag(&eig.values, &D);
        let back = v.matmul(&lam).unwrap().matmul(&v.adjoint()).unwrap();
        assert!(back.max_abs_diff(&h).unwrap() < 1e-12);
        let gram = v.adjoint().matmul(&v).unwrap();
        assert!(gram.max_abs_diff(&CMatrix::identity(n, &D)).unwrap() < 1e-12);
    }
}

#[test]
fn large_double_problems_use_fallback_and_agree() {
    let h = random_hermitian(70, 99);
    let vals = eigvals_hermitian(&h).unwrap();
    let tr = h.trace().unwrap().re;
    assert!((vals.iter().sum::<f64>() - tr).abs() < 1e-10);
    let sq: f64 = h.data().iter().map(|z| z.norm_sqr()).sum();
    assert!((vals.iter().map(|v| v * v).sum::<f64>() - sq).abs() < 1e-9);
}

#[test]
fn big_float_jacobi_reaches_working_precision() {
    let p = PrecisionPolicy::big(256).unwrap();
    let h: CMatrix<BigReal> = random_hermitian(6, 42).promote(&p);
    let eig = eig_hermitian(&h, true).unwrap();
    let v = eig.vectors.unwrap();
    let n = 6;
    let mut lam = CMatrix::zeros(n, n, &p);
    for (i, x) in eig.values.iter().enumerate() {
        lam.set(i, i, Cplx::from_real(x.clone()));
    }
    let back = v.matmul(&lam).unwrap().matmul(&v.adjoint()).unwrap();
    let err = back.sub(&h).unwrap();
    let worst = err.data().iter().map(|z| z.abs().ln_f64()).fold(f64::NEG_INFINITY, f64::max);
    assert!(worst < -70.0 * std::f64::consts::LN_10, "log error {worst}");
}

#[test]
fn non_hermitian_input_is_rejected() {
    let a = random(4, 4, 8);
    assert!(matches!(eig_hermitian(&a, false), Err(Error::NotHermitian { .. })));
    assert!(matches!(eig_hermitian(&random(2, 3, 1), false), Err(Error::NotSquare { .. })));
}

#[test]
fn norms_of_known_matrices() {
    let d: CMatrix<f64> = CMatrix::from_real_diag(&[1.0, -2.0, 3.0], &D);
    assert!((trace_norm(&d).unwrap() - 6.0).abs() < 1e-14);
    assert!((operator_norm(&d).unwrap() - 3.0).abs() < 1e-14);
    // Nilpotent Jordan block: singular values {1, 0}.
    let j: CMatrix<f64> = CMatrix::from_f64(2, 2, &[(0.0, 0.0), (1.0, 0.0), (0.0, 0.0), (0.0, 0.0)], &D).unwrap();
    assert!((trace_norm(&j).unwrap() - 1.0).abs() < 1e-14);
    let a = random(5, 5, 11);
    let sv = singular_values(&a).unwrap();
    let reference = to_na(&a).singular_values();
    let mut reference: Vec<f64> = reference.iter().copied().collect();
    reference.sort_by(|x, y| y.total_cmp(x));
    for (x, y) in sv.iter().zip(&reference) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn determinant_and_exponential() {
    let a: CMatrix<f64> = CMatrix::from_f64(2, 2, &[(1.0, 0.0), (2.0, 0.0), (3.0, 0.0), (4.0, 0.0)], &D).unwrap();
    let det = a.det().unwrap();
    assert!((det.re + 2.0).abs() < 1e-14 && det.im.abs() < 1e-14);
    let r = random(4, 4, 12);
    let dn = to_na(&r).determinant();
    let dr = r.det().unwrap();
    assert!((Complex::new(dr.re, dr.im) - dn).norm() < 1e-12);

    let z = CMatrix::from_real_diag(&[1.0, -1.0], &D);
    let u = expm_hermitian(&z, &0.3).unwrap();
    assert!((u.get(0, 0).re - 0.3f64.cos()).abs() < 1e-15);
    assert!((u.get(0, 0).im + 0.3f64.sin()).abs() < 1e-15);
    assert!(unitarity_error(&u).unwrap() < 1e-14);
}

#[test]
fn partial_trace_of_product_state() {
    let a = random_hermitian(2, 20);
    let b = random_hermitian(3, 21);
    let ab = kron(&a, &b).unwrap();
    let tb = b.trace().unwrap();
    let ta = a.trace().unwrap();
    let ra = partial_trace(&ab, &[2, 3], &[0]).unwrap();
    assert!(ra.max_abs_diff(&a.scale_c(&tb)).unwrap() < 1e-14);
    let rb = partial_trace(&ab, &[2, 3], &[1]).unwrap();
    assert!(rb.max_abs_diff(&b.scale_c(&ta)).unwrap() < 1e-14);
    assert!(partial_trace(&ab, &[2, 2], &[0]).is_err());
}

#[test]
fn mixed_policies_are_rejected() {
    let p = PrecisionPolicy::big(128).unwrap();
    let a: CMatrix<BigReal> = random(2, 2, 1).promote(&p);
    let b: CMatrix<BigReal> = random(2, 2, 1).promote(&PrecisionPolicy::big(256).unwrap());
    assert!(matches!(a.matmul(&b), Err(Error::PolicyMismatch(..))));
}

#[test]
fn jacobi_survives_tiny_off_diagonals() {
    let d = PrecisionPolicy::Double;
    let a = CMatrix::<f64>::from_f64(2, 2, &[(0.45, 0.0), (3e-162, 2e-162), (3e-162, -2e-162), (0.14, 0.0)], &d).unwrap();
    let v = eigvals_hermitian(&a).unwrap();
    assert!((v[0] - 0.14).abs() < 1e-16 && (v[1] - 0.45).abs() < 1e-16);
    let z = Cplx::<f64>::new(3e-170, 4e-170);
    assert!((z.abs() / 5e-170 - 1.0).abs() < 1e-15);
}
