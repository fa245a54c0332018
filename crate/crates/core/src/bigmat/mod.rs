//! Dense complex matrices at a configurable working precision.
//!
//! Storage is row-major. Vectorization stacks columns, so that
//! `vec(A X B) = (B^T ⊗ A) vec(X)` with the standard Kronecker ordering
//! produced by [`kron`].

mod eig;
mod scalar;

pub use eig::{eig_hermitian, eigvals_hermitian, singular_values, HermitianEigen};
pub use scalar::Cplx;

use crate::error::{Error, Result};
use crate::precision::{PrecisionPolicy, Real};

/// Hermiticity tolerance in units of the policy ulp.
pub const HERMITIAN_ULPS: f64 = 10.0;

#[derive(Clone, Debug)]
pub struct CMatrix<R> {
    rows: usize,
    cols: usize,
    data: Vec<Cplx<R>>,
    policy: PrecisionPolicy,
}

impl<R: Real> CMatrix<R> {
    pub fn zeros(rows: usize, cols: usize, policy: &PrecisionPolicy) -> Self {
        Self { rows, cols, data: vec![Cplx::zero(policy); rows * cols], policy: *policy }
    }

    pub fn identity(n: usize, policy: &PrecisionPolicy) -> Self {
        let mut m = Self::zeros(n, n, policy);
        for i in 0..n {
            m.data[i * n + i] = Cplx::one(policy);
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<Cplx<R>>, policy: &PrecisionPolicy) -> Result<Self> {
        if data.len() != rows * cols || rows == 0 || cols == 0 {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data, policy: *policy })
    }

    /// Builds a matrix from row-major `(re, im)` pairs.
    pub fn from_f64(rows: usize, cols: usize, entries: &[(f64, f64)], policy: &PrecisionPolicy) -> Result<Self> {
        let data = entries.iter().map(|&(re, im)| Cplx::from_f64(re, im, policy)).collect();
        Self::from_vec(rows, cols, data, policy)
    }

    pub fn from_real_diag(diag: &[f64], policy: &PrecisionPolicy) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n, policy);
        for (i, &x) in diag.iter().enumerate() {
            m.data[i * n + i] = Cplx::from_f64(x, 0.0, policy);
        }
        m
    }

    /// Column vector from entries.
    pub fn column(entries: Vec<Cplx<R>>, policy: &PrecisionPolicy) -> Result<Self> {
        let n = entries.len();
        Self::from_vec(n, 1, entries, policy)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn policy(&self) -> &PrecisionPolicy {
        &self.policy
    }

    pub fn data(&self) -> &[Cplx<R>] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Cplx<R>] {
        &mut self.data
    }

    pub fn get(&self, i: usize, j: usize) -> &Cplx<R> {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Cplx<R>) {
        self.data[i * self.cols + j] = v;
    }

    pub fn check_policy(&self, other: &Self) -> Result<()> {
        if self.policy != other.policy {
            return Err(Error::PolicyMismatch(self.policy.to_string(), other.policy.to_string()));
        }
        Ok(())
    }

    pub fn require_square(&self) -> Result<usize> {
        if self.rows != self.cols {
            return Err(Error::NotSquare { rows: self.rows, cols: self.cols });
        }
        Ok(self.rows)
    }

    fn same_shape(&self, other: &Self) -> Result<()> {
        self.check_policy(other)?;
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Self { data, ..self.clone_shape() })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Self { data, ..self.clone_shape() })
    }

    /// `self += s * other`.
    pub fn add_scaled_assign(&mut self, s: &R, other: &Self) -> Result<()> {
        self.same_shape(other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a = &*a + &b.scale(s);
        }
        Ok(())
    }

    pub fn scale(&self, s: &R) -> Self {
        let data = self.data.iter().map(|a| a.scale(s)).collect();
        Self { data, ..self.clone_shape() }
    }

    pub fn scale_c(&self, s: &Cplx<R>) -> Self {
        let data = self.data.iter().map(|a| a * s).collect();
        Self { data, ..self.clone_shape() }
    }

    fn clone_shape(&self) -> Self {
        Self { rows: self.rows, cols: self.cols, data: Vec::new(), policy: self.policy }
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        self.check_policy(other)?;
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let (n, k, m) = (self.rows, self.cols, other.cols);
        let mut out = Self::zeros(n, m, &self.policy);
        for i in 0..n {
            for l in 0..k {
                let a = &self.data[i * k + l];
                if a.is_zero() {
                    continue;
                }
                let row = &other.data[l * m..(l + 1) * m];
                let dst = &mut out.data[i * m..(i + 1) * m];
                for (d, b) in dst.iter_mut().zip(row) {
                    d.mul_add_assign(a, b);
                }
            }
        }
        Ok(out)
    }

    /// Integer matrix power by repeated squaring.
    pub fn pow(&self, e: u64) -> Result<Self> {
        let n = self.require_square()?;
        let mut result = Self::identity(n, &self.policy);
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                result = result.matmul(&base)?;
            }
            e >>= 1;
            if e > 0 {
                base = base.matmul(&base)?;
            }
        }
        Ok(result)
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows, &self.policy);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j].conj();
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows, &self.policy);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j].clone();
            }
        }
        out
    }

    pub fn conj(&self) -> Self {
        let data = self.data.iter().map(Cplx::conj).collect();
        Self { data, ..self.clone_shape() }
    }

    pub fn trace(&self) -> Result<Cplx<R>> {
        let n = self.require_square()?;
        let mut t = Cplx::zero(&self.policy);
        for i in 0..n {
            t = &t + &self.data[i * n + i];
        }
        Ok(t)
    }

    /// `max_ij |M_ij - conj(M_ji)|` as `f64`.
    pub fn hermitian_deviation(&self) -> Result<f64> {
        let n = self.require_square()?;
        let mut dev = 0.0f64;
        for i in 0..n {
            for j in i..n {
                let d = &self.data[i * n + j] - &self.data[j * n + i].conj();
                dev = dev.max(d.abs().to_f64());
            }
        }
        Ok(dev)
    }

    /// Largest entry magnitude as `f64`.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.abs().to_f64()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        Ok(self.sub(other)?.max_abs())
    }

    /// Absolute Hermiticity tolerance: 10 ulp of the policy, relative to the
    /// matrix scale (never below 1).
    pub fn hermitian_tolerance(&self) -> f64 {
        HERMITIAN_ULPS * self.policy.ulp() * self.max_abs().max(1.0)
    }

    pub fn require_hermitian(&self) -> Result<()> {
        let dev = self.hermitian_deviation()?;
        let tol = self.hermitian_tolerance();
        if dev > tol || dev.is_nan() {
            return Err(Error::NotHermitian { deviation: dev, tolerance: tol });
        }
        Ok(())
    }

    pub fn is_hermitian(&self) -> bool {
        self.require_hermitian().is_ok()
    }

    /// Matrix-vector product with a plain slice.
    pub fn matvec(&self, v: &[Cplx<R>]) -> Result<Vec<Cplx<R>>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} for {} columns",
                v.len(),
                self.cols
            )));
        }
        let mut out = Vec::with_capacity(self.rows);
        for i in 0..self.rows {
            let mut acc = Cplx::zero(&self.policy);
            for (a, b) in self.data[i * self.cols..(i + 1) * self.cols].iter().zip(v) {
                acc.mul_add_assign(a, b);
            }
            out.push(acc);
        }
        Ok(out)
    }

    /// Determinant by LU factorization with partial pivoting.
    pub fn det(&self) -> Result<Cplx<R>> {
        let n = self.require_square()?;
        let mut a = self.data.clone();
        let mut det = Cplx::one(&self.policy);
        for col in 0..n {
            let mut piv = col;
            let mut best = a[col * n + col].l1();
            for r in col + 1..n {
                let v = a[r * n + col].l1();
                if best.lt(&v) {
                    best = v;
                    piv = r;
                }
            }
            if a[piv * n + col].is_zero() {
                return Ok(Cplx::zero(&self.policy));
            }
            if piv != col {
                for j in 0..n {
                    a.swap(col * n + j, piv * n + j);
                }
                det = -&det;
            }
            let p = a[col * n + col].clone();
            det = &det * &p;
            for r in col + 1..n {
                let f = a[r * n + col].div(&p);
                if f.is_zero() {
                    continue;
                }
                for j in col..n {
                    let upd = &f * &a[col * n + j];
                    a[r * n + j] = &a[r * n + j] - &upd;
                }
            }
        }
        Ok(det)
    }

    /// Converts entries to `(re, im)` doubles, row-major.
    pub fn to_f64_pairs(&self) -> Vec<(f64, f64)> {
        self.data.iter().map(Cplx::to_f64).collect()
    }

    /// Re-expresses the matrix under another policy. Widening is exact;
    /// narrowing rounds.
    pub fn convert<S: Real>(&self, policy: &PrecisionPolicy) -> CMatrix<S> {
        let data = self
            .data
            .iter()
            .map(|z| Cplx::new(S::from_decimal(&z.re.to_decimal(), policy), S::from_decimal(&z.im.to_decimal(), policy)))
            .collect();
        CMatrix { rows: self.rows, cols: self.cols, data, policy: *policy }
    }
}

impl CMatrix<f64> {
    /// Promotes a double-precision matrix to another backend exactly.
    pub fn promote<S: Real>(&self, policy: &PrecisionPolicy) -> CMatrix<S> {
        let data = self.data.iter().map(|z| Cplx::from_f64(z.re, z.im, policy)).collect();
        CMatrix { rows: self.rows, cols: self.cols, data, policy: *policy }
    }
}

/// Kronecker product in standard ordering.
pub fn kron<R: Real>(a: &CMatrix<R>, b: &CMatrix<R>) -> Result<CMatrix<R>> {
    a.check_policy(b)?;
    let (ra, ca, rb, cb) = (a.rows, a.cols, b.rows, b.cols);
    let mut out = CMatrix::zeros(ra * rb, ca * cb, &a.policy);
    let oc = ca * cb;
    for i in 0..ra {
        for j in 0..ca {
            let x = &a.data[i * ca + j];
            if x.is_zero() {
                continue;
            }
            for k in 0..rb {
                for l in 0..cb {
                    out.data[(i * rb + k) * oc + j * cb + l] = x * &b.data[k * cb + l];
                }
            }
        }
    }
    Ok(out)
}

/// `k`-fold Kronecker power.
pub fn tensor_power<R: Real>(a: &CMatrix<R>, k: usize) -> Result<CMatrix<R>> {
    if k == 0 {
        return Err(Error::InvalidArgument("tensor power requires k >= 1".into()));
    }
    let mut out = a.clone();
    for _ in 1..k {
        out = kron(&out, a)?;
    }
    Ok(out)
}

/// Reduced matrix on the subsystems listed in `keep`; the remaining
/// subsystems are traced out. Subsystem 0 is the most significant factor.
pub fn partial_trace<R: Real>(m: &CMatrix<R>, dims: &[usize], keep: &[usize]) -> Result<CMatrix<R>> {
    let n = m.require_square()?;
    let total: usize = dims.iter().product();
    if total != n || dims.contains(&0) {
        return Err(Error::DimensionMismatch(format!("subsystem dims {dims:?} do not multiply to {n}")));
    }
    let mut keep_sorted: Vec<usize> = keep.to_vec();
    keep_sorted.sort_unstable();
    keep_sorted.dedup();
    if keep_sorted.iter().any(|&s| s >= dims.len()) {
        return Err(Error::DimensionMismatch(format!("keep set {keep:?} out of range for {} subsystems", dims.len())));
    }
    let traced: Vec<usize> = (0..dims.len()).filter(|s| !keep_sorted.contains(s)).collect();

    let mut strides = vec![1usize; dims.len()];
    for s in (0..dims.len().saturating_sub(1)).rev() {
        strides[s] = strides[s + 1] * dims[s + 1];
    }
    let offsets = |subsystems: &[usize]| -> Vec<usize> {
        let count: usize = subsystems.iter().map(|&s| dims[s]).product();
        (0..count)
            .map(|mut idx| {
                let mut off = 0;
                for &s in subsystems.iter().rev() {
                    off += (idx % dims[s]) * strides[s];
                    idx /= dims[s];
                }
                off
            })
            .collect()
    };
    let kept_off = offsets(&keep_sorted);
    let traced_off = offsets(&traced);
    let dk = kept_off.len();
    let mut out = CMatrix::zeros(dk, dk, &m.policy);
    for (oi, &ri) in kept_off.iter().enumerate() {
        for (oj, &cj) in kept_off.iter().enumerate() {
            let mut acc = Cplx::zero(&m.policy);
            for &t in &traced_off {
                acc = &acc + m.get(ri + t, cj + t);
            }
            out.data[oi * dk + oj] = acc;
        }
    }
    Ok(out)
}

/// Column-stacking vectorization of a square matrix.
pub fn vec<R: Real>(m: &CMatrix<R>) -> Result<CMatrix<R>> {
    let n = m.require_square()?;
    let mut data = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            data.push(m.get(i, j).clone());
        }
    }
    CMatrix::column(data, &m.policy)
}

/// Inverse of [`vec`].
pub fn unvec<R: Real>(v: &CMatrix<R>, d: usize) -> Result<CMatrix<R>> {
    if v.cols != 1 || v.rows != d * d {
        return Err(Error::DimensionMismatch(format!("cannot unvec a {}x{} array into {d}x{d}", v.rows, v.cols)));
    }
    let mut out = CMatrix::zeros(d, d, &v.policy);
    for j in 0..d {
        for i in 0..d {
            out.data[i * d + j] = v.data[j * d + i].clone();
        }
    }
    Ok(out)
}

/// Sum of absolute eigenvalues (Hermitian input) or of singular values.
pub fn trace_norm<R: Real>(a: &CMatrix<R>) -> Result<R> {
    a.require_square()?;
    let zero = R::from_f64(0.0, a.policy());
    if a.is_hermitian() {
        let vals = eigvals_hermitian(a)?;
        Ok(vals.iter().fold(zero, |acc, v| acc.add(&v.abs())))
    } else {
        let sv = singular_values(a)?;
        Ok(sv.iter().fold(zero, |acc, v| acc.add(v)))
    }
}

/// Largest singular value.
pub fn operator_norm<R: Real>(a: &CMatrix<R>) -> Result<R> {
    a.require_square()?;
    let sv = singular_values(a)?;
    let zero = R::from_f64(0.0, a.policy());
    Ok(sv.into_iter().fold(zero, |acc, v| acc.max_real(&v)))
}

/// Unitary `exp(-i t h)` for Hermitian `h`, via eigendecomposition.
pub fn expm_hermitian<R: Real>(h: &CMatrix<R>, t: &R) -> Result<CMatrix<R>> {
    let eig = eig_hermitian(h, true)?;
    let v = eig.vectors.expect("eigenvectors requested");
    let n = h.rows;
    let mut scaled = v.clone();
    for (j, lam) in eig.values.iter().enumerate() {
        let phase = Cplx::cis(&lam.mul(t).neg());
        for i in 0..n {
            scaled.data[i * n + j] = &v.data[i * n + j] * &phase;
        }
    }
    scaled.matmul(&v.adjoint())
}

/// `‖1 - U U†‖_∞`, the unitarity drift of `u`.
pub fn unitarity_error<R: Real>(u: &CMatrix<R>) -> Result<R> {
    let n = u.require_square()?;
    let gram = u.matmul(&u.adjoint())?;
    operator_norm(&CMatrix::identity(n, u.policy()).sub(&gram)?)
}

#[cfg(test)]
mod tests;
