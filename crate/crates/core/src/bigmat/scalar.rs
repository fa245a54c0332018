use std::ops::{Add, Mul, Neg, Sub};

use crate::precision::{PrecisionPolicy, Real};

/// Complex number over a [`Real`] backend.
#[derive(Clone, Debug)]
pub struct Cplx<R> {
    pub re: R,
    pub im: R,
}

impl<R: Real> Cplx<R> {
    pub fn new(re: R, im: R) -> Self {
        Self { re, im }
    }

    pub fn from_f64(re: f64, im: f64, policy: &PrecisionPolicy) -> Self {
        Self { re: R::from_f64(re, policy), im: R::from_f64(im, policy) }
    }

    pub fn from_real(re: R) -> Self {
        let im = re.zero_like();
        Self { re, im }
    }

    pub fn zero(policy: &PrecisionPolicy) -> Self {
        Self::from_f64(0.0, 0.0, policy)
    }

    pub fn one(policy: &PrecisionPolicy) -> Self {
        Self::from_f64(1.0, 0.0, policy)
    }

    pub fn conj(&self) -> Self {
        Self { re: self.re.clone(), im: self.im.neg() }
    }

    pub fn norm_sqr(&self) -> R {
        self.re.mul(&self.re).add(&self.im.mul(&self.im))
    }

    /// Modulus, scaled so that tiny components do not underflow.
    pub fn abs(&self) -> R {
        let big = self.re.abs().max_real(&self.im.abs());
        if big.is_zero() {
            return big;
        }
        let (x, y) = (self.re.div(&big), self.im.div(&big));
        big.mul(&x.mul(&x).add(&y.mul(&y)).sqrt())
    }

    /// Cheap magnitude proxy `|re| + |im|`.
    pub fn l1(&self) -> R {
        self.re.abs().add(&self.im.abs())
    }

    pub fn scale(&self, s: &R) -> Self {
        Self { re: self.re.mul(s), im: self.im.mul(s) }
    }

    pub fn div(&self, o: &Self) -> Self {
        let den = o.norm_sqr();
        let num = self * &o.conj();
        Self { re: num.re.div(&den), im: num.im.div(&den) }
    }

    /// `e^{i theta}`.
    pub fn cis(theta: &R) -> Self {
        Self { re: theta.cos(), im: theta.sin() }
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn to_f64(&self) -> (f64, f64) {
        (self.re.to_f64(), self.im.to_f64())
    }

    pub fn policy(&self) -> PrecisionPolicy {
        self.re.policy()
    }

    /// Principal argument.
    pub fn arg(&self) -> R {
        self.im.atan2(&self.re)
    }

    /// Adds `a * b` into `self`.
    pub fn mul_add_assign(&mut self, a: &Self, b: &Self) {
        let re = a.re.mul(&b.re).sub(&a.im.mul(&b.im));
        let im = a.re.mul(&b.im).add(&a.im.mul(&b.re));
        self.re = self.re.add(&re);
        self.im = self.im.add(&im);
    }
}

impl<R: Real> Add for &Cplx<R> {
    type Output = Cplx<R>;
    fn add(self, o: &Cplx<R>) -> Cplx<R> {
        Cplx { re: self.re.add(&o.re), im: self.im.add(&o.im) }
    }
}

impl<R: Real> Sub for &Cplx<R> {
    type Output = Cplx<R>;
    fn sub(self, o: &Cplx<R>) -> Cplx<R> {
        Cplx { re: self.re.sub(&o.re), im: self.im.sub(&o.im) }
    }
}

impl<R: Real> Mul for &Cplx<R> {
    type Output = Cplx<R>;
    fn mul(self, o: &Cplx<R>) -> Cplx<R> {
        Cplx {
            re: self.re.mul(&o.re).sub(&self.im.mul(&o.im)),
            im: self.re.mul(&o.im).add(&self.im.mul(&o.re)),
        }
    }
}

impl<R: Real> Neg for &Cplx<R> {
    type Output = Cplx<R>;
    fn neg(self) -> Cplx<R> {
        Cplx { re: self.re.neg(), im: self.im.neg() }
    }
}

impl<R: Real> Add for Cplx<R> {
    type Output = Cplx<R>;
    fn add(self, o: Cplx<R>) -> Cplx<R> {
        &self + &o
    }
}

impl<R: Real> Sub for Cplx<R> {
    type Output = Cplx<R>;
    fn sub(self, o: Cplx<R>) -> Cplx<R> {
        &self - &o
    }
}

impl<R: Real> Mul for Cplx<R> {
    type Output = Cplx<R>;
    fn mul(self, o: Cplx<R>) -> Cplx<R> {
        &self * &o
    }
}
