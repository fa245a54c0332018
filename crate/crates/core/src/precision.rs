//! Working-precision selection and the scalar abstraction shared by all
//! matrix code.
//!
//! Every numeric kernel is generic over [`Real`]. Two backends exist: plain
//! `f64` and [`BigReal`], an arbitrary-precision binary float whose
//! significand length is fixed by a [`PrecisionPolicy`].

use std::cell::RefCell;
use std::cmp::Ordering;
use std::fmt;

use astro_float::{BigFloat, Consts, Radix, RoundingMode, Sign};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const RM: RoundingMode = RoundingMode::ToEven;
const WORD_BITS: usize = 64;

thread_local! {
    static CONSTS: RefCell<Consts> = RefCell::new(Consts::new().expect("constants cache"));
}

fn with_consts<T>(f: impl FnOnce(&mut Consts) -> T) -> T {
    CONSTS.with(|cc| f(&mut cc.borrow_mut()))
}

/// Arithmetic mode for a computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum PrecisionPolicy {
    /// IEEE-754 binary64.
    Double,
    /// Software float with `bits` significand bits (rounded up to a whole
    /// 64-bit word internally).
    BigFloat { bits: u32 },
}

impl PrecisionPolicy {
    pub fn big(bits: u32) -> Result<Self> {
        if bits < 53 {
            return Err(Error::InvalidArgument(format!(
                "big-float precision must be at least 53 bits, got {bits}"
            )));
        }
        Ok(Self::BigFloat { bits })
    }

    /// Picks double mode for `bits == 53`, big-float otherwise.
    pub fn from_bits(bits: u32) -> Result<Self> {
        if bits == 53 {
            Ok(Self::Double)
        } else {
            Self::big(bits)
        }
    }

    /// Significand bits actually carried by values under this policy.
    pub fn bits(&self) -> u32 {
        match self {
            Self::Double => 53,
            Self::BigFloat { bits } => (*bits as usize).div_ceil(WORD_BITS) as u32 * WORD_BITS as u32,
        }
    }

    /// Unit in the last place relative to 1.
    pub fn ulp(&self) -> f64 {
        2f64.powi(1 - self.bits() as i32)
    }

    pub fn is_double(&self) -> bool {
        matches!(self, Self::Double)
    }

    pub fn doubled(&self) -> Self {
        match self {
            Self::Double => Self::BigFloat { bits: 128 },
            Self::BigFloat { bits } => Self::BigFloat { bits: bits * 2 },
        }
    }
}

impl fmt::Display for PrecisionPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Double => write!(f, "double"),
            Self::BigFloat { bits } => write!(f, "bigfloat({bits})"),
        }
    }
}

/// Real scalar usable by the matrix kernels.
///
/// Operations are methods rather than operator impls so that the same generic
/// code drives both `f64` and heap-allocated software floats.
pub trait Real: Clone + fmt::Debug + Send + Sync + 'static {
    fn from_f64(x: f64, policy: &PrecisionPolicy) -> Self;
    /// Parses a decimal literal at the policy precision.
    fn from_decimal(s: &str, policy: &PrecisionPolicy) -> Self;
    fn pi(policy: &PrecisionPolicy) -> Self;

    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    fn abs(&self) -> Self;
    fn sqrt(&self) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    /// Four-quadrant arctangent of `self / x`.
    fn atan2(&self, x: &Self) -> Self;
    fn floor(&self) -> Self;

    fn partial_cmp_real(&self, o: &Self) -> Option<Ordering>;
    fn is_zero(&self) -> bool;
    fn to_f64(&self) -> f64;
    /// Natural logarithm returned as `f64`; valid even when `self` underflows
    /// the `f64` range.
    fn ln_f64(&self) -> f64;
    /// Decimal string carrying the full precision of the value.
    fn to_decimal(&self) -> String;

    fn zero_like(&self) -> Self;
    fn policy(&self) -> PrecisionPolicy;

    fn mul_f64(&self, x: f64) -> Self {
        self.mul(&Self::from_f64(x, &self.policy()))
    }

    fn lt(&self, o: &Self) -> bool {
        self.partial_cmp_real(o) == Some(Ordering::Less)
    }

    fn max_real(&self, o: &Self) -> Self {
        if self.lt(o) {
            o.clone()
        } else {
            self.clone()
        }
    }

    fn sign_positive(&self) -> bool {
        !self.lt(&self.zero_like())
    }
}

impl Real for f64 {
    fn from_f64(x: f64, _: &PrecisionPolicy) -> Self {
        x
    }
    fn from_decimal(s: &str, _: &PrecisionPolicy) -> Self {
        s.parse().unwrap_or(f64::NAN)
    }
    fn pi(_: &PrecisionPolicy) -> Self {
        std::f64::consts::PI
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn atan2(&self, x: &Self) -> Self {
        f64::atan2(*self, *x)
    }
    fn floor(&self) -> Self {
        f64::floor(*self)
    }
    fn partial_cmp_real(&self, o: &Self) -> Option<Ordering> {
        self.partial_cmp(o)
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn ln_f64(&self) -> f64 {
        self.ln()
    }
    fn to_decimal(&self) -> String {
        format!("{self:e}")
    }
    fn zero_like(&self) -> Self {
        0.0
    }
    fn policy(&self) -> PrecisionPolicy {
        PrecisionPolicy::Double
    }
    fn mul_f64(&self, x: f64) -> Self {
        self * x
    }
}

/// Software float with a fixed significand length.
#[derive(Clone)]
pub struct BigReal {
    v: BigFloat,
    p: usize,
}

impl BigReal {
    fn wrap(&self, v: BigFloat) -> Self {
        Self { v, p: self.p }
    }

    fn prec(policy: &PrecisionPolicy) -> usize {
        policy.bits() as usize
    }

    pub fn inner(&self) -> &BigFloat {
        &self.v
    }

    /// Returns `(top mantissa word, binary exponent, negative)` with
    /// `|self| = top / 2^64 * 2^exponent` up to truncation.
    fn top_word(&self) -> Option<(u64, i32, bool)> {
        let (words, _, sign, exp, _) = self.v.as_raw_parts()?;
        let top = *words.last()?;
        if top == 0 {
            return None;
        }
        Some((top, exp, sign == Sign::Neg))
    }
}

impl fmt::Debug for BigReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_decimal())
    }
}

impl Real for BigReal {
    fn from_f64(x: f64, policy: &PrecisionPolicy) -> Self {
        let p = Self::prec(policy);
        Self { v: BigFloat::from_f64(x, p), p }
    }

    fn from_decimal(s: &str, policy: &PrecisionPolicy) -> Self {
        let p = Self::prec(policy);
        let v = with_consts(|cc| BigFloat::parse(s, Radix::Dec, p, RM, cc));
        Self { v, p }
    }

    fn pi(policy: &PrecisionPolicy) -> Self {
        let p = Self::prec(policy);
        let v = with_consts(|cc| cc.pi(p, RM));
        Self { v, p }
    }

    fn add(&self, o: &Self) -> Self {
        self.wrap(self.v.add(&o.v, self.p, RM))
    }
    fn sub(&self, o: &Self) -> Self {
        self.wrap(self.v.sub(&o.v, self.p, RM))
    }
    fn mul(&self, o: &Self) -> Self {
        self.wrap(self.v.mul(&o.v, self.p, RM))
    }
    fn div(&self, o: &Self) -> Self {
        self.wrap(self.v.div(&o.v, self.p, RM))
    }
    fn neg(&self) -> Self {
        self.wrap(self.v.neg())
    }
    fn abs(&self) -> Self {
        self.wrap(self.v.abs())
    }
    fn sqrt(&self) -> Self {
        if self.v.is_zero() {
            return self.clone();
        }
        self.wrap(self.v.sqrt(self.p, RM))
    }
    fn sin(&self) -> Self {
        if self.v.is_zero() {
            return self.clone();
        }
        self.wrap(with_consts(|cc| self.v.sin(self.p, RM, cc)))
    }
    fn cos(&self) -> Self {
        self.wrap(with_consts(|cc| self.v.cos(self.p, RM, cc)))
    }

    fn atan2(&self, x: &Self) -> Self {
        let zero = self.zero_like();
        let pi = Self::pi(&self.policy());
        if x.is_zero() {
            return match self.partial_cmp_real(&zero) {
                Some(Ordering::Greater) => pi.mul_f64(0.5),
                Some(Ordering::Less) => pi.mul_f64(-0.5),
                _ => zero,
            };
        }
        let base = if self.is_zero() {
            zero.clone()
        } else {
            let ratio = self.div(x);
            self.wrap(with_consts(|cc| ratio.v.atan(self.p, RM, cc)))
        };
        if x.sign_positive() {
            base
        } else if self.lt(&zero) {
            base.sub(&pi)
        } else {
            base.add(&pi)
        }
    }

    fn floor(&self) -> Self {
        self.wrap(self.v.floor())
    }

    fn partial_cmp_real(&self, o: &Self) -> Option<Ordering> {
        self.v.partial_cmp(&o.v)
    }

    fn is_zero(&self) -> bool {
        self.v.is_zero()
    }

    fn to_f64(&self) -> f64 {
        match self.top_word() {
            None => {
                if self.v.is_nan() {
                    f64::NAN
                } else {
                    0.0
                }
            }
            Some((top, exp, neg)) => {
                let mag = if exp > 1100 {
                    f64::INFINITY
                } else if exp < -1200 {
                    0.0
                } else {
                    (top as f64) * 2f64.powi(-64) * 2f64.powi(exp)
                };
                if neg {
                    -mag
                } else {
                    mag
                }
            }
        }
    }

    fn ln_f64(&self) -> f64 {
        match self.top_word() {
            None => f64::NEG_INFINITY,
            Some((_, _, true)) => f64::NAN,
            Some((top, exp, false)) => {
                ((top as f64) * 2f64.powi(-64)).ln() + exp as f64 * std::f64::consts::LN_2
            }
        }
    }

    fn to_decimal(&self) -> String {
        with_consts(|cc| self.v.format(Radix::Dec, RM, cc)).unwrap_or_else(|_| "NaN".into())
    }

    fn zero_like(&self) -> Self {
        self.wrap(BigFloat::from_f64(0.0, self.p))
    }

    fn policy(&self) -> PrecisionPolicy {
        PrecisionPolicy::BigFloat { bits: self.p as u32 }
    }
}
