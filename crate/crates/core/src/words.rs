//! Generalized Fibonacci (Sturmian) words, their counting sequences and
//! Zeckendorf expansions.

use std::collections::HashSet;
use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::precision::{BigReal, PrecisionPolicy, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum WordOrigin {
    Concatenation,
    Rotation { theta0: f64 },
    /// Not a Sturmian word (e.g. the i.i.d. baseline).
    External,
}

/// Finite prefix of an infinite binary drive word.
#[derive(Debug, Clone, PartialEq)]
pub struct FibWord {
    pub m: u32,
    pub symbols: Vec<u8>,
    pub origin: WordOrigin,
}

impl FibWord {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.symbols
    }
}

impl fmt::Display for FibWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &s in &self.symbols {
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

/// `S_0 .. S_n` for a given order `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct GenFibSeq {
    pub m: u32,
    pub values: Vec<BigUint>,
}

impl GenFibSeq {
    pub fn get(&self, n: usize) -> &BigUint {
        &self.values[n]
    }

    pub fn n_max(&self) -> usize {
        self.values.len() - 1
    }

    /// Largest `n` with `S_n <= bound`.
    pub fn last_index_not_exceeding(&self, bound: &BigUint) -> Option<usize> {
        self.values.iter().rposition(|v| v <= bound)
    }
}

fn check_m(m: u32) -> Result<()> {
    if m == 0 {
        return Err(Error::InvalidArgument("word order m must be at least 1".into()));
    }
    Ok(())
}

/// `S_0 = S_1 = 1`, `S_n = m S_{n-1} + S_{n-2}`.
pub fn gen_fib_numbers(m: u32, n_max: usize) -> Result<GenFibSeq> {
    check_m(m)?;
    if n_max < 1 {
        return Err(Error::InvalidArgument("n_max must be at least 1".into()));
    }
    let mut values = vec![BigUint::one(), BigUint::one()];
    for n in 2..=n_max {
        let next = &values[n - 1] * m + &values[n - 2];
        values.push(next);
    }
    Ok(GenFibSeq { m, values })
}

/// Prefix of the infinite word generated by `W_{j+1} = (W_j)^m W_{j-1}`
/// from `W_0 = 1`, `W_1 = 0`.
pub fn fib_word_concat(m: u32, length: usize) -> Result<FibWord> {
    check_m(m)?;
    if length == 0 {
        return Err(Error::InvalidArgument("word length must be at least 1".into()));
    }
    let mut prev = vec![1u8];
    let mut cur = vec![0u8];
    while cur.len() < length {
        let mut next = Vec::with_capacity(cur.len() * m as usize + prev.len());
        for _ in 0..m {
            next.extend_from_slice(&cur);
        }
        next.extend_from_slice(&prev);
        prev = std::mem::replace(&mut cur, next);
    }
    cur.truncate(length);
    Ok(FibWord { m, symbols: cur, origin: WordOrigin::Concatenation })
}

/// `(m + sqrt(m^2 + 4)) / 2`.
pub fn metallic_ratio<R: Real>(m: u32, policy: &PrecisionPolicy) -> R {
    let mf = R::from_f64(m as f64, policy);
    let disc = R::from_f64((m as f64) * (m as f64) + 4.0, policy).sqrt();
    mf.add(&disc).mul_f64(0.5)
}

/// `Ω = π/m (2 + m - sqrt(m^2 + 4))`.
pub fn omega<R: Real>(m: u32, policy: &PrecisionPolicy) -> R {
    let disc = R::from_f64((m as f64) * (m as f64) + 4.0, policy).sqrt();
    let inner = R::from_f64(2.0 + m as f64, policy).sub(&disc);
    R::pi(policy).div(&R::from_f64(m as f64, policy)).mul(&inner)
}

/// Guard band around interval endpoints, in radians.
pub const ROTATION_GUARD: f64 = 1.0 / (1u64 << 32) as f64;
const ROTATION_RETRIES: u32 = 4;

/// Codes the rotation `x -> x + Ω` on the circle: symbol `0` when
/// `(nΩ + θ0) mod 2π` lies in `[0, 2π - Ω]`, else `1`, for `n = 1..=length`.
pub fn code_rotation(m: u32, theta0: f64, length: usize) -> Result<FibWord> {
    check_m(m)?;
    if length == 0 {
        return Err(Error::InvalidArgument("word length must be at least 1".into()));
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    if !(0.0..two_pi).contains(&theta0) {
        return Err(Error::InvalidArgument(format!("theta0 = {theta0} outside [0, 2π)")));
    }
    let log2n = usize::BITS - length.leading_zeros();
    let mut bits = 64 + log2n;
    for _ in 0..=ROTATION_RETRIES {
        let policy = PrecisionPolicy::big(bits)?;
        match code_rotation_at(m, theta0, length, &policy) {
            Ok(symbols) => return Ok(FibWord { m, symbols, origin: WordOrigin::Rotation { theta0 } }),
            Err(Error::AmbiguousBoundary { .. }) => bits *= 2,
            Err(e) => return Err(e),
        }
    }
    Err(Error::AmbiguousBoundary { step: 0, bits: bits / 2 })
}

fn code_rotation_at(m: u32, theta0: f64, length: usize, policy: &PrecisionPolicy) -> Result<Vec<u8>> {
    let om: BigReal = omega(m, policy);
    let two_pi = BigReal::pi(policy).mul_f64(2.0);
    let upper = two_pi.sub(&om);
    let guard = BigReal::from_f64(ROTATION_GUARD, policy);
    let mut x = BigReal::from_f64(theta0, policy);
    let mut out = Vec::with_capacity(length);
    for n in 1..=length {
        x = x.add(&om);
        if !x.lt(&two_pi) {
            x = x.sub(&two_pi);
        }
        let near = |e: &BigReal| x.sub(e).abs().lt(&guard);
        if near(&upper) || x.lt(&guard) || two_pi.sub(&x).lt(&guard) {
            return Err(Error::AmbiguousBoundary { step: n as u64, bits: policy.bits() });
        }
        out.push(if upper.lt(&x) { 1 } else { 0 });
    }
    Ok(out)
}

/// Required prefix length per factor length.
pub const COMPLEXITY_MARGIN: usize = 10;

/// Number of distinct length-`n` factors in `word`.
pub fn symbolic_complexity(word: &[u8], n: usize) -> Result<usize> {
    if n == 0 {
        return Err(Error::InvalidArgument("factor length must be at least 1".into()));
    }
    let required = COMPLEXITY_MARGIN * n;
    if word.len() < required {
        return Err(Error::PrefixTooShort { len: word.len(), n, required });
    }
    let factors: HashSet<&[u8]> = word.windows(n).collect();
    Ok(factors.len())
}

/// Standard Fibonacci number `F_c` (`F_1 = F_2 = 1`).
pub fn fibonacci(c: usize) -> BigUint {
    let (mut a, mut b) = (BigUint::zero(), BigUint::one());
    for _ in 0..c {
        let next = &a + &b;
        a = std::mem::replace(&mut b, next);
    }
    a
}

/// Greedy Zeckendorf expansion `T = Σ F_{c_i}` with `c_1 > c_2 > ...`,
/// indices at least 2 and pairwise nonconsecutive.
pub fn zeckendorf(t: &BigUint) -> Result<Vec<usize>> {
    if t.is_zero() {
        return Err(Error::InvalidArgument("Zeckendorf expansion needs T >= 1".into()));
    }
    let mut fibs = vec![BigUint::zero(), BigUint::one(), BigUint::one()];
    while fibs.last().unwrap() <= t {
        let n = fibs.len();
        let next = &fibs[n - 1] + &fibs[n - 2];
        fibs.push(next);
    }
    let mut rem = t.clone();
    let mut out = Vec::new();
    let mut c = fibs.len() - 1;
    while !rem.is_zero() {
        while fibs[c] > rem {
            c -= 1;
        }
        rem -= &fibs[c];
        out.push(c);
        c = c.saturating_sub(2).max(2);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn s(w: &FibWord) -> String {
        w.to_string()
    }

    #[test]
    fn counting_sequences() {
        let f = gen_fib_numbers(1, 6).unwrap();
        let v: Vec<u64> = f.values.iter().map(|x| x.try_into().unwrap()).collect();
        assert_eq!(v, [1, 1, 2, 3, 5, 8, 13]);
        let p = gen_fib_numbers(2, 5).unwrap();
        let v: Vec<u64> = p.values.iter().map(|x| x.try_into().unwrap()).collect();
        assert_eq!(v, [1, 1, 3, 7, 17, 41]);
        assert!(gen_fib_numbers(0, 3).is_err());
    }

    #[test]
    fn large_index_magnitude() {
        let f = gen_fib_numbers(1, 3001).unwrap();
        // F_3000 = S_2999.
        let digits = f.get(2999).to_string();
        assert_eq!(digits.len(), 627);
        assert!(digits.starts_with("4106"));
    }

    #[test]
    fn printed_prefixes() {
        assert_eq!(s(&fib_word_concat(1, 13).unwrap()), "0100101001001");
        assert_eq!(s(&fib_word_concat(2, 13).unwrap()), "0010010001001");
        assert_eq!(s(&fib_word_concat(1, 1).unwrap()), "0");
    }

    #[test]
    fn rotation_matches_concatenation() {
        for m in 1..=3 {
            assert_eq!(code_rotation(m, 0.0, 2000).unwrap().symbols, fib_word_concat(m, 2000).unwrap().symbols);
        }
    }

    #[test]
    fn rotation_first_symbol_in_upper_interval() {
        let p = PrecisionPolicy::Double;
        let om: f64 = omega(1, &p);
        let two_pi = 2.0 * std::f64::consts::PI;
        // Place Ω + θ0 in the middle of (2π - Ω, 2π).
        let theta0 = two_pi - om / 2.0 - om;
        assert_eq!(code_rotation(1, theta0, 1).unwrap().symbols, [1]);
    }

    #[test]
    fn omega_and_metallic_ratio() {
        let p = PrecisionPolicy::big(256).unwrap();
        let phi: BigReal = metallic_ratio(1, &p);
        assert!((phi.to_f64() - (1.0 + 5f64.sqrt()) / 2.0).abs() < 1e-15);
        let om: BigReal = omega(1, &p);
        assert!((om.to_f64() - 2.399_963_229_728_653).abs() < 1e-14);
        for m in 1..=10 {
            let om: BigReal = omega(m, &p);
            let mu: BigReal = metallic_ratio(m, &p);
            let one = BigReal::from_f64(1.0, &p);
            let cf = one.sub(&one.div(&one.add(&one.div(&mu))));
            let diff = om.sub(&BigReal::pi(&p).mul_f64(2.0).mul(&cf)).abs();
            assert!(diff.ln_f64() < -200.0 * std::f64::consts::LN_2, "m={m}");
            let muf = mu.to_f64();
            assert!(muf > m as f64 && muf < m as f64 + 1.0);
        }
    }

    #[test]
    fn complexity_counts() {
        let w = fib_word_concat(1, 10_000).unwrap();
        assert_eq!(symbolic_complexity(w.as_slice(), 5).unwrap(), 6);
        assert_eq!(symbolic_complexity(w.as_slice(), 1).unwrap(), 2);
        assert!(matches!(symbolic_complexity(&w.symbols[..30], 5), Err(Error::PrefixTooShort { .. })));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r: Vec<u8> = (0..100_000).map(|_| rng.random_range(0..2u8)).collect();
        assert_eq!(symbolic_complexity(&r, 8).unwrap(), 256);
    }

    #[test]
    fn zeckendorf_examples() {
        assert_eq!(zeckendorf(&BigUint::from(10u32)).unwrap(), [6, 3]);
        assert_eq!(zeckendorf(&BigUint::from(4u32)).unwrap(), [4, 2]);
        assert_eq!(zeckendorf(&BigUint::from(1u32)).unwrap(), [2]);
        assert_eq!(zeckendorf(&BigUint::from(8u32)).unwrap(), [6]);
        assert!(zeckendorf(&BigUint::zero()).is_err());
    }

    #[test]
    fn one_symbol_density() {
        let p = PrecisionPolicy::Double;
        let om: f64 = omega(1, &p);
        let seq = gen_fib_numbers(1, 20).unwrap();
        let w = fib_word_concat(1, 10_000).unwrap();
        for n in 5..=19 {
            let len: usize = seq.get(n).try_into().unwrap();
            let ones = w.symbols[..len].iter().filter(|&&x| x == 1).count() as f64;
            let density = ones / len as f64;
            assert!((density - om / (2.0 * std::f64::consts::PI)).abs() <= 2.0 / len as f64, "n={n}");
        }
    }

    proptest! {
        #[test]
        fn zeckendorf_resums_without_neighbours(t in 1u64..100_000) {
            let idx = zeckendorf(&BigUint::from(t)).unwrap();
            let sum: BigUint = idx.iter().map(|&c| fibonacci(c)).sum();
            prop_assert_eq!(sum, BigUint::from(t));
            prop_assert!(idx.iter().all(|&c| c >= 2));
            prop_assert!(idx.windows(2).all(|w| w[0] > w[1] + 1));
        }

        #[test]
        fn prefixes_are_stable(m in 1u32..5, a in 1usize..500, b in 1usize..500) {
            let (lo, hi) = (a.min(b), a.max(b));
            let short = fib_word_concat(m, lo).unwrap();
            let long = fib_word_concat(m, hi).unwrap();
            prop_assert_eq!(&long.symbols[..lo], &short.symbols[..]);
        }

        #[test]
        fn sturmian_complexity(n in 1usize..=20) {
            let w = fib_word_concat(1, 10_000).unwrap();
            prop_assert_eq!(symbolic_complexity(w.as_slice(), n).unwrap(), n + 1);
        }
    }
}
