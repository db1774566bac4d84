//! Coefficient rings: prime fields, the integers and the rationals.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{McmError, Result};

/// Serializable description of a coefficient ring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RingDescriptor {
    PrimeField { q: u64 },
    Integers,
    Rationals,
}

/// Largest admissible field characteristic.
pub const MAX_PRIME: u64 = 1 << 31;

/// Deterministic Miller-Rabin, exact for every `u64`.
pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const WITNESSES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for &p in &WITNESSES {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let mulmod = |a: u64, b: u64| ((a as u128 * b as u128) % n as u128) as u64;
    let powmod = |mut b: u64, mut e: u64| {
        let mut r = 1u64;
        while e > 0 {
            if e & 1 == 1 {
                r = mulmod(r, b);
            }
            b = mulmod(b, b);
            e >>= 1;
        }
        r
    };
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'outer: for &a in &WITNESSES {
        let mut x = powmod(a, d);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mulmod(x, x);
            if x == n - 1 {
                continue 'outer;
            }
        }
        return false;
    }
    true
}

/// A commutative coefficient ring with exact arithmetic.
pub trait Ring: Clone + Debug + PartialEq + Send + Sync {
    type Elem: Clone + Debug + PartialEq + Send + Sync;

    fn descriptor(&self) -> RingDescriptor;
    fn zero(&self) -> Self::Elem;
    fn one(&self) -> Self::Elem;
    fn from_i64(&self, v: i64) -> Self::Elem;
    fn add(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn sub(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn mul(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn neg(&self, a: &Self::Elem) -> Self::Elem;
    fn is_zero(&self, a: &Self::Elem) -> bool;
    /// `Some(a / b)` when `b` divides `a` exactly in the ring.
    fn exact_div(&self, a: &Self::Elem, b: &Self::Elem) -> Option<Self::Elem>;
    fn fmt_elem(&self, a: &Self::Elem) -> String;
    fn parse_elem(&self, s: &str) -> Result<Self::Elem>;

    fn from_u64(&self, v: u64) -> Self::Elem {
        // split to stay inside i64 for large inputs
        let hi = self.from_i64((v >> 32) as i64);
        let lo = self.from_i64((v & 0xffff_ffff) as i64);
        let shift = self.from_i64(1i64 << 32);
        self.add(&self.mul(&hi, &shift), &lo)
    }

    fn pow(&self, a: &Self::Elem, mut e: u64) -> Self::Elem {
        let mut base = a.clone();
        let mut acc = self.one();
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(&acc, &base);
            }
            e >>= 1;
            if e > 0 {
                base = self.mul(&base, &base);
            }
        }
        acc
    }

    fn is_one(&self, a: &Self::Elem) -> bool {
        *a == self.one()
    }
}

/// Rings whose elements can be drawn at random (uniformly for prime fields,
/// small integers otherwise).
pub trait SampleElem: Ring {
    fn sample<G: rand::Rng + ?Sized>(&self, rng: &mut G) -> Self::Elem;

    /// Characteristic, or zero for characteristic-zero rings.
    fn characteristic(&self) -> u64;
}

impl SampleElem for PrimeField {
    fn sample<G: rand::Rng + ?Sized>(&self, rng: &mut G) -> u64 {
        rng.random_range(0..self.q)
    }
    fn characteristic(&self) -> u64 {
        self.q
    }
}

impl SampleElem for Integers {
    fn sample<G: rand::Rng + ?Sized>(&self, rng: &mut G) -> BigInt {
        BigInt::from(rng.random_range(-9i64..=9))
    }
    fn characteristic(&self) -> u64 {
        0
    }
}

impl SampleElem for Rationals {
    fn sample<G: rand::Rng + ?Sized>(&self, rng: &mut G) -> BigRational {
        BigRational::from_integer(BigInt::from(rng.random_range(-9i64..=9)))
    }
    fn characteristic(&self) -> u64 {
        0
    }
}

/// The prime field F_q with `q <= 2^31`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PrimeField {
    q: u64,
}

impl PrimeField {
    pub fn new(q: u64) -> Result<Self> {
        if q > MAX_PRIME {
            return Err(McmError::InvalidRing(format!("q = {q} exceeds 2^31")));
        }
        if !is_prime_u64(q) {
            return Err(McmError::InvalidRing(format!("q = {q} is not prime")));
        }
        Ok(Self { q })
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn reduce_i64(&self, v: i64) -> u64 {
        v.rem_euclid(self.q as i64) as u64
    }

    pub fn inv(&self, a: u64) -> Option<u64> {
        if a.is_multiple_of(self.q) {
            None
        } else {
            Some(self.pow(&a, self.q - 2))
        }
    }
}

impl Ring for PrimeField {
    type Elem = u64;

    fn descriptor(&self) -> RingDescriptor {
        RingDescriptor::PrimeField { q: self.q }
    }
    fn zero(&self) -> u64 {
        0
    }
    fn one(&self) -> u64 {
        1 % self.q
    }
    fn from_i64(&self, v: i64) -> u64 {
        self.reduce_i64(v)
    }
    fn from_u64(&self, v: u64) -> u64 {
        v % self.q
    }
    fn add(&self, a: &u64, b: &u64) -> u64 {
        let s = a + b;
        if s >= self.q {
            s - self.q
        } else {
            s
        }
    }
    fn sub(&self, a: &u64, b: &u64) -> u64 {
        if a >= b {
            a - b
        } else {
            a + self.q - b
        }
    }
    fn mul(&self, a: &u64, b: &u64) -> u64 {
        a * b % self.q
    }
    fn neg(&self, a: &u64) -> u64 {
        if *a == 0 {
            0
        } else {
            self.q - a
        }
    }
    fn is_zero(&self, a: &u64) -> bool {
        *a == 0
    }
    fn exact_div(&self, a: &u64, b: &u64) -> Option<u64> {
        self.inv(*b).map(|ib| self.mul(a, &ib))
    }
    fn fmt_elem(&self, a: &u64) -> String {
        a.to_string()
    }
    fn parse_elem(&self, s: &str) -> Result<u64> {
        let v: BigInt = s
            .trim()
            .parse()
            .map_err(|_| McmError::Parse(format!("bad field element `{s}`")))?;
        let r = v.mod_floor(&BigInt::from(self.q));
        Ok(r.try_into().expect("reduced residue fits u64"))
    }
}

/// The ring of integers with arbitrary precision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Integers;

impl Ring for Integers {
    type Elem = BigInt;

    fn descriptor(&self) -> RingDescriptor {
        RingDescriptor::Integers
    }
    fn zero(&self) -> BigInt {
        BigInt::zero()
    }
    fn one(&self) -> BigInt {
        BigInt::one()
    }
    fn from_i64(&self, v: i64) -> BigInt {
        BigInt::from(v)
    }
    fn from_u64(&self, v: u64) -> BigInt {
        BigInt::from(v)
    }
    fn add(&self, a: &BigInt, b: &BigInt) -> BigInt {
        a + b
    }
    fn sub(&self, a: &BigInt, b: &BigInt) -> BigInt {
        a - b
    }
    fn mul(&self, a: &BigInt, b: &BigInt) -> BigInt {
        a * b
    }
    fn neg(&self, a: &BigInt) -> BigInt {
        -a
    }
    fn is_zero(&self, a: &BigInt) -> bool {
        a.is_zero()
    }
    fn exact_div(&self, a: &BigInt, b: &BigInt) -> Option<BigInt> {
        if b.is_zero() {
            return None;
        }
        let (q, r) = a.div_rem(b);
        r.is_zero().then_some(q)
    }
    fn fmt_elem(&self, a: &BigInt) -> String {
        a.to_string()
    }
    fn parse_elem(&self, s: &str) -> Result<BigInt> {
        s.trim()
            .parse()
            .map_err(|_| McmError::Parse(format!("bad integer `{s}`")))
    }
}

/// The field of rationals with arbitrary precision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Rationals;

impl Ring for Rationals {
    type Elem = BigRational;

    fn descriptor(&self) -> RingDescriptor {
        RingDescriptor::Rationals
    }
    fn zero(&self) -> BigRational {
        BigRational::zero()
    }
    fn one(&self) -> BigRational {
        BigRational::one()
    }
    fn from_i64(&self, v: i64) -> BigRational {
        BigRational::from_integer(BigInt::from(v))
    }
    fn from_u64(&self, v: u64) -> BigRational {
        BigRational::from_integer(BigInt::from(v))
    }
    fn add(&self, a: &BigRational, b: &BigRational) -> BigRational {
        a + b
    }
    fn sub(&self, a: &BigRational, b: &BigRational) -> BigRational {
        a - b
    }
    fn mul(&self, a: &BigRational, b: &BigRational) -> BigRational {
        a * b
    }
    fn neg(&self, a: &BigRational) -> BigRational {
        -a
    }
    fn is_zero(&self, a: &BigRational) -> bool {
        a.is_zero()
    }
    fn exact_div(&self, a: &BigRational, b: &BigRational) -> Option<BigRational> {
        (!b.is_zero()).then(|| a / b)
    }
    fn fmt_elem(&self, a: &BigRational) -> String {
        if a.is_integer() {
            a.numer().to_string()
        } else {
            format!("{}/{}", a.numer(), a.denom())
        }
    }
    fn parse_elem(&self, s: &str) -> Result<BigRational> {
        let s = s.trim();
        let bad = || McmError::Parse(format!("bad rational `{s}`"));
        match s.split_once('/') {
            Some((n, d)) => {
                let n: BigInt = n.trim().parse().map_err(|_| bad())?;
                let d: BigInt = d.trim().parse().map_err(|_| bad())?;
                if d.is_zero() {
                    return Err(bad());
                }
                Ok(BigRational::new(n, d))
            }
            None => Ok(BigRational::from_integer(s.parse().map_err(|_| bad())?)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primality_small_and_large() {
        let primes: Vec<u64> = (0..60).filter(|&n| is_prime_u64(n)).collect();
        assert_eq!(
            primes,
            vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59]
        );
        assert!(is_prime_u64(2_147_483_647));
        assert!(is_prime_u64(10007));
        assert!(!is_prime_u64(2_147_483_649));
        assert!(!is_prime_u64(3_215_031_751)); // strong pseudoprime to bases 2,3,5,7
    }

    #[test]
    fn prime_field_rejects_composites_and_large_q() {
        assert!(PrimeField::new(15).is_err());
        assert!(PrimeField::new(1).is_err());
        assert!(PrimeField::new(4_294_967_311).is_err());
        assert!(PrimeField::new(101).is_ok());
    }

    #[test]
    fn field_inverse() {
        let f = PrimeField::new(101).unwrap();
        for a in 1..101 {
            assert_eq!(f.mul(&a, &f.inv(a).unwrap()), 1);
        }
        assert_eq!(f.inv(0), None);
    }

    #[test]
    fn parse_elements() {
        let f = PrimeField::new(7).unwrap();
        assert_eq!(f.parse_elem("-1").unwrap(), 6);
        assert_eq!(Rationals.parse_elem("-3/6").unwrap(), BigRational::new((-1).into(), 2.into()));
        assert_eq!(Integers.parse_elem("12").unwrap(), BigInt::from(12));
        assert_eq!(Integers.fmt_elem(&BigInt::from(-2)), "-2");
    }
}
