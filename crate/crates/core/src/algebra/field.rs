//! Prime-field arithmetic.
//!
//! A [`PrimeField`] is a validated modulus; elements ([`Fp`]) carry their
//! modulus so they can be combined with the usual operators. Moduli are
//! restricted to `p < 2^32` so that a product of two residues fits in a `u64`.

use std::cmp::Ordering;
use std::fmt;
use std::iter::{Product, Sum};
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use rand::Rng;
use serde::{Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FieldError {
    #[error("modulus {0} is not prime")]
    NotPrime(u64),
    #[error("modulus {0} is out of range (need 2 <= p < 2^32)")]
    OutOfRange(u64),
}

/// A prime field `GF(p)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PrimeField {
    p: u64,
}

impl PrimeField {
    /// 2^31 - 1.
    pub const MERSENNE31: u64 = (1 << 31) - 1;

    pub fn new(p: u64) -> Result<Self, FieldError> {
        if !(2..(1u64 << 32)).contains(&p) {
            return Err(FieldError::OutOfRange(p));
        }
        if !is_prime(p) {
            return Err(FieldError::NotPrime(p));
        }
        Ok(Self { p })
    }

    pub fn mersenne31() -> Self {
        Self { p: Self::MERSENNE31 }
    }

    pub fn modulus(&self) -> u64 {
        self.p
    }

    pub fn elem(&self, value: u64) -> Fp {
        Fp {
            value: value % self.p,
            p: self.p,
        }
    }

    /// Maps a signed integer to its residue, so `from_i64(-1) == p - 1`.
    pub fn from_i64(&self, value: i64) -> Fp {
        let r = value.rem_euclid(self.p as i64) as u64;
        Fp { value: r, p: self.p }
    }

    pub fn zero(&self) -> Fp {
        self.elem(0)
    }

    pub fn one(&self) -> Fp {
        self.elem(1)
    }

    pub fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> Fp {
        self.elem(rng.gen_range(0..self.p))
    }

    pub fn random_nonzero<R: Rng + ?Sized>(&self, rng: &mut R) -> Fp {
        self.elem(rng.gen_range(1..self.p))
    }
}

impl Default for PrimeField {
    fn default() -> Self {
        Self::mersenne31()
    }
}

/// Deterministic trial division; fine for moduli below 2^32.
fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n < 4 {
        return true;
    }
    if n.is_multiple_of(2) {
        return false;
    }
    let mut i = 3u64;
    while i * i <= n {
        if n.is_multiple_of(i) {
            return false;
        }
        i += 2;
    }
    true
}

/// An element of `GF(p)`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Fp {
    value: u64,
    p: u64,
}

impl Fp {
    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn field(&self) -> PrimeField {
        PrimeField { p: self.p }
    }

    pub fn is_zero(&self) -> bool {
        self.value == 0
    }

    pub fn zero_like(&self) -> Fp {
        Fp { value: 0, p: self.p }
    }

    pub fn one_like(&self) -> Fp {
        Fp { value: 1, p: self.p }
    }

    pub fn pow(self, mut exp: u64) -> Fp {
        let mut base = self;
        let mut acc = self.one_like();
        while exp > 0 {
            if exp & 1 == 1 {
                acc *= base;
            }
            base *= base;
            exp >>= 1;
        }
        acc
    }

    /// Multiplicative inverse via extended Euclid; `None` for zero.
    pub fn inv(&self) -> Option<Fp> {
        if self.value == 0 {
            return None;
        }
        let (mut r0, mut r1) = (self.p as i64, self.value as i64);
        let (mut t0, mut t1) = (0i64, 1i64);
        while r1 != 0 {
            let q = r0 / r1;
            (r0, r1) = (r1, r0 - q * r1);
            (t0, t1) = (t1, t0 - q * t1);
        }
        debug_assert_eq!(r0, 1);
        Some(Fp {
            value: t0.rem_euclid(self.p as i64) as u64,
            p: self.p,
        })
    }

    #[inline]
    fn check(&self, other: &Fp) {
        debug_assert_eq!(self.p, other.p, "mixed moduli");
    }
}

impl fmt::Debug for Fp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

impl fmt::Display for Fp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

impl Serialize for Fp {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_u64(self.value)
    }
}

impl PartialOrd for Fp {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Fp {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.p, self.value).cmp(&(other.p, other.value))
    }
}

impl Add for Fp {
    type Output = Fp;
    fn add(self, rhs: Fp) -> Fp {
        self.check(&rhs);
        let s = self.value + rhs.value;
        Fp {
            value: if s >= self.p { s - self.p } else { s },
            p: self.p,
        }
    }
}

impl Sub for Fp {
    type Output = Fp;
    fn sub(self, rhs: Fp) -> Fp {
        self.check(&rhs);
        let value = if self.value >= rhs.value {
            self.value - rhs.value
        } else {
            self.value + self.p - rhs.value
        };
        Fp { value, p: self.p }
    }
}

impl Mul for Fp {
    type Output = Fp;
    fn mul(self, rhs: Fp) -> Fp {
        self.check(&rhs);
        Fp {
            value: self.value * rhs.value % self.p,
            p: self.p,
        }
    }
}

impl Div for Fp {
    type Output = Fp;
    /// Panics on division by zero.
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Fp) -> Fp {
        self * rhs.inv().expect("division by zero in GF(p)")
    }
}

impl Neg for Fp {
    type Output = Fp;
    fn neg(self) -> Fp {
        if self.value == 0 {
            self
        } else {
            Fp {
                value: self.p - self.value,
                p: self.p,
            }
        }
    }
}

impl AddAssign for Fp {
    fn add_assign(&mut self, rhs: Fp) {
        *self = *self + rhs;
    }
}

impl SubAssign for Fp {
    fn sub_assign(&mut self, rhs: Fp) {
        *self = *self - rhs;
    }
}

impl MulAssign for Fp {
    fn mul_assign(&mut self, rhs: Fp) {
        *self = *self * rhs;
    }
}

/// Sums of elements. Panics on an empty iterator, since the modulus is unknown.
impl Sum for Fp {
    fn sum<I: Iterator<Item = Fp>>(mut iter: I) -> Fp {
        let first = iter.next().expect("sum of empty Fp iterator");
        iter.fold(first, |a, b| a + b)
    }
}

impl Product for Fp {
    fn product<I: Iterator<Item = Fp>>(mut iter: I) -> Fp {
        let first = iter.next().expect("product of empty Fp iterator");
        iter.fold(first, |a, b| a * b)
    }
}
