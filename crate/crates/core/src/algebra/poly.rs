use std::ops::{Add, Mul, Neg, Sub};

use serde::Serialize;
use thiserror::Error;

use super::field::Fp;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PolyError {
    #[error("duplicate abscissa {0}")]
    DuplicateAbscissa(u64),
    #[error("interpolation needs at least one point")]
    NoPoints,
}

/// Univariate polynomial over `GF(p)`, coefficients in ascending degree.
///
/// Always stored without trailing zeros; the zero polynomial has no
/// coefficients at all.
#[derive(Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct Polynomial {
    coeffs: Vec<Fp>,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<Fp>) -> Self {
        while coeffs.last().is_some_and(Fp::is_zero) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn constant(c: Fp) -> Self {
        Self::new(vec![c])
    }

    /// `c * z^degree`
    pub fn monomial(c: Fp, degree: usize) -> Self {
        let mut coeffs = vec![c.zero_like(); degree + 1];
        coeffs[degree] = c;
        Self::new(coeffs)
    }

    /// The monic linear factor `z - root`.
    pub fn linear_root(root: Fp) -> Self {
        Self::new(vec![-root, root.one_like()])
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn coeffs(&self) -> &[Fp] {
        &self.coeffs
    }

    /// Coefficient of `z^i`, or `None` past the degree.
    pub fn coeff(&self, i: usize) -> Option<Fp> {
        self.coeffs.get(i).copied()
    }

    pub fn leading(&self) -> Option<Fp> {
        self.coeffs.last().copied()
    }

    /// Horner evaluation.
    pub fn eval(&self, point: Fp) -> Fp {
        self.coeffs
            .iter()
            .rev()
            .fold(point.zero_like(), |acc, &c| acc * point + c)
    }

    pub fn scale(&self, c: Fp) -> Self {
        Self::new(self.coeffs.iter().map(|&a| a * c).collect())
    }

    pub fn pow(&self, exp: u32) -> Self {
        let Some(one) = self.coeffs.first().map(Fp::one_like) else {
            return if exp == 0 {
                panic!("0^0 of the zero polynomial has no field context")
            } else {
                Self::zero()
            };
        };
        let mut acc = Self::constant(one);
        for _ in 0..exp {
            acc = &acc * self;
        }
        acc
    }

    /// Euclidean division, returning `(quotient, remainder)`. Panics if
    /// `divisor` is zero.
    pub fn div_rem(&self, divisor: &Polynomial) -> (Polynomial, Polynomial) {
        let dd = divisor.degree().expect("division by the zero polynomial");
        let lead_inv = divisor.coeffs[dd].inv().expect("nonzero leading coefficient");
        let Some(nd) = self.degree() else {
            return (Self::zero(), Self::zero());
        };
        if nd < dd {
            return (Self::zero(), self.clone());
        }
        let zero = lead_inv.zero_like();
        let mut rem = self.coeffs.clone();
        let mut quot = vec![zero; nd - dd + 1];
        for i in (0..=nd - dd).rev() {
            let c = rem[i + dd] * lead_inv;
            quot[i] = c;
            if c.is_zero() {
                continue;
            }
            for (j, &b) in divisor.coeffs.iter().enumerate() {
                rem[i + j] -= c * b;
            }
        }
        rem.truncate(dd);
        (Self::new(quot), Self::new(rem))
    }
}

impl std::fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Poly{:?}", self.coeffs)
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        let (long, short) = if self.coeffs.len() >= rhs.coeffs.len() {
            (self, rhs)
        } else {
            (rhs, self)
        };
        let mut coeffs = long.coeffs.clone();
        for (c, &s) in coeffs.iter_mut().zip(&short.coeffs) {
            *c += s;
        }
        Polynomial::new(coeffs)
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        Polynomial {
            coeffs: self.coeffs.iter().map(|&c| -c).collect(),
        }
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        self + &(-rhs)
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        if self.is_zero() || rhs.is_zero() {
            return Polynomial::zero();
        }
        let zero = self.coeffs[0].zero_like();
        let mut out = vec![zero; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, &b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Polynomial::new(out)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for Polynomial {
            type Output = Polynomial;
            fn $m(self, rhs: Polynomial) -> Polynomial {
                (&self).$m(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

/// The unique polynomial of degree `< points.len()` through `points`.
pub fn lagrange_interpolate(points: &[(Fp, Fp)]) -> Result<Polynomial, PolyError> {
    if points.is_empty() {
        return Err(PolyError::NoPoints);
    }
    let mut xs: Vec<Fp> = points.iter().map(|p| p.0).collect();
    xs.sort();
    if let Some(w) = xs.windows(2).find(|w| w[0] == w[1]) {
        return Err(PolyError::DuplicateAbscissa(w[0].value()));
    }

    // Newton divided differences, then expand into the monomial basis.
    let n = points.len();
    let mut dd: Vec<Fp> = points.iter().map(|p| p.1).collect();
    for level in 1..n {
        for i in (level..n).rev() {
            let num = dd[i] - dd[i - 1];
            let den = points[i].0 - points[i - level].0;
            dd[i] = num / den;
        }
    }
    let mut acc = Polynomial::constant(dd[n - 1]);
    for i in (0..n - 1).rev() {
        acc = &(&acc * &Polynomial::linear_root(points[i].0)) + &Polynomial::constant(dd[i]);
    }
    Ok(acc)
}
