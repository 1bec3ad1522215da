//! p-adic integers known to a finite absolute precision.
//!
//! A [`PAdicScalar`] is an element of `Z_p` known modulo `p^N`, stored as its
//! canonical residue in `[0, p^N)`. Every element carries its own `N`; ring
//! operations return the minimum precision of their operands and exact
//! division by `p^v` lowers the precision by `v`.

use std::cell::RefCell;
use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u64", into = "u64")]
pub struct Prime(u64);

impl Prime {
    pub fn new(p: u64) -> Result<Self> {
        if is_prime(p) {
            Ok(Prime(p))
        } else {
            Err(Error::NotPrime(p))
        }
    }

    pub fn get(self) -> u64 {
        self.0
    }

    /// `p^n` as a big integer. Powers are memoised per thread.
    pub fn pow(self, n: u32) -> BigInt {
        thread_local! {
            static CACHE: RefCell<HashMap<(u64, u32), BigInt>> = RefCell::new(HashMap::new());
        }
        CACHE.with(|cache| {
            cache
                .borrow_mut()
                .entry((self.0, n))
                .or_insert_with(|| num_traits::pow(BigInt::from(self.0), n as usize))
                .clone()
        })
    }

    /// Exponent of `p` in a nonzero integer. Returns `None` for zero.
    pub fn valuation_of(self, x: &BigInt) -> Option<u32> {
        if x.is_zero() {
            return None;
        }
        let p = BigInt::from(self.0);
        let mut v = 0;
        let mut m = x.clone();
        loop {
            let (q, r) = m.div_rem(&p);
            if !r.is_zero() {
                return Some(v);
            }
            m = q;
            v += 1;
        }
    }
}

impl TryFrom<u64> for Prime {
    type Error = Error;
    fn try_from(p: u64) -> Result<Self> {
        Prime::new(p)
    }
}

impl From<Prime> for u64 {
    fn from(p: Prime) -> u64 {
        p.0
    }
}

impl fmt::Display for Prime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n % 2 == 0 {
        return n == 2;
    }
    let mut d = 3u64;
    while d.saturating_mul(d) <= n {
        if n % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

/// Result of a valuation query at finite precision.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Valuation {
    Finite(u32),
    /// The residue is zero modulo `p^N`; the true valuation is at least `N`.
    BottomAtPrecision,
}

impl Valuation {
    pub fn finite(self) -> Option<u32> {
        match self {
            Valuation::Finite(v) => Some(v),
            Valuation::BottomAtPrecision => None,
        }
    }

    /// True when the valuation is known to be at least `k` (always true for bottom).
    pub fn at_least(self, k: u32) -> bool {
        match self {
            Valuation::Finite(v) => v >= k,
            Valuation::BottomAtPrecision => true,
        }
    }
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Valuation::Finite(v) => write!(f, "{v}"),
            Valuation::BottomAtPrecision => write!(f, "⊥"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PAdicScalar {
    prime: Prime,
    precision: u32,
    residue: BigInt,
}

impl PAdicScalar {
    pub fn new(prime: Prime, precision: u32, value: impl Into<BigInt>) -> Result<Self> {
        if precision == 0 {
            return Err(Error::ZeroPrecision);
        }
        let modulus = prime.pow(precision);
        Ok(PAdicScalar {
            prime,
            precision,
            residue: value.into().mod_floor(&modulus),
        })
    }

    pub fn zero(prime: Prime, precision: u32) -> Result<Self> {
        Self::new(prime, precision, 0)
    }

    pub fn one(prime: Prime, precision: u32) -> Result<Self> {
        Self::new(prime, precision, 1)
    }

    /// `unit * p^valuation`; the unit is reduced modulo `p^N` like any other value.
    pub fn from_unit_and_valuation(
        prime: Prime,
        precision: u32,
        unit: impl Into<BigInt>,
        valuation: u32,
    ) -> Result<Self> {
        let unit = unit.into();
        if prime.valuation_of(&unit) != Some(0) {
            return Err(Error::NotAUnit { precision });
        }
        Self::new(prime, precision, unit * prime.pow(valuation))
    }

    /// `p^k` at the given precision (zero if `k >= precision`).
    pub fn p_power(prime: Prime, precision: u32, k: u32) -> Result<Self> {
        if k >= precision {
            return Self::zero(prime, precision);
        }
        Self::new(prime, precision, prime.pow(k))
    }

    pub(crate) fn from_residue_unchecked(prime: Prime, precision: u32, residue: BigInt) -> Self {
        debug_assert!(precision >= 1);
        debug_assert!(!residue.is_negative() && residue < prime.pow(precision));
        PAdicScalar {
            prime,
            precision,
            residue,
        }
    }

    pub fn prime(&self) -> Prime {
        self.prime
    }

    pub fn precision(&self) -> u32 {
        self.precision
    }

    pub fn residue(&self) -> &BigInt {
        &self.residue
    }

    pub fn valuation(&self) -> Valuation {
        match self.prime.valuation_of(&self.residue) {
            Some(v) => Valuation::Finite(v),
            None => Valuation::BottomAtPrecision,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.residue.is_zero()
    }

    pub fn is_unit(&self) -> bool {
        self.valuation() == Valuation::Finite(0)
    }

    /// The unit `u` with `self = u * p^v`, known modulo `p^(N - v)`.
    pub fn unit_part(&self) -> Option<PAdicScalar> {
        let v = self.valuation().finite()?;
        let n = self.precision - v;
        let u = &self.residue / self.prime.pow(v);
        Some(Self::from_residue_unchecked(
            self.prime,
            n,
            u.mod_floor(&self.prime.pow(n)),
        ))
    }

    /// Residue as a signed integer in `(-p^N/2, p^N/2]`, for display.
    pub fn balanced(&self) -> BigInt {
        let m = self.prime.pow(self.precision);
        if &self.residue * 2 > m {
            &self.residue - m
        } else {
            self.residue.clone()
        }
    }

    /// Same element, known to a lower precision.
    pub fn truncate(&self, precision: u32) -> Result<Self> {
        if precision > self.precision {
            return Err(Error::PrecisionTooSmall {
                required: precision,
                available: self.precision,
            });
        }
        Self::new(self.prime, precision, self.residue.clone())
    }

    pub fn invert_unit(&self) -> Result<Self> {
        if !self.is_unit() {
            return Err(Error::NotAUnit {
                precision: self.precision,
            });
        }
        let m = self.prime.pow(self.precision);
        let inv = self
            .residue
            .modinv(&m)
            .ok_or(Error::NotAUnit {
                precision: self.precision,
            })?;
        Ok(Self::from_residue_unchecked(self.prime, self.precision, inv))
    }

    /// `c` with `c * b = a`. The result is known to precision `min(N_a, N_b) - v(b)`.
    pub fn div_exact(&self, b: &PAdicScalar) -> Result<Self> {
        check_prime(self, b)?;
        let n = self.precision.min(b.precision);
        let vb = b
            .truncate(n)?
            .valuation()
            .finite()
            .ok_or_else(|| Error::PrecisionExhausted("divisor is zero at precision".into()))?;
        let a = self.truncate(n)?;
        if let Valuation::Finite(va) = a.valuation() {
            if va < vb {
                return Err(Error::NotDivisible {
                    dividend: va,
                    divisor: vb,
                });
            }
        }
        if n <= vb {
            return Err(Error::PrecisionExhausted(format!(
                "dividing by p^{vb} at precision {n}"
            )));
        }
        let out = n - vb;
        let m = self.prime.pow(out);
        let shift = self.prime.pow(vb);
        let num = (&a.residue / &shift).mod_floor(&m);
        let den = (&b.residue / &shift).mod_floor(&m);
        let inv = den.modinv(&m).ok_or(Error::NotAUnit { precision: out })?;
        Ok(Self::from_residue_unchecked(
            self.prime,
            out,
            (num * inv).mod_floor(&m),
        ))
    }

    /// Multiply by `p^k`, keeping the precision.
    pub fn shl(&self, k: u32) -> Self {
        let m = self.prime.pow(self.precision);
        Self::from_residue_unchecked(
            self.prime,
            self.precision,
            (&self.residue * self.prime.pow(k)).mod_floor(&m),
        )
    }

    pub fn pow(&self, e: u32) -> Self {
        let m = self.prime.pow(self.precision);
        Self::from_residue_unchecked(
            self.prime,
            self.precision,
            self.residue.modpow(&BigInt::from(e), &m),
        )
    }

    /// Equality after truncating both sides to the smaller precision.
    pub fn eq_at_precision(&self, other: &PAdicScalar) -> bool {
        if self.prime != other.prime {
            return false;
        }
        let n = self.precision.min(other.precision);
        let m = self.prime.pow(n);
        self.residue.mod_floor(&m) == other.residue.mod_floor(&m)
    }

    fn binary(&self, rhs: &PAdicScalar, f: impl FnOnce(&BigInt, &BigInt) -> BigInt) -> Self {
        assert_eq!(
            self.prime, rhs.prime,
            "p-adic arithmetic across different primes"
        );
        let n = self.precision.min(rhs.precision);
        let m = self.prime.pow(n);
        Self::from_residue_unchecked(self.prime, n, f(&self.residue, &rhs.residue).mod_floor(&m))
    }
}

fn check_prime(a: &PAdicScalar, b: &PAdicScalar) -> Result<()> {
    if a.prime != b.prime {
        return Err(Error::PrimeMismatch(a.prime.get(), b.prime.get()));
    }
    Ok(())
}

impl fmt::Display for PAdicScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} + O({}^{})", self.balanced(), self.prime, self.precision)
    }
}

impl Add for &PAdicScalar {
    type Output = PAdicScalar;
    fn add(self, rhs: &PAdicScalar) -> PAdicScalar {
        self.binary(rhs, |a, b| a + b)
    }
}

impl Sub for &PAdicScalar {
    type Output = PAdicScalar;
    fn sub(self, rhs: &PAdicScalar) -> PAdicScalar {
        self.binary(rhs, |a, b| a - b)
    }
}

impl Mul for &PAdicScalar {
    type Output = PAdicScalar;
    fn mul(self, rhs: &PAdicScalar) -> PAdicScalar {
        self.binary(rhs, |a, b| a * b)
    }
}

impl Neg for &PAdicScalar {
    type Output = PAdicScalar;
    fn neg(self) -> PAdicScalar {
        let m = self.prime.pow(self.precision);
        PAdicScalar::from_residue_unchecked(
            self.prime,
            self.precision,
            (-&self.residue).mod_floor(&m),
        )
    }
}

macro_rules! forward_owned {
    ($tr:ident, $method:ident) => {
        impl $tr for PAdicScalar {
            type Output = PAdicScalar;
            fn $method(self, rhs: PAdicScalar) -> PAdicScalar {
                (&self).$method(&rhs)
            }
        }
        impl $tr<&PAdicScalar> for PAdicScalar {
            type Output = PAdicScalar;
            fn $method(self, rhs: &PAdicScalar) -> PAdicScalar {
                (&self).$method(rhs)
            }
        }
    };
}

forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for PAdicScalar {
    type Output = PAdicScalar;
    fn neg(self) -> PAdicScalar {
        -&self
    }
}
