//! Truncated ℓ-adic integers: the ring ℤ/ℓᵐ and its elements.
//!
//! [`ResidueRing`] carries the pair (ℓ, m) and does raw `u64` arithmetic;
//! [`PadicScalar`] bundles a residue with its ring. Moduli are capped at
//! 2⁶¹ so every product fits in a `u128`.
//!
//! The unit logarithm and exponential are evaluated exactly: writing
//! t = ℓᵛ·t′, each term tᵏ/k becomes ℓ^{kv − v(k)}·t′ᵏ·(unit part of k)⁻¹,
//! so no division by ℓ ever happens and no guard digits are needed.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{domain, Error, Result};

/// Largest modulus ℓᵐ accepted by [`ResidueRing::new`].
pub const MODULUS_CAP: u64 = 1 << 61;

pub(crate) fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= p {
        if p % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// The ring ℤ/ℓᵐ.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ResidueRing {
    prime: u64,
    precision: u32,
    modulus: u64,
}

impl ResidueRing {
    pub fn new(prime: u64, precision: u32) -> Result<Self> {
        if !is_prime(prime) {
            return domain(format!("{prime} is not prime"));
        }
        if precision == 0 {
            return domain("precision must be at least 1");
        }
        let mut modulus: u64 = 1;
        for _ in 0..precision {
            modulus = match modulus.checked_mul(prime) {
                Some(v) if v < MODULUS_CAP => v,
                _ => return domain(format!("{prime}^{precision} exceeds the 2^61 modulus cap")),
            };
        }
        Ok(Self { prime, precision, modulus })
    }

    pub fn prime(&self) -> u64 {
        self.prime
    }

    pub fn precision(&self) -> u32 {
        self.precision
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    /// 1 when ℓ = 2, else 0.
    pub fn v(&self) -> u32 {
        u32::from(self.prime == 2)
    }

    /// The same prime at another precision.
    pub fn with_precision(&self, precision: u32) -> Result<Self> {
        Self::new(self.prime, precision)
    }

    /// ℓᵉ as an integer (e may equal m, giving the modulus itself).
    pub fn prime_power(&self, e: u32) -> u64 {
        debug_assert!(e <= self.precision);
        self.prime.pow(e)
    }

    /// ℓᵉ reduced into the ring (0 once e ≥ m).
    pub fn prime_power_residue(&self, e: u32) -> u64 {
        if e >= self.precision {
            0
        } else {
            self.prime.pow(e)
        }
    }

    pub fn reduce_i128(&self, x: i128) -> u64 {
        x.rem_euclid(self.modulus as i128) as u64
    }

    pub fn reduce(&self, x: u64) -> u64 {
        x % self.modulus
    }

    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        let s = a + b;
        if s >= self.modulus {
            s - self.modulus
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            a + self.modulus - b
        }
    }

    #[inline]
    pub fn neg(&self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.modulus - a
        }
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        if self.modulus <= u32::MAX as u64 {
            (a * b) % self.modulus
        } else {
            ((a as u128 * b as u128) % self.modulus as u128) as u64
        }
    }

    pub fn pow(&self, mut base: u64, mut exp: u64) -> u64 {
        let mut acc = 1 % self.modulus;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    pub fn is_unit(&self, a: u64) -> bool {
        a % self.prime != 0
    }

    /// Multiplicative inverse, if `a` is a unit.
    pub fn inv(&self, a: u64) -> Option<u64> {
        if !self.is_unit(a) {
            return None;
        }
        let (mut r0, mut r1) = (self.modulus as i128, a as i128);
        let (mut t0, mut t1) = (0i128, 1i128);
        while r1 != 0 {
            let q = r0 / r1;
            (r0, r1) = (r1, r0 - q * r1);
            (t0, t1) = (t1, t0 - q * t1);
        }
        Some(self.reduce_i128(t0))
    }

    /// Precision-capped valuation: m for zero.
    pub fn valuation(&self, a: u64) -> u32 {
        if a == 0 {
            return self.precision;
        }
        let mut e = 0;
        let mut x = a;
        while x % self.prime == 0 {
            x /= self.prime;
            e += 1;
        }
        e
    }

    /// Splits a nonzero residue as ℓᵉ·u with u an integer prime to ℓ.
    pub(crate) fn split(&self, a: u64) -> (u32, u64) {
        let e = self.valuation(a);
        (e, a / self.prime.pow(e))
    }

    /// Exact division by ℓᵉ of a residue divisible by ℓᵉ, landing in ℤ/ℓ^{m−e}.
    pub fn shift_down(&self, a: u64, e: u32) -> u64 {
        debug_assert!(a % self.prime.pow(e) == 0);
        a / self.prime.pow(e)
    }

    /// Residue of `a` modulo ℓᵏ (k ≤ m).
    pub fn truncate(&self, a: u64, k: u32) -> u64 {
        a % self.prime.pow(k)
    }

    pub fn scalar(&self, residue: i128) -> PadicScalar {
        PadicScalar { ring: *self, residue: self.reduce_i128(residue) }
    }

    pub fn zero(&self) -> PadicScalar {
        self.scalar(0)
    }

    pub fn one(&self) -> PadicScalar {
        self.scalar(1)
    }
}

impl fmt::Display for ResidueRing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Z/{}^{}", self.prime, self.precision)
    }
}

/// An element of ℤ/ℓᵐ.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PadicScalar {
    ring: ResidueRing,
    residue: u64,
}

impl PadicScalar {
    pub fn new(prime: u64, precision: u32, value: i128) -> Result<Self> {
        Ok(ResidueRing::new(prime, precision)?.scalar(value))
    }

    pub fn ring(&self) -> ResidueRing {
        self.ring
    }

    pub fn prime(&self) -> u64 {
        self.ring.prime
    }

    pub fn precision(&self) -> u32 {
        self.ring.precision
    }

    pub fn residue(&self) -> u64 {
        self.residue
    }

    pub fn is_zero(&self) -> bool {
        self.residue == 0
    }

    pub fn is_unit(&self) -> bool {
        self.ring.is_unit(self.residue)
    }

    pub fn valuation(&self) -> u32 {
        self.ring.valuation(self.residue)
    }

    pub fn inv(&self) -> Result<Self> {
        match self.ring.inv(self.residue) {
            Some(r) => Ok(Self { ring: self.ring, residue: r }),
            None => domain(format!("{} is not a unit", self.residue)),
        }
    }

    pub fn pow(&self, e: u64) -> Self {
        Self { ring: self.ring, residue: self.ring.pow(self.residue, e) }
    }

    /// Truncation to a smaller precision; the only way precision changes.
    pub fn truncate(&self, precision: u32) -> Result<Self> {
        if precision > self.ring.precision {
            return domain("cannot raise precision by truncation");
        }
        let ring = self.ring.with_precision(precision)?;
        Ok(ring.scalar(self.residue as i128))
    }

    fn check_ring(&self, other: &Self) {
        assert_eq!(self.ring, other.ring, "scalars from different rings");
    }
}

impl fmt::Display for PadicScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.residue)
    }
}

impl Add for PadicScalar {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        self.check_ring(&rhs);
        Self { ring: self.ring, residue: self.ring.add(self.residue, rhs.residue) }
    }
}

impl Sub for PadicScalar {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self.check_ring(&rhs);
        Self { ring: self.ring, residue: self.ring.sub(self.residue, rhs.residue) }
    }
}

impl Mul for PadicScalar {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        self.check_ring(&rhs);
        Self { ring: self.ring, residue: self.ring.mul(self.residue, rhs.residue) }
    }
}

impl Neg for PadicScalar {
    type Output = Self;
    fn neg(self) -> Self {
        Self { ring: self.ring, residue: self.ring.neg(self.residue) }
    }
}

/// ℓ-adic valuation of k! (Legendre).
pub(crate) fn factorial_valuation(prime: u64, k: u64) -> u64 {
    let mut total = 0;
    let mut q = k / prime;
    while q > 0 {
        total += q;
        q /= prime;
    }
    total
}

/// Term exponents and unit cofactors of the log series: for k ≥ 1 yields
/// (k, ℓ-valuation of k, unit part of k mod ℓᵐ). Stops once every later term
/// vanishes for an argument of valuation `arg_val`.
pub(crate) fn log_terms(ring: &ResidueRing, arg_val: u32) -> Vec<(u64, u32, u64)> {
    let m = ring.precision() as i64;
    let mut out = Vec::new();
    let mut k: u64 = 1;
    loop {
        let mut kv = 0u32;
        let mut ku = k;
        while ku % ring.prime() == 0 {
            ku /= ring.prime();
            kv += 1;
        }
        let exponent = k as i64 * arg_val as i64 - kv as i64;
        // exponent − ⌊log_ℓ k⌋ is nondecreasing, so the first k with
        // k·v − ⌊log_ℓ k⌋ ≥ m bounds the tail.
        let mut floor_log = 0i64;
        let mut p = ring.prime();
        while p <= k {
            floor_log += 1;
            p = p.saturating_mul(ring.prime());
        }
        if k as i64 * arg_val as i64 - floor_log >= m {
            break;
        }
        if exponent < m {
            out.push((k, kv, ring.reduce(ku)));
        }
        k += 1;
    }
    out
}

/// Terms of the exponential series: (k, v(k!), unit part of k! mod ℓᵐ).
pub(crate) fn exp_terms(ring: &ResidueRing, arg_val: u32) -> Vec<(u64, u32, u64)> {
    let m = ring.precision() as u64;
    let l = ring.prime();
    // k·(v − 1/(ℓ−1)) ≥ m guarantees every later term vanishes.
    let slope_num = (l - 1) * arg_val as u64 - 1;
    let bound = (m * (l - 1)).div_ceil(slope_num) + 1;
    let mut out = Vec::new();
    let mut unit_fact: u64 = 1 % ring.modulus();
    for k in 1..=bound {
        let mut ku = k;
        while ku % l == 0 {
            ku /= l;
        }
        unit_fact = ring.mul(unit_fact, ring.reduce(ku));
        let vf = factorial_valuation(l, k);
        if (k * arg_val as u64) < m + vf {
            out.push((k, vf as u32, unit_fact));
        }
    }
    out
}

impl PadicScalar {
    /// log(u) for u ≡ 1 mod ℓ^{1+v}.
    pub fn log_unit(&self) -> Result<Self> {
        let ring = self.ring;
        let t = ring.sub(self.residue, 1);
        if t == 0 {
            return Ok(ring.zero());
        }
        let (vt, tu) = ring.split(t);
        if vt < 1 + ring.v() {
            return domain("log_unit needs u ≡ 1 mod ℓ^(1+v)");
        }
        let mut acc = 0u64;
        for (k, vk, ku) in log_terms(&ring, vt) {
            let shift = (k as u32) * vt - vk;
            let mut term = ring.mul(ring.pow(tu, k), ring.inv(ku).expect("unit"));
            term = ring.mul(term, ring.prime_power_residue(shift));
            acc = if k % 2 == 1 { ring.add(acc, term) } else { ring.sub(acc, term) };
        }
        Ok(Self { ring, residue: acc })
    }

    /// exp(t) for t ≡ 0 mod ℓ^{1+v}.
    pub fn exp_unit(&self) -> Result<Self> {
        let ring = self.ring;
        if self.residue == 0 {
            return Ok(ring.one());
        }
        let (vt, tu) = ring.split(self.residue);
        if vt < 1 + ring.v() {
            return domain("exp_unit needs t ≡ 0 mod ℓ^(1+v)");
        }
        let mut acc = 1 % ring.modulus();
        for (k, vf, uf) in exp_terms(&ring, vt) {
            let shift = (k as u32) * vt - vf;
            let mut term = ring.mul(ring.pow(tu, k), ring.inv(uf).expect("unit"));
            term = ring.mul(term, ring.prime_power_residue(shift));
            acc = ring.add(acc, term);
        }
        Ok(Self { ring, residue: acc })
    }

    /// Teichmüller representative of a unit.
    ///
    /// For ℓ = 2 the only root of unity fixed by squaring is 1, returned for
    /// x ≡ 1 mod 4 (mod 2 when m = 1); other units are rejected.
    pub fn teichmuller(&self) -> Result<Self> {
        let ring = self.ring;
        if !self.is_unit() {
            return domain("teichmuller needs a unit");
        }
        if ring.prime == 2 {
            if ring.precision == 1 || self.residue % 4 == 1 {
                return Ok(ring.one());
            }
            return domain("for l = 2 only units congruent to 1 mod 4 have a lift");
        }
        let mut x = self.residue;
        for _ in 0..=ring.precision {
            let next = ring.pow(x, ring.prime);
            if next == x {
                return Ok(Self { ring, residue: x });
            }
            x = next;
        }
        Err(Error::NonConvergence { iterations: ring.precision as u64 + 1 })
    }
}
