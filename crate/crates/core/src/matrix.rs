//! 2×2 matrices over ℤ/ℓᵐ and n-tuples of them.
//!
//! Lie algebra coordinates use the basis order (x, h, y) of 𝔰𝔩₂ throughout:
//! the traceless matrix [[h, x], [y, −h]] has coordinates (x, h, y).

use std::cmp::Ordering;
use std::fmt;

use smallvec::SmallVec;

use crate::error::{domain, Error, Result};
use crate::scalar::{exp_terms, log_terms, PadicScalar, ResidueRing};

/// A 2×2 matrix [[a, b], [c, d]] over ℤ/ℓᵐ. Not necessarily invertible.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Mat2 {
    ring: ResidueRing,
    e: [u64; 4],
}

/// Which of the three standard generators to build.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GenKind {
    /// [[1,0],[a,1]]
    L,
    /// [[1,a],[0,1]]
    R,
    /// diag(1+a, (1+a)⁻¹)
    D,
}

pub(crate) fn mul_raw(ring: &ResidueRing, x: &[u64], y: &[u64]) -> [u64; 4] {
    let r = ring;
    [
        r.add(r.mul(x[0], y[0]), r.mul(x[1], y[2])),
        r.add(r.mul(x[0], y[1]), r.mul(x[1], y[3])),
        r.add(r.mul(x[2], y[0]), r.mul(x[3], y[2])),
        r.add(r.mul(x[2], y[1]), r.mul(x[3], y[3])),
    ]
}

/// Inverse of a determinant-one matrix (the adjugate).
pub(crate) fn inv_sl2_raw(ring: &ResidueRing, x: &[u64]) -> [u64; 4] {
    [x[3], ring.neg(x[1]), ring.neg(x[2]), x[0]]
}

impl Mat2 {
    pub fn from_residues(ring: ResidueRing, e: [u64; 4]) -> Self {
        Self { ring, e: e.map(|v| ring.reduce(v)) }
    }

    pub fn from_i128(ring: ResidueRing, e: [i128; 4]) -> Self {
        Self { ring, e: e.map(|v| ring.reduce_i128(v)) }
    }

    pub fn from_scalars(a: PadicScalar, b: PadicScalar, c: PadicScalar, d: PadicScalar) -> Result<Self> {
        let ring = a.ring();
        if [b, c, d].iter().any(|s| s.ring() != ring) {
            return Err(Error::ShapeMismatch("entries from different rings".into()));
        }
        Ok(Self { ring, e: [a.residue(), b.residue(), c.residue(), d.residue()] })
    }

    pub fn identity(ring: ResidueRing) -> Self {
        Self::from_residues(ring, [1, 0, 0, 1])
    }

    pub fn zero(ring: ResidueRing) -> Self {
        Self { ring, e: [0; 4] }
    }

    pub fn ring(&self) -> ResidueRing {
        self.ring
    }

    pub fn residues(&self) -> [u64; 4] {
        self.e
    }

    pub fn entry(&self, row: usize, col: usize) -> PadicScalar {
        self.ring.scalar(self.e[2 * row + col] as i128)
    }

    pub fn a(&self) -> PadicScalar {
        self.entry(0, 0)
    }
    pub fn b(&self) -> PadicScalar {
        self.entry(0, 1)
    }
    pub fn c(&self) -> PadicScalar {
        self.entry(1, 0)
    }
    pub fn d(&self) -> PadicScalar {
        self.entry(1, 1)
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.ring, other.ring, "matrices from different rings");
        Self { ring: self.ring, e: mul_raw(&self.ring, &self.e, &other.e) }
    }

    pub fn add(&self, other: &Self) -> Self {
        let r = self.ring;
        Self { ring: r, e: std::array::from_fn(|i| r.add(self.e[i], other.e[i])) }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let r = self.ring;
        Self { ring: r, e: std::array::from_fn(|i| r.sub(self.e[i], other.e[i])) }
    }

    pub fn scale(&self, s: u64) -> Self {
        let r = self.ring;
        Self { ring: r, e: self.e.map(|v| r.mul(v, s)) }
    }

    pub fn det(&self) -> PadicScalar {
        let r = self.ring;
        r.scalar(r.sub(r.mul(self.e[0], self.e[3]), r.mul(self.e[1], self.e[2])) as i128)
    }

    pub fn trace(&self) -> PadicScalar {
        self.ring.scalar(self.ring.add(self.e[0], self.e[3]) as i128)
    }

    pub fn is_identity(&self) -> bool {
        self.e == [1 % self.ring.modulus(), 0, 0, 1 % self.ring.modulus()]
    }

    /// Whether the matrix is ≡ Id mod ℓᵏ.
    pub fn is_identity_mod(&self, k: u32) -> bool {
        let q = self.ring.prime().pow(k.min(self.ring.precision()));
        self.e[0] % q == 1 % q && self.e[1] % q == 0 && self.e[2] % q == 0 && self.e[3] % q == 1 % q
    }

    /// Minimum valuation of the entries (m for the zero matrix).
    pub fn valuation(&self) -> u32 {
        self.e.iter().map(|&v| self.ring.valuation(v)).min().unwrap()
    }

    pub fn inv(&self) -> Result<Self> {
        let det_inv = self.det().inv()?;
        let r = self.ring;
        let adj = [self.e[3], r.neg(self.e[1]), r.neg(self.e[2]), self.e[0]];
        Ok(Self { ring: r, e: adj.map(|v| r.mul(v, det_inv.residue())) })
    }

    pub fn pow(&self, mut exp: u64) -> Self {
        let mut acc = Self::identity(self.ring);
        let mut base = *self;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            exp >>= 1;
        }
        acc
    }

    /// Truncation to precision k ≤ m.
    pub fn truncate(&self, k: u32) -> Result<Self> {
        let ring = self.ring.with_precision(k)?;
        Ok(Self::from_residues(ring, self.e))
    }

    /// Conjugate C⁻¹·X·C, for an invertible C.
    pub fn conjugate_by(&self, c: &Self) -> Result<Self> {
        Ok(c.inv()?.mul(self).mul(c))
    }
}

impl fmt::Display for Mat2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[[{},{}],[{},{}]]", self.e[0], self.e[1], self.e[2], self.e[3])
    }
}

/// L(a), R(a) or D(a). D(a) requires 1 + a to be a unit.
pub fn standard_gen(kind: GenKind, a: PadicScalar) -> Result<Mat2> {
    let ring = a.ring();
    let x = a.residue();
    Ok(match kind {
        GenKind::L => Mat2::from_residues(ring, [1, 0, x, 1]),
        GenKind::R => Mat2::from_residues(ring, [1, x, 0, 1]),
        GenKind::D => {
            let alpha = ring.add(x, 1 % ring.modulus());
            let Some(beta) = ring.inv(alpha) else {
                return domain("D(a) needs a ≢ −1 mod ℓ");
            };
            Mat2::from_residues(ring, [alpha, 0, 0, beta])
        }
    })
}

pub(crate) fn gen_at(ring: ResidueRing, kind: GenKind, a: i128) -> Result<Mat2> {
    standard_gen(kind, ring.scalar(a))
}

/// The traceless matrix with (x, h, y) coordinates.
pub fn sl2_matrix(ring: ResidueRing, coords: [u64; 3]) -> Mat2 {
    let [x, h, y] = coords;
    Mat2::from_residues(ring, [h, x, y, ring.neg(ring.reduce(h))])
}

/// (x, h, y) coordinates of a traceless matrix.
pub fn sl2_coords(m: &Mat2) -> [u64; 3] {
    [m.e[1], m.e[0], m.e[2]]
}

fn log_or_exp(t: &Mat2, terms: &[(u64, u32, u64)], vt: u32, alternate: bool, start: Mat2) -> Mat2 {
    let ring = t.ring;
    let q = ring.prime().pow(vt);
    let unit_part = Mat2 { ring, e: t.e.map(|v| v / q) };
    let mut acc = start;
    let mut power = Mat2::identity(ring);
    let mut done = 0u64;
    for &(k, vk, ku) in terms {
        while done < k {
            power = power.mul(&unit_part);
            done += 1;
        }
        let shift = k as u32 * vt - vk;
        let coeff = ring.mul(ring.inv(ku).expect("unit"), ring.prime_power_residue(shift));
        let term = power.scale(coeff);
        acc = if alternate && k % 2 == 0 { acc.sub(&term) } else { acc.add(&term) };
    }
    acc
}

/// log(g) for g ≡ Id mod ℓ^{1+v}. Exact at precision m; for det g = 1 the
/// trace of the result vanishes mod ℓᵐ.
pub fn mat_log(g: &Mat2) -> Result<Mat2> {
    let ring = g.ring;
    let t = g.sub(&Mat2::identity(ring));
    if t == Mat2::zero(ring) {
        return Ok(t);
    }
    let vt = t.valuation();
    if vt < 1 + ring.v() {
        return domain("mat_log needs g ≡ Id mod ℓ^(1+v)");
    }
    Ok(log_or_exp(&t, &log_terms(&ring, vt), vt, true, Mat2::zero(ring)))
}

/// exp(t) for t ≡ 0 mod ℓ^{1+v}.
pub fn mat_exp(t: &Mat2) -> Result<Mat2> {
    let ring = t.ring;
    if *t == Mat2::zero(ring) {
        return Ok(Mat2::identity(ring));
    }
    let vt = t.valuation();
    if vt < 1 + ring.v() {
        return domain("mat_exp needs t ≡ 0 mod ℓ^(1+v)");
    }
    Ok(log_or_exp(t, &exp_terms(&ring, vt), vt, false, Mat2::identity(ring)))
}

/// An element of SL₂(ℤ/ℓᵐ)ⁿ, stored as 4n residues (row-major per factor).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GroupElement {
    ring: ResidueRing,
    data: SmallVec<[u64; 12]>,
}

impl PartialOrd for GroupElement {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for GroupElement {
    fn cmp(&self, other: &Self) -> Ordering {
        self.data.as_slice().cmp(other.data.as_slice())
    }
}

impl GroupElement {
    /// Builds a tuple from its parts; every part must have determinant 1.
    pub fn new(parts: &[Mat2]) -> Result<Self> {
        let Some(first) = parts.first() else {
            return Err(Error::ShapeMismatch("a group element needs at least one factor".into()));
        };
        let ring = first.ring;
        let mut data = SmallVec::new();
        for p in parts {
            if p.ring != ring {
                return Err(Error::ShapeMismatch("parts from different rings".into()));
            }
            if p.det() != ring.one() {
                return domain(format!("part {p} does not have determinant 1"));
            }
            data.extend_from_slice(&p.e);
        }
        Ok(Self { ring, data })
    }

    /// Builds from 4n raw residues, checking determinants.
    pub fn from_residues(ring: ResidueRing, residues: &[u64]) -> Result<Self> {
        if residues.is_empty() || residues.len() % 4 != 0 {
            return Err(Error::ShapeMismatch("need 4n residues".into()));
        }
        let parts: Vec<Mat2> = residues
            .chunks(4)
            .map(|c| Mat2::from_residues(ring, [c[0], c[1], c[2], c[3]]))
            .collect();
        Self::new(&parts)
    }

    pub(crate) fn from_raw(ring: ResidueRing, data: SmallVec<[u64; 12]>) -> Self {
        Self { ring, data }
    }

    pub fn identity(ring: ResidueRing, n: usize) -> Self {
        let one = 1 % ring.modulus();
        let mut data = SmallVec::with_capacity(4 * n);
        for _ in 0..n {
            data.extend_from_slice(&[one, 0, 0, one]);
        }
        Self { ring, data }
    }

    /// (Id, …, g, …, Id) with g in slot `index`.
    pub fn embed(g: &Mat2, index: usize, n: usize) -> Result<Self> {
        if index >= n {
            return Err(Error::ShapeMismatch(format!("slot {index} out of {n}")));
        }
        let mut out = Self::identity(g.ring, n);
        if g.det() != g.ring.one() {
            return domain("embedded part must have determinant 1");
        }
        out.data[4 * index..4 * index + 4].copy_from_slice(&g.e);
        Ok(out)
    }

    /// The same matrix in every slot.
    pub fn diagonal(g: &Mat2, n: usize) -> Result<Self> {
        Self::new(&vec![*g; n])
    }

    pub fn ring(&self) -> ResidueRing {
        self.ring
    }

    pub fn n(&self) -> usize {
        self.data.len() / 4
    }

    pub fn residues(&self) -> &[u64] {
        &self.data
    }

    pub fn part(&self, i: usize) -> Mat2 {
        let c = &self.data[4 * i..4 * i + 4];
        Mat2 { ring: self.ring, e: [c[0], c[1], c[2], c[3]] }
    }

    pub fn parts(&self) -> Vec<Mat2> {
        (0..self.n()).map(|i| self.part(i)).collect()
    }

    fn check_shape(&self, other: &Self) {
        assert!(
            self.ring == other.ring && self.data.len() == other.data.len(),
            "group elements of different shapes"
        );
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.check_shape(other);
        let mut data = SmallVec::with_capacity(self.data.len());
        for (x, y) in self.data.chunks(4).zip(other.data.chunks(4)) {
            data.extend_from_slice(&mul_raw(&self.ring, x, y));
        }
        Self { ring: self.ring, data }
    }

    pub fn inv(&self) -> Self {
        let mut data = SmallVec::with_capacity(self.data.len());
        for x in self.data.chunks(4) {
            data.extend_from_slice(&inv_sl2_raw(&self.ring, x));
        }
        Self { ring: self.ring, data }
    }

    pub fn pow(&self, mut exp: u64) -> Self {
        let mut acc = Self::identity(self.ring, self.n());
        let mut base = self.clone();
        while exp > 0 {
            if exp & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            exp >>= 1;
        }
        acc
    }

    /// a·b·a⁻¹·b⁻¹.
    pub fn comm(&self, other: &Self) -> Self {
        self.mul(other).mul(&self.inv()).mul(&other.inv())
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity(self.ring, self.n())
    }

    pub fn is_identity_mod(&self, k: u32) -> bool {
        (0..self.n()).all(|i| self.part(i).is_identity_mod(k))
    }

    /// Reduction to precision k ≤ m.
    pub fn reduce(&self, k: u32) -> Result<Self> {
        if k > self.ring.precision() {
            return domain("cannot raise precision");
        }
        let ring = self.ring.with_precision(k)?;
        Ok(Self { ring, data: self.data.iter().map(|&v| ring.reduce(v)).collect() })
    }

    /// Projection onto the listed slots, in the given order.
    pub fn project(&self, slots: &[usize]) -> Self {
        let mut data = SmallVec::with_capacity(4 * slots.len());
        for &s in slots {
            data.extend_from_slice(&self.data[4 * s..4 * s + 4]);
        }
        Self { ring: self.ring, data }
    }

    /// g^β for β ∈ ℤ_ℓ, as the product of (g^{ℓⁱ})^{βᵢ} over the ℓ-adic
    /// digits βᵢ of β below digit m. Needs every part ≡ Id mod ℓ^{1+v}.
    pub fn power_padic(&self, beta: PadicScalar) -> Result<Self> {
        if beta.ring() != self.ring {
            return Err(Error::ShapeMismatch("exponent from a different ring".into()));
        }
        if !self.is_identity_mod(1 + self.ring.v()) {
            return domain("power_padic needs g ≡ Id mod ℓ^(1+v)");
        }
        let l = self.ring.prime();
        let mut digits = beta.residue();
        let mut base = self.clone();
        let mut acc = Self::identity(self.ring, self.n());
        for _ in 0..self.ring.precision() {
            acc = acc.mul(&base.pow(digits % l));
            digits /= l;
            base = base.pow(l);
        }
        Ok(acc)
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = (0..self.n()).map(|i| self.part(i).to_string()).collect();
        write!(f, "({})", parts.join(", "))
    }
}

/// Levels (k₁, …, kₙ) of a product of congruence balls at precision m.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Ball {
    ring: ResidueRing,
    levels: Vec<u32>,
}

impl Ball {
    pub fn new(ring: ResidueRing, levels: Vec<u32>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::ShapeMismatch("a ball needs at least one level".into()));
        }
        if levels.iter().any(|&k| k > ring.precision()) {
            return domain("ball level above working precision");
        }
        Ok(Self { ring, levels })
    }

    pub fn uniform(ring: ResidueRing, level: u32, n: usize) -> Result<Self> {
        Self::new(ring, vec![level; n])
    }

    pub fn ring(&self) -> ResidueRing {
        self.ring
    }

    pub fn levels(&self) -> &[u32] {
        &self.levels
    }

    pub fn n(&self) -> usize {
        self.levels.len()
    }

    /// The 3n tuple generators (L, R, D)(ℓᵏ) in slot j, Id elsewhere.
    pub fn generators(&self) -> Result<Vec<GroupElement>> {
        let n = self.n();
        let mut out = Vec::with_capacity(3 * n);
        for (j, &k) in self.levels.iter().enumerate() {
            let a = self.ring.prime_power_residue(k) as i128;
            for kind in [GenKind::L, GenKind::R, GenKind::D] {
                out.push(GroupElement::embed(&gen_at(self.ring, kind, a)?, j, n)?);
            }
        }
        Ok(out)
    }
}

/// Coordinates of Θ(g): per factor, (x, h, y) of gᵢ − ½tr(gᵢ)·Id.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LieVector {
    /// ℤ/ℓ^{m'} with m' = m for odd ℓ and m − 1 for ℓ = 2.
    pub ring: ResidueRing,
    pub coords: Vec<u64>,
}

/// Θₙ(g). For ℓ = 2 every part must be ≡ Id mod 4 and one digit is lost.
pub fn theta(g: &GroupElement) -> Result<LieVector> {
    let ring = g.ring();
    if ring.prime() == 2 {
        if ring.precision() < 2 {
            return domain("theta at l = 2 needs precision at least 2");
        }
        if !g.is_identity_mod(2) {
            return domain("theta at l = 2 needs every part ≡ Id mod 4");
        }
        let out = ring.with_precision(ring.precision() - 1)?;
        let mut coords = Vec::with_capacity(3 * g.n());
        for i in 0..g.n() {
            let [a, b, c, d] = g.part(i).e;
            let diff = ring.sub(a, d);
            coords.extend([out.reduce(b), out.reduce(diff / 2), out.reduce(c)]);
        }
        return Ok(LieVector { ring: out, coords });
    }
    let half = ring.inv(2).expect("odd prime");
    let mut coords = Vec::with_capacity(3 * g.n());
    for i in 0..g.n() {
        let [a, b, c, d] = g.part(i).e;
        coords.extend([b, ring.mul(ring.sub(a, d), half), c]);
    }
    Ok(LieVector { ring, coords })
}

/// Comm₁(g₁,g₂) = g₁g₂g₁⁻¹g₂⁻¹ and Commₖ = [Commₖ₋₁, gₖ₊₁].
pub fn comm_iterated(gs: &[GroupElement]) -> Result<GroupElement> {
    if gs.len() < 2 {
        return Err(Error::ShapeMismatch("iterated commutator needs at least two elements".into()));
    }
    let (ring, n) = (gs[0].ring(), gs[0].n());
    if gs.iter().any(|g| g.ring() != ring || g.n() != n) {
        return Err(Error::ShapeMismatch("elements of different shapes".into()));
    }
    let mut acc = gs[0].comm(&gs[1]);
    for g in &gs[2..] {
        acc = acc.comm(g);
    }
    Ok(acc)
}

/// Iterates g ↦ g^base until a fixed point, within m·base steps.
pub fn power_stabilize(g: &GroupElement, base: u64) -> Result<GroupElement> {
    let ring = g.ring();
    let l = ring.prime();
    if l == 2 {
        return domain("power_stabilize needs an odd prime");
    }
    if base != l && base != l * l {
        return domain("base must be l or l^2");
    }
    let bound = ring.precision() as u64 * base;
    let mut x = g.clone();
    for _ in 0..bound {
        let next = x.pow(base);
        if next == x {
            return Ok(x);
        }
        x = next;
    }
    Err(Error::NonConvergence { iterations: bound })
}

/// The N-term partial product
/// ∏_{i=−N}^{−1} R(c)^{(ab)^{−i}} · R(c)L(d)R(c)⁻¹L(d)⁻¹ · ∏_{i=1}^{N} L(d)^{−(ab)^i}.
pub fn diag_limit_product(
    a: PadicScalar,
    b: PadicScalar,
    c: PadicScalar,
    d: PadicScalar,
    terms: u32,
) -> Result<Mat2> {
    let ring = a.ring();
    if [b, c, d].iter().any(|s| s.ring() != ring) {
        return Err(Error::ShapeMismatch("scalars from different rings".into()));
    }
    if [a, b, c, d].iter().any(|s| s.valuation() < 1) {
        return domain("diag_limit_product needs all valuations ≥ 1");
    }
    let rc = standard_gen(GenKind::R, c)?;
    let ld = standard_gen(GenKind::L, d)?;
    let ab = a * b;
    let mut acc = Mat2::identity(ring);
    for j in (1..=terms).rev() {
        acc = acc.mul(&rc.pow(ab.pow(j as u64).residue()));
    }
    acc = acc.mul(&rc).mul(&ld).mul(&rc.inv()?).mul(&ld.inv()?);
    for j in 1..=terms {
        acc = acc.mul(&ld.pow(ab.pow(j as u64).residue()).inv()?);
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ring(p: u64, m: u32) -> ResidueRing {
        ResidueRing::new(p, m).unwrap()
    }

    fn el(m: Mat2) -> GroupElement {
        GroupElement::new(&[m]).unwrap()
    }

    #[test]
    fn standard_generators() {
        let r = ring(5, 2);
        assert!(gen_at(r, GenKind::L, 0).unwrap().is_identity());
        assert_eq!(gen_at(r, GenKind::D, 5).unwrap().residues(), [6, 0, 0, 21]);
        assert!(gen_at(r, GenKind::D, -1).is_err());
        assert!(gen_at(r, GenKind::D, 4).is_err());
    }

    #[test]
    fn theta_examples() {
        let r = ring(5, 2);
        assert_eq!(theta(&GroupElement::identity(r, 1)).unwrap().coords, vec![0, 0, 0]);
        assert_eq!(theta(&el(gen_at(r, GenKind::R, 7).unwrap())).unwrap().coords, vec![7, 0, 0]);
        assert_eq!(theta(&el(gen_at(r, GenKind::D, 5).unwrap())).unwrap().coords, vec![0, 5, 0]);
        let r2 = ring(2, 6);
        let v = theta(&el(gen_at(r2, GenKind::D, 4).unwrap())).unwrap();
        assert_eq!(v.ring.precision(), 5);
        assert!(theta(&el(gen_at(r2, GenKind::R, 2).unwrap())).is_err());
    }

    #[test]
    fn commutator_identities_from_the_catalog() {
        let r = ring(5, 4);
        let (p1, p2) = (5i128, 5i128);
        let lhs = el(gen_at(r, GenKind::L, p1).unwrap()).comm(&el(gen_at(r, GenKind::D, p2).unwrap()));
        let coef = r.mul(r.reduce_i128(p2 + 2), r.inv(r.reduce_i128((p2 + 1) * (p2 + 1))).unwrap());
        let rhs = el(gen_at(r, GenKind::L, r.mul(coef, 25) as i128).unwrap());
        assert_eq!(lhs, rhs);
        let lhs = el(gen_at(r, GenKind::R, p1).unwrap()).comm(&el(gen_at(r, GenKind::D, p2).unwrap()));
        let rhs = el(gen_at(r, GenKind::R, -(2 + p2) * 25).unwrap());
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn comm_iterated_basics() {
        let r = ring(7, 2);
        let g = el(gen_at(r, GenKind::L, 3).unwrap());
        assert!(comm_iterated(&[g.clone(), g.clone()]).unwrap().is_identity());
        assert!(comm_iterated(&[g.clone()]).is_err());
    }

    #[test]
    fn log_exp_examples() {
        let r = ring(3, 6);
        assert_eq!(mat_log(&Mat2::identity(r)).unwrap(), Mat2::zero(r));
        let l = gen_at(r, GenKind::L, 3).unwrap();
        assert_eq!(mat_exp(&mat_log(&l).unwrap()).unwrap(), l);
        let r2 = ring(2, 8);
        let l2 = gen_at(r2, GenKind::L, 4).unwrap();
        assert_eq!(mat_exp(&mat_log(&l2).unwrap()).unwrap(), l2);
        assert!(mat_log(&gen_at(r2, GenKind::L, 2).unwrap()).is_err());
    }

    #[test]
    fn power_stabilize_examples() {
        let r = ring(5, 2);
        let id = GroupElement::identity(r, 1);
        assert_eq!(power_stabilize(&id, 5).unwrap(), id);
        // D(2) has order 4 mod 5, perturbed by a kernel element.
        let g = el(gen_at(r, GenKind::D, 2).unwrap().mul(&gen_at(r, GenKind::L, 5).unwrap()));
        let lim = power_stabilize(&g, 5).unwrap();
        assert_eq!(lim.pow(5), lim);
        assert_eq!(lim.reduce(1).unwrap(), g.reduce(1).unwrap());
        // brute-force oracle: g^(5^k) for large k
        let mut x = g.clone();
        for _ in 0..10 {
            x = x.pow(5);
        }
        assert_eq!(lim, x);
    }

    #[test]
    fn limit_product_examples() {
        let r = ring(2, 12);
        let s = |v: i128| r.scalar(v);
        let got = diag_limit_product(s(8), s(8), s(8), s(8), 2).unwrap();
        let want = Mat2::from_i128(r, [r.inv(r.reduce_i128(1 - 64)).unwrap() as i128, 0, 0, 1 - 64]);
        assert_eq!(got, want);
        let bare = diag_limit_product(s(8), s(8), s(8), s(8), 0).unwrap();
        let (rc, ld) = (gen_at(r, GenKind::R, 8).unwrap(), gen_at(r, GenKind::L, 8).unwrap());
        assert_eq!(bare, rc.mul(&ld).mul(&rc.inv().unwrap()).mul(&ld.inv().unwrap()));
        let r10 = ring(2, 10);
        let s = |v: i128| r10.scalar(v);
        let got = diag_limit_product(s(8), s(8), s(4), s(16), 10).unwrap();
        assert_eq!(got.d().residue(), r10.reduce_i128(1 - 64));
        assert!(diag_limit_product(s(1), s(8), s(4), s(16), 1).is_err());
    }

    #[test]
    fn power_padic_matches_integer_power() {
        let r = ring(2, 10);
        let g = el(gen_at(r, GenKind::L, 4).unwrap().mul(&gen_at(r, GenKind::D, 8).unwrap()));
        for beta in [0u64, 1, 5, 77, 1023] {
            assert_eq!(g.power_padic(r.scalar(beta as i128)).unwrap(), g.pow(beta));
        }
        let bad = el(gen_at(r, GenKind::L, 2).unwrap());
        assert!(bad.power_padic(r.scalar(3)).is_err());
    }

    fn arb_sl2(p: u64, m: u32) -> impl Strategy<Value = Mat2> {
        (any::<u64>(), any::<u64>(), any::<u64>(), any::<bool>()).prop_map(move |(a, b, c, swap)| {
            let r = ring(p, m);
            let mut a = r.reduce(a);
            if !r.is_unit(a) {
                a = r.add(a, 1);
            }
            let (b, c) = (r.reduce(b), r.reduce(c));
            let d = r.mul(r.add(1, r.mul(b, c)), r.inv(a).unwrap());
            let g = Mat2::from_residues(r, [a, b, c, d]);
            if swap {
                g.mul(&Mat2::from_i128(r, [0, -1, 1, 0]))
            } else {
                g
            }
        })
    }

    proptest! {
        #[test]
        fn theta_is_conjugation_equivariant(g in arb_sl2(7, 4), t in arb_sl2(7, 4)) {
            let r = g.ring();
            let conj = el(g.mul(&t).mul(&g.inv().unwrap()));
            let lhs = theta(&conj).unwrap().coords;
            let th = theta(&el(t)).unwrap().coords;
            let rhs = g.mul(&sl2_matrix(r, [th[0], th[1], th[2]])).mul(&g.inv().unwrap());
            prop_assert_eq!(lhs, sl2_coords(&rhs).to_vec());
        }

        #[test]
        fn theta_detects_nontrivial_elements(g in arb_sl2(5, 5)) {
            // |SL2(F_5)| kills the mod-5 image
            let r = g.ring();
            let h = g.pow(r.prime() * (r.prime() * r.prime() - 1));
            prop_assume!(h.is_identity_mod(1));
            for n in 1..=5u32 {
                if !h.is_identity_mod(n) {
                    let th = theta(&el(h)).unwrap().coords;
                    let q = r.prime().pow(n);
                    prop_assert!(th.iter().any(|&c| c % q != 0));
                }
            }
        }

        #[test]
        fn mat_log_exp_round_trip(p in prop::sample::select(vec![2u64, 3, 5, 7]), raw in any::<[u64; 3]>()) {
            let r = ring(p, 12);
            let q = r.prime_power_residue(1 + r.v());
            let t = sl2_matrix(r, raw.map(|v| r.mul(r.reduce(v), q)));
            let g = mat_exp(&t).unwrap();
            prop_assert_eq!(g.det(), r.one());
            prop_assert_eq!(mat_log(&g).unwrap(), t);
            prop_assert_eq!(mat_log(&g).unwrap().trace(), r.zero());
        }

        #[test]
        fn comm_iterated_matches_direct(g in arb_sl2(5, 3), h in arb_sl2(5, 3), k in arb_sl2(5, 3)) {
            let (g, h, k) = (el(g), el(h), el(k));
            let direct = {
                let c = g.mul(&h).mul(&g.inv()).mul(&h.inv());
                c.mul(&k).mul(&c.inv()).mul(&k.inv())
            };
            prop_assert_eq!(comm_iterated(&[g, h, k]).unwrap(), direct);
        }

        #[test]
        fn limit_product_stabilizes(a in 1u64..64, b in 1u64..64) {
            let r = ring(3, 8);
            let (a, b) = (r.scalar(3 * a as i128), r.scalar(3 * b as i128));
            let x = diag_limit_product(a, b, a, b, 8).unwrap();
            let y = diag_limit_product(a, b, a, b, 9).unwrap();
            prop_assert_eq!(x, y);
            let one_minus = r.one() - a * b;
            prop_assert_eq!(x, Mat2::from_residues(r, [one_minus.inv().unwrap().residue(), 0, 0, one_minus.residue()]));
        }
    }
}
