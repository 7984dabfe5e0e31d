//! Submodules of (ℤ/ℓᵐ)ᵈ in Howell normal form.
//!
//! A basis is canonical when every pivot is a power of ℓ, entries above a
//! pivot ℓᵉ lie in [0, ℓᵉ), and the rows with pivot column ≥ c span every
//! element of the module vanishing before column c. Equal modules then have
//! identical row lists.

use crate::error::{domain, Error, Result};
use crate::matrix::{gen_at, sl2_coords, sl2_matrix, GenKind, Mat2};
use crate::scalar::ResidueRing;

/// A d×d matrix over ℤ/ℓᵐ acting on column vectors.
pub type Operator = Vec<Vec<u64>>;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ModLattice {
    ring: ResidueRing,
    dim: usize,
    rows: Vec<Vec<u64>>,
}

impl ModLattice {
    pub fn zero(ring: ResidueRing, dim: usize) -> Self {
        Self { ring, dim, rows: Vec::new() }
    }

    /// ℓᵏ·(ℤ/ℓᵐ)ᵈ.
    pub fn scaled_full(ring: ResidueRing, dim: usize, k: u32) -> Self {
        let q = ring.prime_power_residue(k);
        let rows = (0..dim)
            .map(|i| (0..dim).map(|j| if i == j { q } else { 0 }).collect())
            .collect();
        Self::howell(ring, dim, rows)
    }

    pub fn span(ring: ResidueRing, dim: usize, vectors: &[Vec<u64>]) -> Result<Self> {
        if let Some(bad) = vectors.iter().find(|v| v.len() != dim) {
            return Err(Error::ShapeMismatch(format!("vector of length {} in dimension {dim}", bad.len())));
        }
        let rows = vectors.iter().map(|v| v.iter().map(|&x| ring.reduce(x)).collect()).collect();
        Ok(Self::howell(ring, dim, rows))
    }

    pub fn ring(&self) -> ResidueRing {
        self.ring
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn basis(&self) -> &[Vec<u64>] {
        &self.rows
    }

    pub fn is_zero(&self) -> bool {
        self.rows.is_empty()
    }

    fn howell(ring: ResidueRing, dim: usize, mut work: Vec<Vec<u64>>) -> Self {
        let r = ring;
        let mut out: Vec<(usize, u32, Vec<u64>)> = Vec::new();
        work.retain(|v| v.iter().any(|&x| x != 0));
        for col in 0..dim {
            let best = work
                .iter()
                .enumerate()
                .filter(|(_, v)| v[col] != 0)
                .min_by_key(|(_, v)| r.valuation(v[col]))
                .map(|(i, _)| i);
            let Some(idx) = best else { continue };
            let mut pivot = work.swap_remove(idx);
            let (e, unit) = r.split(pivot[col]);
            let unit_inv = r.inv(r.reduce(unit)).expect("unit");
            for x in pivot.iter_mut() {
                *x = r.mul(*x, unit_inv);
            }
            for v in work.iter_mut() {
                if v[col] != 0 {
                    let q = r.shift_down(v[col], e);
                    for j in col..dim {
                        v[j] = r.sub(v[j], r.mul(q, pivot[j]));
                    }
                }
            }
            // ℓ^{m−e}·pivot kills the pivot entry and may carry later columns.
            let annihilated: Vec<u64> = pivot.iter().map(|&x| r.mul(x, r.prime_power_residue(r.precision() - e))).collect();
            work.push(annihilated);
            work.retain(|v| v.iter().any(|&x| x != 0));
            out.push((col, e, pivot));
        }
        // Reduce entries above each pivot into [0, ℓᵉ).
        for j in 0..out.len() {
            for i in j + 1..out.len() {
                let (col, e) = (out[i].0, out[i].1);
                let q = out[j].2[col] / ring.prime().pow(e);
                if q != 0 {
                    let lower = out[i].2.clone();
                    for (x, y) in out[j].2.iter_mut().zip(lower) {
                        *x = r.sub(*x, r.mul(r.reduce(q), y));
                    }
                }
            }
        }
        Self { ring, dim, rows: out.into_iter().map(|(_, _, v)| v).collect() }
    }

    fn pivot(&self, row: &[u64]) -> (usize, u32) {
        let col = row.iter().position(|&x| x != 0).expect("nonzero row");
        (col, self.ring.valuation(row[col]))
    }

    pub fn contains(&self, v: &[u64]) -> bool {
        if v.len() != self.dim {
            return false;
        }
        let r = self.ring;
        let mut w: Vec<u64> = v.iter().map(|&x| r.reduce(x)).collect();
        for row in &self.rows {
            let (col, e) = self.pivot(row);
            if w[..col].iter().any(|&x| x != 0) {
                return false;
            }
            if w[col] % r.prime().pow(e) != 0 {
                return false;
            }
            let q = r.shift_down(w[col], e);
            for j in col..self.dim {
                w[j] = r.sub(w[j], r.mul(q, row[j]));
            }
        }
        w.iter().all(|&x| x == 0)
    }

    pub fn contains_lattice(&self, other: &Self) -> bool {
        self.ring == other.ring && self.dim == other.dim && other.rows.iter().all(|v| self.contains(v))
    }

    /// Sum of two modules.
    pub fn join(&self, other: &Self) -> Result<Self> {
        if self.ring != other.ring || self.dim != other.dim {
            return Err(Error::ShapeMismatch("lattices of different shapes".into()));
        }
        let mut rows = self.rows.clone();
        rows.extend(other.rows.iter().cloned());
        Ok(Self::howell(self.ring, self.dim, rows))
    }

    pub fn apply_operator(&self, t: &Operator) -> Result<Self> {
        check_operator(t, self.dim)?;
        let rows = self.rows.iter().map(|w| apply(&self.ring, t, w)).collect();
        Ok(Self::howell(self.ring, self.dim, rows))
    }

    /// Smallest k with ℓᵏ·(ℤ/ℓᵐ)ᵈ ⊆ self (m when only the zero multiple fits).
    pub fn scaled_full_level(&self) -> u32 {
        (0..=self.ring.precision())
            .find(|&k| self.contains_lattice(&Self::scaled_full(self.ring, self.dim, k)))
            .unwrap()
    }

    /// Projection to precision k ≤ m.
    pub fn project(&self, k: u32) -> Result<Self> {
        if k > self.ring.precision() {
            return domain("cannot raise lattice precision");
        }
        let ring = self.ring.with_precision(k)?;
        let rows = self.rows.iter().map(|v| v.iter().map(|&x| ring.reduce(x)).collect()).collect();
        Ok(Self::howell(ring, self.dim, rows))
    }

    /// Smallest valuation of an element (m for the zero module).
    pub fn min_valuation(&self) -> u32 {
        self.rows
            .iter()
            .flat_map(|v| v.iter().map(|&x| self.ring.valuation(x)))
            .min()
            .unwrap_or(self.ring.precision())
    }
}

fn check_operator(t: &Operator, dim: usize) -> Result<()> {
    if t.len() != dim || t.iter().any(|row| row.len() != dim) {
        return Err(Error::ShapeMismatch(format!("operator is not {dim}x{dim}")));
    }
    Ok(())
}

pub(crate) fn apply(ring: &ResidueRing, t: &Operator, w: &[u64]) -> Vec<u64> {
    t.iter()
        .map(|row| row.iter().zip(w).fold(0, |acc, (&a, &b)| ring.add(acc, ring.mul(a, b))))
        .collect()
}

/// The operator X ↦ C⁻¹XC on 𝔰𝔩₂ in (x, h, y) coordinates.
pub fn conjugation_operator(c: &Mat2) -> Result<Operator> {
    let ring = c.ring();
    let mut t = vec![vec![0; 3]; 3];
    for j in 0..3 {
        let mut basis = [0u64; 3];
        basis[j] = 1;
        let image = sl2_coords(&sl2_matrix(ring, basis).conjugate_by(c)?);
        for i in 0..3 {
            t[i][j] = image[i];
        }
    }
    Ok(t)
}

/// T − Id.
pub fn minus_identity(ring: &ResidueRing, t: &Operator) -> Operator {
    let mut out = t.clone();
    for (i, row) in out.iter_mut().enumerate() {
        row[i] = ring.sub(row[i], 1 % ring.modulus());
    }
    out
}

/// Closes W ⊆ 𝔰𝔩₂ under conjugation by L(ℓˢ), R(ℓˢ), D(ℓˢ) and checks that
/// the result contains ℓ^{t+4s+4v}·𝔰𝔩₂.
pub fn conj_saturate(w: &ModLattice, s: u32, t: u32) -> Result<ModLattice> {
    let ring = w.ring();
    let (l, m, v) = (ring.prime(), ring.precision(), ring.v());
    if w.dim() != 3 {
        return Err(Error::ShapeMismatch("conj_saturate works on sl2 coordinates (d = 3)".into()));
    }
    let min_s = match l {
        2 => 2,
        3 | 5 => 1,
        _ => 0,
    };
    if s < min_s {
        return domain(format!("s = {s} is below the valid range for l = {l}"));
    }
    let target = t + 4 * s + 4 * v;
    if target >= m {
        return domain(format!("t + 4s + 4v = {target} is not below the precision {m}"));
    }
    if w.min_valuation() > t {
        return domain(format!("W vanishes modulo l^{}", t + 1));
    }
    let a = ring.prime_power_residue(s) as i128;
    let ops: Vec<Operator> = [GenKind::L, GenKind::R, GenKind::D]
        .into_iter()
        .map(|k| conjugation_operator(&gen_at(ring, k, a)?))
        .collect::<Result<_>>()?;
    let mut current = w.clone();
    for _ in 0..=3 * m as usize + 3 {
        let mut next = current.clone();
        for op in &ops {
            next = next.join(&current.apply_operator(op)?)?;
        }
        if next == current {
            if !current.contains_lattice(&ModLattice::scaled_full(ring, 3, target)) {
                return Err(Error::LemmaViolation(format!(
                    "conjugation closure misses l^{target} sl2"
                )));
            }
            return Ok(current);
        }
        current = next;
    }
    Err(Error::NonConvergence { iterations: 3 * m as u64 + 4 })
}
