//! Lie algebras of open subgroups and finite-level checks of the
//! commutator-containment statements built on them.

mod harness;
mod reduction;

use std::fmt;

use crate::error::{domain, Error, Result};
use crate::group::FiniteGroup;
use crate::lattice::ModLattice;
use crate::matrix::{mul_raw, Ball, GroupElement};
use crate::scalar::{PadicScalar, ResidueRing};

pub use harness::{
    conjugation_identities_hold, example_graph_group, graph_perturbation_check, main_theorem_harness,
};
pub use reduction::{first_reduction, sylow_preimage, FirstReductionReport, ReductionCase, SylowPreimage};

/// How a check ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Verdict {
    /// Every claimed containment was checked and holds.
    Verified,
    /// A claimed level reaches the working precision, so nothing was decided.
    InconclusiveAtPrecision,
    /// A claimed containment fails; a certificate is attached.
    LemmaViolation,
    /// The input does not satisfy the statement's hypotheses.
    HypothesisNotMet,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Verified => "verified",
            Verdict::InconclusiveAtPrecision => "inconclusive-at-precision",
            Verdict::LemmaViolation => "lemma-violation",
            Verdict::HypothesisNotMet => "hypothesis-not-met",
        })
    }
}

/// Evidence for a failed containment: the subgroup's generators and the
/// ball generator it lacks.
#[derive(Clone, Debug)]
pub struct Certificate {
    pub generators: Vec<GroupElement>,
    pub missing: GroupElement,
    pub claim: String,
}

#[derive(Clone, Debug)]
pub struct PinkReport {
    pub descriptor: String,
    pub ring: ResidueRing,
    pub n: usize,
    pub lie_algebra: ModLattice,
    /// Smallest k with ℓᵏ𝔰𝔩₂ⁿ ⊆ 𝓛, if one below the precision exists.
    pub k_found: Option<u32>,
    /// The level the statement claims, per factor.
    pub claimed: Vec<u32>,
    /// Ball levels actually checked to be contained, per factor.
    pub conclusion_checked: Vec<u32>,
    pub subgroup_indices: Vec<(String, u128)>,
    pub verdict: Verdict,
    pub notes: Vec<String>,
    pub certificate: Option<Certificate>,
}

impl PinkReport {
    fn new(descriptor: String, g: &FiniteGroup, lie_algebra: ModLattice) -> Self {
        let m = lie_algebra.ring().precision();
        let level = lie_algebra.scaled_full_level();
        Self {
            descriptor,
            ring: g.ring(),
            n: g.n(),
            k_found: (level < m).then_some(level),
            lie_algebra,
            claimed: Vec::new(),
            conclusion_checked: Vec::new(),
            subgroup_indices: Vec::new(),
            verdict: Verdict::HypothesisNotMet,
            notes: Vec::new(),
            certificate: None,
        }
    }

    fn conclude(&mut self, group: &FiniteGroup, ball: &Ball, claim: &str) -> Result<()> {
        self.claimed = ball.levels().to_vec();
        match group.missing_ball_generator(ball)? {
            None => {
                self.verdict = Verdict::Verified;
                self.conclusion_checked = ball.levels().to_vec();
            }
            Some(missing) => {
                self.verdict = Verdict::LemmaViolation;
                self.certificate =
                    Some(Certificate { generators: group.generators().to_vec(), missing, claim: claim.to_string() });
            }
        }
        Ok(())
    }
}

/// 𝓛(G): the span of Θ(G). Computed as Θ of the span of G inside M₂ⁿ,
/// which is the algebra generated by G and so closes under right
/// multiplication by the generators.
pub fn lie_algebra(g: &FiniteGroup) -> Result<ModLattice> {
    let ring = g.ring();
    let n = g.n();
    if ring.prime() == 2 {
        if ring.precision() < 2 {
            return domain("the Lie algebra at l = 2 needs precision at least 2");
        }
        if !g.generators().iter().all(|x| x.is_identity_mod(2)) {
            return domain("the Lie algebra at l = 2 needs G trivial mod 4");
        }
    }
    let id = GroupElement::identity(ring, n).residues().to_vec();
    let mut span = ModLattice::span(ring, 4 * n, &[id])?;
    loop {
        let mut vectors = span.basis().to_vec();
        for b in span.basis() {
            for x in g.generators() {
                let mut prod = Vec::with_capacity(4 * n);
                for i in 0..n {
                    prod.extend(mul_raw(&ring, &b[4 * i..4 * i + 4], &x.residues()[4 * i..4 * i + 4]));
                }
                vectors.push(prod);
            }
        }
        let next = ModLattice::span(ring, 4 * n, &vectors)?;
        if next == span {
            break;
        }
        span = next;
    }
    let (out, half) = if ring.prime() == 2 {
        (ring.with_precision(ring.precision() - 1)?, None)
    } else {
        (ring, ring.inv(2))
    };
    let images: Vec<Vec<u64>> = span
        .basis()
        .iter()
        .map(|b| {
            (0..n)
                .flat_map(|i| {
                    let [a, x, y, d] = [b[4 * i], b[4 * i + 1], b[4 * i + 2], b[4 * i + 3]];
                    let h = match half {
                        Some(h) => ring.mul(ring.sub(a, d), h),
                        None => ring.sub(a, d) / 2,
                    };
                    [out.reduce(x), out.reduce(h), out.reduce(y)]
                })
                .collect()
        })
        .collect();
    ModLattice::span(out, 3 * n, &images)
}

/// Span of the per-factor traces tr(u·w) over pairs of basis vectors of a
/// lattice in 𝔰𝔩₂ⁿ, as a lattice in (ℤ/ℓᵐ)ⁿ.
pub fn trace_form_module(lie: &ModLattice) -> Result<ModLattice> {
    if lie.dim() % 3 != 0 {
        return Err(Error::ShapeMismatch("lattice is not in sl2^n coordinates".into()));
    }
    let ring = lie.ring();
    let n = lie.dim() / 3;
    let basis = lie.basis();
    let mut traces = Vec::new();
    for (i, u) in basis.iter().enumerate() {
        for w in &basis[i..] {
            traces.push(
                (0..n)
                    .map(|f| {
                        let (x, h, y) = (u[3 * f], u[3 * f + 1], u[3 * f + 2]);
                        let (x2, h2, y2) = (w[3 * f], w[3 * f + 1], w[3 * f + 2]);
                        let hh = ring.mul(2, ring.mul(h, h2));
                        ring.add(hh, ring.add(ring.mul(x, y2), ring.mul(y, x2)))
                    })
                    .collect(),
            );
        }
    }
    ModLattice::span(ring, n, &traces)
}

/// For a pro-ℓ group with ℓᵏ𝔰𝔩₂ⁿ ⊆ 𝓛(G), checks G′ ⊇ 𝓑(2k, …, 2k).
pub fn pink_proell_check(g: &FiniteGroup, k: u32) -> Result<PinkReport> {
    let ring = g.ring();
    let (l, m, n) = (ring.prime(), ring.precision(), g.n());
    let descriptor = format!("pink-proell l={l} m={m} n={n} k={k}");
    if l == 2 {
        let mut report = PinkReport::new(descriptor, g, ModLattice::zero(ring, 3 * n));
        report.notes.push("the prime must be odd".into());
        return Ok(report);
    }
    let mut report = PinkReport::new(descriptor, g, lie_algebra(g)?);
    if g.image_order() != 1 {
        report.notes.push("G is not pro-l: its image mod l is nontrivial".into());
        return Ok(report);
    }
    report.claimed = vec![2 * k; n];
    if 2 * k >= m {
        report.verdict = Verdict::InconclusiveAtPrecision;
        report.notes.push(format!("claimed level {} reaches precision {m}", 2 * k));
        return Ok(report);
    }
    if !report.lie_algebra.contains_lattice(&ModLattice::scaled_full(ring, 3 * n, k)) {
        report.notes.push(format!("the Lie algebra does not contain l^{k} sl2^{n}"));
        return Ok(report);
    }
    let derived = g.derived_subgroup()?;
    report.subgroup_indices.push(("[G:G']".into(), g.index(&derived)?));
    report.conclude(&derived, &Ball::uniform(ring, 2 * k, n)?, "G' contains the level-2k ball")?;
    Ok(report)
}

/// Determinant over ℤ/ℓᵐ by elimination pivoting on an entry of least
/// valuation, which keeps every step exact in the local ring.
pub fn determinant(ring: ResidueRing, matrix: &[Vec<u64>]) -> Result<u64> {
    let d = matrix.len();
    if matrix.iter().any(|row| row.len() != d) {
        return Err(Error::ShapeMismatch("matrix is not square".into()));
    }
    let mut a: Vec<Vec<u64>> = matrix.iter().map(|r| r.iter().map(|&x| ring.reduce(x)).collect()).collect();
    let mut det = 1 % ring.modulus();
    for col in 0..d {
        let pivot = (col..d)
            .flat_map(|i| (col..d).map(move |j| (i, j)))
            .filter(|&(i, j)| a[i][j] != 0)
            .min_by_key(|&(i, j)| ring.valuation(a[i][j]));
        let Some((pi, pj)) = pivot else {
            return Ok(0);
        };
        if pi != col {
            a.swap(pi, col);
            det = ring.neg(det);
        }
        if pj != col {
            for row in a.iter_mut() {
                row.swap(pj, col);
            }
            det = ring.neg(det);
        }
        let (e, unit) = ring.split(a[col][col]);
        let unit_inv = ring.inv(unit % ring.modulus()).expect("unit");
        det = ring.mul(det, a[col][col]);
        for i in col + 1..d {
            if a[i][col] == 0 {
                continue;
            }
            let quotient = ring.mul(ring.shift_down(a[i][col], e), unit_inv);
            for j in col..d {
                let delta = ring.mul(quotient, a[col][j]);
                a[i][j] = ring.sub(a[i][j], delta);
            }
        }
    }
    Ok(det)
}

/// Given g·w ≡ λw mod ℓ^{level} with w ≢ 0 mod ℓ^{α+1}, reports whether
/// the characteristic polynomial of g vanishes at λ mod ℓ^{level−α}.
pub fn approx_eigen_check(
    g: &[Vec<u64>],
    lambda: PadicScalar,
    w: &[u64],
    level: u32,
    alpha: u32,
) -> Result<bool> {
    let ring = lambda.ring();
    let d = g.len();
    if w.len() != d || g.iter().any(|row| row.len() != d) {
        return Err(Error::ShapeMismatch("matrix and vector sizes differ".into()));
    }
    if alpha >= level || level > ring.precision() {
        return Err(Error::Precondition("need alpha < level <= m".into()));
    }
    let w: Vec<u64> = w.iter().map(|&x| ring.reduce(x)).collect();
    if w.iter().all(|&x| ring.valuation(x) > alpha) {
        return Err(Error::Precondition(format!("w vanishes mod l^{}", alpha + 1)));
    }
    let q = ring.prime_power(level);
    for (row, &wi) in g.iter().zip(&w) {
        let gw = row.iter().zip(&w).fold(0, |acc, (&a, &b)| ring.add(acc, ring.mul(ring.reduce(a), b)));
        let lw = ring.mul(lambda.residue(), wi);
        if ring.sub(gw, lw) % q != 0 {
            return Err(Error::Precondition(format!("g w differs from lambda w mod l^{level}")));
        }
    }
    let shifted: Vec<Vec<u64>> = (0..d)
        .map(|i| {
            (0..d)
                .map(|j| {
                    let x = ring.reduce(g[i][j]);
                    if i == j { ring.sub(lambda.residue(), x) } else { ring.neg(x) }
                })
                .collect()
        })
        .collect();
    let value = determinant(ring, &shifted)?;
    Ok(ring.valuation(value) >= level - alpha)
}

#[cfg(test)]
mod tests;
