//! Finite-level subgroups of SL₂(ℤ/ℓᵐ)ⁿ: closure, membership, derived
//! subgroups, projections, congruence kernels and Goursat data.

mod chain;

use std::collections::{HashSet, VecDeque};

use crate::dickson;
use crate::error::{domain, Error, Result};
use crate::matrix::{comm_iterated, gen_at, Ball, GenKind, GroupElement, Mat2};
use crate::scalar::ResidueRing;

use chain::Chain;

/// Default bound on the number of mod-ℓ image points a closure may visit.
pub const DEFAULT_CAP: u64 = 1 << 24;

/// A subgroup of SL₂(ℤ/ℓᵐ)ⁿ given by generators, with its closure cached.
#[derive(Clone, Debug)]
pub struct FiniteGroup {
    ring: ResidueRing,
    n: usize,
    cap: u64,
    chain: Chain,
}

/// Outcome of recombining pairwise ball containments.
#[derive(Clone, Debug)]
pub struct GoursatReport {
    /// Σ_{j≠i} s_ij + (n−2)v for each factor i.
    pub levels: Vec<u32>,
    /// Factors whose claimed level reaches the working precision, where the
    /// ball is trivial and containment is vacuous.
    pub beyond_precision: Vec<usize>,
    /// (factor, iterated commutator) pairs: each lies in G and is trivial
    /// outside its factor.
    pub witnesses: Vec<(usize, GroupElement)>,
}

impl FiniteGroup {
    pub fn closure(ring: ResidueRing, n: usize, generators: &[GroupElement], cap: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::ShapeMismatch("a group needs at least one factor".into()));
        }
        if let Some(g) = generators.iter().find(|g| g.ring() != ring || g.n() != n) {
            return Err(Error::ShapeMismatch(format!(
                "generator over {} with {} factors, expected {} with {}",
                g.ring(),
                g.n(),
                ring,
                n
            )));
        }
        let mut gens: Vec<GroupElement> = Vec::with_capacity(generators.len());
        for g in generators {
            if !g.is_identity() && !gens.contains(g) {
                gens.push(g.clone());
            }
        }
        let chain = Chain::build(ring, n, (0..n).collect(), ring.precision(), &gens, cap)?;
        Ok(Self { ring, n, cap, chain })
    }

    pub fn trivial(ring: ResidueRing, n: usize) -> Result<Self> {
        Self::closure(ring, n, &[], DEFAULT_CAP)
    }

    /// The subgroup generated by a product of congruence balls.
    pub fn ball(ball: &Ball, cap: u64) -> Result<Self> {
        let mut gens = Vec::new();
        for (j, &k) in ball.levels().iter().enumerate() {
            gens.extend(ball_slot_generators(ball.ring(), j, k, ball.n())?);
        }
        Self::closure(ball.ring(), ball.n(), &gens, cap)
    }

    /// SL₂(ℤ/ℓᵐ)ⁿ.
    pub fn full(ring: ResidueRing, n: usize, cap: u64) -> Result<Self> {
        Self::ball(&Ball::uniform(ring, 0, n)?, cap)
    }

    pub fn ring(&self) -> ResidueRing {
        self.ring
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn cap(&self) -> u64 {
        self.cap
    }

    pub fn generators(&self) -> &[GroupElement] {
        self.chain.generators()
    }

    /// |G| = image · ℓᵉ as (|G mod ℓ|, e).
    pub fn order_factored(&self) -> (u64, u32) {
        self.chain.order_parts()
    }

    /// |G|. Panics if it does not fit in a u128; see `order_factored`.
    pub fn order(&self) -> u128 {
        let (top, rows) = self.order_factored();
        (self.ring.prime() as u128)
            .checked_pow(rows)
            .and_then(|p| p.checked_mul(top as u128))
            .expect("group order exceeds u128")
    }

    /// Size of the image mod ℓ.
    pub fn image_order(&self) -> u64 {
        self.chain.order_parts().0
    }

    /// Dimensions over 𝔽_ℓ of the successive congruence quotients
    /// (G ∩ 𝓑(k)) / (G ∩ 𝓑(k+1)), k = 1 … m−1.
    pub fn layer_dims(&self) -> Vec<usize> {
        self.chain.layer_dims()
    }

    pub fn is_trivial(&self) -> bool {
        self.order_factored() == (1, 0)
    }

    pub fn contains(&self, g: &GroupElement) -> bool {
        g.ring() == self.ring && g.n() == self.n && self.chain.contains(g)
    }

    pub fn is_subgroup_of(&self, other: &Self) -> bool {
        self.generators().iter().all(|g| other.contains(g))
    }

    pub fn same_as(&self, other: &Self) -> bool {
        self.order_factored() == other.order_factored() && self.is_subgroup_of(other)
    }

    /// [self : sub], erroring unless sub ⊆ self.
    pub fn index(&self, sub: &Self) -> Result<u128> {
        if !sub.is_subgroup_of(self) {
            return Err(Error::Precondition("not a subgroup".into()));
        }
        let ((top, rows), (sub_top, sub_rows)) = (self.order_factored(), sub.order_factored());
        (self.ring.prime() as u128)
            .checked_pow(rows - sub_rows)
            .and_then(|p| p.checked_mul((top / sub_top) as u128))
            .ok_or_else(|| Error::Domain("index exceeds u128".into()))
    }

    /// Every element in lexicographic order of residues.
    pub fn elements(&self) -> Result<Vec<GroupElement>> {
        let (top, rows) = self.order_factored();
        let size = (self.ring.prime() as u128).checked_pow(rows).and_then(|p| p.checked_mul(top as u128));
        if size.is_none_or(|size| size > self.cap as u128) {
            return Err(Error::CapExceeded { cap: self.cap });
        }
        let mut all = self.chain.enumerate();
        all.sort_unstable();
        Ok(all)
    }

    /// Lifts of the mod-ℓ image points, one per point.
    pub fn image_lifts(&self) -> Vec<GroupElement> {
        (0..self.chain.top_len()).map(|i| self.chain.lift(i)).collect()
    }

    fn rebuild(&self, gens: &[GroupElement]) -> Result<Self> {
        Self::closure(self.ring, self.n, gens, self.cap)
    }

    /// Smallest subgroup of self containing `seeds` and normalized by self.
    pub fn normal_closure(&self, seeds: &[GroupElement]) -> Result<Self> {
        let mut gens: Vec<GroupElement> = seeds.to_vec();
        loop {
            let h = self.rebuild(&gens)?;
            let mut fresh = Vec::new();
            for s in self.generators() {
                let s_inv = s.inv();
                for x in h.generators() {
                    let c = s.mul(x).mul(&s_inv);
                    if !h.contains(&c) && !fresh.contains(&c) {
                        fresh.push(c);
                    }
                }
            }
            if fresh.is_empty() {
                return Ok(h);
            }
            gens = h.generators().to_vec();
            gens.extend(fresh);
        }
    }

    /// G′, as the normal closure of the commutators of the generators.
    pub fn derived_subgroup(&self) -> Result<Self> {
        let gens = self.generators();
        let mut seeds = Vec::new();
        for (i, a) in gens.iter().enumerate() {
            for b in &gens[i + 1..] {
                let c = a.comm(b);
                if !c.is_identity() {
                    seeds.push(c);
                }
            }
        }
        self.normal_closure(&seeds)
    }

    /// [A, B] inside ⟨A, B⟩.
    pub fn commutator_subgroup(a: &Self, b: &Self) -> Result<Self> {
        if a.ring != b.ring || a.n != b.n {
            return Err(Error::ShapeMismatch("groups over different rings".into()));
        }
        let mut both = a.generators().to_vec();
        both.extend(b.generators().iter().cloned());
        let join = Self::closure(a.ring, a.n, &both, a.cap.max(b.cap))?;
        let seeds: Vec<_> = a
            .generators()
            .iter()
            .flat_map(|x| b.generators().iter().map(move |y| x.comm(y)))
            .collect();
        join.normal_closure(&seeds)
    }

    /// Image mod ℓᵏ, at precision k.
    pub fn reduction_image(&self, k: u32) -> Result<Self> {
        if k == 0 || k > self.ring.precision() {
            return domain("reduction level must lie in 1..=m");
        }
        let ring = self.ring.with_precision(k)?;
        let gens = self.generators().iter().map(|g| g.reduce(k)).collect::<Result<Vec<_>>>()?;
        Self::closure(ring, self.n, &gens, self.cap)
    }

    /// {g ∈ G : g ≡ Id mod ℓᵏ}, at precision m.
    pub fn reduction_kernel(&self, k: u32) -> Result<Self> {
        if k > self.ring.precision() {
            return domain("reduction level above working precision");
        }
        if k == 0 {
            return Ok(self.clone());
        }
        self.rebuild(&self.chain.layer_elements_from(k))
    }

    /// Image in the factors `slots`, at precision m.
    pub fn project(&self, slots: &[usize]) -> Result<Self> {
        self.check_slots(slots)?;
        let gens: Vec<_> = self.generators().iter().map(|g| g.project(slots)).collect();
        Self::closure(self.ring, slots.len(), &gens, self.cap)
    }

    fn check_slots(&self, slots: &[usize]) -> Result<()> {
        let distinct: HashSet<_> = slots.iter().collect();
        if slots.is_empty() || distinct.len() != slots.len() || slots.iter().any(|&s| s >= self.n) {
            return Err(Error::ShapeMismatch(format!("bad factor selection {slots:?}")));
        }
        Ok(())
    }

    fn keyed(&self, slots: &[usize], k: u32) -> Result<Chain> {
        self.check_slots(slots)?;
        if k == 0 || k > self.ring.precision() {
            return domain("projection precision must lie in 1..=m");
        }
        Chain::build(self.ring, self.n, slots.to_vec(), k, self.generators(), self.cap)
    }

    /// {g ∈ G : gᵢ ≡ Id mod ℓᵏ for every i in `slots`}.
    pub fn kernel_of_projection(&self, slots: &[usize], k: u32) -> Result<Self> {
        let chain = self.keyed(slots, k)?;
        self.projection_kernel(slots, k, &chain)
    }

    fn projection_kernel(&self, slots: &[usize], k: u32, chain: &Chain) -> Result<Self> {
        let mut covered = vec![false; self.n];
        for &s in slots {
            covered[s] = true;
        }
        if covered.iter().all(|&c| c) {
            return self.reduction_kernel(k);
        }
        self.normal_closure(chain.residues())
    }

    /// Some g ∈ G whose parts in `slots` agree with `target` mod ℓᵏ. The
    /// target has one part per slot and precision at least k.
    pub fn lift_through_projection(
        &self,
        slots: &[usize],
        k: u32,
        target: &GroupElement,
    ) -> Result<Option<GroupElement>> {
        let chain = self.keyed(slots, k)?;
        let full = self.spread(slots, k, target)?;
        Ok(chain.preimage_of(&full))
    }

    /// Preimage of the subgroup generated by `targets` under the projection
    /// onto `slots` mod ℓᵏ. Targets outside the image are ignored.
    pub fn preimage_under_projection(
        &self,
        slots: &[usize],
        k: u32,
        targets: &[GroupElement],
    ) -> Result<Self> {
        let chain = self.keyed(slots, k)?;
        let kernel = self.projection_kernel(slots, k, &chain)?;
        let mut gens = kernel.generators().to_vec();
        for t in targets {
            if let Some(lift) = chain.preimage_of(&self.spread(slots, k, t)?) {
                gens.push(lift);
            }
        }
        self.rebuild(&gens)
    }

    /// {g ∈ G : g mod ℓ ∈ ⟨targets⟩}, targets given mod ℓ or finer.
    pub fn preimage_of_image(&self, targets: &[GroupElement]) -> Result<Self> {
        let all: Vec<usize> = (0..self.n).collect();
        self.preimage_under_projection(&all, 1, targets)
    }

    /// The image mod ℓ as elements at precision 1, in lexicographic order.
    pub fn image_elements(&self) -> Result<Vec<GroupElement>> {
        let mut out = self.image_lifts().iter().map(|g| g.reduce(1)).collect::<Result<Vec<_>>>()?;
        out.sort_unstable();
        Ok(out)
    }

    /// A residue tuple carrying `part` in `slots` and Id elsewhere, only
    /// meaningful mod ℓᵏ.
    fn spread(&self, slots: &[usize], k: u32, part: &GroupElement) -> Result<GroupElement> {
        if part.n() != slots.len() || part.ring().prime() != self.ring.prime() || part.ring().precision() < k {
            return Err(Error::ShapeMismatch("target does not match the projection".into()));
        }
        let q = self.ring.prime_power(k);
        let mut data = GroupElement::identity(self.ring, self.n).residues().to_vec();
        for (i, &s) in slots.iter().enumerate() {
            for e in 0..4 {
                data[4 * s + e] = part.residues()[4 * i + e] % q;
            }
        }
        Ok(GroupElement::from_raw(self.ring, data.into()))
    }

    /// Whether G ⊇ 𝓑_ℓ(k₁, …, kₙ). Level 0 is only decided for ℓ ≥ 5.
    pub fn contains_ball(&self, ball: &Ball) -> Result<bool> {
        Ok(self.missing_ball_generator(ball)?.is_none())
    }

    /// A generator of the ball that G lacks, if any.
    pub fn missing_ball_generator(&self, ball: &Ball) -> Result<Option<GroupElement>> {
        if ball.ring() != self.ring || ball.n() != self.n {
            return Err(Error::ShapeMismatch("ball and group differ in shape".into()));
        }
        let l = self.ring.prime();
        for (j, &k) in ball.levels().iter().enumerate() {
            if k == 0 && l < 5 {
                return domain("level 0 is only decided for l ≥ 5");
            }
            if k == 1 && l == 2 {
                return domain("level 1 is outside the generator criterion at l = 2");
            }
            for g in ball_slot_generators(self.ring, j, k, self.n)? {
                if !self.contains(&g) {
                    return Ok(Some(g));
                }
            }
        }
        Ok(None)
    }

    /// Smallest level s such that G ⊇ 𝓑(s, …, s); m when only the trivial
    /// ball fits.
    pub fn best_uniform_ball(&self) -> Result<u32> {
        let m = self.ring.precision();
        let start = match self.ring.prime() {
            2 => 2,
            3 => 1,
            _ => 0,
        };
        for s in start.min(m)..m {
            if self.contains_ball(&Ball::uniform(self.ring, s, self.n)?)? {
                return Ok(s);
            }
        }
        Ok(m)
    }

    /// The unique largest normal subgroup whose image mod ℓ is an ℓ-group.
    pub fn max_normal_proell(&self) -> Result<Self> {
        let mod_l = self.reduction_image(1)?;
        let mut allowed = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let factor = mod_l.project(&[i])?;
            let normal: HashSet<[u64; 4]> = match dickson::classify(&factor)? {
                dickson::SubgroupType::Borel => {
                    let sylow = dickson::ell_sylow(&factor)?;
                    sylow.elements()?.iter().map(|g| g.part(0).residues()).collect()
                }
                _ => [Mat2::identity(mod_l.ring).residues()].into_iter().collect(),
            };
            allowed.push(normal);
        }
        let mut gens = self.chain.layer_elements_from(1);
        let mut image: HashSet<Vec<u64>> = HashSet::new();
        image.insert(GroupElement::identity(mod_l.ring, self.n).residues().to_vec());
        let mut image_gens: Vec<GroupElement> = Vec::new();
        for lift in self.image_lifts() {
            let reduced = lift.reduce(1)?;
            let inside = (0..self.n).all(|i| allowed[i].contains(&reduced.part(i).residues()));
            if !inside || image.contains(reduced.residues()) {
                continue;
            }
            image_gens.push(reduced);
            image = bounded_closure(&image_gens, self.n, mod_l.ring, usize::MAX).expect("unbounded");
            gens.push(lift);
        }
        self.rebuild(&gens)
    }

    /// Checks that G contains ∏ᵢ 𝓑(Σ_{j≠i} s_ij + (n−2)v) given that every
    /// pair projection contains 𝓑(s_ij, s_ij), and produces the iterated
    /// commutator witnesses behind it.
    pub fn goursat_combine(&self, pair_levels: &[Vec<u32>]) -> Result<GoursatReport> {
        let (n, m) = (self.n, self.ring.precision());
        let l = self.ring.prime();
        if n < 2 {
            return domain("recombination needs at least two factors");
        }
        if pair_levels.len() != n || pair_levels.iter().any(|row| row.len() != n) {
            return Err(Error::ShapeMismatch("level matrix must be n × n".into()));
        }
        let level = |i: usize, j: usize| pair_levels[i.min(j)][i.max(j)];
        for i in 0..n {
            for j in i + 1..n {
                let s = level(i, j);
                if (l == 2 && s < 2) || (l == 3 && s < 1) {
                    return Err(Error::HypothesisUnmet(format!("pair level {s} too small at l = {l}")));
                }
                let s = s.min(m);
                let pair = self.project(&[i, j])?;
                if !pair.contains_ball(&Ball::new(self.ring, vec![s, s])?)? {
                    return Err(Error::HypothesisUnmet(format!(
                        "projection to factors ({i}, {j}) misses the level-{s} ball"
                    )));
                }
            }
        }
        let v = self.ring.v();
        let levels: Vec<u32> = (0..n)
            .map(|i| (0..n).filter(|&j| j != i).map(|j| level(i, j)).sum::<u32>() + (n as u32 - 2) * v)
            .collect();
        let beyond_precision: Vec<usize> = (0..n).filter(|&i| levels[i] >= m).collect();
        let capped: Vec<u32> = levels.iter().map(|&k| k.min(m)).collect();
        if !self.contains_ball(&Ball::new(self.ring, capped)?)? {
            return Err(Error::LemmaViolation(format!("product ball at levels {levels:?} not contained")));
        }
        let mut witnesses = Vec::new();
        if n == 2 {
            return Ok(GoursatReport { levels, beyond_precision, witnesses });
        }
        for i in 0..n {
            let others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            let mut xs = Vec::with_capacity(others.len());
            for (pos, &j) in others.iter().enumerate() {
                let kind = if pos % 2 == 0 { GenKind::L } else { GenKind::R };
                let a = self.ring.prime_power_residue(level(i, j)) as i128;
                let target = GroupElement::new(&[Mat2::identity(self.ring), gen_at(self.ring, kind, a)?])?;
                let x = self.lift_through_projection(&[j, i], m, &target)?.ok_or_else(|| {
                    Error::HypothesisUnmet(format!("no element trivial in factor {j} over factor {i}"))
                })?;
                xs.push(x);
            }
            let w = comm_iterated(&xs)?;
            let clean = (0..n).filter(|&j| j != i).all(|j| w.part(j).is_identity());
            if !clean || !self.contains(&w) {
                return Err(Error::LemmaViolation(format!("commutator witness for factor {i} malformed")));
            }
            witnesses.push((i, w));
        }
        Ok(GoursatReport { levels, beyond_precision, witnesses })
    }

    /// For n = 2: an element trivial mod ℓᵗ in one factor and nontrivial
    /// mod ℓᵗ in the other, if any. None means G mod ℓᵗ is the graph of an
    /// isomorphism between its two projections.
    pub fn graph_defect(&self, t: u32) -> Result<Option<GroupElement>> {
        if self.n != 2 {
            return Err(Error::ShapeMismatch("graph_defect needs exactly two factors".into()));
        }
        if t == 0 {
            return Ok(None);
        }
        for (quiet, loud) in [(0usize, 1usize), (1, 0)] {
            let chain = self.keyed(&[quiet], t)?;
            if let Some(r) = chain.residues().iter().find(|r| !r.part(loud).is_identity_mod(t)) {
                return Ok(Some(r.clone()));
            }
        }
        Ok(None)
    }
}

/// Generators of 𝓑(k) placed in factor j: L, R, D at ℓᵏ, or L(1), R(1)
/// for the whole of SL₂ when k = 0.
fn ball_slot_generators(ring: ResidueRing, j: usize, k: u32, n: usize) -> Result<Vec<GroupElement>> {
    let kinds: &[GenKind] = if k == 0 { &[GenKind::L, GenKind::R] } else { &[GenKind::L, GenKind::R, GenKind::D] };
    let a = ring.prime_power_residue(k) as i128;
    kinds.iter().map(|&kind| GroupElement::embed(&gen_at(ring, kind, a)?, j, n)).collect()
}

/// Plain BFS closure as raw residue vectors, abandoned once it passes
/// `limit` elements. Small groups only.
pub(crate) fn bounded_closure(
    gens: &[GroupElement],
    n: usize,
    ring: ResidueRing,
    limit: usize,
) -> Option<HashSet<Vec<u64>>> {
    let id = GroupElement::identity(ring, n);
    let mut seen: HashSet<Vec<u64>> = HashSet::new();
    seen.insert(id.residues().to_vec());
    let mut queue = VecDeque::from([id]);
    while let Some(x) = queue.pop_front() {
        for g in gens {
            let y = x.mul(g);
            if seen.insert(y.residues().to_vec()) {
                if seen.len() > limit {
                    return None;
                }
                queue.push_back(y);
            }
        }
    }
    Some(seen)
}

/// A short generating list for a group given by all its elements, picked
/// greedily in the given order.
pub(crate) fn greedy_generators(elements: &[GroupElement], n: usize, ring: ResidueRing) -> Vec<GroupElement> {
    let mut gens: Vec<GroupElement> = Vec::new();
    let mut span = bounded_closure(&gens, n, ring, usize::MAX).expect("unbounded");
    for x in elements {
        if span.len() >= elements.len() {
            break;
        }
        if !span.contains(x.residues()) {
            gens.push(x.clone());
            span = bounded_closure(&gens, n, ring, usize::MAX).expect("unbounded");
        }
    }
    gens
}

#[cfg(test)]
mod tests;
