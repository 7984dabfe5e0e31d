//! Dickson types of subgroups of SL₂(𝔽_ℓ), decided through the Möbius
//! action on P¹(𝔽_{ℓ²}).

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::fmt;

use crate::error::{domain, Error, Result};
use crate::group::FiniteGroup;
use crate::matrix::{GroupElement, Mat2};
use crate::scalar::ResidueRing;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ExceptionalKind {
    A4,
    S4,
    A5,
}

/// Listed in the order used to pick a single label: the first type whose
/// containment holds wins, except that the whole group is always `Full`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SubgroupType {
    SplitCartan,
    NonsplitCartan,
    Borel,
    NormalizerSplitCartan,
    NormalizerNonsplitCartan,
    Exceptional(ExceptionalKind),
    Full,
}

impl fmt::Display for SubgroupType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::SplitCartan => "split-cartan",
            Self::NonsplitCartan => "nonsplit-cartan",
            Self::Borel => "borel",
            Self::NormalizerSplitCartan => "normalizer-split-cartan",
            Self::NormalizerNonsplitCartan => "normalizer-nonsplit-cartan",
            Self::Exceptional(ExceptionalKind::A4) => "exceptional-a4",
            Self::Exceptional(ExceptionalKind::S4) => "exceptional-s4",
            Self::Exceptional(ExceptionalKind::A5) => "exceptional-a5",
            Self::Full => "full",
        };
        f.write_str(s)
    }
}

/// 𝔽_{ℓ²} as 𝔽_ℓ[x]/(x² − a·x − b), elements u + v·x.
#[derive(Clone, Copy, Debug)]
struct QuadraticField {
    p: u64,
    a: u64,
    b: u64,
}

type Fq = (u64, u64);

impl QuadraticField {
    fn new(p: u64) -> Self {
        for a in 0..p {
            for b in 0..p {
                if (0..p).all(|t| (t * t + p * p - a * t - b) % p != 0) {
                    return Self { p, a, b };
                }
            }
        }
        unreachable!("an irreducible quadratic exists over every prime field")
    }

    fn add(&self, x: Fq, y: Fq) -> Fq {
        ((x.0 + y.0) % self.p, (x.1 + y.1) % self.p)
    }

    fn mul(&self, x: Fq, y: Fq) -> Fq {
        let p = self.p;
        let vv = x.1 * y.1 % p;
        ((x.0 * y.0 + vv * self.b) % p, (x.0 * y.1 + x.1 * y.0 + vv * self.a) % p)
    }

    fn scalar(&self, s: u64) -> Fq {
        (s % self.p, 0)
    }

    fn inv(&self, x: Fq) -> Option<Fq> {
        if x == (0, 0) {
            return None;
        }
        let mut e = self.p * self.p - 2;
        let (mut base, mut acc) = (x, (1, 0));
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        Some(acc)
    }

    fn frobenius(&self, x: Fq) -> Fq {
        let mut e = self.p;
        let (mut base, mut acc) = (x, (1, 0));
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }
}

/// A point of P¹(𝔽_{ℓ²}); `None` is ∞.
type Point = Option<Fq>;

fn mobius(field: &QuadraticField, m: [u64; 4], z: Point) -> Point {
    let [a, b, c, d] = m.map(|x| field.scalar(x));
    let (num, den) = match z {
        None => (a, c),
        Some(z) => (field.add(field.mul(a, z), b), field.add(field.mul(c, z), d)),
    };
    field.inv(den).map(|i| field.mul(num, i))
}

fn check_shape(h: &FiniteGroup) -> Result<()> {
    if h.ring().precision() != 1 || h.n() != 1 {
        return domain("classification needs a subgroup of SL2(F_l)");
    }
    if h.ring().prime() > 50 {
        return domain("classification is limited to l ≤ 50");
    }
    Ok(())
}

struct Action {
    field: QuadraticField,
    gens: Vec<[u64; 4]>,
}

impl Action {
    fn new(h: &FiniteGroup) -> Self {
        let field = QuadraticField::new(h.ring().prime());
        let gens = h.generators().iter().map(|g| g.part(0).residues()).collect();
        Self { field, gens }
    }

    fn rational_points(&self) -> Vec<Point> {
        std::iter::once(None).chain((0..self.field.p).map(|t| Some((t, 0)))).collect()
    }

    fn irrational_points(&self) -> Vec<Fq> {
        let p = self.field.p;
        (0..p).flat_map(|u| (1..p).map(move |v| (u, v))).collect()
    }

    fn fixes(&self, z: Point) -> bool {
        self.gens.iter().all(|&g| mobius(&self.field, g, z) == z)
    }

    fn stabilizes_pair(&self, z: Point, w: Point) -> bool {
        self.gens.iter().all(|&g| {
            let (gz, gw) = (mobius(&self.field, g, z), mobius(&self.field, g, w));
            (gz == z && gw == w) || (gz == w && gw == z)
        })
    }

    fn fixed_rational(&self) -> usize {
        self.rational_points().into_iter().filter(|&z| self.fixes(z)).count()
    }

    fn fixes_irrational(&self) -> bool {
        self.irrational_points().into_iter().any(|z| self.fixes(Some(z)))
    }

    fn normalizes_split(&self) -> bool {
        let pts = self.rational_points();
        (0..pts.len()).any(|i| (i + 1..pts.len()).any(|j| self.stabilizes_pair(pts[i], pts[j])))
    }

    fn normalizes_nonsplit(&self) -> bool {
        self.irrational_points()
            .into_iter()
            .any(|z| self.stabilizes_pair(Some(z), Some(self.field.frobenius(z))))
    }
}

fn sl2_order(p: u64) -> u128 {
    p as u128 * (p as u128 * p as u128 - 1)
}

pub(crate) fn element_order(g: &GroupElement) -> u64 {
    let mut x = g.clone();
    let mut k = 1;
    while !x.is_identity() {
        x = x.mul(g);
        k += 1;
    }
    k
}

/// Smallest k with gᵏ = ±Id.
fn projective_order(g: &GroupElement) -> u64 {
    let minus = minus_identity(g.ring());
    let mut x = g.clone();
    let mut k = 1;
    while !x.is_identity() && x != minus {
        x = x.mul(g);
        k += 1;
    }
    k
}

fn minus_identity(ring: ResidueRing) -> GroupElement {
    let m1 = ring.neg(1 % ring.modulus());
    GroupElement::new(&[Mat2::from_residues(ring, [m1, 0, 0, m1])]).expect("det 1")
}

fn exceptional_kind(h: &FiniteGroup) -> Result<Option<ExceptionalKind>> {
    let elements = h.elements()?;
    let centre = if h.contains(&minus_identity(h.ring())) && h.ring().prime() != 2 { 2 } else { 1 };
    let projective = elements.len() as u64 / centre;
    if ![12, 24, 60].contains(&projective) {
        return Ok(None);
    }
    let mut stats: BTreeMap<u64, u64> = BTreeMap::new();
    for g in &elements {
        *stats.entry(projective_order(g)).or_default() += 1;
    }
    let stats: Vec<(u64, u64)> = stats.into_iter().map(|(k, c)| (k, c / centre)).collect();
    let kind = match stats.as_slice() {
        [(1, 1), (2, 3), (3, 8)] => Some(ExceptionalKind::A4),
        [(1, 1), (2, 9), (3, 8), (4, 6)] => Some(ExceptionalKind::S4),
        [(1, 1), (2, 15), (3, 20), (5, 24)] => Some(ExceptionalKind::A5),
        _ => None,
    };
    Ok(kind)
}

/// Every Dickson type whose containment holds for H, in priority order.
/// `Full` is listed only when H is the whole group.
pub fn type_set(h: &FiniteGroup) -> Result<Vec<SubgroupType>> {
    check_shape(h)?;
    let action = Action::new(h);
    let fixed = action.fixed_rational();
    let mut out = Vec::new();
    if fixed >= 2 {
        out.push(SubgroupType::SplitCartan);
    }
    if action.fixes_irrational() {
        out.push(SubgroupType::NonsplitCartan);
    }
    if fixed >= 1 {
        out.push(SubgroupType::Borel);
    }
    if action.normalizes_split() {
        out.push(SubgroupType::NormalizerSplitCartan);
    }
    if action.normalizes_nonsplit() {
        out.push(SubgroupType::NormalizerNonsplitCartan);
    }
    if let Some(kind) = exceptional_kind(h)? {
        out.push(SubgroupType::Exceptional(kind));
    }
    if h.order() == sl2_order(h.ring().prime()) {
        out.push(SubgroupType::Full);
    }
    Ok(out)
}

pub fn classify(h: &FiniteGroup) -> Result<SubgroupType> {
    let types = type_set(h)?;
    if types.contains(&SubgroupType::Full) {
        return Ok(SubgroupType::Full);
    }
    types.first().copied().ok_or(Error::Unclassifiable)
}

/// For a group stabilizing a pair of points of P¹(𝔽_{ℓ²}): the subgroup
/// fixing both points, of index at most 2. None if no pair is stabilized.
pub fn cartan_core(h: &FiniteGroup) -> Result<Option<FiniteGroup>> {
    check_shape(h)?;
    let action = Action::new(h);
    let field = action.field;
    let rational = action.rational_points();
    let mut pairs: Vec<(Point, Point)> = Vec::new();
    for i in 0..rational.len() {
        for j in i + 1..rational.len() {
            pairs.push((rational[i], rational[j]));
        }
    }
    pairs.extend(action.irrational_points().into_iter().map(|z| (Some(z), Some(field.frobenius(z)))));
    let Some((z, w)) = pairs.into_iter().find(|&(z, w)| action.stabilizes_pair(z, w)) else {
        return Ok(None);
    };
    let fixing: Vec<GroupElement> = h
        .elements()?
        .into_iter()
        .filter(|g| {
            let m = g.part(0).residues();
            mobius(&field, m, z) == z && mobius(&field, m, w) == w
        })
        .collect();
    Ok(Some(FiniteGroup::closure(h.ring(), 1, &fixing, h.cap())?))
}

pub fn is_borel_type(h: &FiniteGroup) -> Result<bool> {
    Ok(classify(h)? == SubgroupType::Borel)
}

/// The elements of ℓ-power order, when they form a subgroup.
pub fn ell_sylow(h: &FiniteGroup) -> Result<FiniteGroup> {
    check_shape(h)?;
    let l = h.ring().prime();
    let members: Vec<GroupElement> = h
        .elements()?
        .into_iter()
        .filter(|g| {
            let mut k = element_order(g);
            while k % l == 0 {
                k /= l;
            }
            k == 1
        })
        .collect();
    let sylow = FiniteGroup::closure(h.ring(), 1, &members, h.cap())?;
    if sylow.order() != members.len() as u128 {
        return Err(Error::NotNormalSylow);
    }
    Ok(sylow)
}

/// Every subgroup of SL₂(𝔽_ℓ) generated by at most two elements, each
/// listed once, in order of increasing size.
pub fn two_generated_subgroups(ring: ResidueRing) -> Result<Vec<FiniteGroup>> {
    if ring.precision() != 1 || ring.prime() > 13 {
        return domain("the subgroup sweep is limited to SL2(F_l) with l ≤ 13");
    }
    let whole = FiniteGroup::full(ring, 1, crate::group::DEFAULT_CAP)?;
    let elements = whole.elements()?;
    let index: HashMap<GroupElement, usize> = elements.iter().cloned().enumerate().map(|(i, g)| (g, i)).collect();
    let size = elements.len();
    let table: Vec<u32> = elements
        .iter()
        .flat_map(|a| elements.iter().map(|b| index[&a.mul(b)] as u32).collect::<Vec<_>>())
        .collect();
    let identity = index[&GroupElement::identity(ring, 1)];
    let close = |gens: &[usize]| -> Vec<u64> {
        let mut seen = vec![0u64; size.div_ceil(64)];
        seen[identity / 64] |= 1 << (identity % 64);
        let mut queue = VecDeque::from([identity]);
        while let Some(x) = queue.pop_front() {
            for &g in gens {
                let y = table[x * size + g] as usize;
                if seen[y / 64] & (1 << (y % 64)) == 0 {
                    seen[y / 64] |= 1 << (y % 64);
                    queue.push_back(y);
                }
            }
        }
        seen
    };
    let mut found: HashSet<Vec<u64>> = HashSet::new();
    let mut out: Vec<(usize, Vec<usize>)> = Vec::new();
    for a in 0..size {
        for b in a..size {
            let bits = close(&[a, b]);
            if found.insert(bits.clone()) {
                let count = bits.iter().map(|w| w.count_ones() as usize).sum();
                out.push((count, vec![a, b]));
            }
        }
    }
    out.sort();
    out.into_iter()
        .map(|(_, gens)| {
            let gens: Vec<_> = gens.iter().map(|&i| elements[i].clone()).collect();
            FiniteGroup::closure(ring, 1, &gens, crate::group::DEFAULT_CAP)
        })
        .collect()
}
