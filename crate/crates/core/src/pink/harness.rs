//! Assembly of the full containment statement for n factors, and the
//! two-factor examples built around graphs of automorphisms.

use crate::error::{domain, Error, Result};
use crate::group::FiniteGroup;
use crate::lattice::ModLattice;
use crate::matrix::{gen_at, Ball, GenKind, GroupElement, Mat2};
use crate::scalar::ResidueRing;

use super::{first_reduction, lie_algebra, sylow_preimage, PinkReport, ReductionCase, Verdict};

/// Runs the reduction chain on G and checks, where the precision allows,
/// that the final subgroup H contains 𝓑(p, …, p) with
/// p = 80(max(n,2)−1)k (607 in place of 80 at ℓ = 2).
pub fn main_theorem_harness(g: &FiniteGroup, k: u32) -> Result<PinkReport> {
    let ring = g.ring();
    let (l, m, n) = (ring.prime(), ring.precision(), g.n());
    if k == 0 {
        return domain("k must be positive");
    }
    let descriptor = format!("main-theorem l={l} m={m} n={n} k={k}");
    let mut notes = Vec::new();
    let mut indices = Vec::new();
    let nn = n as u32;
    let (h, bound) = match l {
        2 => {
            if m < 2 {
                return domain("l = 2 needs precision at least 2");
            }
            notes.push("H is the kernel of reduction mod 4".into());
            (g.reduction_kernel(2)?, 96u128.pow(nn))
        }
        3 => {
            notes.push("H is the kernel of reduction mod 3".into());
            (g.reduction_kernel(1)?, 24u128.pow(nn))
        }
        _ if l == 5 || n == 1 => {
            notes.push("H is the preimage of an l-Sylow of G mod l".into());
            (sylow_preimage(g)?.preimage, ((l * l - 1) as u128).pow(nn))
        }
        _ => {
            let mut current = g.clone();
            for i in 0..n {
                for j in i + 1..n {
                    let pair = current.project(&[i, j])?;
                    let s_i = pair.project(&[0])?.best_uniform_ball()?.max(1);
                    let s_j = pair.project(&[1])?.best_uniform_ball()?.max(1);
                    let step = first_reduction(&pair, s_i, s_j)?;
                    notes.push(format!("pair ({i},{j}): {:?}, {}", step.case, step.verdict));
                    if step.verdict == Verdict::LemmaViolation {
                        let mut report = PinkReport::new(descriptor, g, ModLattice::zero(ring, 3 * n));
                        report.verdict = Verdict::LemmaViolation;
                        report.notes = notes;
                        report.notes.extend(step.properties.iter().filter(|p| !p.1).map(|p| p.0.clone()));
                        return Ok(report);
                    }
                    if step.case != ReductionCase::LargeDerived {
                        let t = step.subgroup.expect("T is built in the last two cases");
                        current = current.preimage_under_projection(&[i, j], m, t.generators())?;
                    }
                }
            }
            (current, 24u128.pow(nn) * 48u128.pow(nn * (nn - 1)))
        }
    };
    let h_index = g.index(&h)?;
    indices.push(("[G:H]".to_string(), h_index));
    let mut report = PinkReport::new(descriptor, g, lie_algebra(&h)?);
    report.subgroup_indices = indices;
    report.notes = notes;
    if bound % h_index != 0 {
        report.verdict = Verdict::LemmaViolation;
        report.notes.push(format!("[G:H] = {h_index} does not divide {bound}"));
        return Ok(report);
    }
    let lie_ring = report.lie_algebra.ring();
    if !report.lie_algebra.contains_lattice(&ModLattice::scaled_full(lie_ring, 3 * n, k.min(lie_ring.precision()))) {
        report.notes.push(format!("the Lie algebra of H does not contain l^{k} sl2^{n}"));
        return Ok(report);
    }
    let factor = if l == 2 { 607 } else { 80 };
    let p = factor * (n.max(2) as u32 - 1) * k;
    report.claimed = vec![p; n];
    if n >= 2 {
        let mut pair_levels = vec![vec![0; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                let s = h.project(&[i, j])?.best_uniform_ball()?;
                pair_levels[i][j] = s;
                pair_levels[j][i] = s;
            }
        }
        match h.goursat_combine(&pair_levels) {
            Ok(combined) => report.notes.push(format!("pairwise levels recombine to {:?}", combined.levels)),
            Err(Error::LemmaViolation(msg)) => {
                report.verdict = Verdict::LemmaViolation;
                report.notes.push(msg);
                return Ok(report);
            }
            Err(e) => return Err(e),
        }
    }
    if p < m {
        let ball = Ball::uniform(ring, p, n)?;
        report.conclude(&h, &ball, "H contains the level-p ball")?;
    } else {
        report.verdict = Verdict::InconclusiveAtPrecision;
        let best = h.best_uniform_ball()?;
        if best < m {
            report.conclusion_checked = vec![best; n];
        }
        report.notes.push(format!("claimed level {p} reaches precision {m}; H contains the level-{best} ball"));
    }
    Ok(report)
}

/// At ℓ = 2, the group generated by 𝓑(p, p) and the diagonal copy of
/// 𝓑(n₁), at precision m.
pub fn example_graph_group(n1: u32, p: u32, m: u32, cap: u64) -> Result<FiniteGroup> {
    if !(3 <= n1 && n1 < p && p < m) {
        return domain("need 3 <= n1 < p < m");
    }
    let ring = ResidueRing::new(2, m)?;
    let mut gens = Ball::uniform(ring, p, 2)?.generators()?;
    let a = ring.prime_power_residue(n1) as i128;
    for kind in [GenKind::L, GenKind::R, GenKind::D] {
        gens.push(GroupElement::diagonal(&gen_at(ring, kind, a)?, 2)?);
    }
    FiniteGroup::closure(ring, 2, &gens, cap)
}

/// With N = diag(2^{n₁+1}, 1), which is not invertible over ℤ₂, checks
/// N·R(2^{n₁}) = R(2^{2n₁+1})·N and L(2^{2n₁+1})·N = N·L(2^{3n₁+2}) mod 2ᵐ,
/// the cleared-denominator forms of conjugation by N.
pub fn conjugation_identities_hold(n1: u32, m: u32) -> Result<[bool; 2]> {
    let ring = ResidueRing::new(2, m)?;
    let pow = |e: u32| ring.prime_power_residue(e.min(m)) as i128;
    let scale = Mat2::from_i128(ring, [pow(n1 + 1), 0, 0, 1]);
    let upper = scale.mul(&gen_at(ring, GenKind::R, pow(n1))?)
        == gen_at(ring, GenKind::R, pow(2 * n1 + 1))?.mul(&scale);
    let lower = gen_at(ring, GenKind::L, pow(2 * n1 + 1))?.mul(&scale)
        == scale.mul(&gen_at(ring, GenKind::L, pow(3 * n1 + 2))?);
    Ok([upper, lower])
}

/// For n = 2 with G mod ℓ the graph of an automorphism of SL₂(𝔽_ℓ) and an
/// element trivial mod ℓ^{level} in the first factor but not in the
/// second: checks G′ ⊇ 𝓑(4(level−1), 4(level−1)) when reachable, and
/// the intermediate containments of {Id} × 𝓑(2(level−1)) in N(G) and G′.
pub fn graph_perturbation_check(g: &FiniteGroup, level: u32) -> Result<PinkReport> {
    let ring = g.ring();
    let (l, m) = (ring.prime(), ring.precision());
    let descriptor = format!("graph-perturbation l={l} m={m} level={level}");
    let mut report = PinkReport::new(descriptor, g, ModLattice::zero(ring, 6));
    if g.n() != 2 || l <= 3 || level < 2 {
        report.notes.push("needs two factors, l > 3 and level >= 2".into());
        return Ok(report);
    }
    let mod_l = g.reduction_image(1)?;
    let first = mod_l.project(&[0])?;
    let graph = mod_l.graph_defect(1)?.is_none();
    if !graph || first.order() != FiniteGroup::full(first.ring(), 1, g.cap())?.order() {
        report.notes.push("G mod l is not the graph of an automorphism of SL2(F_l)".into());
        return Ok(report);
    }
    let Some(witness) = g.graph_defect(level)? else {
        report.notes.push(format!("no element separates the factors mod l^{level}"));
        return Ok(report);
    };
    if !witness.part(0).is_identity_mod(level) {
        report.notes.push("the separating element is trivial in the second factor only".into());
        return Ok(report);
    }
    report.lie_algebra = lie_algebra(g)?;
    report.k_found = {
        let s = report.lie_algebra.scaled_full_level();
        (s < m).then_some(s)
    };
    let inner = 2 * (level - 1);
    let outer = 4 * (level - 1);
    report.claimed = vec![outer, outer];
    let intermediate = Ball::new(ring, vec![m, inner.min(m)])?;
    let normal = g.max_normal_proell()?;
    let derived = g.derived_subgroup()?;
    report.subgroup_indices = vec![("[G:N(G)]".into(), g.index(&normal)?), ("[G:G']".into(), g.index(&derived)?)];
    for (name, group) in [("N(G)", &normal), ("G'", &derived)] {
        if let Some(missing) = group.missing_ball_generator(&intermediate)? {
            report.verdict = Verdict::LemmaViolation;
            report.certificate = Some(super::Certificate {
                generators: group.generators().to_vec(),
                missing,
                claim: format!("{name} contains Id x B({inner})"),
            });
            return Ok(report);
        }
        report.notes.push(format!("{name} contains Id x B({inner})"));
    }
    if outer < m {
        report.conclude(&derived, &Ball::uniform(ring, outer, 2)?, "G' contains the level-4(level-1) ball")?;
    } else {
        report.verdict = Verdict::InconclusiveAtPrecision;
        report.conclusion_checked = vec![m, inner.min(m)];
        report.notes.push(format!("claimed level {outer} reaches precision {m}"));
    }
    Ok(report)
}
