use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::group::DEFAULT_CAP;
use crate::matrix::{gen_at, theta, GenKind, Mat2};

fn ring(p: u64, m: u32) -> ResidueRing {
    ResidueRing::new(p, m).unwrap()
}

fn ball(r: ResidueRing, levels: &[u32]) -> FiniteGroup {
    FiniteGroup::ball(&Ball::new(r, levels.to_vec()).unwrap(), DEFAULT_CAP).unwrap()
}

/// Span of Θ over every element.
fn lie_by_enumeration(g: &FiniteGroup) -> ModLattice {
    let images: Vec<LieVectorCoords> = g.elements().unwrap().iter().map(|x| theta(x).unwrap()).collect();
    let r = images[0].ring;
    let vectors: Vec<Vec<u64>> = images.into_iter().map(|v| v.coords).collect();
    ModLattice::span(r, 3 * g.n(), &vectors).unwrap()
}

type LieVectorCoords = crate::matrix::LieVector;

fn random_sl2(rng: &mut ChaCha8Rng, r: ResidueRing, congruent_to_id: u32) -> Mat2 {
    let q = r.prime_power_residue(congruent_to_id);
    loop {
        let [x, y, z] = [0; 3].map(|_| r.mul(q, rng.gen_range(0..r.modulus())));
        let a = r.add(1, x);
        let Some(inv) = r.inv(a) else { continue };
        let d = r.mul(r.add(1, r.mul(y, z)), inv);
        return Mat2::from_residues(r, [a, y, z, d]);
    }
}

#[test]
fn lie_algebra_examples() {
    let r = ring(5, 3);
    assert!(lie_algebra(&FiniteGroup::trivial(r, 1).unwrap()).unwrap().is_zero());
    let b1 = ball(r, &[1]);
    let lie = lie_algebra(&b1).unwrap();
    assert_eq!(lie, ModLattice::scaled_full(r, 3, 1));
    assert_eq!(lie, lie_by_enumeration(&b1));
    let full = FiniteGroup::full(ring(5, 2), 1, DEFAULT_CAP).unwrap();
    assert_eq!(lie_algebra(&full).unwrap(), ModLattice::scaled_full(ring(5, 2), 3, 0));
    assert_eq!(lie_by_enumeration(&full), ModLattice::scaled_full(ring(5, 2), 3, 0));
}

#[test]
fn lie_algebra_at_two() {
    let r = ring(2, 5);
    let b2 = ball(r, &[2]);
    let lie = lie_algebra(&b2).unwrap();
    assert_eq!(lie.ring().precision(), 4);
    assert_eq!(lie, lie_by_enumeration(&b2));
    assert_eq!(lie, ModLattice::scaled_full(lie.ring(), 3, 2));
    assert!(matches!(lie_algebra(&ball(r, &[1])), Err(Error::Domain(_))));
}

#[test]
fn lie_algebra_agrees_with_enumeration_on_random_groups() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for (p, m, level, n) in [(3, 3, 1, 1), (5, 2, 0, 1), (2, 5, 2, 1), (3, 2, 1, 2), (7, 2, 1, 1), (2, 4, 2, 2)] {
        let r = ring(p, m);
        for _ in 0..6 {
            let count = rng.gen_range(1..=2);
            let gens: Vec<GroupElement> = (0..count)
                .map(|_| {
                    let parts: Vec<Mat2> = (0..n).map(|_| random_sl2(&mut rng, r, level)).collect();
                    GroupElement::new(&parts).unwrap()
                })
                .collect();
            let g = FiniteGroup::closure(r, n, &gens, DEFAULT_CAP).unwrap();
            if g.is_trivial() {
                continue;
            }
            assert_eq!(lie_algebra(&g).unwrap(), lie_by_enumeration(&g), "l={p} m={m} gens={gens:?}");
        }
    }
}

#[test]
fn trace_forms() {
    let r = ring(5, 4);
    let traces = trace_form_module(&ModLattice::scaled_full(r, 3, 1)).unwrap();
    assert!(traces.contains(&[r.mul(2, 25)]));
    assert_eq!(traces, ModLattice::scaled_full(r, 1, 2));
    assert!(trace_form_module(&ModLattice::zero(r, 3)).unwrap().is_zero());
    let r3 = ring(3, 4);
    let nilpotent = ModLattice::span(r3, 3, &[vec![1, 0, 0]]).unwrap();
    assert!(trace_form_module(&nilpotent).unwrap().is_zero());
    let two = trace_form_module(&ModLattice::span(r, 6, &[vec![0, 5, 0, 0, 1, 0]]).unwrap()).unwrap();
    assert_eq!(two, ModLattice::span(r, 2, &[vec![50, 2]]).unwrap());
}

#[test]
fn pink_proell_examples() {
    let report = pink_proell_check(&ball(ring(5, 3), &[1]), 1).unwrap();
    assert_eq!(report.verdict, Verdict::Verified);
    assert_eq!(report.conclusion_checked, vec![2]);
    assert_eq!(report.k_found, Some(1));
    let report = pink_proell_check(&ball(ring(3, 3), &[1, 1]), 1).unwrap();
    assert_eq!(report.verdict, Verdict::Verified);
    assert_eq!(report.conclusion_checked, vec![2, 2]);
    let report = pink_proell_check(&ball(ring(5, 3), &[1]), 2).unwrap();
    assert_eq!(report.verdict, Verdict::InconclusiveAtPrecision);
    let report = pink_proell_check(&FiniteGroup::full(ring(5, 2), 1, DEFAULT_CAP).unwrap(), 1).unwrap();
    assert_eq!(report.verdict, Verdict::HypothesisNotMet);
    let report = pink_proell_check(&ball(ring(5, 4), &[2]), 1).unwrap();
    assert_eq!(report.verdict, Verdict::HypothesisNotMet);
}

fn laplace(r: ResidueRing, a: &[Vec<u64>]) -> u64 {
    if a.len() == 1 {
        return r.reduce(a[0][0]);
    }
    let mut total = 0;
    for (j, &x) in a[0].iter().enumerate() {
        let minor: Vec<Vec<u64>> =
            a[1..].iter().map(|row| row.iter().enumerate().filter(|&(c, _)| c != j).map(|(_, &v)| v).collect()).collect();
        let term = r.mul(r.reduce(x), laplace(r, &minor));
        total = if j % 2 == 0 { r.add(total, term) } else { r.sub(total, term) };
    }
    total
}

#[test]
fn determinant_matches_laplace_expansion() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (p, m) in [(2, 10), (3, 5), (5, 4), (7, 3)] {
        let r = ring(p, m);
        for _ in 0..200 {
            let d = rng.gen_range(1..=4);
            let a: Vec<Vec<u64>> = (0..d)
                .map(|_| {
                    (0..d)
                        .map(|_| {
                            let x = rng.gen_range(0..r.modulus());
                            r.mul(x, r.prime_power_residue(rng.gen_range(0..m)))
                        })
                        .collect()
                })
                .collect();
            assert_eq!(determinant(r, &a).unwrap(), laplace(r, &a), "{a:?}");
        }
    }
}

#[test]
fn approximate_eigenvalues() {
    let r = ring(2, 10);
    let shift = r.prime_power_residue(7);
    let g = vec![vec![5, shift], vec![r.mul(3, shift), r.add(r.inv(5).unwrap(), shift)]];
    let lambda = r.scalar(5);
    assert!(approx_eigen_check(&g, lambda, &[1, 0], 7, 0).unwrap());

    let r3 = ring(3, 4);
    let exact = vec![vec![2, 1], vec![0, r3.inv(2).unwrap()]];
    assert!(approx_eigen_check(&exact, r3.scalar(2), &[1, 0], 4, 0).unwrap());

    assert!(matches!(approx_eigen_check(&g, lambda, &[2, 0], 7, 0), Err(Error::Precondition(_))));
    assert!(matches!(approx_eigen_check(&g, lambda, &[0, 1], 7, 0), Err(Error::Precondition(_))));
    assert!(matches!(approx_eigen_check(&g, lambda, &[1, 0], 7, 7), Err(Error::Precondition(_))));
}

/// g = λ·Id + K + ℓ^level·E with K·u = 0 and w = ℓ^α·u, so g·w ≡ λw.
#[test]
fn approximate_eigenvalues_on_random_perturbations() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for p in [2u64, 3, 5, 7] {
        let r = ring(p, 8);
        for _ in 0..100 {
            let d = rng.gen_range(2..=3);
            let level = rng.gen_range(1..=8);
            let alpha = rng.gen_range(0..level);
            let lambda = rng.gen_range(0..r.modulus());
            let mut u: Vec<u64> = (0..d).map(|_| rng.gen_range(0..r.modulus())).collect();
            u[0] = r.add(r.mul(p, u[0]), 1);
            let w: Vec<u64> = u.iter().map(|&x| r.mul(x, r.prime_power_residue(alpha))).collect();
            let noise = r.prime_power_residue(level);
            let g: Vec<Vec<u64>> = (0..d)
                .map(|i| {
                    let row: Vec<u64> = (0..d).map(|_| rng.gen_range(0..r.modulus())).collect();
                    // Fix the first column so that row·u = 0.
                    let rest = (1..d).fold(0, |acc, j| r.add(acc, r.mul(row[j], u[j])));
                    let first = r.mul(r.neg(rest), r.inv(u[0]).unwrap());
                    (0..d)
                        .map(|j| {
                            let k = if j == 0 { first } else { row[j] };
                            let scalar = if i == j { lambda } else { 0 };
                            let e = r.mul(noise, rng.gen_range(0..r.modulus()));
                            r.add(r.add(k, scalar), e)
                        })
                        .collect()
                })
                .collect();
            assert!(approx_eigen_check(&g, r.scalar(lambda as i128), &w, level, alpha).unwrap());
        }
    }
}

#[test]
fn sylow_examples() {
    let pro = ball(ring(5, 2), &[1]);
    let s = sylow_preimage(&pro).unwrap();
    assert_eq!(s.index, 1);
    assert!(s.preimage.same_as(&pro));
    let s = sylow_preimage(&FiniteGroup::full(ring(3, 2), 1, DEFAULT_CAP).unwrap()).unwrap();
    assert_eq!(s.index, 8);
    assert_eq!(s.sylow_order, 3);
    let s = sylow_preimage(&FiniteGroup::full(ring(5, 2), 2, DEFAULT_CAP).unwrap()).unwrap();
    assert_eq!(s.index, 576);
    assert_eq!(s.sylow_order, 25);
    assert_eq!(s.preimage.image_order(), 25);
    let s = sylow_preimage(&FiniteGroup::full(ring(2, 3), 1, DEFAULT_CAP).unwrap()).unwrap();
    assert_eq!(s.index, 3);
}

fn conjugation_graph(r: ResidueRing, conj: &Mat2, extra: &[GroupElement]) -> FiniteGroup {
    let mut gens: Vec<GroupElement> = [GenKind::L, GenKind::R]
        .iter()
        .map(|&k| {
            let x = gen_at(r, k, 1).unwrap();
            GroupElement::new(&[x, x.conjugate_by(conj).unwrap()]).unwrap()
        })
        .collect();
    gens.extend_from_slice(extra);
    FiniteGroup::closure(r, 2, &gens, DEFAULT_CAP).unwrap()
}

#[test]
fn first_reduction_on_a_conjugation_graph() {
    let r = ring(7, 2);
    let g = conjugation_graph(r, &Mat2::from_i128(r, [3, 1, 0, 1]), &[]);
    let report = first_reduction(&g, 1, 1).unwrap();
    assert_eq!(report.case, ReductionCase::IsomorphismGraph);
    assert_eq!(report.verdict, Verdict::Verified, "{:?}", report.properties);
    let t = report.subgroup.unwrap();
    assert!(g.index(&t).unwrap() <= 2);
    assert_eq!(report.properties[2], ("image mod N is the graph of an isomorphism".to_string(), true));
}

#[test]
fn first_reduction_on_a_pro_ell_group() {
    let g = ball(ring(7, 2), &[1, 1]);
    let report = first_reduction(&g, 1, 1).unwrap();
    assert_eq!(report.case, ReductionCase::ProEll);
    assert_eq!(report.verdict, Verdict::Verified);
    assert!(report.subgroup.unwrap().same_as(&g));
}

#[test]
fn first_reduction_through_a_separating_element() {
    let r = ring(7, 21);
    let b = Mat2::from_i128(r, [2, 0, 0, r.inv(2).unwrap() as i128]);
    let mut gens = Ball::new(r, vec![1, 1]).unwrap().generators().unwrap();
    gens.push(GroupElement::new(&[Mat2::identity(r), b]).unwrap());
    let g = FiniteGroup::closure(r, 2, &gens, DEFAULT_CAP).unwrap();
    let report = first_reduction(&g, 1, 1).unwrap();
    assert_eq!(report.case, ReductionCase::LargeDerived);
    assert_eq!(report.claimed_levels, Some([20, 8]));
    assert_eq!(report.verdict, Verdict::Verified);
    assert!(report.witness.is_some());

    let small = FiniteGroup::closure(ring(7, 2), 2, &gens.iter().map(|x| x.reduce(2).unwrap()).collect::<Vec<_>>(), DEFAULT_CAP)
        .unwrap();
    let report = first_reduction(&small, 1, 1).unwrap();
    assert_eq!(report.case, ReductionCase::LargeDerived);
    assert_eq!(report.verdict, Verdict::InconclusiveAtPrecision);
}

#[test]
fn first_reduction_checks_its_hypotheses() {
    let g = ball(ring(7, 3), &[2, 1]);
    assert!(matches!(first_reduction(&g, 1, 1), Err(Error::HypothesisUnmet(_))));
    assert!(matches!(first_reduction(&ball(ring(5, 2), &[1, 1]), 1, 1), Err(Error::Domain(_))));
}

#[test]
fn main_theorem_examples() {
    let report = main_theorem_harness(&FiniteGroup::full(ring(3, 4), 1, DEFAULT_CAP).unwrap(), 1).unwrap();
    assert_eq!(report.verdict, Verdict::InconclusiveAtPrecision);
    assert_eq!(report.subgroup_indices, vec![("[G:H]".to_string(), 24)]);
    assert_eq!(report.conclusion_checked, vec![1]);

    let report = main_theorem_harness(&ball(ring(3, 3), &[1, 1]), 1).unwrap();
    assert_eq!(report.verdict, Verdict::InconclusiveAtPrecision);
    assert_eq!(report.conclusion_checked, vec![1, 1]);
    assert_eq!(report.claimed, vec![80, 80]);

    let report = main_theorem_harness(&FiniteGroup::full(ring(5, 2), 2, DEFAULT_CAP).unwrap(), 3).unwrap();
    assert_eq!(report.verdict, Verdict::InconclusiveAtPrecision);
    assert_eq!(report.conclusion_checked, vec![1, 1]);
    assert_eq!(report.subgroup_indices, vec![("[G:H]".to_string(), 576)]);

    let report = main_theorem_harness(&conjugation_graph(ring(7, 2), &Mat2::from_i128(ring(7, 2), [1, 2, 0, 1]), &[]), 1)
        .unwrap();
    assert_eq!(report.verdict, Verdict::HypothesisNotMet);

    let report = main_theorem_harness(&ball(ring(2, 4), &[2]), 1).unwrap();
    assert_eq!(report.verdict, Verdict::HypothesisNotMet);
    let report = main_theorem_harness(&ball(ring(2, 4), &[2]), 2).unwrap();
    assert_eq!(report.verdict, Verdict::InconclusiveAtPrecision);
    assert_eq!(report.claimed, vec![1214]);
}

#[test]
fn graph_example_at_two() {
    assert_eq!(conjugation_identities_hold(3, 16).unwrap(), [true, true]);
    let g = example_graph_group(3, 5, 8, DEFAULT_CAP).unwrap();
    for t in 1..=5 {
        assert!(g.graph_defect(t).unwrap().is_none(), "t = {t}");
    }
    for t in 6..=8 {
        let w = g.graph_defect(t).unwrap().expect("ball part separates the factors");
        assert!(w.is_identity_mod(5));
    }
    let r = ring(2, 8);
    let a = r.prime_power_residue(3) as i128;
    let diagonal: Vec<GroupElement> = [GenKind::L, GenKind::R, GenKind::D]
        .iter()
        .map(|&k| GroupElement::diagonal(&gen_at(r, k, a).unwrap(), 2).unwrap())
        .collect();
    let diagonal = FiniteGroup::closure(r, 2, &diagonal, DEFAULT_CAP).unwrap();
    for t in 1..=8 {
        assert!(diagonal.graph_defect(t).unwrap().is_none());
    }
    assert!(matches!(example_graph_group(3, 3, 8, DEFAULT_CAP), Err(Error::Domain(_))));
}

#[test]
fn conjugation_graphs_have_small_lie_algebras() {
    let r = ring(7, 3);
    let g = conjugation_graph(r, &Mat2::from_i128(r, [2, 1, 1, 1]), &[]);
    assert!(g.graph_defect(2).unwrap().is_none());
    let lie = lie_algebra(&g).unwrap();
    assert!(!lie.contains_lattice(&ModLattice::scaled_full(r, 6, 1)));
    assert!(!lie.contains_lattice(&ModLattice::scaled_full(r, 6, 2)));
}

#[test]
fn perturbed_graph_intermediate() {
    let r = ring(7, 3);
    let kick = GroupElement::new(&[Mat2::identity(r), gen_at(r, GenKind::L, 7).unwrap()]).unwrap();
    let g = conjugation_graph(r, &Mat2::from_i128(r, [2, 1, 1, 1]), &[kick]);
    let report = graph_perturbation_check(&g, 2).unwrap();
    assert_eq!(report.verdict, Verdict::InconclusiveAtPrecision, "{:?}", report.notes);
    assert_eq!(report.conclusion_checked, vec![3, 2]);
    let plain = conjugation_graph(r, &Mat2::from_i128(r, [2, 1, 1, 1]), &[]);
    assert_eq!(graph_perturbation_check(&plain, 2).unwrap().verdict, Verdict::HypothesisNotMet);
}

#[test]
fn scalar_saturation_changes_nothing() {
    let r = ring(5, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..4 {
        let gens: Vec<GroupElement> = (0..2)
            .map(|_| GroupElement::new(&[random_sl2(&mut rng, r, 0), random_sl2(&mut rng, r, 1)]).unwrap())
            .collect();
        let g = FiniteGroup::closure(r, 2, &gens, DEFAULT_CAP).unwrap();
        let minus = Mat2::from_i128(r, [-1, 0, 0, -1]);
        let mut saturated = gens.clone();
        saturated.push(GroupElement::embed(&minus, 0, 2).unwrap());
        saturated.push(GroupElement::embed(&minus, 1, 2).unwrap());
        let s = FiniteGroup::closure(r, 2, &saturated, DEFAULT_CAP).unwrap();
        assert!(g.derived_subgroup().unwrap().same_as(&s.derived_subgroup().unwrap()));
        assert_eq!(lie_algebra(&g).unwrap(), lie_algebra(&s).unwrap());
    }
}

/// (0, u) in the Lie algebra of N(G) with u ≢ 0 mod ℓ^{t+1}: saturating
/// u under conjugation by 𝓑(n₂) gives ℓ^{t+4n₂}𝔰𝔩₂, and G′ contains
/// {Id} × 𝓑(2t + 8n₂).
#[test]
fn nontrivial_lie_algebra_of_the_normal_part() {
    let r = ring(5, 12);
    let (t, n2) = (1, 1);
    let kick = GroupElement::new(&[Mat2::identity(r), gen_at(r, GenKind::R, 5).unwrap()]).unwrap();
    let mut gens: Vec<GroupElement> = [GenKind::L, GenKind::R, GenKind::D]
        .iter()
        .map(|&k| GroupElement::diagonal(&gen_at(r, k, 5).unwrap(), 2).unwrap())
        .collect();
    gens.push(kick);
    let g = FiniteGroup::closure(r, 2, &gens, DEFAULT_CAP).unwrap();
    assert!(g.project(&[1]).unwrap().contains_ball(&Ball::uniform(r, n2, 1).unwrap()).unwrap());
    let normal = g.max_normal_proell().unwrap();
    assert!(normal.same_as(&g));
    let lie = lie_algebra(&normal).unwrap();
    let u = [5, 0, 0];
    assert!(lie.contains(&[0, 0, 0, u[0], u[1], u[2]]));
    let line = ModLattice::span(r, 3, &[u.to_vec()]).unwrap();
    let saturated = crate::lattice::conj_saturate(&line, n2, t).unwrap();
    assert!(saturated.contains_lattice(&ModLattice::scaled_full(r, 3, t + 4 * n2)));
    let derived = g.derived_subgroup().unwrap();
    let target = 2 * t + 8 * n2;
    assert!(derived.contains_ball(&Ball::new(r, vec![12, target]).unwrap()).unwrap());
}
