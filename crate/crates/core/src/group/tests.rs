use std::collections::HashSet;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn ring(p: u64, m: u32) -> ResidueRing {
    ResidueRing::new(p, m).unwrap()
}

fn el(r: ResidueRing, parts: &[[i128; 4]]) -> GroupElement {
    let mats: Vec<_> = parts.iter().map(|&e| Mat2::from_i128(r, e)).collect();
    GroupElement::new(&mats).unwrap()
}

fn slot_gen(r: ResidueRing, kind: GenKind, a: i128, j: usize, n: usize) -> GroupElement {
    GroupElement::embed(&gen_at(r, kind, a).unwrap(), j, n).unwrap()
}

/// Plain BFS over right multiplication, the naive oracle.
fn naive(gens: &[GroupElement]) -> HashSet<GroupElement> {
    let id = GroupElement::identity(gens[0].ring(), gens[0].n());
    let mut seen = HashSet::from([id.clone()]);
    let mut queue = VecDeque::from([id]);
    while let Some(x) = queue.pop_front() {
        for g in gens {
            let y = x.mul(g);
            if seen.insert(y.clone()) {
                queue.push_back(y);
            }
        }
    }
    seen
}

fn all_sl2(r: ResidueRing) -> Vec<GroupElement> {
    let q = r.modulus();
    let mut out = Vec::new();
    for a in 0..q {
        for b in 0..q {
            for c in 0..q {
                for d in 0..q {
                    if r.sub(r.mul(a, d), r.mul(b, c)) == 1 % q {
                        out.push(GroupElement::from_residues(r, &[a, b, c, d]).unwrap());
                    }
                }
            }
        }
    }
    out
}

#[test]
fn trivial_closure() {
    let g = FiniteGroup::closure(ring(5, 2), 1, &[GroupElement::identity(ring(5, 2), 1)], 10).unwrap();
    assert_eq!(g.order(), 1);
    assert_eq!(g.elements().unwrap().len(), 1);
}

#[test]
fn sl2_f5_matches_brute_force() {
    let r = ring(5, 1);
    let g = FiniteGroup::closure(r, 1, &[slot_gen(r, GenKind::L, 1, 0, 1), slot_gen(r, GenKind::R, 1, 0, 1)], 1000)
        .unwrap();
    assert_eq!(g.order(), 120);
    let mut brute = all_sl2(r);
    brute.sort();
    assert_eq!(brute.len(), 120);
    assert_eq!(g.elements().unwrap(), brute);
}

#[test]
fn ball_generators_give_the_whole_ball() {
    let r = ring(5, 2);
    let g = FiniteGroup::ball(&Ball::uniform(r, 1, 1).unwrap(), 1000).unwrap();
    assert_eq!(g.order(), 125);
    let mut brute: Vec<_> = all_sl2(r).into_iter().filter(|x| x.is_identity_mod(1)).collect();
    brute.sort();
    assert_eq!(g.elements().unwrap(), brute);
}

#[test]
fn reductions() {
    let r = ring(5, 2);
    let full = FiniteGroup::full(r, 1, DEFAULT_CAP).unwrap();
    assert_eq!(full.order(), 15000);
    let kernel = full.reduction_kernel(1).unwrap();
    let brute = all_sl2(r).into_iter().filter(|x| x.is_identity_mod(1)).count();
    assert_eq!(kernel.order(), brute as u128);
    assert_eq!(kernel.order(), 125);
    assert_eq!(full.reduction_image(2).unwrap().order(), full.order());
    assert_eq!(full.reduction_image(1).unwrap().order(), 120);
    let ball = FiniteGroup::ball(&Ball::uniform(r, 1, 1).unwrap(), 1000).unwrap();
    assert!(ball.reduction_image(1).unwrap().is_trivial());
    assert_eq!(full.reduction_kernel(2).unwrap().order(), 1);
}

#[test]
fn derived_subgroups() {
    let r = ring(5, 2);
    let d = FiniteGroup::closure(r, 1, &[slot_gen(r, GenKind::D, 5, 0, 1)], 1000).unwrap();
    assert!(d.derived_subgroup().unwrap().is_trivial());

    let r1 = ring(5, 1);
    let sl = FiniteGroup::full(r1, 1, 1000).unwrap();
    let elements = sl.elements().unwrap();
    let all_comms: Vec<_> = elements.iter().flat_map(|a| elements.iter().map(move |b| a.comm(b))).collect();
    let brute: HashSet<_> = naive(&all_comms);
    assert_eq!(brute.len(), 120);
    assert_eq!(sl.derived_subgroup().unwrap().order(), 120);

    let r4 = ring(5, 4);
    let ball = FiniteGroup::ball(&Ball::uniform(r4, 1, 1).unwrap(), 1000).unwrap();
    let derived = ball.derived_subgroup().unwrap();
    assert!(derived.contains_ball(&Ball::uniform(r4, 2, 1).unwrap()).unwrap());
}

#[test]
fn commutator_subgroup_against_all_pairs() {
    let r = ring(3, 3);
    let ball = FiniteGroup::ball(&Ball::uniform(r, 1, 1).unwrap(), 1000).unwrap();
    let engine = FiniteGroup::commutator_subgroup(&ball, &ball).unwrap();
    let elements = ball.elements().unwrap();
    let mut comms: HashSet<GroupElement> = HashSet::new();
    for a in &elements {
        for b in &elements {
            comms.insert(a.comm(b));
        }
    }
    let comms: Vec<_> = comms.into_iter().collect();
    let brute = naive(&comms);
    assert_eq!(engine.order(), brute.len() as u128);
    assert!(brute.iter().all(|g| engine.contains(g)));
    assert!(engine.contains_ball(&Ball::uniform(r, 2, 1).unwrap()).unwrap());
}

#[test]
fn ball_containment() {
    let r = ring(5, 2);
    let full = FiniteGroup::full(r, 2, DEFAULT_CAP).unwrap();
    for levels in [[0, 0], [1, 0], [2, 1], [1, 1]] {
        assert!(full.contains_ball(&Ball::new(r, levels.to_vec()).unwrap()).unwrap());
    }
    let r3 = ring(5, 3);
    let ball = FiniteGroup::ball(&Ball::uniform(r3, 1, 1).unwrap(), 1000).unwrap();
    assert!(ball.contains_ball(&Ball::uniform(r3, 1, 1).unwrap()).unwrap());
    assert!(!ball.contains_ball(&Ball::uniform(r3, 0, 1).unwrap()).unwrap());

    let r2 = ring(2, 6);
    let two = FiniteGroup::ball(&Ball::uniform(r2, 2, 1).unwrap(), 1000).unwrap();
    assert!(two.contains_ball(&Ball::uniform(r2, 2, 1).unwrap()).unwrap());
    assert!(two.contains_ball(&Ball::uniform(r2, 1, 1).unwrap()).is_err());
    let r33 = ring(3, 2);
    let three = FiniteGroup::full(r33, 1, 1000).unwrap();
    assert!(three.contains_ball(&Ball::uniform(r33, 0, 1).unwrap()).is_err());
}

#[test]
fn ball_generators_at_two_match_enumeration() {
    let r = ring(2, 6);
    let two = FiniteGroup::ball(&Ball::uniform(r, 2, 1).unwrap(), 1000).unwrap();
    let brute = all_sl2(ring(2, 6)).into_iter().filter(|x| x.is_identity_mod(2)).count();
    assert_eq!(two.order(), brute as u128);
}

#[test]
fn maximal_normal_ell_subgroups() {
    let r = ring(5, 1);
    let borel = FiniteGroup::closure(r, 1, &[el(r, &[[2, 0, 0, 3]]), el(r, &[[1, 1, 0, 1]])], 1000).unwrap();
    assert_eq!(borel.order(), 20);
    let n = borel.max_normal_proell().unwrap();
    assert_eq!(n.order(), 5);
    let split = FiniteGroup::closure(r, 1, &[el(r, &[[2, 0, 0, 3]])], 1000).unwrap();
    assert!(split.max_normal_proell().unwrap().is_trivial());

    let r2 = ring(5, 3);
    let pro = FiniteGroup::ball(&Ball::uniform(r2, 1, 2).unwrap(), DEFAULT_CAP).unwrap();
    assert!(pro.max_normal_proell().unwrap().same_as(&pro));

    // Borel mod 25 in one factor, full SL₂(𝔽₅)-lift in the other
    let r3 = ring(5, 2);
    let g = FiniteGroup::closure(
        r3,
        2,
        &[
            el(r3, &[[2, 0, 0, 13], [1, 0, 0, 1]]),
            el(r3, &[[1, 1, 0, 1], [1, 0, 0, 1]]),
            el(r3, &[[1, 0, 0, 1], [1, 1, 0, 1]]),
            el(r3, &[[1, 0, 0, 1], [1, 0, 1, 1]]),
        ],
        DEFAULT_CAP,
    )
    .unwrap();
    let n = g.max_normal_proell().unwrap();
    assert_eq!(n.image_order(), 5);
    assert_eq!(n.reduction_kernel(1).unwrap().order(), g.reduction_kernel(1).unwrap().order());
    assert!(n.max_normal_proell().unwrap().same_as(&n));
}

fn conjugation_graph(r: ResidueRing, conj: [i128; 4], with_kernel: bool) -> FiniteGroup {
    let m = Mat2::from_i128(r, conj);
    let m_inv = m.inv().unwrap();
    let mut gens = Vec::new();
    for kind in [GenKind::L, GenKind::R] {
        let g = gen_at(r, kind, 1).unwrap();
        gens.push(GroupElement::new(&[g, m.mul(&g).mul(&m_inv)]).unwrap());
    }
    if with_kernel {
        let p = r.prime() as i128;
        for kind in [GenKind::L, GenKind::R, GenKind::D] {
            gens.push(slot_gen(r, kind, p, 1, 2));
        }
    }
    FiniteGroup::closure(r, 2, &gens, DEFAULT_CAP).unwrap()
}

#[test]
fn graph_defects() {
    let r = ring(5, 2);
    let diag = conjugation_graph(r, [1, 0, 0, 1], false);
    for t in 0..=2 {
        assert!(diag.graph_defect(t).unwrap().is_none());
    }
    let product = FiniteGroup::full(r, 2, DEFAULT_CAP).unwrap();
    let w = product.graph_defect(1).unwrap().unwrap();
    assert!(product.contains(&w));

    let g = conjugation_graph(r, [2, 1, 1, 1], true);
    assert_eq!(g.order(), 15000 * 125);
    assert!(g.graph_defect(1).unwrap().is_none());
    let w = g.graph_defect(2).unwrap().unwrap();
    assert!(g.contains(&w));
    let quiet_first = w.part(0).is_identity_mod(2) && !w.part(1).is_identity_mod(2);
    let quiet_second = w.part(1).is_identity_mod(2) && !w.part(0).is_identity_mod(2);
    assert!(quiet_first || quiet_second);

    // exhaustive scan of the same group
    let scan = |t: u32| {
        g.elements().unwrap().iter().any(|x| {
            (x.part(0).is_identity_mod(t) && !x.part(1).is_identity_mod(t))
                || (x.part(1).is_identity_mod(t) && !x.part(0).is_identity_mod(t))
        })
    };
    assert!(!scan(1));
    assert!(scan(2));
}

#[test]
fn projections_and_lifts() {
    let r = ring(5, 2);
    let g = conjugation_graph(r, [2, 1, 1, 1], true);
    let all = g.elements().unwrap();
    for (slots, k) in [(vec![0], 1), (vec![0], 2), (vec![1], 1), (vec![1], 2), (vec![0, 1], 1)] {
        let kernel = g.kernel_of_projection(&slots, k).unwrap();
        let brute = all.iter().filter(|x| slots.iter().all(|&s| x.part(s).is_identity_mod(k))).count();
        assert_eq!(kernel.order(), brute as u128, "{slots:?} {k}");
    }
    let target = el(r, &[[1, 1, 0, 1]]);
    let lift = g.lift_through_projection(&[0], 2, &target).unwrap().unwrap();
    assert!(g.contains(&lift));
    assert_eq!(lift.part(0), target.part(0));
    let pre = g.preimage_under_projection(&[0], 1, &[target.clone()]).unwrap();
    let unipotent = |x: &GroupElement| {
        let [a, _, c, d] = x.part(0).residues();
        a % 5 == 1 && c % 5 == 0 && d % 5 == 1
    };
    let brute = all.iter().filter(|x| unipotent(x)).count();
    assert_eq!(pre.order(), brute as u128);
    let proj = g.project(&[1]).unwrap();
    assert_eq!(proj.order(), 15000);
}

fn level_one_kernel_group(r: ResidueRing) -> FiniteGroup {
    let p = r.prime() as i128;
    let mut gens = Vec::new();
    for kind in [GenKind::L, GenKind::R, GenKind::D] {
        let x = gen_at(r, kind, p).unwrap();
        let xi = x.inv().unwrap();
        let id = Mat2::identity(r);
        gens.push(GroupElement::new(&[x, xi, id]).unwrap());
        gens.push(GroupElement::new(&[x, id, xi]).unwrap());
        for j in 0..3 {
            gens.push(slot_gen(r, kind, p * p, j, 3));
        }
    }
    FiniteGroup::closure(r, 3, &gens, DEFAULT_CAP).unwrap()
}

#[test]
fn goursat_on_level_one_kernel() {
    let r = ring(5, 3);
    let g = level_one_kernel_group(r);
    assert!(!g.contains_ball(&Ball::uniform(r, 1, 3).unwrap()).unwrap());
    let levels = vec![vec![0, 1, 1], vec![1, 0, 1], vec![1, 1, 0]];
    let report = g.goursat_combine(&levels).unwrap();
    assert_eq!(report.levels, vec![2, 2, 2]);
    assert!(report.beyond_precision.is_empty());
    assert_eq!(report.witnesses.len(), 3);
    for (i, w) in &report.witnesses {
        assert!(!w.part(*i).is_identity());
        assert!(w.part(*i).is_identity_mod(2));
    }
}

#[test]
fn goursat_hypothesis_checked() {
    let r = ring(5, 2);
    let diag = conjugation_graph(r, [1, 0, 0, 1], false);
    let levels = vec![vec![0, 1], vec![1, 0]];
    assert!(matches!(diag.goursat_combine(&levels), Err(Error::HypothesisUnmet(_))));
    let full = FiniteGroup::full(r, 2, DEFAULT_CAP).unwrap();
    let report = full.goursat_combine(&levels).unwrap();
    assert_eq!(report.levels, vec![1, 1]);
}

#[test]
fn goursat_on_partial_graph_at_precision_four() {
    let r = ring(5, 4);
    let mut gens = Vec::new();
    for kind in [GenKind::L, GenKind::R] {
        let g = gen_at(r, kind, 1).unwrap();
        let id = Mat2::identity(r);
        gens.push(GroupElement::new(&[g, g, id]).unwrap());
        gens.push(GroupElement::new(&[id, id, g]).unwrap());
    }
    for kind in [GenKind::L, GenKind::R, GenKind::D] {
        gens.push(slot_gen(r, kind, 5, 0, 3));
    }
    let g = FiniteGroup::closure(r, 3, &gens, DEFAULT_CAP).unwrap();
    let levels = vec![vec![0, 1, 1], vec![1, 0, 1], vec![1, 1, 0]];
    let report = g.goursat_combine(&levels).unwrap();
    assert!(g.contains_ball(&Ball::uniform(r, 2, 3).unwrap()).unwrap());
    assert_eq!(report.witnesses.len(), 3);
}

fn random_sl2(rng: &mut ChaCha8Rng, r: ResidueRing) -> GroupElement {
    let q = r.modulus();
    loop {
        let (a, b, c) = (rng.gen_range(0..q), rng.gen_range(0..q), rng.gen_range(0..q));
        if let Some(ai) = r.inv(a) {
            let d = r.mul(r.add(1, r.mul(b, c)), ai);
            return GroupElement::from_residues(r, &[a, b, c, d]).unwrap();
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn engine_agrees_with_naive_bfs(
        (p, m) in prop_oneof![Just((3u64, 2u32)), Just((2, 3)), Just((5, 2)), Just((3, 3))],
        seed in any::<u64>(),
    ) {
        let r = ring(p, m);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gens: Vec<_> = (0..2).map(|_| random_sl2(&mut rng, r)).collect();
        let g = FiniteGroup::closure(r, 1, &gens, DEFAULT_CAP).unwrap();
        let oracle = naive(&gens);
        prop_assert_eq!(g.order(), oracle.len() as u128);
        let mut sorted: Vec<_> = oracle.iter().cloned().collect();
        sorted.sort();
        prop_assert_eq!(g.elements().unwrap(), sorted);
        for x in all_sl2(r).iter().step_by(7) {
            prop_assert_eq!(g.contains(x), oracle.contains(x));
        }
        // closure is order independent and idempotent
        let rev: Vec<_> = gens.iter().rev().cloned().collect();
        prop_assert_eq!(FiniteGroup::closure(r, 1, &rev, DEFAULT_CAP).unwrap().order(), g.order());
        let mut doubled = gens.clone();
        doubled.extend(g.image_lifts());
        prop_assert!(FiniteGroup::closure(r, 1, &doubled, DEFAULT_CAP).unwrap().same_as(&g));
        let derived = g.derived_subgroup().unwrap();
        prop_assert!(derived.is_subgroup_of(&g));
        prop_assert_eq!(g.index(&derived).unwrap() * derived.order(), g.order());
    }

    #[test]
    fn two_factor_engine_agrees_with_naive_bfs(seed in any::<u64>(), tied in any::<bool>()) {
        let r = ring(3, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (c, d) = (random_sl2(&mut rng, r), random_sl2(&mut rng, r));
        let e = if tied { c.clone() } else { random_sl2(&mut rng, r) };
        let pair = |x: &GroupElement, y: &GroupElement| GroupElement::new(&[x.part(0), y.part(0)]).unwrap();
        let gens = vec![pair(&c, &d), pair(&d, &e)];
        let g = FiniteGroup::closure(r, 2, &gens, DEFAULT_CAP).unwrap();
        let oracle = naive(&gens);
        prop_assert_eq!(g.order(), oracle.len() as u128);
        for t in 1..=2 {
            let defect = g.graph_defect(t).unwrap();
            let scan = oracle.iter().any(|x| {
                (x.part(0).is_identity_mod(t) && !x.part(1).is_identity_mod(t))
                    || (x.part(1).is_identity_mod(t) && !x.part(0).is_identity_mod(t))
            });
            prop_assert_eq!(defect.is_some(), scan);
        }
        for (slots, k) in [(vec![0usize], 1u32), (vec![1], 2), (vec![0, 1], 1)] {
            let kernel = g.kernel_of_projection(&slots, k).unwrap();
            let brute = oracle.iter().filter(|x| slots.iter().all(|&s| x.part(s).is_identity_mod(k))).count();
            prop_assert_eq!(kernel.order(), brute as u128);
        }
    }
}

#[test]
fn goursat_on_full_product() {
    let r = ring(5, 3);
    let g = FiniteGroup::full(r, 3, DEFAULT_CAP).unwrap();
    assert_eq!(g.image_order(), 120 * 120 * 120);
    let levels = vec![vec![0, 1, 1], vec![1, 0, 1], vec![1, 1, 0]];
    let report = g.goursat_combine(&levels).unwrap();
    assert_eq!(report.levels, vec![2, 2, 2]);
    assert!(g.contains_ball(&Ball::uniform(r, 2, 3).unwrap()).unwrap());
}
