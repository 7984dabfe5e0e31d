//! Random open subgroups for fuzzing: a congruence ball plus a few twist
//! generators drawn from a seeded ChaCha stream.

use pink_forge_core::matrix::standard_gen;
use pink_forge_core::{Ball, GenKind, GroupElement, Mat2, ResidueRing, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::group_file::GroupFile;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampleSpec {
    pub ring: ResidueRing,
    pub factors: usize,
    pub ball_level: u32,
    pub twists: usize,
    /// Draw every twist from the level-1 congruence kernel.
    pub pro_ell: bool,
    pub seed: u64,
}

/// Generators of 𝓑(level) in every factor; level 0 means all of SL₂.
pub fn ball_generators(ring: ResidueRing, level: u32, factors: usize) -> Result<Vec<GroupElement>> {
    if level > 0 {
        return Ball::uniform(ring, level, factors)?.generators();
    }
    let mut out = Vec::new();
    for j in 0..factors {
        for kind in [GenKind::L, GenKind::R] {
            out.push(GroupElement::embed(&standard_gen(kind, ring.one())?, j, factors)?);
        }
    }
    Ok(out)
}

fn random_unipotent_product(ring: ResidueRing, rng: &mut ChaCha8Rng, scale: u64) -> Result<Mat2> {
    let mut draw = || ring.scalar((rng.gen_range(0..ring.modulus()) * scale % ring.modulus()) as i128);
    let (x, y, z) = (draw(), draw(), draw());
    Ok(standard_gen(GenKind::L, x)?.mul(&standard_gen(GenKind::R, y)?).mul(&standard_gen(GenKind::L, z)?))
}

fn random_upper(ring: ResidueRing, rng: &mut ChaCha8Rng, scale: u64) -> Result<Mat2> {
    let l = ring.prime();
    let q = ring.modulus();
    let unit = loop {
        let u = if scale == 1 { rng.gen_range(1..q) } else { (1 + scale * rng.gen_range(0..q)) % q };
        if u % l != 0 {
            break u;
        }
    };
    let inv = ring.inv(unit).expect("unit");
    let x = rng.gen_range(0..q) * scale % q;
    Ok(Mat2::from_residues(ring, [unit, ring.mul(unit, x), 0, inv]))
}

/// Each twist is, with equal odds: independent random parts; one random
/// part copied into every factor after conjugating by a per-sample
/// element, which makes the image a graph; or upper triangular parts.
pub fn sample_group(spec: &SampleSpec, index: usize) -> Result<GroupFile> {
    let ring = spec.ring;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index as u64);
    let scale = if spec.pro_ell { ring.prime() % ring.modulus() } else { 1 };
    let mut gens = ball_generators(ring, spec.ball_level, spec.factors)?;
    let twist_by: Vec<Mat2> =
        (0..spec.factors).map(|_| random_unipotent_product(ring, &mut rng, 1)).collect::<Result<_>>()?;
    for _ in 0..spec.twists {
        let parts: Vec<Mat2> = match rng.gen_range(0..3) {
            0 => (0..spec.factors).map(|_| random_unipotent_product(ring, &mut rng, scale)).collect::<Result<_>>()?,
            1 => {
                let base = random_unipotent_product(ring, &mut rng, scale)?;
                twist_by.iter().map(|c| base.conjugate_by(c)).collect::<Result<_>>()?
            }
            _ => (0..spec.factors).map(|_| random_upper(ring, &mut rng, scale)).collect::<Result<_>>()?,
        };
        gens.push(GroupElement::new(&parts)?);
    }
    let mut file = GroupFile::new(ring, spec.factors, gens);
    file.label = Some(format!(
        "sample-{index} l={} m={} n={} seed={}",
        ring.prime(),
        ring.precision(),
        spec.factors,
        spec.seed
    ));
    file.pro_ell = Some(file.generators.iter().all(|g| g.is_identity_mod(1)));
    Ok(file)
}

pub fn sample_groups(spec: &SampleSpec, count: usize) -> Result<Vec<GroupFile>> {
    (0..count).map(|i| sample_group(spec, i)).collect()
}
