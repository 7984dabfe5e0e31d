//! Layered representation of a subgroup of SL₂(ℤ/ℓᵐ)ⁿ.
//!
//! The mod-ℓ image is enumerated outright, each image point carrying a lift.
//! Below it, the congruence filtration K₁ ⊇ K₂ ⊇ … splits the kernel into
//! 𝔽_ℓ-vector spaces: layer k holds elements ≡ Id mod ℓᵏ in echelon form
//! by their (g − Id)/ℓᵏ mod ℓ coordinates. Every element is then uniquely
//! lift · ∏ hᵢ^{cᵢ} with 0 ≤ cᵢ < ℓ, so membership is a sift and the order
//! is |image| · ℓ^{#rows}.
//!
//! A chain may also be keyed on a subset of the factors at a reduced
//! precision. It then describes the image of the group under that
//! projection, and sifts that land on the identity of the image but not of
//! the group are kept: their normal closure is the projection kernel.

use std::collections::HashMap;

use smallvec::SmallVec;

use crate::error::{domain, Error, Result};
use crate::matrix::GroupElement;
use crate::scalar::ResidueRing;

#[derive(Clone, Debug)]
struct Row {
    pivot: usize,
    coords: Vec<u64>,
    elem: GroupElement,
    /// elem⁻ᶜ for c = 0..ℓ.
    inverse_powers: Vec<GroupElement>,
}

#[derive(Clone, Debug)]
pub(crate) struct Chain {
    ring: ResidueRing,
    n: usize,
    slots: Vec<usize>,
    key_precision: u32,
    generators: Vec<GroupElement>,
    top_index: HashMap<u128, u32>,
    lifts: Vec<u64>,
    layers: Vec<Vec<Row>>,
    residues: Vec<GroupElement>,
}

pub(crate) struct Sifted {
    /// Product of the chain elements stripped off, in normal-form order.
    pub word: GroupElement,
    /// What is left of the input, in the keyed image.
    pub remainder: GroupElement,
    pub complete: bool,
}

impl Chain {
    pub fn build(
        ring: ResidueRing,
        n: usize,
        slots: Vec<usize>,
        key_precision: u32,
        generators: &[GroupElement],
        cap: u64,
    ) -> Result<Self> {
        let l = ring.prime() as f64;
        if (4 * slots.len()) as f64 * l.log2() >= 127.0 {
            return domain("too many factors for the image index at this prime");
        }
        if key_precision == 0 || key_precision > ring.precision() {
            return domain("key precision out of range");
        }
        let mut chain = Self {
            ring,
            n,
            slots,
            key_precision,
            generators: generators.to_vec(),
            top_index: HashMap::new(),
            lifts: Vec::new(),
            layers: vec![Vec::new(); key_precision as usize],
            residues: Vec::new(),
        };
        let id = GroupElement::identity(ring, n);
        chain.insert_top(&id);
        let mut pending = Vec::new();
        let mut cursor = 0usize;
        let mut saturated = false;
        while cursor < chain.top_len() {
            let lift = chain.lift(cursor);
            for g in generators {
                let w = lift.mul(g);
                let key = chain.top_key(&w);
                match chain.top_index.get(&key) {
                    Some(_) if saturated => {}
                    Some(&j) => {
                        let schreier = w.mul(&chain.lift(j as usize).inv());
                        if !schreier.is_identity() {
                            pending.push(schreier);
                        }
                    }
                    None => {
                        if chain.top_len() as u64 >= cap {
                            return Err(Error::CapExceeded { cap });
                        }
                        chain.insert_top(&w);
                    }
                }
            }
            cursor += 1;
            if pending.len() > 4096 {
                chain.absorb(std::mem::take(&mut pending));
                saturated = chain.saturated();
            }
        }
        chain.absorb(pending);
        Ok(chain)
    }

    /// Unkeyed and every layer full: nothing further can be learned below
    /// the image, so Schreier generators need not be sifted.
    fn saturated(&self) -> bool {
        self.slots.len() == self.n
            && self.key_precision == self.ring.precision()
            && self.layers.iter().skip(1).all(|rows| rows.len() == 3 * self.n)
    }

    fn insert_top(&mut self, lift: &GroupElement) {
        let key = self.top_key(lift);
        let idx = self.top_len() as u32;
        self.top_index.insert(key, idx);
        self.lifts.extend_from_slice(lift.residues());
    }

    pub fn top_len(&self) -> usize {
        self.lifts.len() / (4 * self.n)
    }

    pub fn lift(&self, i: usize) -> GroupElement {
        let w = 4 * self.n;
        GroupElement::from_raw(self.ring, SmallVec::from_slice(&self.lifts[i * w..(i + 1) * w]))
    }

    pub fn generators(&self) -> &[GroupElement] {
        &self.generators
    }

    pub fn residues(&self) -> &[GroupElement] {
        &self.residues
    }

    /// Layer elements at level ≥ k.
    pub fn layer_elements_from(&self, k: u32) -> Vec<GroupElement> {
        self.layers
            .iter()
            .skip(k.max(1) as usize)
            .flat_map(|rows| rows.iter().map(|r| r.elem.clone()))
            .collect()
    }

    pub fn layer_dims(&self) -> Vec<usize> {
        self.layers.iter().skip(1).map(|r| r.len()).collect()
    }

    fn image_residues<'a>(&'a self, g: &'a GroupElement) -> impl Iterator<Item = u64> + 'a {
        self.slots.iter().flat_map(move |&s| g.residues()[4 * s..4 * s + 4].iter().copied())
    }

    fn top_key(&self, g: &GroupElement) -> u128 {
        let l = self.ring.prime();
        self.image_residues(g).fold(0u128, |acc, x| acc * l as u128 + (x % l) as u128)
    }

    /// Level-k coordinates of an image already ≡ Id mod ℓᵏ.
    fn level_coords(&self, g: &GroupElement, k: u32) -> Vec<u64> {
        let r = self.ring;
        let (l, q) = (r.prime(), r.prime().pow(k));
        self.image_residues(g)
            .enumerate()
            .map(|(i, x)| {
                let diag = i % 4 == 0 || i % 4 == 3;
                let y = if diag { r.sub(x, 1) } else { x };
                (y / q) % l
            })
            .collect()
    }

    pub fn top_index_of(&self, g: &GroupElement) -> Option<usize> {
        self.top_index.get(&self.top_key(g)).map(|&i| i as usize)
    }

    /// Sifts a full element; `word · remainder = g` with remainder a full
    /// element whose keyed image is the sift remainder.
    pub fn sift(&self, g: &GroupElement) -> (Sifted, Option<(u32, Vec<u64>)>) {
        let Some(t) = self.top_index_of(g) else {
            return (
                Sifted { word: GroupElement::identity(self.ring, self.n), remainder: g.clone(), complete: false },
                None,
            );
        };
        let lift = self.lift(t);
        let mut word = lift.clone();
        let mut x = lift.inv().mul(g);
        let l = self.ring.prime();
        for k in 1..self.key_precision {
            let mut coords = self.level_coords(&x, k);
            if coords.iter().all(|&c| c == 0) {
                continue;
            }
            for row in &self.layers[k as usize] {
                let c = coords[row.pivot];
                if c == 0 {
                    continue;
                }
                x = row.inverse_powers[c as usize].mul(&x);
                word = word.mul(&row.elem.pow(c));
                for (a, b) in coords.iter_mut().zip(&row.coords) {
                    *a = (*a + (l - c) * b) % l;
                }
            }
            if coords.iter().any(|&c| c != 0) {
                return (Sifted { word, remainder: x, complete: false }, Some((k, coords)));
            }
        }
        (Sifted { word, remainder: x, complete: true }, None)
    }

    pub fn contains(&self, g: &GroupElement) -> bool {
        let (s, _) = self.sift(g);
        s.complete && s.remainder.is_identity()
    }

    /// Some element of the group with the same keyed image as `g`.
    pub fn preimage_of(&self, g: &GroupElement) -> Option<GroupElement> {
        let (s, _) = self.sift(g);
        s.complete.then_some(s.word)
    }

    fn absorb(&mut self, mut queue: Vec<GroupElement>) {
        let l = self.ring.prime();
        while let Some(x) = queue.pop() {
            let (sifted, failure) = self.sift(&x);
            let Some((k, coords)) = failure else {
                if sifted.complete && !sifted.remainder.is_identity() {
                    self.residues.push(sifted.remainder);
                }
                continue;
            };
            let pivot = coords.iter().position(|&c| c != 0).unwrap();
            let scale = self.ring_mod_l_inv(coords[pivot]);
            let elem = sifted.remainder.pow(scale);
            let coords: Vec<u64> = coords.iter().map(|&c| c * scale % l).collect();
            let inv = elem.inv();
            let mut inverse_powers = Vec::with_capacity(l as usize);
            let mut acc = GroupElement::identity(self.ring, self.n);
            for _ in 0..l {
                inverse_powers.push(acc.clone());
                acc = acc.mul(&inv);
            }
            queue.push(elem.pow(l));
            for rows in &self.layers {
                for other in rows {
                    let (a, b) = (&elem, &other.elem);
                    queue.push(a.inv().mul(&b.inv()).mul(a).mul(b));
                    queue.push(b.inv().mul(&a.inv()).mul(b).mul(a));
                }
            }
            queue.push(x);
            let layer = &mut self.layers[k as usize];
            let at = layer.partition_point(|r| r.pivot < pivot);
            layer.insert(at, Row { pivot, coords, elem, inverse_powers });
        }
    }

    fn ring_mod_l_inv(&self, c: u64) -> u64 {
        let l = self.ring.prime();
        (1..l).find(|&d| d * c % l == 1).expect("nonzero mod l")
    }

    /// |image mod ℓ| and the total number of layer rows.
    pub fn order_parts(&self) -> (u64, u32) {
        (self.top_len() as u64, self.layers.iter().map(|r| r.len() as u32).sum())
    }

    /// Every element, unsorted. Caller checks the size first.
    pub fn enumerate(&self) -> Vec<GroupElement> {
        let mut kernel = vec![GroupElement::identity(self.ring, self.n)];
        for rows in self.layers.iter().rev() {
            for row in rows.iter().rev() {
                let mut next = Vec::with_capacity(kernel.len() * self.ring.prime() as usize);
                let mut power = GroupElement::identity(self.ring, self.n);
                for _ in 0..self.ring.prime() {
                    next.extend(kernel.iter().map(|k| power.mul(k)));
                    power = power.mul(&row.elem);
                }
                kernel = next;
            }
        }
        let mut out = Vec::with_capacity(kernel.len() * self.top_len());
        for t in 0..self.top_len() {
            let lift = self.lift(t);
            out.extend(kernel.iter().map(|k| lift.mul(k)));
        }
        out
    }
}
