//! Exact computations with open subgroups of SL₂(ℤ_ℓ)ⁿ at finite ℓ-adic
//! precision: truncated ℓ-adic arithmetic, Howell-form lattices, subgroup
//! closure, Dickson classification and Pink Lie algebras.

pub mod dickson;
pub mod error;
pub mod group;
pub mod lattice;
pub mod matrix;
pub mod pink;
pub mod scalar;

pub use error::{Error, Result};
pub use group::FiniteGroup;
pub use lattice::ModLattice;
pub use matrix::{Ball, GenKind, GroupElement, LieVector, Mat2};
pub use scalar::{PadicScalar, ResidueRing};
