//! Self-similarity invariants of rank-3 unsolvable Lie lattices over the
//! p-adic integers.
//!
//! Everything is exact arithmetic modulo an explicit power of `p`. The main
//! entry points are [`LieLattice`] for structure constants and s-invariants,
//! [`submodule`] for subalgebras and ideals, [`endo`] for virtual
//! endomorphisms, and [`harness::verify_not_self_similar`], which emits a
//! [`harness::Certificate`] that no virtual endomorphism of a given index is
//! simple.

pub mod endo;
pub mod error;
pub mod harness;
pub mod lie;
pub mod linalg;
pub mod padic;
pub mod specfile;
pub mod submodule;

pub use error::{Error, Result};
pub use lie::{k_bound, BasisPermutation, LieLattice, SInvariants};
pub use linalg::{Matrix, Vector3};
pub use padic::{PAdicScalar, Prime, Valuation};
pub use submodule::Submodule;
