//! Exact-arithmetic library for the spherical Jacquet–Rallis identities over
//! local function fields F_q((π)): monoid invariant theory, Frobenius cocycle
//! matching, bounded lattice-fiber enumeration on the symmetric and unitary
//! sides, Kostka–Foulkes/Satake combinatorics, and orbital-integral checks.
//!
//! Everything is exact: truncated Laurent series carry their valuation and an
//! absolute precision, and any decision that the stored digits cannot settle
//! raises [`Error::PrecisionExhausted`] instead of guessing.

pub mod error;
pub mod fibers;
pub mod lattice_linalg;
pub mod local_fields;
pub mod local_matching;
pub mod monoid_invariants;
pub mod orbital;
pub mod rng;
pub mod satake;

pub use error::{Error, Result};
