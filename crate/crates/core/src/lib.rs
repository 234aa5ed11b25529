//! Private monomial computation over replicated, noncolluding databases.
//!
//! The crate is split the same way the computation is:
//!
//! * [`intlinalg`]: exact integer linear algebra (minors, Smith normal form,
//!   ranks over the integers, residue rings and prime fields).
//! * [`ffield`]: table-backed `GF(p^k)` with a fixed generator and discrete
//!   logarithm.
//! * [`entropy`]: closed-form entropies of linear images and monomials of
//!   uniform variables, each paired with an enumeration oracle.
//! * [`scheme`]: the retrieval protocol (query generation, database answers in
//!   additive and multiplicative form, decoding).
//! * [`harness`]: capacity formulas, Monte-Carlo rate experiments and privacy
//!   audits.

pub mod entropy;
pub mod error;
pub mod ffield;
pub mod harness;
pub mod intlinalg;
pub mod scheme;

pub use error::{Error, Result};

#[cfg(test)]
mod properties;
