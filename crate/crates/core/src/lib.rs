//! Finite-groupoid operator algebras in exact arithmetic.
//!
//! Finite groupoids act on other groupoids and on Fell bundles over them;
//! from that data this crate builds semidirect-product groupoids and Fell
//! bundles, the convolution *-algebras of sections, the groupoid dynamical
//! system on the section algebra, and its crossed product. Every
//! construction is re-validated after it is built, and the identification
//! of the semidirect-product algebra with the crossed product is certified
//! structure constant by structure constant.

pub mod actions;
pub mod algebra;
pub mod dynamics;
pub mod error;
pub mod fell_bundle;
pub mod generator;
pub mod groupoid;
pub mod isomorphism;
pub mod linalg;
pub mod measures;
pub mod pipeline;
pub mod scalar;
pub mod scenario;
pub mod semidirect;

pub use error::{Error, Result, Violation};
pub use groupoid::{Arrow, FiniteGroupoid, HaarSystem};
pub use scalar::{GaussianRational, Rational};
