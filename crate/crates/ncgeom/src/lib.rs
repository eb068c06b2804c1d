//! Numerical toolkit for finite-dimensional spectral triples.

// `!(x > 0.0)` is used on purpose so NaN takes the rejecting branch
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// index loops mirror the component formulas
#![allow(clippy::needless_range_loop)]

pub mod axioms;
pub mod builders;
pub mod calculus;
pub mod distance;
pub mod dixmier;
pub mod error;
pub mod geometry;
pub mod io;
pub mod linalg;
pub mod par;
pub mod span;
pub mod triple;

pub use error::{Error, Result};
pub use linalg::{c64, ComplexMatrix, C64};
pub use triple::{
    ChainTerm, Factor, FibreDecomposition, HochschildChain, PointState, SamplePoint,
    SpectralTriple, TripleParts,
};
