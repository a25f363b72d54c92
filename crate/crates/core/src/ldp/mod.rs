//! Polynomials in the entries of a symmetric matrix: monomials, factor
//! graphs, tree projection, and evaluation.

mod gap;
mod multi_index;
mod polynomial;

pub use gap::{projection_gap_estimate, projection_gap_stat, Ensemble, GapEstimate};
pub(crate) use gap::EntrySampler;
pub use multi_index::{in_t_n2, Classification, MultiIndex};
pub use polynomial::{Polynomial, PolynomialVector, Ring, PRUNE};
