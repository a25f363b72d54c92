//! Polynomial denoisers, the frozen-Onsager iteration, and its symbolic
//! unrolling into low-degree polynomials of the disorder.

mod family;
mod fit;
mod frozen;
mod unroll;

pub use family::{hermite_normalized, monomial_to_hermite, PolyDenoiserFamily, PolyStep};
pub use fit::{fit_poly_denoisers, fit_poly_denoisers_with, graded_indices, FitOptions};
pub use frozen::{frozen_b, run_poly_amp, run_poly_amp_from, FrozenOnsager};
pub use unroll::{
    estimate_terms, tree_gap_check, unroll, unrolled_degree, GapReport, NormEnvelope, Unrolled, UNROLL_MAX_DEGREE,
    UNROLL_MAX_N, UNROLL_MAX_STEPS, UNROLL_MAX_TERMS,
};
