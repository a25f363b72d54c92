pub mod amp;
pub mod disorder;
pub mod error;
pub mod harness;
pub mod ldp;
pub mod parisi;
pub mod poly;
pub mod real;
pub mod rng;
pub mod rounding;

pub use error::{Error, Result};
pub use real::Real;

pub type DisorderMatrix64 = disorder::DisorderMatrix<f64>;
pub type DisorderMatrix32 = disorder::DisorderMatrix<f32>;
pub type AmpState64 = amp::AmpState<f64>;
pub type AmpState32 = amp::AmpState<f32>;
pub type Polynomial64 = ldp::Polynomial<f64>;
pub type Polynomial32 = ldp::Polynomial<f32>;
pub type PolynomialVector64 = ldp::PolynomialVector<f64>;
pub type RoundingTrace64 = rounding::RoundingTrace<f64>;
pub type RoundingTrace32 = rounding::RoundingTrace<f32>;
