//! Chalker-Coddington network model at the quantum Hall plateau transition.

pub mod cochain;
pub mod ensemble;
pub mod error;
pub mod evolution;
pub mod experiments;
pub mod fock;
pub mod greens;
pub mod kernels;
pub mod lattice;
pub mod observables;
pub mod scalar;
pub mod spectral;
pub mod validation;

pub use error::{Error, Result};
pub use scalar::Real;

/// Double-precision aliases; statistics and fits are always `f64`.
pub type Operator = evolution::EvolutionOperator<f64>;
pub type Disorder = evolution::DisorderRealization<f64>;
pub type Params = evolution::ScatteringParams<f64>;
pub type Factorization = greens::GreenFactorization<f64>;

/// Single-precision aliases.
pub type Operator32 = evolution::EvolutionOperator<f32>;
pub type Disorder32 = evolution::DisorderRealization<f32>;
pub type Params32 = evolution::ScatteringParams<f32>;
pub type Factorization32 = greens::GreenFactorization<f32>;
