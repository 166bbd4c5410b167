//! Hot-start QUBO construction for discrete mean-variance portfolio problems.

pub mod cli;
pub mod encode;
pub mod hotstart;
pub mod market;
pub mod model;
pub mod numerics;
pub mod qubo;
pub mod scalar;
pub mod solve;

pub use scalar::Real;

pub type Vector = numerics::Vector<f64>;
pub type SymMatrix = numerics::SymMatrix<f64>;
pub type QuadraticModel = model::QuadraticModel<f64>;
pub type HotStartBox = hotstart::HotStartBox<f64>;
pub type QuboInstance = qubo::QuboInstance<f64>;
pub type SolveResult = solve::SolveResult<f64>;
