//! Ground states, threshold sets and radial dynamics for the focusing
//! nonlinear Schrödinger equation with an attractive inverse-power potential,
//!
//!   i u_t + Δu + c|x|^{-σ} u + |u|^α u = 0,   x ∈ R^d,
//!
//! restricted to radial profiles on a cell-centred grid.

pub mod critical;
pub mod dynamics;
pub mod elliptic;
pub mod error;
pub mod field;
pub mod functionals;
pub mod grid;
pub mod linalg;
pub mod ode;
pub mod params;
pub mod profile;
pub mod spectral;
pub mod thresholds;
pub mod uniqueness;

pub use error::{Error, Result};
pub use field::RadialField;
pub use functionals::{functionals, FunctionalReport};
pub use grid::{build_grid, RadialGrid};
pub use params::ModelParams;
