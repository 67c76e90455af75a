//! Numerics for the two-component quadratic nonlinear Schrödinger system
//!
//! ```text
//! i d/dt u1 = -Δu1 - κ|u1|u1 - γ conj(u1) u2
//! i d/dt u2 = -2Δu2 - 2|u2|u2 - γ u1²
//! ```
//!
//! on periodic boxes in one to three dimensions.

pub mod error;
pub mod evolution;
pub mod field;
pub mod grid;
pub mod ground_state;
pub mod model;
pub mod ode;
pub mod orbit;
pub mod rng;
pub mod spectra;

pub use error::{Error, Result};
pub use field::{Field2, FunctionalReport};
pub use grid::{Grid, GridSpec, C64};
pub use model::{BranchKind, BranchPoint, CouplingParams, JRegion, KRegion};
