//! Simulation and estimate verification for an inextensible hanging string.
//!
//! The string occupies arc length `s ∈ [0, 1]` with a free end at `s = 0`
//! and a fixed end at `s = 1`. Position evolves by `ẍ = (τx′)′ + g`, and the
//! tension `τ` is recovered at every instant from a degenerate two-point
//! boundary value problem.

pub mod bessel;
pub mod certificate;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod gauss;
pub mod initial;
pub mod mesh;
pub mod output;
pub mod tension;
pub mod wnorms;

pub use error::{Error, Result};
pub use mesh::{Mesh, ScalarField, Vec3, VecField};
