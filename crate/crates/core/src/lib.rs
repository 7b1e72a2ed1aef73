//! Time-space Laplace–Beltrami solver on product manifolds `(0,1) × M`.
//!
//! The model problem is `-u_tt - Δ_g u = f` on `(0,1) × M` with Neumann data
//! `u_t(0,·) = μ0`, `u_t(1,·) = μ1`, where `M` is a closed surface given as
//! the zero level set of an implicit function. Time is discretized by finite
//! differences with a ghost-point treatment of the Neumann data, space by P1
//! surface finite elements on a triangulation `M_h`. The coupled system is
//! diagonalized in time by a cosine eigenbasis, leaving one sparse spatial
//! solve per temporal mode.
//!
//! Post-processing recovers superconvergent derivatives: polynomial
//! preserving recovery (PPR) in time and parametric PPR on the surface.
//!
//! Module map:
//! - [`surface`]: implicit surfaces, closest-point projection, meshes,
//!   refinement, OFF I/O and mesh diagnostics.
//! - [`metric`]: per-element metric tensors, quadrature and lifted evaluation.
//! - [`assembly`]: sparse stiffness, mass and load assembly.
//! - [`timedisc`]: time grid, ghost-penalty second difference, boundary data.
//! - [`solver`]: the spectral-in-time coupled solve.
//! - [`recovery`]: temporal PPR and surface PPPR.
//! - [`analysis`]: space-time error norms and observed orders.
//! - [`benchmarks`]: manufactured test problems.

pub mod analysis;
pub mod assembly;
pub mod benchmarks;
mod error;
pub mod metric;
pub mod recovery;
pub mod solver;
pub mod surface;
pub mod timedisc;

pub use error::{Error, Result};

/// Ambient 3-vector.
pub type Vec3 = nalgebra::Vector3<f64>;
/// Ambient 3×3 matrix.
pub type Mat3 = nalgebra::Matrix3<f64>;
