//! Numerical laboratory for the singular Liouville equation
//!
//! ```text
//! -Δu = ρ (h̃ e^{2u} / ∫ h̃ e^{2u} - 1/|Σ|)
//! ```
//!
//! and the Moser-Trudinger family of inequalities on the flat torus, the round
//! sphere and the unit disk.
//!
//! The crate is organized bottom-up:
//!
//! - [`surface`]: grids, quadrature, Laplacians, geodesic distances, embeddings.
//! - [`greens`]: zero-mean Green's functions and the singular weight `h̃`.
//! - [`functional`]: the energy `I_ρ`, its gradient and Hessian, and the
//!   Moser-Trudinger deficits.
//! - [`concentration`]: concentration radius, thresholded mass, barycenters.
//! - [`bubbles`]: standard and singular bubble families and their diagnostics.
//! - [`solver`]: gradient flow, Newton-Krylov, continuation in `ρ`.
//! - [`commands`]: the file-producing drivers behind the `liouville-lab` binary.
//!
//! Runnable walkthroughs of every capability live in the `examples/` directory.

// `!(x > 0.0)` style guards reject NaN together with the out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bubbles;
pub mod commands;
pub mod concentration;
pub mod config;
pub mod error;
pub mod export;
pub mod field;
pub mod functional;
pub mod greens;
pub mod numeric;
pub mod solver;
pub mod stats;
pub mod surface;
pub mod verdict;

pub use error::{LabError, Result};
pub use field::Field;
pub use surface::{build_surface, Node, Point, Resolution, Surface, SurfaceKind};
