//! Toolkit for a planar swimmer at zero Reynolds number.
//!
//! Shapes are images of the unit circle under the conformal map
//! `z(s) = W*s + X + Y/s + Z/(sqrt(2)*s^2)` with real parameters `(W, Y, Z)`
//! and center `X`. The crate provides:
//!
//! - shape geometry: areas, the physical cone of non-self-intersecting
//!   shapes, cusp detection, boundary sampling ([`shape`]);
//! - the exterior Stokes flow driven by a deforming boundary, its pressure,
//!   dissipated power, and a finite-difference residual check ([`flow`]);
//! - closed strokes through shape space: swimming displacement via the
//!   gauge connection, dissipation, and the swimming drag coefficient
//!   ([`stroke`]);
//! - a constrained optimizer for the drag-optimal stroke on the unit-area
//!   shape manifold ([`optimizer`]);
//! - the `swim` command-line tool ([`cli`]) with SVG/CSV/JSON artifacts.

pub mod cli;
pub mod cubic;
pub mod error;
pub mod flow;
pub mod optimizer;
pub mod quadrature;
pub mod shape;
pub mod stroke;
pub mod svg;

pub use error::SwimError;

/// Crate version, exposed to the CLI and the C ABI.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
