//! Error type shared across the crate.

use thiserror::Error;

/// Everything that can go wrong when evaluating shapes, flows, strokes or
/// the optimizer.
#[derive(Debug, Error)]
pub enum SwimError {
    /// The conformal radius W vanishes; the map degenerates.
    #[error("shape has W = 0; the conformal map is degenerate")]
    DegenerateMap,

    /// An operation required a strictly physical (interior) shape.
    #[error("shape ({w}, {y}, {z}) is not strictly interior to the physical cone")]
    NotInterior { w: f64, y: f64, z: f64 },

    /// An evaluation point left the fluid domain |s| >= 1.
    #[error("evaluation point is inside the unit disc (|s| = {modulus} < 1)")]
    InsideBody { modulus: f64 },

    /// The conformal derivative vanishes at the requested point.
    #[error("conformal derivative vanishes at the evaluation point")]
    CriticalPoint,

    /// Newton inversion of the map failed to converge.
    #[error("map inversion did not converge after {iters} iterations")]
    InversionFailed { iters: usize },

    /// Projection onto the unit-area manifold is impossible.
    #[error("cannot scale shape to unit area: W^2 - Y^2 - Z^2 = {quad_form} <= 0")]
    NonPositiveArea { quad_form: f64 },

    /// A stroke failed structural validation.
    #[error("invalid stroke: {0}")]
    InvalidStroke(String),

    /// A stroke node is outside the physical cone.
    #[error("stroke node {index} = ({w}, {y}, {z}) is outside the physical cone")]
    NonPhysicalNode { index: usize, w: f64, y: f64, z: f64 },

    /// The stroke produces no net displacement, so drag is undefined.
    #[error("non-swimming stroke: |displacement| = {displacement:e} is negligible")]
    NonSwimming { displacement: f64 },

    /// Too few interior nodes to estimate the stationarity residual.
    #[error("only {count} interior nodes; at least {needed} required")]
    TooFewInteriorNodes { count: usize, needed: usize },

    /// Optimizer could not produce a usable iterate.
    #[error("optimization failed: {0}")]
    Optimization(String),

    /// Invalid argument (sizes, ranges, finiteness).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// File format / parse problems for CLI inputs.
    #[error("parse error: {0}")]
    Parse(String),

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl SwimError {
    /// Process exit code for the CLI: 1 usage/IO, 2 non-physical input,
    /// 3 non-convergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            SwimError::NotInterior { .. }
            | SwimError::NonPhysicalNode { .. }
            | SwimError::NonPositiveArea { .. }
            | SwimError::DegenerateMap
            | SwimError::NonSwimming { .. } => 2,
            SwimError::Optimization(_) | SwimError::InversionFailed { .. } => 3,
            _ => 1,
        }
    }
}
