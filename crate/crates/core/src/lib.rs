//! Simulation, energy diagnostics and spectral analysis for a flexible cable
//! crane with a delayed transport boundary feedback.
//!
//! The cable displacement `y(x, t)` on `[0, 1]` obeys a damped wave equation
//! with variable tension `a(x)`. The platform at `x = 0` is driven by the
//! cable force, a velocity gain and a delayed signal carried by the transport
//! channel `u`; the load at `x = 1` is a point mass.

pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod model;
pub mod solver;
pub mod spectral;

pub use error::{DiagnosticsError, ModelError, SolverError, SpectralError};
pub use grid::Grid;
pub use model::{
    equilibrium_constant, validate_params, CraneParams, Field, HypothesisReport, InitialData, Regime, RegimeKind,
    TensionProfile, Violation, ZetaFormula,
};
pub use solver::{simulate, CraneState, SimConfig, SimEvent, Simulation};
