//! Pseudospectral simulation of nonlinear Schrödinger equations with
//! saturated nonlinearities.
//!
//! The equations solved have the form
//!
//! ```text
//! i ∂_t u + P_h(D) u = ε V(u) u
//! ```
//!
//! on a periodic box, where `P_h` is the Laplacian symbol `-|ξ|²` or a
//! bounded truncation of it, and `V` is `|u|^{2σ}` or one of its saturated
//! replacements: a smooth frequency cut-off applied to `|u|²`, or a pointwise
//! saturation of `|u|²`.
//!
//! * [`spectral`]: grids, the transform contract, multipliers and norms.
//! * [`operators`]: cut-off profiles, dispersion symbols, potentials, energies.
//! * [`integrator`]: split-step time evolution with runtime guards.
//! * [`experiments`]: convergence, inflation, continuity and blow-up studies.
//! * [`io`]: config files, CSV diagnostics, field dumps and reports.

pub mod datum;
pub mod error;
pub mod experiments;
pub mod integrator;
pub mod io;
pub mod operators;
pub mod quadrature;
pub mod spectral;

pub use datum::{generate_prescribed_regularity, InitialDatum};
pub use error::{Error, Result};
pub use integrator::{
    evolve, reference_solution, strang_step, DiagnosticsSeries, SimulationConfig, Splitting,
};
pub use operators::{CutoffProfile, DispersionSymbol, ModelParams, SaturationScheme, Sign};
pub use spectral::{Complex, Field, SpectralGrid, Spectrum};
