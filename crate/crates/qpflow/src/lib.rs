//! Numerical laboratory for the quasilinear flow
//! u_t - div(a(u) |grad u|^{p-2} grad u) + (a'(u)/p) |grad u|^p = f(u)
//! with homogeneous Dirichlet data, its stationary problem, and a battery of
//! qualitative diagnostics (energy dissipation, symmetry of long-time limits,
//! critical-set statistics, weighted Poincare bounds, comparison tests).

pub mod coefficients;
pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod flow;
pub mod linsolve;
pub mod operators;
pub mod stationary;

pub use coefficients::{CoefficientModel, NonlinearityModel};
pub use error::{Error, Result};
pub use experiment::{default_config, list_presets, run_preset, ExperimentConfig, Manifest};
pub use grid::{build_grid, Domain, Field, Grid};
