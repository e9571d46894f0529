//! Mixed finite element solver for linear poroelasticity with secondary
//! consolidation.
//!
//! The model couples solid displacement, fluid pressure, and a viscous
//! (Kelvin-Voigt style) stress contribution. The solver works with an
//! equivalent reformulation of the equations as a generalized Stokes system
//! coupled to a diffusion equation, discretized with Taylor-Hood elements
//! (continuous quadratic displacements, continuous linear auxiliary scalars)
//! and backward Euler in time. Pressure and dilation are reconstructed
//! algebraically from the auxiliary fields, which keeps the scheme stable in
//! the nearly incompressible and low-permeability regimes where a direct
//! displacement-pressure discretization locks.
//!
//! Crates are organized by task: [`mesh`] builds structured triangulations,
//! [`fem`] provides bases and quadrature, [`assembly`] builds the sparse
//! operators, [`stepper`] advances the coupled system in time, and
//! [`verification`] measures errors, convergence rates, energy ledgers, and
//! conservation residuals against the solver's discrete laws.

pub mod assembly;
pub mod bench;
pub mod cli;
pub mod error;
pub mod fem;
pub mod linalg;
pub mod mesh;
pub mod params;
pub mod stepper;
pub mod verification;

pub use error::{Error, Result};
