//! Carleman linearization toolkit for kinetic and hydrodynamic models.
//!
//! The crate covers the whole pipeline used to study Carleman embeddings of
//! nonlinear flow dynamics at desk scale:
//!
//! * [`logistic`]: the zero-dimensional logistic equation, its exact solution,
//!   the truncated Carleman series and the lifted ODE hierarchy.
//! * [`lbm_ref`]: a D2Q9 BGK lattice Boltzmann reference solver.
//! * [`grad_dns`]: direct forward-Euler integration of the 2D ten-moment
//!   (Grad) system with an equilibrium closure for the heat-flux tensor.
//! * [`carleman_grad`]: assembly and propagation of the lifted Carleman-Grad
//!   linear system up to fifth order.
//! * [`analysis`]: error metrics, variable counting, telescopic propagators,
//!   condition-number sweeps and quantum-solver cost formulas.
//! * [`linalg`]: periodic grids, stencils, block-sparse operators and
//!   condition-number estimation shared by everything above.

pub mod analysis;
pub mod carleman_grad;
mod error;
pub mod grad_dns;
pub mod io;
pub mod lbm_ref;
pub mod linalg;
pub mod logistic;

pub use error::{Error, Result};
