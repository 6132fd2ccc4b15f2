//! Simulation and verification toolkit for a viscous shallow-water droplet
//! with surface tension and moving contact lines.
//!
//! The droplet is evolved in Lagrangian coordinates on the fixed reference
//! interval `[-1, 1]`. Around the solver sit the closed-form equilibrium, the
//! linearized spectrum with its energy pair, energy and inequality
//! diagnostics, and the reconstruction of Eulerian fields.

pub mod banded;
pub mod cli;
pub mod equilibrium;
pub mod error;
pub mod grid;
pub mod lagrangian_solver;
pub mod linear_stability;
pub mod output;
pub mod eulerian;
pub mod diagnostics;

pub use error::{Error, Result};
