//! Finite-volume solver for viscoelastic Saint-Venant (shallow-water) flows
//! of Maxwell fluids.
//!
//! Two hyperbolic models are implemented for the depth `H`, the depth-averaged
//! velocity `U = (U, V)` and a conformation tensor `(C_h, C_zz)`:
//!
//! * SVUCM - upper-convected rate, `C` behaves as a left Cauchy-Green
//!   deformation tensor, stress `Sigma = G (C - I)`;
//! * SVTM - Cotter-Rivlin rate on the Finger tensor, stress
//!   `Sigma = G (I - C)`.
//!
//! Both conserve mass and momentum and dissipate the free energy
//! `E = (|U|^2 + g H + G tr(C - ln C - I)) / 2`. The scheme is a first-order
//! Godunov method built on a frame-invariant 5-wave relaxation Riemann solver
//! whose relaxation parameters are selected per interface so that a discrete
//! entropy inequality holds under the stringent CFL condition.

pub mod bench;
pub mod config;
pub mod diagnostics;
pub mod engine;
pub mod error;
pub mod mesh;
pub mod output;
pub mod rheology;
pub mod riemann;
pub mod state;

pub use error::Error;
pub type Result<T> = std::result::Result<T, Error>;
