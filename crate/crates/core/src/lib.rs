//! Projection-tree reduced-order modeling (PTROM) for two-dimensional
//! Biot–Savart point-vortex dynamics.
//!
//! The crate is organized bottom-up:
//!
//! * [`kernel`]: pairwise Biot–Savart velocity, self-block Jacobian, Hamiltonian.
//! * [`integrators`]: implicit trapezoidal (inexact Newton) and Heun full-order solvers.
//! * [`quadtree`]: Barnes–Hut decomposition, pruning criteria, treecode velocity.
//! * [`reduction`]: POD, greedy sampling, gappy operator, clustered source surrogate.
//! * [`rom_solvers`]: LSPG and hyper-reduced Gauss–Newton online solvers.
//! * [`metrics`]: QoI errors, speed-up and a posteriori error bounds.
//! * [`harness`]: experiment configs, training pipeline, queries and reports.

// Negated comparisons such as `!(x > 0.0)` are used on purpose so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod harness;
pub mod integrators;
pub mod io;
pub mod kernel;
pub mod linalg;
pub mod metrics;
pub mod quadtree;
pub mod reduction;
pub mod rom_solvers;

pub use error::{Error, Result};
pub use kernel::{BlockDiagonalJacobian, ParticleSystem, StateVector, VelocityModel};
