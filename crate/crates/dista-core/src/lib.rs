//! Distributed sparse signal recovery over networks.
//!
//! A network of sensor nodes observes a common sparse signal through
//! per-node linear measurements `y_v = A_v x0 + noise`, with far fewer
//! rows per node than signal entries. Each node keeps its own estimate,
//! exchanges it with neighbors through a doubly stochastic consensus
//! matrix, and interleaves gradient steps on its local data misfit with
//! soft thresholding. The main solver ([`solvers::dista_run`]) realizes
//! that scheme; centralized iterative soft thresholding, distributed
//! subgradient descent, and consensus ADMM are provided as baselines.
//!
//! The crate is organized as:
//!
//! * [`numerics`] -- dense kernels: thresholding, gradient steps, norms,
//!   power-iteration spectral norms, Cholesky solves;
//! * [`graph`] -- network topologies and consensus matrices;
//! * [`objectives`] -- the centralized and distributed objective
//!   functions, the surrogate used in the descent analysis, and a KKT
//!   residual for optimality checks;
//! * [`solvers`] -- the iterative solvers plus termination handling and
//!   per-run reports;
//! * [`experiments`] -- reproducible signal/measurement generation,
//!   recovery metrics, and the Monte Carlo campaigns (phase-transition
//!   grids and SNR sweeps) with CSV rendering.
//!
//! All randomness flows through explicit `u64` seeds; campaign results
//! are byte-for-byte reproducible for a fixed seed regardless of the
//! worker-thread count.

pub mod error;
pub mod experiments;
pub mod graph;
pub mod numerics;
pub mod objectives;
pub mod solvers;

pub use error::{Error, Result};
pub use numerics::{EstimateMatrix, Matrix, Vector};
