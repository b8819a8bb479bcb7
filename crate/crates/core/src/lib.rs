//! A spectral numerical laboratory for renormalized nonlinear wave dynamics
//! on compact surfaces.
//!
//! The crate builds exact Laplace-Beltrami eigenbases for the flat torus and
//! the round sphere, samples the Gaussian free-field pair measure and the
//! cylindrical Wiener process on them, Wick-renormalizes the nonlinearities
//! through the Hermite algebra, time-steps the truncated (stochastic, damped)
//! wave flows with an exact-linear-flow Strang splitting, and verifies the
//! structural invariants of those objects at desk scale: Ito isometries,
//! Ornstein-Uhlenbeck and Gibbs measure invariance, Hamiltonian energy
//! conservation, and Cauchy-in-N convergence of trajectories and Wick powers.

pub mod basis;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod gaussian;
pub mod gibbs;
pub mod legendre;
pub mod projector;
pub mod report;
pub mod rng;
pub mod stats;
pub mod svg;
pub mod wick;

pub use basis::{Manifold, Mode, ModeLabel, QuadratureGrid, SpectralBasis, SpectralField};
pub use dynamics::{EquationKind, EquationSpec, PairState, SolverConfig, Trajectory};
pub use error::{Error, Result};
pub use rng::RngStream;
