//! Exact tail asymptotics for the minimum of a smooth Gaussian process over
//! a compact interval, `P(min_{[a,b]} X > u)` as `u → ∞`, and their
//! verification by rare-event simulation.
//!
//! The pipeline:
//!
//! 1. [`kernels`]: covariance kernels with exact mixed derivatives.
//! 2. [`solver`]: the energy-minimizing probability measure ν* on `[a,b]`,
//!    its finite support S and optimal value V*.
//! 3. [`asymptotics`]: θ = Σ⁻¹1, the conditional-mean function μ, the
//!    essential set, the residual field and E(W), giving
//!    `P(min X > u) ~ E(W) c / (θ₁⋯θ_k) u^{-k} exp(-u²/2V*)`.
//! 4. [`mc`]: importance sampling of the path minimum and of the
//!    conditional laws (overshoot, argmin location, fluctuations).

pub mod asymptotics;
pub mod error;
pub mod kernels;
pub mod linalg;
pub mod mc;
pub mod quad;
pub mod solver;

pub use error::{Error, Result};
pub use kernels::{Family, Functional, Interval, Kernel, KernelSpec};
pub use solver::{solve, AtomicMeasure, OptimalSolution, SolverOptions};
