//! Direct and inverse spectral problems for Dirac systems
//! `y' = i(zj + jV(x))y` on the half-line, with rectangular potentials.
//!
//! - [`gbdt`]: explicit pseudo-exponential potentials from generating matrices.
//! - [`propagator`]: numerical fundamental solution for sampled potentials.
//! - [`weyl_direct`]: Weyl function estimates from nested matrix balls.
//! - [`weyl_inverse`]: potential recovery from a rational Weyl function.
//! - [`spectral`]: the matrix `θ`, its spectrum, and bound states.
//! - [`cli`]: configuration-driven pipeline behind the `dirac-weyl` binary.

pub mod cli;
pub mod error;
pub mod exec;
pub mod gbdt;
pub mod linalg;
pub mod propagator;
pub mod random;
pub mod spectral;
pub mod weyl_direct;
pub mod weyl_inverse;

pub use error::{Error, Result};
pub use exec::Execution;
pub use gbdt::{GbdtParams, SignatureLayout};
pub use linalg::CMatrix;
pub use propagator::{PropagatorResult, SampledPotential};
pub use weyl_direct::{MatrixBall, WeylEstimate};
pub use weyl_inverse::Realization;
