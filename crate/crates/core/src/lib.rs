//! Simulation and analysis toolkit for energy-harvesting wireless compressive
//! sensing.
//!
//! Sensors transmit with probability `p` over independent Rayleigh-fading
//! channels and adapt their transmit power to harvested energy. The fusion
//! center observes `y = A x + e` with `A = Z̃ Σ`, where `Z̃` has i.i.d. mixed
//! Gaussian entries and `Σ = Γ Ψ / √P_ave` carries the (inhomogeneous) receive
//! power pattern spread over a unitary sparsity basis.
//!
//! Modules:
//! - [`stochastic`]: seeded samplers and the truncated-Gaussian CGF.
//! - [`ensemble`]: power patterns, bases, sensing ensembles, sparse instances.
//! - [`spectra`]: k-restricted extreme eigenvalues and RIP parameter maps.
//! - [`recovery`]: complex BPDN / LASSO decoder and an exhaustive ℓ₀ oracle.
//! - [`theory`]: closed-form measurement, delay and large-deviation bounds.
//! - [`harness`]: declarative Monte Carlo experiments with CSV/JSON output.

pub mod container;
pub mod ensemble;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod recovery;
pub mod rng;
pub mod special;
pub mod spectra;
pub mod stochastic;
pub mod theory;
pub mod verify;

pub use error::{Error, Result};

pub use num_complex::Complex64;

/// Dense complex matrix (column-major).
pub type CMatrix = nalgebra::DMatrix<Complex64>;
/// Dense complex vector.
pub type CVector = nalgebra::DVector<Complex64>;
