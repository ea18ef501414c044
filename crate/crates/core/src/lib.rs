//! Single-particle simulator for the one-dimensional Dirac quantum cellular
//! automaton, realised as a coin-walker discrete-time quantum walk.
//!
//! The crate is organised bottom-up:
//!
//! - [`lattice`]: finite periodic lattice, spinor states, Fourier transforms
//!   and site distributions.
//! - [`walk`]: waveplate/q-plate step matrices, the abstract Dirac walk,
//!   dispersion relation and the two step backends (position and momentum).
//! - [`analytics`]: effective Hamiltonian, energy sectors, velocity and
//!   Zitterbewegung operators, and the exact mean-position decomposition.
//! - [`noise`]: photonic imperfection model, count sampling, fidelity and
//!   least-squares calibration.
//! - [`fit`]: oscillating-Gaussian surface fit of step distributions.
//! - [`lsq`]: the bounded Levenberg-Marquardt solver shared by the fits.

pub mod analytics;
pub mod error;
pub mod fit;
pub mod lattice;
pub mod lsq;
pub mod noise;
pub mod walk;

pub use analytics::{SpectralData, ZbDecomposition, ZbPrediction};
pub use error::{Error, Result};
pub use fit::{OscillationFit, OscillationParams};
pub use lattice::{LatticeGeometry, Representation, SiteDistribution, SpinorField};
pub use noise::{NoiseModel, Provenance, StepDataset};
pub use walk::{DiracParams, HardwareParams, StepSymbol, WalkStepParams};

/// Complex scalar used throughout the crate.
pub type C64 = num_complex::Complex64;
/// 2x2 complex matrix acting on the coin.
pub type Mat2 = nalgebra::Matrix2<C64>;
/// Coin amplitude pair, component 0 = |R>, component 1 = |L>.
pub type Spinor = nalgebra::Vector2<C64>;

/// Version of this crate, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
