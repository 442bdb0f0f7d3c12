//! Exact dependence-coefficient and spectral analysis for strictly
//! stationary finite-state Markov chains.
//!
//! The crate provides:
//! - [`chain`]: chain validation, stationary distributions, joint laws at
//!   arbitrary lags, structural checks (reversibility, irreducibility,
//!   period, small sets);
//! - [`mixing`]: exact alpha(n), rho(n), beta(n) coefficients and lag
//!   profiles;
//! - [`spectral`]: eigen-analysis of reversible chains, second-largest
//!   eigenvalue modulus and spectral gap, doubling-lag correlation
//!   diagnostics, and the subset rate functionals r(g) and R(D);
//! - [`verify`]: decision procedures for the mixing-rate condition lattice
//!   and its implication structure;
//! - [`generators`]: named and seeded-random chain families, stationary path
//!   simulation, and empirical chain estimation.

pub mod chain;
pub mod error;
pub mod generators;
pub mod mixing;
pub mod rng;
pub mod spectral;
pub mod verify;

pub use chain::{ChainModel, JointDistribution, SmallSet, StructureReport};
pub use error::{Error, Result};
pub use mixing::MixingProfile;
