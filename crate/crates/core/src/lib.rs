//! Simulation and certification toolkit for Gaussian entire functions
//! `f(z) = sum_n xi_n a_n z^n` with i.i.d. standard complex Gaussian `xi_n`.
//!
//! * [`asymptotics`]: deterministic functionals `S(r)`, `N(r)`, `m(r)`,
//!   normality and the exceptional-radius scan.
//! * [`sampler`]: truncation plans, coefficient draws, scaled evaluation.
//! * [`zeros`]: argument-principle zero counting and the hole event.
//! * [`estimators`]: naive and importance-sampled hole probabilities.
//! * [`certificates`]: exact `Ω_r` probability, Vandermonde point search,
//!   covariance determinants and the volume bound.

pub mod asymptotics;
pub mod certificates;
pub mod error;
pub mod estimators;
pub mod model;
pub mod numerics;
pub mod parallel;
pub mod rng;
pub mod sampler;
pub mod zeros;

pub use asymptotics::{radial_analysis, NormalStatus, RadialAnalysis};
pub use error::{Error, Result};
pub use model::CoefficientModel;
pub use parallel::Workers;
