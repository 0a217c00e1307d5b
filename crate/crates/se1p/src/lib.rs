//! Spectral Ewald electrostatics for systems periodic in one direction.
//!
//! This crate evaluates electrostatic potentials, forces and energies for
//! systems of point charges that are periodic along `z` and free in `x`
//! and `y`. The Coulomb sum is split with an Ewald screening parameter
//! into a short-range part, evaluated directly with a cell list, and a
//! smooth long-range part, evaluated on a grid with adaptively padded
//! FFTs, a spectrally truncated Green's function for the zero mode and
//! Gaussian spreading and gathering windows.
//!
//! A slow, high-accuracy reference summation of the same decomposition
//! lives in [`direct`] and backs the test suite; truncation-parameter
//! selection from an error tolerance lives in [`estimate`]; the grid
//! pipeline is split across [`gridding`], [`aft`], [`greens`] and
//! [`solver`]; quadrature-error theory checks live in [`quadtheory`].
//!
//! The numerical core is generic over the floating-point scalar through
//! the [`real::Real`] trait. The common double-precision entry points are
//! re-exported at the crate root.

pub mod aft;
pub mod direct;
pub mod error;
pub mod estimate;
pub mod greens;
pub mod gridding;
pub mod model;
pub mod quadtheory;
pub mod real;
pub mod realspace;
pub mod solver;
pub mod specfun;
pub mod vec3;

pub(crate) mod dd;

pub use error::{Result, SeError};
pub use model::{EnergyBreakdown, ParticleSystem, Results};
pub use vec3::Vec3;

/// Double-precision particle system.
pub type System = model::ParticleSystem<f64>;
/// Double-precision result bundle.
pub type Output = model::Results<f64>;
