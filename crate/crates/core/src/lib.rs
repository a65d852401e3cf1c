//! Solver library for stiff collisional kinetic equations.
//!
//! The state is a distribution function `f(x, v)` on a tensor grid. Free
//! transport uses upwind WENO differences, collisions use a BGK relaxation or
//! a Fourier-spectral Boltzmann operator, and time stepping ranges from plain
//! explicit Runge-Kutta to telescopic projective integration.
//!
//! Every numerical type is generic over [`Real`]; the aliases below fix the
//! scalar to `f64`, which is what the scenario driver uses.

pub mod bgk;
pub mod boltzmann;
pub mod config;
pub mod driver;
pub mod error;
pub mod integrators;
pub mod phase_space;
pub mod planner;
pub mod real;
pub mod scenario;
pub mod spectrum;
pub mod system;
pub mod weno;

pub use error::{Error, Result};
pub use real::Real;

pub type VelocityGrid = phase_space::VelocityGrid<f64>;
pub type SpatialGrid = phase_space::SpatialGrid<f64>;
pub type DistributionField = phase_space::DistributionField<f64>;
pub type MomentSet = phase_space::MomentSet<f64>;
pub type CoreMoments = phase_space::CoreMoments<f64>;
pub type WenoConfig = weno::WenoConfig<f64>;
pub type BgkConfig = bgk::BgkConfig<f64>;
pub type SpectralPlan = boltzmann::SpectralPlan<f64>;
pub type RkTableau = integrators::RkTableau<f64>;
pub type IntegratorPlan = integrators::IntegratorPlan<f64>;
pub type KineticSystem = system::KineticSystem<f64>;
pub type CollisionModel = system::CollisionModel<f64>;
