//! Corridor dynamics of self-propelled particles.
//!
//! Three models share one particle representation: the Vicsek model (with an
//! optional desired-direction variant), the social force model, and the
//! combined model in which Vicsek alignment and social forces both steer a
//! constant-speed particle. On top of the dynamics sit the observables
//! (order parameter, stationary statistics, density profile, cluster width,
//! power-law fits) and a seeded, parallel ensemble runner.

pub mod config;
pub mod dynamics;
pub mod error;
pub mod forces;
pub mod geometry;
pub mod neighbor;
pub mod observables;
pub mod particle;
pub mod runner;


pub use config::{ModelConfig, ModelKind};
pub use dynamics::{InitialHeadings, Simulation};
pub use error::{Result, SimError};
pub use geometry::{Arena, Boundary};
pub use particle::ParticleState;
