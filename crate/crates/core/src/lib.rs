//! Two-site coagulation with multiplicative kernel and migration.
//!
//! * [`particles`] and [`mc`]: exact Monte Carlo of the finite-N coalescent.
//! * [`truncated`] and [`moments`]: deterministic Smoluchowski-type limits.
//! * [`meanfield`]: closed forms of the one-site model.
//! * [`postgel`]: the hybrid jump/ODE model after gelation.
//! * [`compare`]: Monte Carlo versus truncated ODE deviation reports.

pub mod compare;
pub mod config;
pub mod kernel;
pub mod mc;
pub mod meanfield;
pub mod moments;
pub mod ode;
pub mod particles;
pub mod postgel;
pub mod stats;
pub mod truncated;

pub use config::{ConfigError, SimConfig};
pub use particles::{MassSpectrum, ParticleSystem, Site, SnapshotRecord};
