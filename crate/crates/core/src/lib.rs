//! Agent-based SEIR simulation of pathogen spread in classrooms, driven by
//! observed (or synthetic) movement and body-orientation trajectories.
//!
//! The pipeline:
//!
//! * [`trajectory`] ingests dual hip-tag tracks, fuses them into a centroid
//!   and facing direction per person, and resamples to 1 Hz.
//! * [`kernel`] evaluates the distance/orientation infection kernel and
//!   calibrates its peak rate.
//! * [`epidemic`] advances the per-agent SEIR state one second at a time.
//! * [`scenario`] builds the school calendar, applies half-class and
//!   teacher-vaccination transforms and runs seeded Monte Carlo sweeps.
//! * [`metrics`] reduces run outcomes to saturation, transmission
//!   likelihood, hourly curves and symptomatic-emergence statistics.
//! * [`synthgen`] generates synthetic classrooms for testing.

pub mod cli;
pub mod config;
pub mod epidemic;
pub mod geometry;
pub mod kernel;
pub mod manifest;
pub mod metrics;
pub mod scenario;
pub mod synthgen;
pub mod trajectory;

pub use epidemic::{Compartment, DiseaseParams, EpidemicState, Event, EventKind};
pub use geometry::Vec2;
pub use kernel::{CalibrationInputs, KernelParams, PairGeometry, TransmissionMode};
pub use scenario::{RunOutcome, ScenarioConfig};
pub use trajectory::{Observation, Person, Role};
