//! Scenario construction and the Monte Carlo runner.
//!
//! A scenario cell crosses classroom density (full or half class) with
//! teacher vaccination. Each run replays one observation's trajectory on
//! every school day of the calendar, starting from a single patient zero.
//! [`sweep`] runs every roster member as patient zero for a number of
//! replicates, in parallel, with per-task seeds so results do not depend on
//! scheduling.

mod calendar;
mod runner;
mod transforms;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use calendar::{build_calendar, SchoolCalendar, Session, Weekday};
pub use runner::{derive_seed, hourly_counts, run_simulation, run_simulation_with_table, sweep, sweep_with_table, RateTable, RunOutcome};
pub use transforms::{apply_half_class, apply_vaccination, half_class_members};

use crate::epidemic::{DiseaseParams, EpidemicError};
use crate::kernel::{KernelError, KernelParams};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("half-class scenario needs at least one teacher in the roster")]
    NoTeacher,
    #[error("invalid scenario configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Epidemic(#[from] EpidemicError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DensityVariant {
    #[default]
    Full,
    Half,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VaccinationVariant {
    #[default]
    None,
    Teachers,
}

/// How half-class subsets are chosen across replicates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HalfClassMode {
    /// Fresh subset per replicate, always containing the patient zero.
    #[default]
    Resample,
    /// One subset per sweep; only its members serve as patient zero.
    Fixed,
}

/// One cell of the density × vaccination cross.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ScenarioCell {
    pub density: DensityVariant,
    pub vaccination: VaccinationVariant,
}

impl ScenarioCell {
    pub const ALL: [ScenarioCell; 4] = [
        ScenarioCell::new(DensityVariant::Full, VaccinationVariant::None),
        ScenarioCell::new(DensityVariant::Full, VaccinationVariant::Teachers),
        ScenarioCell::new(DensityVariant::Half, VaccinationVariant::None),
        ScenarioCell::new(DensityVariant::Half, VaccinationVariant::Teachers),
    ];

    pub const fn new(density: DensityVariant, vaccination: VaccinationVariant) -> Self {
        Self { density, vaccination }
    }
}

impl fmt::Display for ScenarioCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = match self.density {
            DensityVariant::Full => "full",
            DensityVariant::Half => "half",
        };
        let v = match self.vaccination {
            VaccinationVariant::None => "novax",
            VaccinationVariant::Teachers => "vax",
        };
        write!(f, "{d}-{v}")
    }
}

impl FromStr for ScenarioCell {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ScenarioCell::ALL
            .into_iter()
            .find(|c| c.to_string() == s.trim())
            .ok_or_else(|| format!("unknown scenario {s:?} (expected full-novax, full-vax, half-novax or half-vax)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub density_variant: DensityVariant,
    pub vaccination_variant: VaccinationVariant,
    pub vaccine_efficacy: f64,
    pub horizon_days: u32,
    pub reps_per_patient_zero: u32,
    pub base_seed: u64,
    #[serde(default)]
    pub half_class_mode: HalfClassMode,
    #[serde(default)]
    pub start_weekday: Weekday,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            density_variant: DensityVariant::Full,
            vaccination_variant: VaccinationVariant::None,
            vaccine_efficacy: 0.858,
            horizon_days: 28,
            reps_per_patient_zero: 60,
            base_seed: 0,
            half_class_mode: HalfClassMode::Resample,
            start_weekday: Weekday::Monday,
        }
    }
}

impl ScenarioConfig {
    pub fn cell(&self) -> ScenarioCell {
        ScenarioCell::new(self.density_variant, self.vaccination_variant)
    }

    pub fn with_cell(mut self, cell: ScenarioCell) -> Self {
        self.density_variant = cell.density;
        self.vaccination_variant = cell.vaccination;
        self
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !(0.0..=1.0).contains(&self.vaccine_efficacy) {
            return Err(ScenarioError::InvalidConfig(format!(
                "vaccine_efficacy = {}",
                self.vaccine_efficacy
            )));
        }
        if self.horizon_days < 1 {
            return Err(ScenarioError::InvalidConfig("horizon must be at least 1 day".into()));
        }
        if self.reps_per_patient_zero < 1 {
            return Err(ScenarioError::InvalidConfig("reps must be at least 1".into()));
        }
        Ok(())
    }
}

/// Kernel and disease parameters of a simulation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SimParams {
    pub kernel: KernelParams,
    pub disease: DiseaseParams,
}

impl SimParams {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.kernel.validate()?;
        self.disease.validate()?;
        Ok(())
    }
}
