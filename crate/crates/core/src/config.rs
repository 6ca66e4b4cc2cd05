//! Layered run configuration: built-in defaults, then a TOML file, then
//! command-line flags.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::epidemic::{DiseaseParams, IncubationModel, RecoveryModel};
use crate::kernel::{calibrate_beta_max, CalibrationInputs, KernelParams, TransmissionMode, METERS_PER_FOOT};
use crate::scenario::{
    DensityVariant, HalfClassMode, ScenarioCell, ScenarioConfig, ScenarioError, SimParams, VaccinationVariant,
    Weekday,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

impl From<ScenarioError> for ConfigError {
    fn from(e: ScenarioError) -> Self {
        ConfigError::Invalid(e.to_string())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelLayer {
    /// Per second. Calibrated when absent.
    pub beta_max: Option<f64>,
    pub sigma_r: Option<f64>,
    /// Radians.
    pub sigma_theta: Option<f64>,
    pub lambda_decay: Option<f64>,
    pub mode: Option<TransmissionMode>,
    pub min_distance: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiseaseLayer {
    pub latency: Option<f64>,
    pub p_symptomatic: Option<f64>,
    pub mean_incubation: Option<f64>,
    pub gamma: Option<f64>,
    pub dt: Option<f64>,
    pub incubation_model: Option<IncubationModel>,
    pub recovery_model: Option<RecoveryModel>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationLayer {
    pub r0: Option<f64>,
    /// Per day. Falls back to the disease recovery rate.
    pub gamma: Option<f64>,
    pub n_contacts: Option<f64>,
    /// Meters.
    pub contact_radius: Option<f64>,
    /// Minutes per day.
    pub contact_duration: Option<f64>,
}

/// One configuration layer. Every field is optional; later layers win.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigLayer {
    pub density_variant: Option<DensityVariant>,
    pub vaccination_variant: Option<VaccinationVariant>,
    pub scenarios: Option<Vec<String>>,
    pub vaccine_efficacy: Option<f64>,
    pub horizon_days: Option<u32>,
    #[serde(alias = "reps_per_patient_zero")]
    pub reps: Option<u32>,
    pub base_seed: Option<u64>,
    pub half_class_mode: Option<HalfClassMode>,
    pub start_weekday: Option<Weekday>,
    #[serde(default)]
    pub kernel: KernelLayer,
    #[serde(default)]
    pub disease: DiseaseLayer,
    #[serde(default)]
    pub calibration: CalibrationLayer,
}

macro_rules! overlay {
    ($dst:expr, $src:expr, $($f:ident),+) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )+
    };
}

impl ConfigLayer {
    /// `self` overlaid with every field `top` sets.
    pub fn merge(mut self, top: &ConfigLayer) -> ConfigLayer {
        overlay!(
            self,
            top,
            density_variant,
            vaccination_variant,
            scenarios,
            vaccine_efficacy,
            horizon_days,
            reps,
            base_seed,
            half_class_mode,
            start_weekday
        );
        overlay!(self.kernel, top.kernel, beta_max, sigma_r, sigma_theta, lambda_decay, mode, min_distance);
        overlay!(
            self.disease,
            top.disease,
            latency,
            p_symptomatic,
            mean_incubation,
            gamma,
            dt,
            incubation_model,
            recovery_model
        );
        overlay!(self.calibration, top.calibration, r0, gamma, n_contacts, contact_radius, contact_duration);
        self
    }

    pub fn from_toml(text: &str, path: &str) -> Result<ConfigLayer, ConfigError> {
        toml::from_str(text).map_err(|e| {
            let (line, column) = e
                .span()
                .map(|s| {
                    let before = &text[..s.start.min(text.len())];
                    let line = before.matches('\n').count() + 1;
                    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
                    (line, col)
                })
                .unwrap_or((0, 0));
            ConfigError::Parse {
                path: path.to_string(),
                line,
                column,
                message: e.message().to_string(),
            }
        })
    }

    pub fn load(path: &Path) -> Result<ConfigLayer, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text, &path.display().to_string())
    }
}

/// Where the peak kernel rate came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BetaSource {
    Calibrated,
    Explicit,
}

/// Fully resolved parameters of a simulation batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub scenario: ScenarioConfig,
    /// Cells to run, in output order.
    pub scenarios: Vec<ScenarioCell>,
    pub params: SimParams,
    pub calibration: CalibrationInputs,
    pub beta_source: BetaSource,
}

impl ResolvedConfig {
    /// Resolves `layer` over the built-in defaults.
    pub fn resolve(layer: &ConfigLayer) -> Result<ResolvedConfig, ConfigError> {
        let d = ScenarioConfig::default();
        let scenario = ScenarioConfig {
            density_variant: layer.density_variant.unwrap_or(d.density_variant),
            vaccination_variant: layer.vaccination_variant.unwrap_or(d.vaccination_variant),
            vaccine_efficacy: layer.vaccine_efficacy.unwrap_or(d.vaccine_efficacy),
            horizon_days: layer.horizon_days.unwrap_or(d.horizon_days),
            reps_per_patient_zero: layer.reps.unwrap_or(d.reps_per_patient_zero),
            base_seed: layer.base_seed.unwrap_or(d.base_seed),
            half_class_mode: layer.half_class_mode.unwrap_or(d.half_class_mode),
            start_weekday: layer.start_weekday.unwrap_or(d.start_weekday),
        };
        scenario.validate()?;

        let scenarios = match &layer.scenarios {
            Some(labels) => {
                let mut cells = Vec::new();
                for l in labels {
                    let c: ScenarioCell = l.parse().map_err(ConfigError::Invalid)?;
                    if !cells.contains(&c) {
                        cells.push(c);
                    }
                }
                if cells.is_empty() {
                    return Err(ConfigError::Invalid("empty scenario list".into()));
                }
                cells
            }
            None => ScenarioCell::ALL
                .into_iter()
                .filter(|c| layer.density_variant.is_none_or(|v| v == c.density))
                .filter(|c| layer.vaccination_variant.is_none_or(|v| v == c.vaccination))
                .collect(),
        };

        let dd = DiseaseParams::default();
        let dl = &layer.disease;
        let disease = DiseaseParams {
            latency: dl.latency.unwrap_or(dd.latency),
            p_symptomatic: dl.p_symptomatic.unwrap_or(dd.p_symptomatic),
            mean_incubation: dl.mean_incubation.unwrap_or(dd.mean_incubation),
            gamma: dl.gamma.unwrap_or(dd.gamma),
            dt: dl.dt.unwrap_or(dd.dt),
            incubation_model: dl.incubation_model.unwrap_or(dd.incubation_model),
            recovery_model: dl.recovery_model.unwrap_or(dd.recovery_model),
        };

        let kd = KernelParams::default();
        let kl = &layer.kernel;
        let sigma_r = kl.sigma_r.unwrap_or(kd.sigma_r);
        let sigma_theta = kl.sigma_theta.unwrap_or(kd.sigma_theta);
        let cd = CalibrationInputs::default();
        let cl = &layer.calibration;
        let calibration = CalibrationInputs {
            r0: cl.r0.unwrap_or(cd.r0),
            gamma: cl.gamma.unwrap_or(disease.gamma),
            n_contacts: cl.n_contacts.unwrap_or(cd.n_contacts),
            contact_radius: cl.contact_radius.unwrap_or(cd.contact_radius),
            contact_duration: cl.contact_duration.unwrap_or(cd.contact_duration),
            sigma_r,
            sigma_theta,
        };
        let (beta_max, beta_source) = match kl.beta_max {
            Some(b) => (b, BetaSource::Explicit),
            None => (calibrate_beta_max(&calibration).beta_max_per_second, BetaSource::Calibrated),
        };
        let kernel = KernelParams {
            beta_max,
            sigma_r,
            sigma_theta,
            lambda_decay: kl.lambda_decay.unwrap_or(kd.lambda_decay),
            mode: kl.mode.unwrap_or(kd.mode),
            min_distance: kl.min_distance.unwrap_or(kd.min_distance),
        };
        let params = SimParams { kernel, disease };
        params.validate()?;
        if !beta_max.is_finite() {
            return Err(ConfigError::Invalid("calibrated beta_max is not finite".into()));
        }

        Ok(ResolvedConfig {
            scenario,
            scenarios,
            params,
            calibration,
            beta_source,
        })
    }
}

/// Length in meters; accepts `m` (default) and `ft` suffixes.
pub fn parse_length(s: &str) -> Result<f64, String> {
    parse_with_units(s, &[("ft", METERS_PER_FOOT), ("m", 1.0)])
}

/// Angle in radians; accepts `rad` (default) and `deg` suffixes.
pub fn parse_angle(s: &str) -> Result<f64, String> {
    parse_with_units(s, &[("deg", PI / 180.0), ("rad", 1.0)])
}

fn parse_with_units(s: &str, units: &[(&str, f64)]) -> Result<f64, String> {
    let s = s.trim();
    let (num, factor) = units
        .iter()
        .find_map(|&(suffix, f)| s.strip_suffix(suffix).map(|n| (n.trim(), f)))
        .unwrap_or((s, 1.0));
    let v: f64 = num.parse().map_err(|_| format!("invalid number {s:?}"))?;
    if !v.is_finite() {
        return Err(format!("non-finite value {s:?}"));
    }
    Ok(v * factor)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve_to_calibrated_values() {
        let r = ResolvedConfig::resolve(&ConfigLayer::default()).unwrap();
        assert_eq!(r.scenarios, ScenarioCell::ALL.to_vec());
        assert_eq!(r.beta_source, BetaSource::Calibrated);
        assert!((r.params.kernel.beta_max - 9.463025948329014e-05).abs() < 1e-18);
        assert_eq!(r.scenario, ScenarioConfig::default());
    }

    #[test]
    fn later_layers_win() {
        let file = ConfigLayer::from_toml("horizon_days = 7\nreps = 3\n[kernel]\nsigma_r = 1.5\n", "f").unwrap();
        let flags = ConfigLayer {
            reps: Some(5),
            ..ConfigLayer::default()
        };
        let r = ResolvedConfig::resolve(&ConfigLayer::default().merge(&file).merge(&flags)).unwrap();
        assert_eq!(r.scenario.horizon_days, 7);
        assert_eq!(r.scenario.reps_per_patient_zero, 5);
        assert_eq!(r.params.kernel.sigma_r, 1.5);
        assert_eq!(r.calibration.sigma_r, 1.5);
    }

    #[test]
    fn variants_narrow_default_scenarios() {
        let l = ConfigLayer::from_toml("density_variant = \"half\"\n", "f").unwrap();
        let r = ResolvedConfig::resolve(&l).unwrap();
        assert_eq!(r.scenarios.len(), 2);
        assert!(r.scenarios.iter().all(|c| c.density == DensityVariant::Half));
        let l = ConfigLayer::from_toml("scenarios = [\"full-vax\", \"full-vax\"]\n", "f").unwrap();
        assert_eq!(ResolvedConfig::resolve(&l).unwrap().scenarios.len(), 1);
    }

    #[test]
    fn zero_r0_gives_zero_beta() {
        let l = ConfigLayer::from_toml("[calibration]\nr0 = 0.0\n", "f").unwrap();
        assert_eq!(ResolvedConfig::resolve(&l).unwrap().params.kernel.beta_max, 0.0);
    }

    #[test]
    fn parse_errors_have_positions() {
        match ConfigLayer::from_toml("reps = 2\nhorizon_days = \"x\"\n", "c.toml") {
            Err(ConfigError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(ConfigLayer::from_toml("bogus = 1\n", "c.toml").is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        let l = ConfigLayer::from_toml("vaccine_efficacy = 2.0\n", "f").unwrap();
        assert!(ResolvedConfig::resolve(&l).is_err());
        let l = ConfigLayer::from_toml("scenarios = [\"nope\"]\n", "f").unwrap();
        assert!(ResolvedConfig::resolve(&l).is_err());
    }

    #[test]
    fn unit_suffixes() {
        assert_eq!(parse_length("6ft").unwrap(), 6.0 * 0.3048);
        assert_eq!(parse_length("2").unwrap(), 2.0);
        assert_eq!(parse_length("1.5 m").unwrap(), 1.5);
        assert!((parse_angle("45deg").unwrap() - PI / 4.0).abs() < 1e-15);
        assert!(parse_length("abc").is_err());
    }
}
