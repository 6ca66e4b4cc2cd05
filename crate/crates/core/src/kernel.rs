//! Pairwise infection-rate kernel.
//!
//! The rate between two people falls off as a Gaussian in their separation
//! and in how far each one is turned away from the other:
//!
//! ```text
//! β(r, θi, θj) = β_max · exp(−r²/(2σ_r²) − (θi² + θj²)/(2σ_θ²)) · e^(−λt)
//! ```
//!
//! The temporal factor only applies to airborne transmission; droplet
//! transmission is contemporaneous. The peak rate `β_max` is calibrated from
//! a population reproduction number and a close-contact definition, see
//! [`calibrate_beta_max`].

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec2;

pub const SECONDS_PER_DAY: f64 = 86_400.0;
pub const SECONDS_PER_HOUR: f64 = 3_600.0;
pub const METERS_PER_FOOT: f64 = 0.3048;

/// Below this separation two positions are treated as the same point.
pub const COINCIDENT_EPSILON_M: f64 = 1e-9;

/// Default separation floor used when tags overlap.
pub const DEFAULT_MIN_DISTANCE_M: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("positions coincide (r = {r:e} m)")]
    CoincidentPositions { r: f64 },
    #[error("invalid kernel parameter: {0}")]
    InvalidParams(String),
    #[error("room area must be positive, got {0}")]
    ZeroArea(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransmissionMode {
    /// Contemporaneous contact only; no temporal decay.
    #[default]
    Droplet,
    /// Past emissions keep contributing with exponential decay.
    Airborne,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    /// Peak pairwise rate, per second.
    pub beta_max: f64,
    /// Distance scale, meters.
    pub sigma_r: f64,
    /// Orientation scale, radians.
    pub sigma_theta: f64,
    /// Airborne decay rate, per hour.
    pub lambda_decay: f64,
    pub mode: TransmissionMode,
    /// Separation floor applied by callers when positions overlap, meters.
    #[serde(default = "default_min_distance")]
    pub min_distance: f64,
}

fn default_min_distance() -> f64 {
    DEFAULT_MIN_DISTANCE_M
}

impl Default for KernelParams {
    fn default() -> Self {
        let cal = calibrate_beta_max(&CalibrationInputs::default());
        Self {
            beta_max: cal.beta_max_per_second,
            sigma_r: 2.0,
            sigma_theta: PI / 4.0,
            lambda_decay: 0.34,
            mode: TransmissionMode::Droplet,
            min_distance: DEFAULT_MIN_DISTANCE_M,
        }
    }
}

impl KernelParams {
    pub fn validate(&self) -> Result<(), KernelError> {
        let bad = |what: &str, v: f64| Err(KernelError::InvalidParams(format!("{what} = {v}")));
        // A zero peak rate is accepted: it is the null-transmission model.
        if !(self.beta_max >= 0.0 && self.beta_max.is_finite()) {
            return bad("beta_max", self.beta_max);
        }
        if !(self.sigma_r > 0.0 && self.sigma_r.is_finite()) {
            return bad("sigma_r", self.sigma_r);
        }
        if !(self.sigma_theta > 0.0 && self.sigma_theta.is_finite()) {
            return bad("sigma_theta", self.sigma_theta);
        }
        if !(self.lambda_decay >= 0.0 && self.lambda_decay.is_finite()) {
            return bad("lambda_decay", self.lambda_decay);
        }
        if !(self.min_distance >= 0.0 && self.min_distance.is_finite()) {
            return bad("min_distance", self.min_distance);
        }
        Ok(())
    }
}

/// Distance and the two facing angles of an ordered pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairGeometry {
    pub r: f64,
    pub theta_i: f64,
    pub theta_j: f64,
}

impl PairGeometry {
    pub fn swapped(self) -> Self {
        Self {
            r: self.r,
            theta_i: self.theta_j,
            theta_j: self.theta_i,
        }
    }
}

/// Geometry of the pair (i, j): separation and the angle each person's
/// facing direction makes with the line toward the other.
pub fn relative_geometry(
    pos_i: Vec2,
    facing_i: Vec2,
    pos_j: Vec2,
    facing_j: Vec2,
) -> Result<PairGeometry, KernelError> {
    let d = pos_j - pos_i;
    let r = d.norm();
    if r < COINCIDENT_EPSILON_M {
        return Err(KernelError::CoincidentPositions { r });
    }
    Ok(PairGeometry {
        r,
        theta_i: facing_i.angle_between(d),
        theta_j: facing_j.angle_between(-d),
    })
}

/// [`relative_geometry`] with the separation floored at `r_min`.
///
/// Coincident positions carry no direction, so both angles are taken as 0
/// (face to face), the most conservative reading.
pub fn clamped_geometry(
    pos_i: Vec2,
    facing_i: Vec2,
    pos_j: Vec2,
    facing_j: Vec2,
    r_min: f64,
) -> PairGeometry {
    match relative_geometry(pos_i, facing_i, pos_j, facing_j) {
        Ok(mut g) => {
            g.r = g.r.max(r_min);
            g
        }
        Err(_) => PairGeometry {
            r: r_min,
            theta_i: 0.0,
            theta_j: 0.0,
        },
    }
}

/// Contemporaneous pairwise infection rate, per second.
#[inline]
pub fn pair_rate(g: &PairGeometry, p: &KernelParams) -> f64 {
    let radial = g.r * g.r / (2.0 * p.sigma_r * p.sigma_r);
    let angular = (g.theta_i * g.theta_i + g.theta_j * g.theta_j) / (2.0 * p.sigma_theta * p.sigma_theta);
    p.beta_max * (-(radial + angular)).exp()
}

/// Applies `e^(−λ·elapsed)` to a rate. `elapsed` in hours, `lambda_decay` per hour.
#[inline]
pub fn airborne_decay(rate: f64, elapsed_hours: f64, lambda_decay: f64) -> f64 {
    debug_assert!(elapsed_hours >= 0.0);
    if lambda_decay == 0.0 || elapsed_hours == 0.0 {
        return rate;
    }
    rate * (-lambda_decay * elapsed_hours).exp()
}

/// Population-level quantities used to pin `β_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationInputs {
    pub r0: f64,
    /// Recovery rate, per day.
    pub gamma: f64,
    /// Average number of daily contacts.
    pub n_contacts: f64,
    /// Close-contact radius, meters.
    pub contact_radius: f64,
    /// Cumulative close-contact time per day, minutes.
    pub contact_duration: f64,
    pub sigma_r: f64,
    pub sigma_theta: f64,
}

impl Default for CalibrationInputs {
    fn default() -> Self {
        Self {
            r0: 2.0,
            gamma: 0.1,
            n_contacts: 10.0,
            contact_radius: 6.0 * METERS_PER_FOOT,
            contact_duration: 15.0,
            sigma_r: 2.0,
            sigma_theta: PI / 4.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// Daily contact density, per square meter.
    pub rho_daily: f64,
    /// Average daily infection rate `R₀·γ`.
    pub beta_bar_daily: f64,
    pub beta_max_per_day: f64,
    pub beta_max_per_second: f64,
}

/// Inverts the averaged kernel `β̄ = β_max σ_r² σ_θ² ρ` at the daily
/// contact density implied by the close-contact definition.
pub fn calibrate_beta_max(c: &CalibrationInputs) -> Calibration {
    let rho_daily =
        c.n_contacts / (PI * c.contact_radius * c.contact_radius) * (c.contact_duration / (24.0 * 60.0));
    let beta_bar_daily = c.r0 * c.gamma;
    let beta_max_per_day =
        beta_bar_daily / (c.sigma_r * c.sigma_r * c.sigma_theta * c.sigma_theta * rho_daily);
    Calibration {
        rho_daily,
        beta_bar_daily,
        beta_max_per_day,
        beta_max_per_second: beta_max_per_day / SECONDS_PER_DAY,
    }
}

/// People per square meter.
pub fn density(n_people: usize, area: f64) -> Result<f64, KernelError> {
    if area.is_nan() || area <= 0.0 {
        return Err(KernelError::ZeroArea(area));
    }
    Ok(n_people as f64 / area)
}
