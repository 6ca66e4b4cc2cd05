//! Observed classroom movement: roster, per-second poses and activity labels.
//!
//! Raw input comes from two hip-worn tags per person. [`fusion`] turns a
//! left/right tag pair into a centroid plus facing direction, [`resample`]
//! puts the irregular fused track on a 1 Hz grid, and [`io`] reads and writes
//! the CSV + sidecar file formats.

pub mod fusion;
pub mod io;
pub mod resample;

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec2;

pub use fusion::{fuse_tags, FusedTrack, Side, TagSample, TrackSample};
pub use io::{load_observation, save_observation, sidecar_path, InputFormat};
pub use resample::{resample, UniformTrack, MAX_INTERPOLATION_GAP_S};

/// Tolerance on the unit norm of facing vectors.
pub const FACING_NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("{path}: line {line}, column {column}: {message}")]
    Parse {
        path: String,
        line: u64,
        column: String,
        message: String,
    },
    #[error("{path}: missing columns {missing:?}")]
    Schema { path: String, missing: Vec<String> },
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("track is empty")]
    EmptyTrack,
    #[error("no left/right samples could be paired within {window_s} s")]
    UnpairedWindow { window_s: f64 },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Child,
    Teacher,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Child => "child",
            Role::Teacher => "teacher",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "child" => Ok(Role::Child),
            "teacher" => Ok(Role::Teacher),
            other => Err(format!("unknown role {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Person {
    pub id: String,
    pub role: Role,
}

impl Person {
    pub fn new(id: impl Into<String>, role: Role) -> Self {
        Self { id: id.into(), role }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activity {
    Structured,
    Unstructured,
}

impl Activity {
    pub fn as_str(self) -> &'static str {
        match self {
            Activity::Structured => "structured",
            Activity::Unstructured => "unstructured",
        }
    }
}

/// Centroid position and unit facing direction of one person.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub pos: Vec2,
    pub facing: Vec2,
}

/// Poses of every roster member at one integer second. `None` means absent.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryFrame {
    pub t: i64,
    pub poses: Vec<Option<Pose>>,
}

impl TrajectoryFrame {
    pub fn is_present(&self, idx: usize) -> bool {
        self.poses[idx].is_some()
    }
}

/// One recorded classroom session.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub class_id: String,
    pub roster: Vec<Person>,
    pub room_area: f64,
    pub frames: Vec<TrajectoryFrame>,
    /// Per-frame activity labels, when known.
    pub activity: Option<Vec<Activity>>,
}

impl Observation {
    /// Builds an observation after checking every structural invariant.
    pub fn new(
        class_id: impl Into<String>,
        roster: Vec<Person>,
        room_area: f64,
        frames: Vec<TrajectoryFrame>,
        activity: Option<Vec<Activity>>,
    ) -> Result<Self, TrajectoryError> {
        let obs = Self {
            class_id: class_id.into(),
            roster,
            room_area,
            frames,
            activity,
        };
        obs.validate()?;
        Ok(obs)
    }

    pub fn validate(&self) -> Result<(), TrajectoryError> {
        let fail = |m: String| Err(TrajectoryError::Validation(m));
        if !(self.room_area > 0.0 && self.room_area.is_finite()) {
            return fail(format!("room area must be positive, got {}", self.room_area));
        }
        let mut seen = HashSet::new();
        for p in &self.roster {
            if p.id.is_empty() {
                return fail("empty person id in roster".into());
            }
            if !seen.insert(p.id.as_str()) {
                return fail(format!("duplicate person id {:?}", p.id));
            }
        }
        for (k, frame) in self.frames.iter().enumerate() {
            if frame.poses.len() != self.roster.len() {
                return fail(format!(
                    "frame t={} has {} slots for a roster of {}",
                    frame.t,
                    frame.poses.len(),
                    self.roster.len()
                ));
            }
            if k > 0 && frame.t != self.frames[k - 1].t + 1 {
                return fail(format!(
                    "frames must advance by exactly 1 s (t={} follows t={})",
                    frame.t,
                    self.frames[k - 1].t
                ));
            }
            for (i, pose) in frame.poses.iter().enumerate() {
                if let Some(p) = pose {
                    if !p.pos.is_finite() {
                        return fail(format!("non-finite position for {} at t={}", self.roster[i].id, frame.t));
                    }
                    if (p.facing.norm() - 1.0).abs() > FACING_NORM_TOLERANCE {
                        return fail(format!(
                            "facing of {} at t={} is not unit length",
                            self.roster[i].id, frame.t
                        ));
                    }
                }
            }
        }
        if let Some(labels) = &self.activity {
            if labels.len() != self.frames.len() {
                return fail(format!(
                    "{} activity labels for {} frames",
                    labels.len(),
                    self.frames.len()
                ));
            }
        }
        Ok(())
    }

    /// Session length in seconds.
    pub fn session_length(&self) -> usize {
        self.frames.len()
    }

    pub fn index_of(&self, person_id: &str) -> Option<usize> {
        self.roster.iter().position(|p| p.id == person_id)
    }

    pub fn count_role(&self, role: Role) -> usize {
        self.roster.iter().filter(|p| p.role == role).count()
    }

    /// Restricts the observation to the given roster indices, in that order.
    pub fn subset(&self, keep: &[usize]) -> Observation {
        Observation {
            class_id: self.class_id.clone(),
            roster: keep.iter().map(|&i| self.roster[i].clone()).collect(),
            room_area: self.room_area,
            frames: self
                .frames
                .iter()
                .map(|f| TrajectoryFrame {
                    t: f.t,
                    poses: keep.iter().map(|&i| f.poses[i]).collect(),
                })
                .collect(),
            activity: self.activity.clone(),
        }
    }
}
