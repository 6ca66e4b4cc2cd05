//! Synthetic classroom sessions.
//!
//! Unstructured intervals use random-waypoint motion with facing along the
//! direction of travel. Structured intervals seat children in rings around
//! table clusters, facing the cluster center, with teachers standing at the
//! front of a cluster.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec2;
use crate::trajectory::{Activity, Observation, Person, Pose, Role, TrajectoryError, TrajectoryFrame};

pub const SEAT_RING_RADIUS_M: f64 = 0.8;
pub const SEAT_JITTER_SIGMA_M: f64 = 0.1;
/// Jitter is truncated to this radius so seats stay within 1 m of the center.
pub const SEAT_JITTER_MAX_M: f64 = 0.2;
pub const TEACHER_OFFSET_M: f64 = 1.3;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("room dimensions must be positive, got {0} x {1}")]
    Room(f64, f64),
    #[error("schedule: {0}")]
    Schedule(String),
    #[error("speed range must satisfy 0 < min <= max, got [{0}, {1}]")]
    Speed(f64, f64),
    #[error("children per cluster must be at least 1")]
    ClusterSize,
    #[error(transparent)]
    Observation(#[from] TrajectoryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleBlock {
    pub start_s: u32,
    pub end_s: u32,
    pub regime: Activity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub class_id: String,
    pub n_children: usize,
    pub n_teachers: usize,
    pub room_width: f64,
    pub room_height: f64,
    pub session_length: u32,
    /// Must tile `[0, session_length)`.
    pub schedule: Vec<ScheduleBlock>,
    pub speed_min: f64,
    pub speed_max: f64,
    pub children_per_cluster: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            class_id: "synthetic".into(),
            n_children: 12,
            n_teachers: 3,
            room_width: 8.0,
            room_height: 8.0,
            session_length: 10_800,
            schedule: mixed_schedule(10_800),
            speed_min: 0.2,
            speed_max: 1.0,
            children_per_cluster: 4,
            seed: 0,
        }
    }
}

impl SynthConfig {
    /// A single block of `regime` covering the whole session.
    pub fn with_single_regime(mut self, regime: Activity) -> Self {
        self.schedule = if self.session_length == 0 {
            Vec::new()
        } else {
            vec![ScheduleBlock {
                start_s: 0,
                end_s: self.session_length,
                regime,
            }]
        };
        self
    }

    pub fn room_area(&self) -> f64 {
        self.room_width * self.room_height
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let (w, h) = (self.room_width, self.room_height);
        if !(w > 0.0 && h > 0.0 && w.is_finite() && h.is_finite()) {
            return Err(ConfigError::Room(w, h));
        }
        if !(self.speed_min > 0.0 && self.speed_min <= self.speed_max && self.speed_max.is_finite()) {
            return Err(ConfigError::Speed(self.speed_min, self.speed_max));
        }
        if self.children_per_cluster == 0 {
            return Err(ConfigError::ClusterSize);
        }
        let mut blocks = self.schedule.clone();
        blocks.sort_by_key(|b| b.start_s);
        let mut cursor = 0;
        for b in &blocks {
            if b.end_s <= b.start_s {
                return Err(ConfigError::Schedule(format!("empty block [{}, {})", b.start_s, b.end_s)));
            }
            if b.start_s < cursor {
                return Err(ConfigError::Schedule(format!("block at {} s overlaps the previous one", b.start_s)));
            }
            if b.start_s > cursor {
                return Err(ConfigError::Schedule(format!("gap from {} s to {} s", cursor, b.start_s)));
            }
            cursor = b.end_s;
        }
        if cursor != self.session_length {
            return Err(ConfigError::Schedule(format!(
                "blocks end at {} s but the session lasts {} s",
                cursor, self.session_length
            )));
        }
        Ok(())
    }
}

/// Alternating structured and unstructured blocks over thirds and sixths of
/// the session: structured, free play, structured, free play.
pub fn mixed_schedule(session_length: u32) -> Vec<ScheduleBlock> {
    let cut = |num: u64, den: u64| (u64::from(session_length) * num / den) as u32;
    let bounds = [0, cut(1, 3), cut(1, 2), cut(5, 6), session_length];
    let regimes = [Activity::Structured, Activity::Unstructured, Activity::Structured, Activity::Unstructured];
    bounds
        .windows(2)
        .zip(regimes)
        .filter(|(w, _)| w[1] > w[0])
        .map(|(w, regime)| ScheduleBlock {
            start_s: w[0],
            end_s: w[1],
            regime,
        })
        .collect()
}

struct Room {
    w: f64,
    h: f64,
}

impl Room {
    fn clamp(&self, p: Vec2) -> Vec2 {
        Vec2::new(p.x.clamp(0.0, self.w), p.y.clamp(0.0, self.h))
    }

    fn uniform(&self, rng: &mut ChaCha8Rng) -> Vec2 {
        Vec2::new(rng.random_range(0.0..=self.w), rng.random_range(0.0..=self.h))
    }
}

/// Table cluster centers on a grid over the room.
pub fn cluster_centers(n_clusters: usize, width: f64, height: f64) -> Vec<Vec2> {
    let cols = (n_clusters as f64).sqrt().ceil().max(1.0) as usize;
    let rows = n_clusters.div_ceil(cols).max(1);
    (0..n_clusters)
        .map(|k| {
            let (r, c) = (k / cols, k % cols);
            Vec2::new((c as f64 + 0.5) * width / cols as f64, (r as f64 + 0.5) * height / rows as f64)
        })
        .collect()
}

/// Assigned cluster center and seat of every roster member (children first,
/// then teachers).
fn seating(cfg: &SynthConfig) -> (Vec<Vec2>, Vec<Pose>) {
    let n_clusters = cfg.n_children.div_ceil(cfg.children_per_cluster).max(1);
    let centers = cluster_centers(n_clusters, cfg.room_width, cfg.room_height);
    let mut seats = Vec::with_capacity(cfg.n_children + cfg.n_teachers);
    let mut members = vec![0usize; n_clusters];
    for i in 0..cfg.n_children {
        members[i % n_clusters] += 1;
    }
    let mut slot = vec![0usize; n_clusters];
    for i in 0..cfg.n_children {
        let k = i % n_clusters;
        let angle = TAU * slot[k] as f64 / members[k] as f64;
        slot[k] += 1;
        let offset = Vec2::from_angle(angle) * SEAT_RING_RADIUS_M;
        seats.push(Pose {
            pos: centers[k] + offset,
            facing: -Vec2::from_angle(angle),
        });
    }
    for t in 0..cfg.n_teachers {
        let k = t % n_clusters;
        seats.push(Pose {
            pos: centers[k] - Vec2::new(0.0, TEACHER_OFFSET_M),
            facing: Vec2::new(0.0, 1.0),
        });
    }
    let mut assigned = Vec::with_capacity(seats.len());
    for i in 0..cfg.n_children {
        assigned.push(centers[i % n_clusters]);
    }
    for t in 0..cfg.n_teachers {
        assigned.push(centers[t % n_clusters]);
    }
    (assigned, seats)
}

struct Walker {
    pos: Vec2,
    facing: Vec2,
    target: Vec2,
    speed: f64,
}

/// Generates a session. Identical configs give identical observations.
pub fn generate(cfg: &SynthConfig) -> Result<Observation, ConfigError> {
    cfg.validate()?;
    let room = Room {
        w: cfg.room_width,
        h: cfg.room_height,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let jitter = Normal::new(0.0, SEAT_JITTER_SIGMA_M).expect("positive sigma");

    let roster: Vec<Person> = (0..cfg.n_children)
        .map(|i| Person::new(format!("c{:02}", i + 1), Role::Child))
        .chain((0..cfg.n_teachers).map(|i| Person::new(format!("t{}", i + 1), Role::Teacher)))
        .collect();
    let (centers, seats) = seating(cfg);

    let mut walkers: Vec<Walker> = seats
        .iter()
        .map(|s| {
            let target = room.uniform(&mut rng);
            Walker {
                pos: room.clamp(s.pos),
                facing: s.facing,
                target,
                speed: rng.random_range(cfg.speed_min..=cfg.speed_max),
            }
        })
        .collect();

    let mut regime = vec![Activity::Unstructured; cfg.session_length as usize];
    for b in &cfg.schedule {
        regime[b.start_s as usize..b.end_s as usize].fill(b.regime);
    }

    let mut frames = Vec::with_capacity(regime.len());
    for (t, &r) in regime.iter().enumerate() {
        let poses = match r {
            Activity::Structured => seats
                .iter()
                .zip(&centers)
                .zip(walkers.iter_mut())
                .map(|((seat, &center), w)| {
                    let mut d = Vec2::new(jitter.sample(&mut rng), jitter.sample(&mut rng));
                    if d.norm() > SEAT_JITTER_MAX_M {
                        d = d * (SEAT_JITTER_MAX_M / d.norm());
                    }
                    let pos = room.clamp(seat.pos + d);
                    let facing = (center - pos).normalized().unwrap_or(seat.facing);
                    w.pos = pos;
                    w.facing = facing;
                    Some(Pose { pos, facing })
                })
                .collect(),
            Activity::Unstructured => walkers
                .iter_mut()
                .map(|w| {
                    let mut step = w.speed;
                    loop {
                        let to = w.target - w.pos;
                        let dist = to.norm();
                        if dist > step {
                            w.facing = to.normalized().unwrap_or(w.facing);
                            w.pos = room.clamp(w.pos + w.facing * step);
                            break;
                        }
                        if let Some(f) = to.normalized() {
                            w.facing = f;
                        }
                        w.pos = w.target;
                        step -= dist;
                        w.target = room.uniform(&mut rng);
                        w.speed = rng.random_range(cfg.speed_min..=cfg.speed_max);
                        if step <= 0.0 {
                            break;
                        }
                    }
                    Some(Pose {
                        pos: w.pos,
                        facing: w.facing,
                    })
                })
                .collect(),
        };
        frames.push(TrajectoryFrame { t: t as i64, poses });
    }

    Ok(Observation::new(
        cfg.class_id.clone(),
        roster,
        cfg.room_area(),
        frames,
        Some(regime),
    )?)
}
