//! Resampling of irregular fused tracks onto the 1 Hz simulation grid.

use super::fusion::TrackSample;
use super::{Pose, TrajectoryError};
use crate::geometry::{wrap_angle, Vec2};

/// Sample gaps longer than this are treated as genuine absence.
pub const MAX_INTERPOLATION_GAP_S: f64 = 5.0;

/// Poses on consecutive integer seconds starting at `start`.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformTrack {
    pub start: i64,
    pub poses: Vec<Option<Pose>>,
}

impl UniformTrack {
    pub fn get(&self, t: i64) -> Option<Pose> {
        let k = t.checked_sub(self.start)?;
        usize::try_from(k).ok().and_then(|k| self.poses.get(k).copied().flatten())
    }
}

/// Default grid covering the track: `ceil(first)..=floor(last)`.
pub fn covering_grid(track: &[TrackSample]) -> Option<(i64, usize)> {
    let first = track.first()?.t.ceil() as i64;
    let last = track.last()?.t.floor() as i64;
    Some((first, usize::try_from(last - first + 1).unwrap_or(0)))
}

/// Interpolates a time-sorted track onto `len` integer seconds from `start`.
///
/// Positions are interpolated linearly and facings along the shortest arc.
/// Grid points that coincide with a sample reproduce it exactly; grid points
/// inside a gap wider than [`MAX_INTERPOLATION_GAP_S`] or outside the track
/// are absent.
pub fn resample(track: &[TrackSample], start: i64, len: usize) -> Result<UniformTrack, TrajectoryError> {
    if track.is_empty() {
        return Err(TrajectoryError::EmptyTrack);
    }
    if !track.windows(2).all(|w| w[0].t < w[1].t) {
        return Err(TrajectoryError::Validation(
            "track samples must be strictly time-sorted".into(),
        ));
    }

    let mut poses = Vec::with_capacity(len);
    let mut k = 0;
    for s in 0..len {
        let t = (start + s as i64) as f64;
        while k + 1 < track.len() && track[k + 1].t <= t {
            k += 1;
        }
        let a = &track[k];
        let pose = if a.t == t {
            Some(Pose {
                pos: a.pos,
                facing: a.facing,
            })
        } else if a.t < t && k + 1 < track.len() {
            let b = &track[k + 1];
            let gap = b.t - a.t;
            if gap > MAX_INTERPOLATION_GAP_S {
                None
            } else {
                let w = (t - a.t) / gap;
                let a0 = a.facing.angle();
                let turn = wrap_angle(b.facing.angle() - a0);
                let facing = Vec2::from_angle(a0 + w * turn).normalized().unwrap_or(a.facing);
                Some(Pose {
                    pos: a.pos.lerp(b.pos, w),
                    facing,
                })
            }
        } else {
            None
        };
        poses.push(pose);
    }
    Ok(UniformTrack { start, poses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn s(t: f64, x: f64, y: f64) -> TrackSample {
        TrackSample {
            t,
            pos: Vec2::new(x, y),
            facing: Vec2::new(1.0, 0.0),
        }
    }

    #[test]
    fn on_knot_value_is_exact() {
        let u = resample(&[s(0.0, 0.0, 0.0), s(0.5, 1.0, 0.0)], 0, 1).unwrap();
        assert_eq!(u.get(0).unwrap().pos, Vec2::new(0.0, 0.0));
    }

    #[test]
    fn midpoint_interpolation() {
        let u = resample(&[s(0.0, 0.0, 0.0), s(2.0, 2.0, 0.0)], 0, 3).unwrap();
        assert_eq!(u.get(1).unwrap().pos, Vec2::new(1.0, 0.0));
        assert_eq!(u.get(2).unwrap().pos, Vec2::new(2.0, 0.0));
    }

    #[test]
    fn long_gap_is_absent() {
        let u = resample(&[s(0.0, 0.0, 0.0), s(10.0, 1.0, 0.0)], 0, 11).unwrap();
        assert!(u.get(0).is_some());
        assert!((1..=9).all(|t| u.get(t).is_none()));
        assert!(u.get(10).is_some());
    }

    #[test]
    fn five_second_gap_is_bridged() {
        let u = resample(&[s(0.0, 0.0, 0.0), s(5.0, 5.0, 0.0)], 0, 6).unwrap();
        assert!((0..=5).all(|t| u.get(t).is_some()));
    }

    #[test]
    fn outside_track_is_absent() {
        let u = resample(&[s(2.0, 0.0, 0.0), s(3.0, 0.0, 0.0)], 0, 6).unwrap();
        assert!(u.get(0).is_none() && u.get(1).is_none());
        assert!(u.get(4).is_none() && u.get(5).is_none());
    }

    #[test]
    fn facing_takes_shortest_arc() {
        let mut a = s(0.0, 0.0, 0.0);
        let mut b = s(2.0, 0.0, 0.0);
        a.facing = Vec2::from_angle(PI - 0.1);
        b.facing = Vec2::from_angle(-PI + 0.1);
        let mid = resample(&[a, b], 0, 3).unwrap().get(1).unwrap().facing;
        // Through π, not through 0.
        assert!((mid - Vec2::new(-1.0, 0.0)).norm() < 1e-12);
        assert!((mid.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn idempotent_on_uniform_input() {
        let track: Vec<_> = (0..20)
            .map(|t| TrackSample {
                t: t as f64,
                pos: Vec2::new((t as f64 * 0.37).sin(), t as f64 * 0.1),
                facing: Vec2::from_angle(t as f64),
            })
            .collect();
        let u = resample(&track, 0, 20).unwrap();
        for (k, sample) in track.iter().enumerate() {
            let p = u.poses[k].unwrap();
            assert_eq!(p.pos, sample.pos);
            assert_eq!(p.facing, sample.facing);
        }
    }

    #[test]
    fn empty_track() {
        assert!(matches!(resample(&[], 0, 3), Err(TrajectoryError::EmptyTrack)));
    }
}
