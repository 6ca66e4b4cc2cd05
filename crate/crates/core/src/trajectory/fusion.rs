//! Left/right hip-tag fusion.
//!
//! A person's position is the midpoint of their two tags. With the left hip
//! at −x and the right hip at +x the person faces +y, so the facing direction
//! is the left→right vector rotated +90°.

use serde::{Deserialize, Serialize};

use super::TrajectoryError;
use crate::geometry::Vec2;

/// Maximum timestamp difference for a left and a right sample to be paired.
pub const PAIRING_WINDOW_S: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TagSample {
    pub t: f64,
    pub person_id: String,
    pub side: Side,
    pub x: f64,
    pub y: f64,
}

impl TagSample {
    pub fn pos(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

/// A fused (centroid, facing) sample at an arbitrary time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackSample {
    pub t: f64,
    pub pos: Vec2,
    pub facing: Vec2,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FusedTrack {
    pub samples: Vec<TrackSample>,
    /// Times of tag samples that found no partner within the pairing window.
    pub unpaired: Vec<f64>,
    /// Number of samples whose tags coincided and inherited a neighbour's facing.
    pub degenerate: usize,
}

/// Facing implied by a left and a right tag position, if they are distinct.
pub fn facing_from_tags(left: Vec2, right: Vec2) -> Option<Vec2> {
    (right - left).perp().normalized()
}

fn nearest(samples: &[TagSample], t: f64, hint: &mut usize) -> Option<usize> {
    if samples.is_empty() {
        return None;
    }
    while *hint + 1 < samples.len() && samples[*hint + 1].t <= t {
        *hint += 1;
    }
    let mut best = *hint;
    if *hint + 1 < samples.len() && (samples[*hint + 1].t - t).abs() < (samples[best].t - t).abs() {
        best = *hint + 1;
    }
    Some(best)
}

/// Fuses time-sorted left and right tag streams of one person.
///
/// Each left sample is paired with the nearest right sample within
/// [`PAIRING_WINDOW_S`]; the fused sample sits at the mean of the two
/// timestamps. Samples without a partner are reported in
/// [`FusedTrack::unpaired`] and leave a hole that resampling either bridges
/// or marks absent.
pub fn fuse_tags(left: &[TagSample], right: &[TagSample]) -> Result<FusedTrack, TrajectoryError> {
    if left.is_empty() && right.is_empty() {
        return Err(TrajectoryError::EmptyTrack);
    }
    let sorted = |s: &[TagSample]| s.windows(2).all(|w| w[0].t <= w[1].t);
    if !sorted(left) || !sorted(right) {
        return Err(TrajectoryError::Validation("tag samples must be time-sorted".into()));
    }

    let mut track = FusedTrack::default();
    let mut right_used = vec![false; right.len()];
    let mut raw: Vec<(f64, Vec2, Option<Vec2>)> = Vec::with_capacity(left.len());
    let mut hint = 0;
    for l in left {
        match nearest(right, l.t, &mut hint) {
            Some(k) if (right[k].t - l.t).abs() <= PAIRING_WINDOW_S => {
                right_used[k] = true;
                let r = &right[k];
                let t = 0.5 * (l.t + r.t);
                // Fused times must stay strictly increasing.
                if raw.last().is_some_and(|&(prev, _, _)| t <= prev) {
                    continue;
                }
                raw.push((t, l.pos().lerp(r.pos(), 0.5), facing_from_tags(l.pos(), r.pos())));
            }
            _ => track.unpaired.push(l.t),
        }
    }
    for (k, r) in right.iter().enumerate() {
        if !right_used[k] {
            // Right samples may be left unused simply because the left
            // stream is sparser; only count those with no left partner at all.
            let close = left.iter().any(|l| (l.t - r.t).abs() <= PAIRING_WINDOW_S);
            if !close {
                track.unpaired.push(r.t);
            }
        }
    }
    track.unpaired.sort_by(f64::total_cmp);

    if raw.is_empty() {
        return Err(TrajectoryError::UnpairedWindow {
            window_s: PAIRING_WINDOW_S,
        });
    }

    // Coincident tags carry the previous facing; leading ones take the first
    // valid facing; a track with no valid facing at all faces +y.
    let first_valid = raw.iter().find_map(|s| s.2).unwrap_or(Vec2::new(0.0, 1.0));
    let mut carried = first_valid;
    for (t, pos, facing) in raw {
        let facing = match facing {
            Some(f) => {
                carried = f;
                f
            }
            None => {
                track.degenerate += 1;
                carried
            }
        };
        track.samples.push(TrackSample { t, pos, facing });
    }
    Ok(track)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tag(t: f64, side: Side, x: f64, y: f64) -> TagSample {
        TagSample {
            t,
            person_id: "p".into(),
            side,
            x,
            y,
        }
    }

    #[test]
    fn hips_along_x_face_plus_y() {
        let f = fuse_tags(&[tag(0.0, Side::Left, -0.2, 0.0)], &[tag(0.0, Side::Right, 0.2, 0.0)]).unwrap();
        assert_eq!(f.samples[0].pos, Vec2::new(0.0, 0.0));
        assert!((f.samples[0].facing - Vec2::new(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn hips_along_y_face_plus_x() {
        let f = fuse_tags(&[tag(0.0, Side::Left, 0.0, 0.2)], &[tag(0.0, Side::Right, 0.0, -0.2)]).unwrap();
        assert_eq!(f.samples[0].pos, Vec2::new(0.0, 0.0));
        assert!((f.samples[0].facing - Vec2::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn coincident_tags_carry_previous_facing() {
        let left = [tag(0.0, Side::Left, 0.0, 0.2), tag(0.5, Side::Left, 1.0, 1.0)];
        let right = [tag(0.0, Side::Right, 0.0, -0.2), tag(0.5, Side::Right, 1.0, 1.0)];
        let f = fuse_tags(&left, &right).unwrap();
        assert_eq!(f.degenerate, 1);
        assert_eq!(f.samples[1].facing, f.samples[0].facing);
        assert_eq!(f.samples[1].pos, Vec2::new(1.0, 1.0));
    }

    #[test]
    fn silent_tag_is_reported() {
        let left = [tag(0.0, Side::Left, -0.2, 0.0), tag(3.0, Side::Left, -0.2, 0.0)];
        let right = [tag(0.1, Side::Right, 0.2, 0.0)];
        let f = fuse_tags(&left, &right).unwrap();
        assert_eq!(f.samples.len(), 1);
        assert_eq!(f.unpaired, vec![3.0]);
        assert!((f.samples[0].t - 0.05).abs() < 1e-15);
    }

    #[test]
    fn nothing_pairs() {
        let left = [tag(0.0, Side::Left, 0.0, 0.0)];
        let right = [tag(2.0, Side::Right, 1.0, 0.0)];
        assert!(matches!(fuse_tags(&left, &right), Err(TrajectoryError::UnpairedWindow { .. })));
        assert!(matches!(fuse_tags(&[], &[]), Err(TrajectoryError::EmptyTrack)));
    }

    proptest! {
        #[test]
        fn facing_is_perpendicular_with_fixed_chirality(
            lx in -10.0..10.0f64, ly in -10.0..10.0f64,
            rx in -10.0..10.0f64, ry in -10.0..10.0f64,
        ) {
            let (l, r) = (Vec2::new(lx, ly), Vec2::new(rx, ry));
            prop_assume!(l.distance(r) > 1e-6);
            let f = facing_from_tags(l, r).unwrap();
            let hips = r - l;
            prop_assert!((f.norm() - 1.0).abs() < 1e-12);
            prop_assert!(hips.dot(f).abs() <= 1e-9 * hips.norm());
            prop_assert!(hips.cross(f) > 0.0);
        }
    }
}
