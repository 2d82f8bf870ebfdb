//! Vertical descent into the gap and the quasi-static pivot of a blocked
//! object about the block edge.
//!
//! The pivot angle uses a small-angle lever model: while the gripper keeps
//! descending by `descent_per_frame`, the object (held at its centroid)
//! rotates about the contacted edge by `descent / lever` radians per frame.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{rotated_footprint_interval, CrossSection, ErrorState, GapEnvironment, Vec2};
use crate::sign::Sign;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ContactSide {
    Left,
    Right,
    Both,
    None,
}

impl ContactSide {
    pub fn name(self) -> &'static str {
        match self {
            ContactSide::Left => "left",
            ContactSide::Right => "right",
            ContactSide::Both => "both",
            ContactSide::None => "none",
        }
    }

    pub fn mirrored(self) -> ContactSide {
        match self {
            ContactSide::Left => ContactSide::Right,
            ContactSide::Right => ContactSide::Left,
            other => other,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactParams {
    pub descent_per_frame: f64,
    pub frames: u32,
    pub min_lever: f64,
}

impl Default for ContactParams {
    fn default() -> Self {
        ContactParams {
            descent_per_frame: 0.5,
            frames: 8,
            min_lever: 5.0,
        }
    }
}

impl ContactParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.descent_per_frame.is_finite() && self.descent_per_frame > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "descent_per_frame must be positive, got {}",
                self.descent_per_frame
            )));
        }
        if self.frames == 0 {
            return Err(Error::InvalidParameter("frames must be at least 1".into()));
        }
        if !(self.min_lever.is_finite() && self.min_lever > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "min_lever must be positive, got {}",
                self.min_lever
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactEvent {
    pub blocked: bool,
    pub side: ContactSide,
    /// `(x, z)` of the contacted block edge in the gap frame.
    pub contact_point: Vec2,
    /// Horizontal distance from the contact edge to the object centroid.
    pub lever_arm: f64,
    /// Yaw of the pivot line relative to the gel plane, degrees.
    pub edge_angle: f64,
    pub overlap_left: f64,
    pub overlap_right: f64,
}

impl ContactEvent {
    /// The block the object pivots on; for two-sided jams the one with the
    /// larger overlap.
    pub fn pivot_side(&self) -> ContactSide {
        match self.side {
            ContactSide::Both => {
                if self.overlap_right > self.overlap_left {
                    ContactSide::Right
                } else if self.overlap_left > self.overlap_right {
                    ContactSide::Left
                } else if self.edge_angle >= 0.0 {
                    ContactSide::Right
                } else {
                    ContactSide::Left
                }
            }
            side => side,
        }
    }

    /// Normalized overlap asymmetry in `[0, 1]`; 1 for one-sided contacts.
    pub fn overlap_asymmetry(&self) -> f64 {
        match self.side {
            ContactSide::Both => {
                let total = self.overlap_left + self.overlap_right;
                if total > 0.0 {
                    (self.overlap_right - self.overlap_left).abs() / total
                } else {
                    0.0
                }
            }
            ContactSide::None => 0.0,
            _ => 1.0,
        }
    }
}

pub fn descend(shape: &CrossSection, error: ErrorState, env: &GapEnvironment) -> ContactEvent {
    let span = rotated_footprint_interval(shape, error.dtheta).shifted(error.dx);
    let half = env.half_gap();
    let left_hit = span.min <= -half;
    let right_hit = span.max >= half;
    let side = match (left_hit, right_hit) {
        (true, true) => ContactSide::Both,
        (true, false) => ContactSide::Left,
        (false, true) => ContactSide::Right,
        (false, false) => ContactSide::None,
    };
    let mut event = ContactEvent {
        blocked: side != ContactSide::None,
        side,
        contact_point: Vec2::new(0.0, env.block_top_z),
        lever_arm: 0.0,
        edge_angle: error.dtheta,
        overlap_left: (-half - span.min).max(0.0),
        overlap_right: (span.max - half).max(0.0),
    };
    let edge_x = match event.pivot_side() {
        ContactSide::Right => half,
        ContactSide::Left => -half,
        _ => return event,
    };
    event.contact_point = Vec2::new(edge_x, env.block_top_z);
    event.lever_arm = (edge_x - error.dx).abs();
    event
}

/// Pivot rotation of a blocked object.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Twist {
    /// Unit pivot axis in the gripper's horizontal plane, `(x, y)`.
    pub axis_xy: Vec2,
    /// Degrees per frame, non-negative.
    pub angle_per_frame: f64,
    pub frames: u32,
    /// Effective lever (clamped below by `min_lever`), mm.
    pub lever_arm: f64,
}

impl Twist {
    pub fn zero(frames: u32) -> Twist {
        Twist {
            axis_xy: Vec2::new(0.0, 1.0),
            angle_per_frame: 0.0,
            frames,
            lever_arm: 0.0,
        }
    }
}

pub fn pivot_twist(event: &ContactEvent, params: &ContactParams) -> Result<Twist> {
    if !event.blocked {
        return Err(Error::Contract(
            "pivot_twist requires a blocked contact event".into(),
        ));
    }
    params.validate()?;
    let lever = event.lever_arm.max(params.min_lever);
    let angle = (params.descent_per_frame / lever).to_degrees() * event.overlap_asymmetry();
    let (s, c) = event.edge_angle.to_radians().sin_cos();
    Ok(Twist {
        axis_xy: Vec2::new(s, c),
        angle_per_frame: angle,
        frames: params.frames,
        lever_arm: lever,
    })
}

/// Split of the pivot rotation into the gel-parallel part (marker shear) and
/// the gel-normal part (pressure change).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwistDecomposition {
    /// Degrees per frame about the gel-parallel axis.
    pub in_plane: f64,
    /// Degrees per frame about the gel-normal-crossing axis, signed.
    pub out_of_plane: f64,
    /// `Pos` when pivoting on the left block, `Neg` on the right.
    pub shear_sign: Sign,
    pub pressure_sign: Sign,
    pub lever_arm: f64,
}

pub fn decompose_twist(twist: &Twist, event: &ContactEvent) -> TwistDecomposition {
    let in_plane = twist.angle_per_frame * twist.axis_xy.y;
    let out_of_plane = twist.angle_per_frame * twist.axis_xy.x;
    let shear_sign = match event.pivot_side() {
        ContactSide::Right => Sign::Neg,
        _ => Sign::Pos,
    };
    TwistDecomposition {
        in_plane,
        out_of_plane,
        shear_sign,
        pressure_sign: Sign::of(out_of_plane) * shear_sign,
        lever_arm: twist.lever_arm,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{fits_gap, make_cross_section, ShapeSpec};

    fn rect() -> CrossSection {
        make_cross_section(
            &ShapeSpec::Rectangle {
                width: 51.0,
                length: 80.0,
            },
            4,
        )
        .unwrap()
    }

    #[test]
    fn right_contact_lever() {
        let env = GapEnvironment::with_gap(56.0);
        let ev = descend(&rect(), ErrorState::new(10.0, 0.0), &env);
        assert!(ev.blocked);
        assert_eq!(ev.side, ContactSide::Right);
        assert_eq!(ev.contact_point.x, 28.0);
        assert!((ev.lever_arm - 18.0).abs() < 1e-12);
    }

    #[test]
    fn free_descent_is_unblocked() {
        let env = GapEnvironment::with_gap(56.0);
        let ev = descend(&rect(), ErrorState::new(0.0, 0.0), &env);
        assert!(!ev.blocked);
        assert_eq!(ev.side, ContactSide::None);
        assert!(pivot_twist(&ev, &ContactParams::default()).is_err());
    }

    #[test]
    fn large_yaw_jams_both_sides() {
        let env = GapEnvironment::with_gap(56.0);
        let ev = descend(&rect(), ErrorState::new(0.0, 12.0), &env);
        assert_eq!(ev.side, ContactSide::Both);
        let width = rotated_footprint_interval(&rect(), 12.0).width();
        assert!((width - 66.5).abs() < 0.05);
        // Exactly symmetric jam: no net pivot.
        let tw = pivot_twist(&ev, &ContactParams::default()).unwrap();
        assert_eq!(tw.angle_per_frame, 0.0);
        let d = decompose_twist(&tw, &ev);
        assert_eq!((d.in_plane, d.out_of_plane), (0.0, 0.0));
        assert_eq!(d.pressure_sign, Sign::Zero);
    }

    #[test]
    fn lever_model_angle() {
        let env = GapEnvironment::with_gap(56.0);
        let ev = descend(&rect(), ErrorState::new(10.0, 0.0), &env);
        let tw = pivot_twist(&ev, &ContactParams::default()).unwrap();
        assert!((tw.angle_per_frame - (0.5f64 / 18.0).to_degrees()).abs() < 1e-12);
        assert!((tw.angle_per_frame - 1.59).abs() < 0.005);
        assert_eq!(tw.frames, 8);
    }

    #[test]
    fn angle_vanishes_for_distant_contact() {
        let mut ev = descend(&rect(), ErrorState::new(10.0, 0.0), &GapEnvironment::with_gap(56.0));
        let p = ContactParams::default();
        let mut last = f64::INFINITY;
        for lever in [1.0, 5.0, 10.0, 100.0, 1e4, 1e8] {
            ev.lever_arm = lever;
            let a = pivot_twist(&ev, &p).unwrap().angle_per_frame;
            assert!(a <= last);
            last = a;
        }
        assert!(last < 1e-6);
    }

    #[test]
    fn translation_only_contact_has_no_out_of_plane() {
        let env = GapEnvironment::with_gap(56.0);
        let ev = descend(&rect(), ErrorState::new(-9.0, 0.0), &env);
        let tw = pivot_twist(&ev, &ContactParams::default()).unwrap();
        let d = decompose_twist(&tw, &ev);
        assert_eq!(d.out_of_plane, 0.0);
        assert_eq!(d.pressure_sign, Sign::Zero);
        assert_eq!(d.shear_sign, Sign::Pos);
        assert!(d.in_plane > 0.0);
    }

    #[test]
    fn yawed_contact_has_both_components() {
        let env = GapEnvironment::with_gap(56.0);
        let ev = descend(&rect(), ErrorState::new(10.0, 10.0), &env);
        let tw = pivot_twist(&ev, &ContactParams::default()).unwrap();
        let d = decompose_twist(&tw, &ev);
        assert!(d.out_of_plane != 0.0 && d.in_plane != 0.0);
        assert_ne!(d.pressure_sign, Sign::Zero);
        let sum = d.in_plane.powi(2) + d.out_of_plane.powi(2);
        assert!((sum - tw.angle_per_frame.powi(2)).abs() <= 1e-9 * tw.angle_per_frame.powi(2));
    }

    #[test]
    fn descend_agrees_with_fits_gap_on_grid() {
        let env = GapEnvironment::with_gap(56.0);
        let shape = rect();
        for i in 0..61 {
            for j in 0..61 {
                let e = ErrorState::new(-15.3 + 30.6 * i as f64 / 60.0, -15.0 + 0.5 * j as f64);
                assert_eq!(descend(&shape, e, &env).blocked, !fits_gap(&shape, e, &env));
            }
        }
    }
}
