//! Probe-correct correction rule.
//!
//! Per axis, with region sign `S` and estimated error `e`:
//!
//! ```text
//! C = -0.7 e       if S e > 0
//! C = -0.3 e       if S = 0
//! C = -3 S         otherwise (contradiction, or S != 0 with e = 0)
//! ```
//!
//! From the second trial on, `|C|` is clipped at 4.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{ErrorEstimate, SignPair};
use crate::geometry::ErrorState;
use crate::sign::Sign;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerParams {
    pub consistent_factor: f64,
    pub no_sign_factor: f64,
    pub constant_step_x: f64,
    pub constant_step_theta: f64,
    pub clip_x: f64,
    pub clip_theta: f64,
    pub clip_from_trial: u32,
}

impl Default for ControllerParams {
    fn default() -> Self {
        ControllerParams {
            consistent_factor: 0.7,
            no_sign_factor: 0.3,
            constant_step_x: 3.0,
            constant_step_theta: 3.0,
            clip_x: 4.0,
            clip_theta: 4.0,
            clip_from_trial: 2,
        }
    }
}

impl ControllerParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("consistent_factor", self.consistent_factor),
            ("no_sign_factor", self.no_sign_factor),
            ("constant_step_x", self.constant_step_x),
            ("constant_step_theta", self.constant_step_theta),
            ("clip_x", self.clip_x),
            ("clip_theta", self.clip_theta),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if self.clip_from_trial < 2 {
            return Err(Error::InvalidParameter(format!(
                "clip_from_trial must be at least 2, got {}",
                self.clip_from_trial
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Correction {
    /// mm
    pub c_x: f64,
    /// degrees
    pub c_theta: f64,
}

fn axis(s: Sign, e: f64, factor: f64, no_sign: f64, step: f64) -> f64 {
    match s {
        Sign::Zero => -no_sign * e,
        _ if Sign::of(e) == s => -factor * e,
        _ => -step * s.as_f64(),
    }
}

pub fn correction(signs: SignPair, est: &ErrorEstimate, trial_index: u32, params: &ControllerParams) -> Correction {
    debug_assert!(trial_index >= 1, "trials are numbered from 1");
    let mut c = Correction {
        c_x: axis(signs.s_x, est.dx_e, params.consistent_factor, params.no_sign_factor, params.constant_step_x),
        c_theta: axis(
            signs.s_theta,
            est.dtheta_e,
            params.consistent_factor,
            params.no_sign_factor,
            params.constant_step_theta,
        ),
    };
    if trial_index >= params.clip_from_trial {
        c.c_x = c.c_x.clamp(-params.clip_x, params.clip_x);
        c.c_theta = c.c_theta.clamp(-params.clip_theta, params.clip_theta);
    }
    c
}

pub fn apply(error: ErrorState, corr: Correction) -> ErrorState {
    ErrorState::new(error.dx + corr.c_x, error.dtheta + corr.c_theta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn est(dx: f64, dt: f64) -> ErrorEstimate {
        ErrorEstimate {
            dx_e: dx,
            dtheta_e: dt,
            class_probs: None,
        }
    }

    #[test]
    fn zero_estimate_with_sign_takes_constant_step() {
        let p = ControllerParams::default();
        let c = correction(SignPair::new(Sign::Pos, Sign::Neg), &est(0.0, 0.0), 1, &p);
        assert_eq!((c.c_x, c.c_theta), (-3.0, 3.0));
    }

    #[test]
    fn first_trial_is_not_clipped() {
        let p = ControllerParams::default();
        let c = correction(SignPair::new(Sign::Pos, Sign::Zero), &est(14.0, 20.0), 1, &p);
        assert!((c.c_x + 9.8).abs() < 1e-12);
        assert!((c.c_theta + 6.0).abs() < 1e-12);
        let c2 = correction(SignPair::new(Sign::Pos, Sign::Zero), &est(14.0, 20.0), 2, &p);
        assert_eq!((c2.c_x, c2.c_theta), (-4.0, -4.0));
    }

    #[test]
    fn apply_adds() {
        let e = apply(ErrorState::new(14.0, 0.0), Correction { c_x: -9.8, c_theta: 0.0 });
        assert!((e.dx - 4.2).abs() < 1e-12);
        assert_eq!(apply(e, Correction::default()), e);
    }

    #[test]
    fn params_validation() {
        let mut p = ControllerParams::default();
        assert!(p.validate().is_ok());
        p.clip_from_trial = 1;
        assert!(p.validate().is_err());
    }
}
