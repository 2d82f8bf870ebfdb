use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::taxonomy::{class_to_signs, classify_direction_truth, ClassifierThresholds, DirectionClass};
use super::ErrorEstimate;
use crate::error::{Error, Result};
use crate::geometry::ErrorState;
use crate::sign::Sign;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Confusion {
    /// Wrong answers keep at least one of the true nonzero signs and never
    /// flip one.
    #[default]
    SignSafe,
    /// Wrong answers are any other region. Ablation only.
    Uniform,
}

impl Confusion {
    pub fn name(self) -> &'static str {
        match self {
            Confusion::SignSafe => "sign_safe",
            Confusion::Uniform => "uniform",
        }
    }

    pub fn parse(s: &str) -> Option<Confusion> {
        match s {
            "sign_safe" => Some(Confusion::SignSafe),
            "uniform" => Some(Confusion::Uniform),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub direction_accuracy: f64,
    pub confusion: Confusion,
    /// Uniform additive noise half-widths, mm and degrees.
    pub half_width_x: f64,
    pub half_width_theta: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            direction_accuracy: 0.744,
            confusion: Confusion::SignSafe,
            half_width_x: 1.9,
            half_width_theta: 1.9,
        }
    }
}

impl NoiseModel {
    pub fn exact() -> NoiseModel {
        NoiseModel {
            direction_accuracy: 1.0,
            half_width_x: 0.0,
            half_width_theta: 0.0,
            ..Default::default()
        }
    }

    /// Accuracy is allowed to be 0 here so the structured-noise worst case
    /// can be simulated.
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.direction_accuracy) {
            return Err(Error::InvalidParameter(format!(
                "direction_accuracy must lie in [0, 1], got {}",
                self.direction_accuracy
            )));
        }
        for (name, v) in [("half_width_x", self.half_width_x), ("half_width_theta", self.half_width_theta)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be non-negative, got {v}")));
            }
        }
        Ok(())
    }
}

fn compatible(truth: Sign, other: Sign) -> bool {
    truth.is_zero() || other == truth || other.is_zero()
}

/// Regions a misclassification of `truth` may land on, in class order.
pub fn admissible_confusions(truth: DirectionClass, confusion: Confusion) -> Vec<DirectionClass> {
    if truth == DirectionClass::NoError {
        return Vec::new();
    }
    let t = class_to_signs(truth);
    DirectionClass::ALL[..8]
        .iter()
        .copied()
        .filter(|&c| c != truth)
        .filter(|&c| match confusion {
            Confusion::Uniform => true,
            Confusion::SignSafe => {
                let s = class_to_signs(c);
                let shares = (!t.s_x.is_zero() && s.s_x == t.s_x)
                    || (!t.s_theta.is_zero() && s.s_theta == t.s_theta);
                shares && compatible(t.s_x, s.s_x) && compatible(t.s_theta, s.s_theta)
            }
        })
        .collect()
}

fn perturb(v: f64, half_width: f64, rng: &mut dyn RngCore) -> f64 {
    if half_width > 0.0 {
        v + rng.random_range(-half_width..=half_width)
    } else {
        v
    }
}

/// Surrogate estimator around a known true class.
pub fn noisy_estimate_for(
    truth: DirectionClass,
    error: ErrorState,
    model: &NoiseModel,
    rng: &mut dyn RngCore,
) -> (DirectionClass, ErrorEstimate) {
    let class = if model.direction_accuracy >= 1.0 || rng.random_bool(model.direction_accuracy) {
        truth
    } else {
        let options = admissible_confusions(truth, model.confusion);
        if options.is_empty() {
            truth
        } else {
            options[rng.random_range(0..options.len())]
        }
    };
    let est = ErrorEstimate {
        dx_e: perturb(error.dx, model.half_width_x, rng),
        dtheta_e: perturb(error.dtheta, model.half_width_theta, rng),
        class_probs: None,
    };
    (class, est)
}

pub fn noisy_estimate(
    error: ErrorState,
    model: &NoiseModel,
    thr: &ClassifierThresholds,
    rng: &mut dyn RngCore,
) -> (DirectionClass, ErrorEstimate) {
    noisy_estimate_for(classify_direction_truth(error, thr), error, model, rng)
}
