//! Error-region taxonomy and the estimators that map a blocked contact to a
//! region and a magnitude.

pub mod features;
pub mod linear;
pub mod noise;
pub mod taxonomy;

use serde::{Deserialize, Serialize};

use crate::geometry::ErrorState;

pub use features::{extract_features, mirror_features, FEATURE_DIM};
pub use linear::{fit_linear_estimator, FitParams, LabeledFeatures, LinearEstimator, Metrics};
pub use noise::{noisy_estimate, noisy_estimate_for, Confusion, NoiseModel};
pub use taxonomy::{
    class_to_signs, classify_direction_truth, label_blocked, signs_to_class, ClassifierThresholds,
    DirectionClass, SignPair, NUM_CLASSES,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorEstimate {
    /// mm
    pub dx_e: f64,
    /// degrees
    pub dtheta_e: f64,
    /// Class probabilities in `DirectionClass::index` order, when the
    /// estimator produces them.
    pub class_probs: Option<[f64; NUM_CLASSES]>,
}

pub fn oracle_estimate(error: ErrorState) -> ErrorEstimate {
    ErrorEstimate {
        dx_e: error.dx,
        dtheta_e: error.dtheta,
        class_probs: None,
    }
}
