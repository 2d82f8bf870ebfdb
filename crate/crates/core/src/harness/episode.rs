use std::sync::Arc;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ShapeSetup};
use crate::contact::{decompose_twist, descend, pivot_twist, ContactSide};
use crate::controller::{apply, correction, Correction};
use crate::error::Result;
use crate::estimation::{
    classify_direction_truth, label_blocked, noisy_estimate_for, oracle_estimate, DirectionClass,
    ErrorEstimate, LinearEstimator, NoiseModel,
};
use crate::geometry::ErrorState;
use crate::tactile::{render_sequence, slip_frame};

/// Estimator used inside the loop.
#[derive(Debug, Clone)]
pub enum Estimator {
    Oracle,
    Noisy(NoiseModel),
    Linear(Arc<LinearEstimator>),
}

impl Estimator {
    pub fn name(&self) -> &'static str {
        match self {
            Estimator::Oracle => "oracle",
            Estimator::Noisy(_) => "noisy",
            Estimator::Linear(_) => "linear",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_index: u32,
    pub error_before: ErrorState,
    pub blocked: bool,
    pub side: ContactSide,
    pub class_true: DirectionClass,
    /// Estimator output; absent on the final, unblocked trial.
    pub class_est: Option<DirectionClass>,
    pub estimate: Option<ErrorEstimate>,
    pub correction: Option<Correction>,
    /// First frame at which the slip monitor fired.
    pub slip_frame: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode_id: usize,
    pub initial_error: ErrorState,
    pub trials: Vec<TrialRecord>,
    pub success: bool,
    /// Attempts used; `max_trials + 1` on failure.
    pub trial_count: u32,
}

/// Independent random stream for `(seed, stream)`.
pub fn episode_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn sample_error(range_x: f64, range_theta: f64, rng: &mut dyn RngCore) -> ErrorState {
    let draw = |r: f64, rng: &mut dyn RngCore| if r > 0.0 { rng.random_range(-r..=r) } else { 0.0 };
    let dx = draw(range_x, rng);
    let dtheta = draw(range_theta, rng);
    ErrorState::new(dx, dtheta)
}

/// Probe-correct loop from `initial` until an unblocked descent or
/// `max_trials` blocked attempts.
pub fn run_episode(
    cfg: &ExperimentConfig,
    setup: &ShapeSetup,
    estimator: &Estimator,
    episode_id: usize,
    initial: ErrorState,
    rng: &mut dyn RngCore,
) -> Result<EpisodeRecord> {
    let mut error = initial;
    let mut trials = Vec::new();
    for t in 1..=cfg.max_trials {
        let event = descend(&setup.section, error, &setup.env);
        if !event.blocked {
            trials.push(TrialRecord {
                trial_index: t,
                error_before: error,
                blocked: false,
                side: event.side,
                class_true: classify_direction_truth(error, &cfg.thresholds),
                class_est: None,
                estimate: None,
                correction: None,
                slip_frame: None,
            });
            return Ok(EpisodeRecord {
                episode_id,
                initial_error: initial,
                trials,
                success: true,
                trial_count: t,
            });
        }
        let (truth, _) = label_blocked(error, &cfg.thresholds);
        let twist = pivot_twist(&event, &cfg.contact)?;
        let decomp = decompose_twist(&twist, &event);
        let seq = render_sequence(&decomp, &twist, &cfg.layout, cfg.tactile_noise, rng.next_u64())?;
        let slip = slip_frame(&seq, cfg.tau_slip)?;
        let (class_est, estimate) = match estimator {
            Estimator::Oracle => (truth, oracle_estimate(error)),
            Estimator::Noisy(model) => noisy_estimate_for(truth, error, model, rng),
            Estimator::Linear(model) => model.predict(&seq)?,
        };
        let corr = correction(class_est.signs(), &estimate, t, &cfg.controller);
        trials.push(TrialRecord {
            trial_index: t,
            error_before: error,
            blocked: true,
            side: event.side,
            class_true: truth,
            class_est: Some(class_est),
            estimate: Some(estimate),
            correction: Some(corr),
            slip_frame: slip,
        });
        error = apply(error, corr);
    }
    Ok(EpisodeRecord {
        episode_id,
        initial_error: initial,
        trials,
        success: false,
        trial_count: cfg.max_trials + 1,
    })
}
