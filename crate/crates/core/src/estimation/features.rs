//! Fixed-length summary of a tactile window.
//!
//! Per frame and per pad, seven statistics (see [`Stat`]). Layout:
//! `[(frame 1, A), (frame 1, B), ..., (frame 8, B)]`, each block seven wide,
//! followed by the per-pad sums over all frames (again A then B).
//! Total length [`FEATURE_DIM`].

use crate::error::{Error, Result};
use crate::sign::Sign;
use crate::tactile::{MarkerField, TactileSequence, FRAMES};

pub const STATS: usize = 7;
pub const SENSORS: usize = 2;
pub const FEATURE_DIM: usize = FRAMES * SENSORS * STATS + SENSORS * STATS;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(usize)]
pub enum Stat {
    MeanShearX,
    MeanShearZ,
    MeanShearNorm,
    MeanPressure,
    MaxAbsPressure,
    /// Pressure sum over markers times the sign of the mean x-shear, per
    /// marker.
    SignedPressure,
    /// Mean shear magnitude times the sign of the mean x-shear.
    SignedShearNorm,
}

impl Stat {
    pub const ALL: [Stat; STATS] = [
        Stat::MeanShearX,
        Stat::MeanShearZ,
        Stat::MeanShearNorm,
        Stat::MeanPressure,
        Stat::MaxAbsPressure,
        Stat::SignedPressure,
        Stat::SignedShearNorm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stat::MeanShearX => "mean_shear_x",
            Stat::MeanShearZ => "mean_shear_z",
            Stat::MeanShearNorm => "mean_shear_norm",
            Stat::MeanPressure => "mean_pressure",
            Stat::MaxAbsPressure => "max_abs_pressure",
            Stat::SignedPressure => "signed_pressure",
            Stat::SignedShearNorm => "signed_shear_norm",
        }
    }

    /// Statistics whose sign flips when the scene is mirrored across the gap.
    fn flips_under_mirror(self) -> bool {
        matches!(self, Stat::MeanShearX | Stat::MeanPressure | Stat::SignedShearNorm)
    }
}

/// Offset of `(frame, sensor, stat)`, frame 0-based.
pub fn frame_index(frame: usize, sensor: usize, stat: Stat) -> usize {
    (frame * SENSORS + sensor) * STATS + stat as usize
}

pub fn cumulative_index(sensor: usize, stat: Stat) -> usize {
    FRAMES * SENSORS * STATS + sensor * STATS + stat as usize
}

fn field_stats(f: &MarkerField) -> [f64; STATS] {
    let n = f.shear.len() as f64;
    let mut sx = 0.0;
    let mut sz = 0.0;
    let mut norm = 0.0;
    for s in &f.shear {
        sx += s[0];
        sz += s[1];
        norm += s[0].hypot(s[1]);
    }
    let psum: f64 = f.pressure.iter().sum();
    let mean_sx = sx / n;
    let side = Sign::of(mean_sx).as_f64();
    let mean_norm = norm / n;
    [
        mean_sx,
        sz / n,
        mean_norm,
        psum / n,
        f.max_abs_pressure(),
        side * psum / n,
        side * mean_norm,
    ]
}

pub fn extract_features(seq: &TactileSequence) -> Result<Vec<f64>> {
    if seq.frames.len() != FRAMES {
        return Err(Error::Contract(format!(
            "feature extraction needs {FRAMES} frames, got {}",
            seq.frames.len()
        )));
    }
    let mut out = vec![0.0; FEATURE_DIM];
    for (k, frame) in seq.frames.iter().enumerate() {
        for (s, field) in frame.sensors().into_iter().enumerate() {
            if field.shear.is_empty() || field.shear.len() != field.pressure.len() {
                return Err(Error::Contract("malformed marker field".into()));
            }
            for (j, v) in field_stats(field).into_iter().enumerate() {
                out[(k * SENSORS + s) * STATS + j] = v;
                out[FRAMES * SENSORS * STATS + s * STATS + j] += v;
            }
        }
    }
    Ok(out)
}

/// Feature vector of the mirrored scene: pads swap, odd statistics negate.
pub fn mirror_features(f: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; f.len()];
    let blocks = f.len() / STATS;
    for b in 0..blocks {
        let partner = b ^ 1;
        for stat in Stat::ALL {
            let sign = if stat.flips_under_mirror() { -1.0 } else { 1.0 };
            out[b * STATS + stat as usize] = sign * f[partner * STATS + stat as usize];
        }
    }
    out
}

/// Column names in feature order, used in dataset headers.
pub fn feature_names() -> Vec<String> {
    let pad = |s: usize| if s == 0 { "a" } else { "b" };
    let mut names = Vec::with_capacity(FEATURE_DIM);
    for k in 0..FRAMES {
        for s in 0..SENSORS {
            for stat in Stat::ALL {
                names.push(format!("f{}_{}_{}", k + 1, pad(s), stat.name()));
            }
        }
    }
    for s in 0..SENSORS {
        for stat in Stat::ALL {
            names.push(format!("sum_{}_{}", pad(s), stat.name()));
        }
    }
    names
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tactile::SensorLayout;

    #[test]
    fn dimension_and_names() {
        assert_eq!(FEATURE_DIM, 126);
        let names = feature_names();
        assert_eq!(names.len(), FEATURE_DIM);
        assert_eq!(names[frame_index(7, 1, Stat::SignedShearNorm)], "f8_b_signed_shear_norm");
        assert_eq!(names[cumulative_index(0, Stat::MeanShearZ)], "sum_a_mean_shear_z");
    }

    #[test]
    fn zero_sequence_gives_zero_vector() {
        let seq = TactileSequence::zeros(&SensorLayout::default(), FRAMES);
        assert!(extract_features(&seq).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn wrong_frame_count_is_rejected() {
        let seq = TactileSequence::zeros(&SensorLayout::default(), 5);
        assert!(matches!(extract_features(&seq), Err(Error::Contract(_))));
    }

    #[test]
    fn mirror_is_an_involution() {
        let f: Vec<f64> = (0..FEATURE_DIM).map(|i| (i as f64 * 0.37).sin()).collect();
        assert_eq!(mirror_features(&mirror_features(&f)), f);
    }
}
