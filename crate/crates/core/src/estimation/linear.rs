//! Fittable two-model estimator: a multinomial logistic classifier for the
//! error region and a ridge regressor for the error magnitude.
//!
//! Both act on scale-normalized features: the vector is divided by the summed
//! magnitude of the cumulative vertical shear, so the inputs are ratios that
//! do not depend on how far the object pivoted.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::{cumulative_index, extract_features, Stat, FEATURE_DIM};
use super::taxonomy::{DirectionClass, NUM_CLASSES};
use super::ErrorEstimate;
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::geometry::ErrorState;
use crate::tactile::TactileSequence;

const WEIGHTS_MAGIC: &str = "tactile-pack-linear v1";
const CHUNK: usize = 256;
const MIN_SCALE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledFeatures {
    pub features: Vec<f64>,
    pub class: DirectionClass,
    pub error: ErrorState,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitParams {
    pub reg_lambda: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub execution: Execution,
}

impl Default for FitParams {
    fn default() -> Self {
        FitParams {
            reg_lambda: 1e-4,
            iterations: 1000,
            learning_rate: 0.5,
            execution: Execution::Parallel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearEstimator {
    pub feature_dim: usize,
    /// `NUM_CLASSES x feature_dim`, row-major.
    pub class_weights: Vec<f64>,
    pub class_bias: Vec<f64>,
    /// `2 x feature_dim`, row-major: dx then dtheta.
    pub magnitude_weights: Vec<f64>,
    pub magnitude_bias: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub samples: usize,
    pub accuracy: f64,
    pub mae_x: f64,
    pub mae_theta: f64,
}

pub fn normalize_features(raw: &[f64]) -> Vec<f64> {
    let scale = raw[cumulative_index(0, Stat::MeanShearZ)].abs()
        + raw[cumulative_index(1, Stat::MeanShearZ)].abs();
    if scale < MIN_SCALE || !scale.is_finite() {
        return vec![0.0; raw.len()];
    }
    raw.iter().map(|v| v / scale).collect()
}

pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

impl LinearEstimator {
    pub fn class_scores(&self, features: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(features)?;
        let x = normalize_features(features);
        Ok((0..NUM_CLASSES)
            .map(|c| self.class_bias[c] + dot(&self.class_weights[c * self.feature_dim..][..self.feature_dim], &x))
            .collect())
    }

    pub fn predict_features(&self, features: &[f64]) -> Result<(DirectionClass, ErrorEstimate)> {
        let scores = self.class_scores(features)?;
        let probs = softmax(&scores);
        let class = DirectionClass::from_index(argmax(&scores)).expect("nine scores");
        let x = normalize_features(features);
        let d = self.feature_dim;
        let est = ErrorEstimate {
            dx_e: self.magnitude_bias[0] + dot(&self.magnitude_weights[..d], &x),
            dtheta_e: self.magnitude_bias[1] + dot(&self.magnitude_weights[d..2 * d], &x),
            class_probs: Some(probs.try_into().expect("nine probabilities")),
        };
        Ok((class, est))
    }

    pub fn predict(&self, seq: &TactileSequence) -> Result<(DirectionClass, ErrorEstimate)> {
        self.predict_features(&extract_features(seq)?)
    }

    fn check_dim(&self, features: &[f64]) -> Result<()> {
        if features.len() != self.feature_dim {
            return Err(Error::Contract(format!(
                "estimator expects {} features, got {}",
                self.feature_dim,
                features.len()
            )));
        }
        Ok(())
    }

    pub fn evaluate(&self, samples: &[LabeledFeatures]) -> Result<Metrics> {
        let mut correct = 0usize;
        let (mut ex, mut et) = (0.0, 0.0);
        for s in samples {
            let (c, est) = self.predict_features(&s.features)?;
            correct += (c == s.class) as usize;
            ex += (est.dx_e - s.error.dx).abs();
            et += (est.dtheta_e - s.error.dtheta).abs();
        }
        let n = samples.len().max(1) as f64;
        Ok(Metrics {
            samples: samples.len(),
            accuracy: correct as f64 / n,
            mae_x: ex / n,
            mae_theta: et / n,
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{WEIGHTS_MAGIC}\nfeature_dim {}\nclasses {}\n",
            self.feature_dim, NUM_CLASSES
        );
        let mut row = |label: &str, w: &[f64], b: f64| {
            out.push_str(label);
            for v in w {
                out.push_str(&format!(" {v:e}"));
            }
            out.push_str(&format!(" {b:e}\n"));
        };
        let d = self.feature_dim;
        for c in 0..NUM_CLASSES {
            row("class", &self.class_weights[c * d..(c + 1) * d], self.class_bias[c]);
        }
        for k in 0..2 {
            row("magnitude", &self.magnitude_weights[k * d..(k + 1) * d], self.magnitude_bias[k]);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<LinearEstimator> {
        let bad = |m: String| Error::format("weights file", m);
        let mut lines = text.lines();
        if lines.next() != Some(WEIGHTS_MAGIC) {
            return Err(bad(format!("missing header line `{WEIGHTS_MAGIC}`")));
        }
        let mut header = |key: &str| -> Result<usize> {
            let line = lines.next().ok_or_else(|| bad(format!("missing `{key}`")))?;
            line.strip_prefix(key)
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| bad(format!("expected `{key} <n>`, got `{line}`")))
        };
        let d = header("feature_dim")?;
        let classes = header("classes")?;
        if classes != NUM_CLASSES {
            return Err(bad(format!("expected {NUM_CLASSES} classes, found {classes}")));
        }
        let mut parse_row = |label: &str| -> Result<(Vec<f64>, f64)> {
            let line = lines
                .next()
                .ok_or_else(|| bad(format!("truncated before `{label}` row")))?;
            let mut parts = line.split_whitespace();
            if parts.next() != Some(label) {
                return Err(bad(format!("expected `{label}` row")));
            }
            let vals: Vec<f64> = parts
                .map(|p| p.parse::<f64>().map_err(|e| bad(format!("`{p}`: {e}"))))
                .collect::<Result<_>>()?;
            if vals.len() != d + 1 {
                return Err(bad(format!("`{label}` row has {} values, expected {}", vals.len(), d + 1)));
            }
            Ok((vals[..d].to_vec(), vals[d]))
        };
        let mut est = LinearEstimator {
            feature_dim: d,
            class_weights: Vec::with_capacity(NUM_CLASSES * d),
            class_bias: Vec::with_capacity(NUM_CLASSES),
            magnitude_weights: Vec::with_capacity(2 * d),
            magnitude_bias: Vec::with_capacity(2),
        };
        for _ in 0..NUM_CLASSES {
            let (w, b) = parse_row("class")?;
            est.class_weights.extend(w);
            est.class_bias.push(b);
        }
        for _ in 0..2 {
            let (w, b) = parse_row("magnitude")?;
            est.magnitude_weights.extend(w);
            est.magnitude_bias.push(b);
        }
        if est.feature_dim != FEATURE_DIM {
            return Err(bad(format!(
                "feature_dim {} does not match this build ({FEATURE_DIM})",
                est.feature_dim
            )));
        }
        Ok(est)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<LinearEstimator> {
        match std::fs::read_to_string(path) {
            Ok(text) => LinearEstimator::from_text(&text),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(Error::MissingWeights(path.to_path_buf())),
            Err(e) => Err(Error::io(path, e)),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Standardized design matrix over the non-constant columns.
struct Design {
    active: Vec<usize>,
    mean: Vec<f64>,
    std: Vec<f64>,
    /// `n x (m + 1)` row-major, the last column is the constant 1.
    z: Vec<f64>,
    n: usize,
}

impl Design {
    fn width(&self) -> usize {
        self.active.len() + 1
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.z[i * self.width()..(i + 1) * self.width()]
    }

    fn build(x: &[Vec<f64>]) -> Result<Design> {
        let n = x.len();
        let d = x[0].len();
        let mut active = Vec::new();
        let mut mean = Vec::new();
        let mut std = Vec::new();
        for j in 0..d {
            let mu = x.iter().map(|r| r[j]).sum::<f64>() / n as f64;
            let var = x.iter().map(|r| (r[j] - mu).powi(2)).sum::<f64>() / n as f64;
            let sd = var.sqrt();
            if sd > 1e-12 * (1.0 + mu.abs()) {
                active.push(j);
                mean.push(mu);
                std.push(sd);
            }
        }
        if active.is_empty() {
            return Err(Error::Fit("degenerate feature matrix: every feature is constant".into()));
        }
        let w = active.len() + 1;
        let mut z = vec![0.0; n * w];
        for (i, r) in x.iter().enumerate() {
            for (k, &j) in active.iter().enumerate() {
                z[i * w + k] = (r[j] - mean[k]) / std[k];
            }
            z[i * w + w - 1] = 1.0;
        }
        Ok(Design {
            active,
            mean,
            std,
            z,
            n,
        })
    }

    /// Maps standardized-space weights `[w.., b]` back onto the full
    /// normalized feature vector.
    fn unfold(&self, wz: &[f64], dim: usize) -> (Vec<f64>, f64) {
        let m = self.active.len();
        let mut w = vec![0.0; dim];
        let mut b = wz[m];
        for k in 0..m {
            w[self.active[k]] = wz[k] / self.std[k];
            b -= wz[k] * self.mean[k] / self.std[k];
        }
        (w, b)
    }
}

fn fit_ridge(design: &Design, targets: &[[f64; 2]], lambda: f64) -> Result<[Vec<f64>; 2]> {
    let w = design.width();
    let n = design.n as f64;
    let mut g = DMatrix::<f64>::zeros(w, w);
    let mut rhs = DMatrix::<f64>::zeros(w, 2);
    for i in 0..design.n {
        let r = design.row(i);
        for a in 0..w {
            let ra = r[a] / n;
            if ra == 0.0 {
                continue;
            }
            for b in a..w {
                g[(a, b)] += ra * r[b];
            }
            rhs[(a, 0)] += ra * targets[i][0];
            rhs[(a, 1)] += ra * targets[i][1];
        }
    }
    for a in 0..w {
        for b in 0..a {
            g[(a, b)] = g[(b, a)];
        }
        if a + 1 < w {
            g[(a, a)] += lambda;
        }
    }
    let chol = g
        .cholesky()
        .ok_or_else(|| Error::Fit("degenerate feature matrix: normal equations are not positive definite".into()))?;
    let diag = chol.l_dirty().diagonal();
    let (lo, hi) = diag
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if lo <= 1e-7 * hi {
        return Err(Error::Fit(
            "degenerate feature matrix: normal equations are numerically singular (increase reg_lambda)".into(),
        ));
    }
    let sol = chol.solve(&rhs);
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(Error::Fit("ridge solution is not finite".into()));
    }
    let col = |k: usize| -> Vec<f64> { DVector::from(sol.column(k)).iter().copied().collect() };
    Ok([col(0), col(1)])
}

fn fit_softmax(design: &Design, labels: &[usize], params: &FitParams) -> Vec<f64> {
    let w = design.width();
    let mut weights = vec![0.0; NUM_CLASSES * w];
    let chunks = design.n.div_ceil(CHUNK);
    let n = design.n as f64;
    let shrink = 1.0 / (1.0 + params.learning_rate * params.reg_lambda);
    for _ in 0..params.iterations {
        let partial = map_indexed(params.execution, chunks, |c| {
            let mut g = vec![0.0; NUM_CLASSES * w];
            let mut scores = [0.0; NUM_CLASSES];
            for i in c * CHUNK..((c + 1) * CHUNK).min(design.n) {
                let r = design.row(i);
                for k in 0..NUM_CLASSES {
                    scores[k] = dot(&weights[k * w..(k + 1) * w], r);
                }
                let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut z = 0.0;
                for s in scores.iter_mut() {
                    *s = (*s - m).exp();
                    z += *s;
                }
                for k in 0..NUM_CLASSES {
                    let resid = scores[k] / z - (labels[i] == k) as u8 as f64;
                    if resid != 0.0 {
                        for (gj, rj) in g[k * w..(k + 1) * w].iter_mut().zip(r) {
                            *gj += resid * rj;
                        }
                    }
                }
            }
            g
        });
        let mut grad = vec![0.0; NUM_CLASSES * w];
        for g in &partial {
            for (a, b) in grad.iter_mut().zip(g) {
                *a += b;
            }
        }
        for k in 0..NUM_CLASSES {
            for j in 0..w {
                let idx = k * w + j;
                let step = weights[idx] - params.learning_rate * grad[idx] / n;
                // L2 as a proximal step keeps large penalties stable; the bias
                // column is not penalized.
                weights[idx] = if j + 1 < w { step * shrink } else { step };
            }
        }
    }
    weights
}

pub fn fit_linear_estimator(samples: &[LabeledFeatures], params: &FitParams) -> Result<LinearEstimator> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset("no samples to fit".into()));
    }
    if !(params.reg_lambda.is_finite() && params.reg_lambda >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "reg_lambda must be non-negative, got {}",
            params.reg_lambda
        )));
    }
    if !(params.learning_rate.is_finite() && params.learning_rate > 0.0) {
        return Err(Error::InvalidParameter("learning_rate must be positive".into()));
    }
    if let Some(s) = samples.iter().find(|s| s.features.len() != FEATURE_DIM) {
        return Err(Error::Contract(format!(
            "sample has {} features, expected {FEATURE_DIM}",
            s.features.len()
        )));
    }
    let x: Vec<Vec<f64>> = samples.iter().map(|s| normalize_features(&s.features)).collect();
    let design = Design::build(&x)?;
    let targets: Vec<[f64; 2]> = samples.iter().map(|s| [s.error.dx, s.error.dtheta]).collect();
    let labels: Vec<usize> = samples.iter().map(|s| s.class.index()).collect();

    let [mx, mt] = fit_ridge(&design, &targets, params.reg_lambda)?;
    let wc = fit_softmax(&design, &labels, params);

    let w = design.width();
    let mut est = LinearEstimator {
        feature_dim: FEATURE_DIM,
        class_weights: Vec::with_capacity(NUM_CLASSES * FEATURE_DIM),
        class_bias: Vec::with_capacity(NUM_CLASSES),
        magnitude_weights: Vec::with_capacity(2 * FEATURE_DIM),
        magnitude_bias: Vec::with_capacity(2),
    };
    for k in 0..NUM_CLASSES {
        let (wk, bk) = design.unfold(&wc[k * w..(k + 1) * w], FEATURE_DIM);
        est.class_weights.extend(wk);
        est.class_bias.push(bk);
    }
    for col in [&mx, &mt] {
        let (wk, bk) = design.unfold(col, FEATURE_DIM);
        est.magnitude_weights.extend(wk);
        est.magnitude_bias.push(bk);
    }
    Ok(est)
}

/// Deterministic shuffled split into `(train, test)` index lists.
pub fn split_indices(n: usize, test_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_test = ((n as f64) * test_fraction.clamp(0.0, 1.0)).round() as usize;
    let test = idx[..n_test].to_vec();
    let train = idx[n_test..].to_vec();
    (train, test)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::features::frame_index;

    fn sample(k: usize, class: DirectionClass) -> LabeledFeatures {
        let mut f = vec![0.0; FEATURE_DIM];
        let t = k as f64 * 0.1;
        f[cumulative_index(0, Stat::MeanShearZ)] = 1.0 + t.sin().abs();
        f[cumulative_index(1, Stat::MeanShearZ)] = 1.0;
        f[frame_index(3, 0, Stat::MeanShearX)] = t.cos();
        f[frame_index(3, 1, Stat::MeanPressure)] = (2.0 * t).sin();
        LabeledFeatures {
            features: f,
            class,
            error: ErrorState::new(3.0 * t.cos(), 2.0 * (2.0 * t).sin()),
        }
    }

    #[test]
    fn softmax_is_shift_invariant() {
        let a = softmax(&[1.0, 2.0, -3.0]);
        let b = softmax(&[101.0, 102.0, 97.0]);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_dataset_is_an_error() {
        assert!(matches!(
            fit_linear_estimator(&[], &FitParams::default()),
            Err(Error::EmptyDataset(_))
        ));
    }

    #[test]
    fn constant_features_are_degenerate() {
        let s = vec![sample(0, DirectionClass::C1); 10];
        assert!(matches!(fit_linear_estimator(&s, &FitParams::default()), Err(Error::Fit(_))));
    }

    #[test]
    fn single_class_predicts_that_class() {
        let s: Vec<_> = (0..50).map(|k| sample(k, DirectionClass::C5)).collect();
        let p = FitParams {
            iterations: 50,
            ..Default::default()
        };
        let est = fit_linear_estimator(&s, &p).unwrap();
        for x in &s {
            assert_eq!(est.predict_features(&x.features).unwrap().0, DirectionClass::C5);
        }
    }

    #[test]
    fn weights_round_trip_through_text() {
        let s: Vec<_> = (0..60)
            .map(|k| sample(k, if k % 2 == 0 { DirectionClass::C1 } else { DirectionClass::C2 }))
            .collect();
        let p = FitParams {
            iterations: 20,
            ..Default::default()
        };
        let est = fit_linear_estimator(&s, &p).unwrap();
        let back = LinearEstimator::from_text(&est.to_text()).unwrap();
        assert_eq!(est, back);
        assert!(LinearEstimator::from_text("nonsense").is_err());
    }

    #[test]
    fn dimension_mismatch_is_a_contract_error() {
        let s: Vec<_> = (0..20).map(|k| sample(k, DirectionClass::C1)).collect();
        let est = fit_linear_estimator(
            &s,
            &FitParams {
                iterations: 5,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(matches!(est.predict_features(&[0.0; 3]), Err(Error::Contract(_))));
    }

    #[test]
    fn split_is_deterministic_and_complete() {
        let (a, b) = split_indices(100, 0.2, 9);
        assert_eq!((a.len(), b.len()), (80, 20));
        assert_eq!(split_indices(100, 0.2, 9), (a.clone(), b.clone()));
        let mut all: Vec<_> = a.into_iter().chain(b).collect();
        all.sort();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
    }
}
