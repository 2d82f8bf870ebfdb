//! Acceptance checks. Each criterion prints one PASS/FAIL line with the
//! measured values; the process exits non-zero if any line is FAIL.

use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use tactile_pack::contact::{decompose_twist, descend, pivot_twist, Twist};
use tactile_pack::controller::{correction, ControllerParams};
use tactile_pack::estimation::linear::split_indices;
use tactile_pack::estimation::{
    classify_direction_truth, fit_linear_estimator, ClassifierThresholds, DirectionClass, ErrorEstimate,
    SignPair,
};
use tactile_pack::geometry::ErrorState;
use tactile_pack::harness::config::{GENERALIZATION_SHAPES, TRAINING_SHAPES};
use tactile_pack::harness::dataset::write_dataset;
use tactile_pack::harness::experiment::{write_scatter_csv, write_summary_csv};
use tactile_pack::harness::{
    collect_all, collect_dataset, preset, run_experiment, ErrorMode, Estimator, ExperimentConfig,
    ExperimentSummary, ShapeSetup,
};
use tactile_pack::tactile::{render_sequence, SensorLayout, TactileSequence};
use tactile_pack::{Execution, Sign};

const CORRECTION_TOL: f64 = 1e-9;
const PHYSICS_TOL: f64 = 1e-9;
const GRID: usize = 31;
const TAXONOMY_GRID: usize = 61;
const ORACLE_MAX_MEAN: f64 = 5.0;
const NOISY_EPISODES: usize = 100;
const NOISY_MIN_SUCCESS: f64 = 0.90;
const NOISY_MAX_MEAN: f64 = 8.0;
const GEN_EPISODES: usize = 100;
const GEN_MIN_SUCCESS: f64 = 0.85;
const GEN_MAX_MEAN: f64 = 8.0;
const MIN_ACCURACY: f64 = 0.90;
const NETWORK_ACCURACY: f64 = 0.744;
const MAX_MAE_X: f64 = 1.9;
const MAX_MAE_THETA: f64 = 1.9;
const MIN_ROTATION_ATTEMPTS: usize = 10_000;

struct Report {
    failures: Vec<u32>,
}

impl Report {
    fn line(&mut self, id: u32, name: &str, ok: bool, elapsed: Duration, limit: Duration, detail: String) {
        let ok = ok && elapsed <= limit;
        if !ok {
            self.failures.push(id);
        }
        println!(
            "criterion {id} {}: {name}: {detail} ({:.2}s, limit {}s)",
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
    }
}

fn setups(cfg: &ExperimentConfig, names: &[&str]) -> Vec<ShapeSetup> {
    names
        .iter()
        .map(|n| cfg.setup(&preset(n).expect("preset")).expect("setup"))
        .collect()
}

fn est(dx: f64, dt: f64) -> ErrorEstimate {
    ErrorEstimate {
        dx_e: dx,
        dtheta_e: dt,
        class_probs: None,
    }
}

fn correction_law() -> (bool, String) {
    let p = ControllerParams::default();
    use Sign::*;
    // (sign, estimate, trial, expected correction)
    let cases = [
        (Pos, 5.0, 1, -3.5),
        (Zero, 5.0, 1, -1.5),
        (Neg, 5.0, 1, 3.0),
        (Pos, 10.0, 3, -4.0),
    ];
    let mut worst: f64 = 0.0;
    for (s, e, t, want) in cases {
        let cx = correction(SignPair::new(s, Zero), &est(e, 0.0), t, &p).c_x;
        let ct = correction(SignPair::new(Zero, s), &est(0.0, e), t, &p).c_theta;
        worst = worst.max((cx - want).abs()).max((ct - want).abs());
    }
    (worst <= CORRECTION_TOL, format!("max deviation {worst:.3e} over 4 branches on both axes"))
}

/// Region numbers in their error-plane layout: x to the right, θ upward.
fn taxonomy_oracle(dx: f64, dt: f64) -> u8 {
    let col = if dx < -2.5 {
        0
    } else if dx > 2.5 {
        2
    } else {
        1
    };
    let row = if dt > 5.0 {
        0
    } else if dt < -5.0 {
        2
    } else {
        1
    };
    [[3, 8, 5], [1, 0, 2], [4, 7, 6]][row][col]
}

fn taxonomy() -> (bool, String) {
    let thr = ClassifierThresholds::default();
    let n = TAXONOMY_GRID;
    let mut mismatches = 0;
    let mut class3_ok = true;
    for i in 0..n {
        for j in 0..n {
            let dx = -15.0 + 30.0 * i as f64 / (n - 1) as f64;
            let dt = -15.0 + 30.0 * j as f64 / (n - 1) as f64;
            let c = classify_direction_truth(ErrorState::new(dx, dt), &thr);
            if c.number() != taxonomy_oracle(dx, dt) {
                mismatches += 1;
            }
            let upper_left = dx < -thr.t_x && dt > thr.t_theta;
            class3_ok &= (c == DirectionClass::C3) == upper_left;
        }
    }
    (
        mismatches == 0 && class3_ok,
        format!("{mismatches} mismatches over {} points, class 3 region exact: {class3_ok}", n * n),
    )
}

fn experiments(cfg: &ExperimentConfig, setups: &[ShapeSetup], estimator: &Estimator, offset: usize) -> Vec<ExperimentSummary> {
    setups
        .iter()
        .enumerate()
        .map(|(i, s)| run_experiment(cfg, s, offset + i, estimator).expect("experiment"))
        .collect()
}

fn describe(runs: &[ExperimentSummary]) -> String {
    runs.iter()
        .map(|s| {
            format!(
                "{} {:.1}%/{:.2}",
                s.shape,
                100.0 * s.success_rate.unwrap_or(0.0),
                s.mean_trials.unwrap_or(f64::NAN)
            )
        })
        .collect::<Vec<_>>()
        .join(", ")
}

fn oracle_grid() -> (bool, String) {
    let mut cfg = ExperimentConfig::default();
    cfg.error_mode = ErrorMode::Grid;
    cfg.grid_points = GRID;
    let runs = experiments(&cfg, &setups(&cfg, &TRAINING_SHAPES), &Estimator::Oracle, 0);
    let all_success = runs.iter().all(|s| s.success_rate == Some(1.0) && s.episodes == GRID * GRID);
    let means: Vec<f64> = runs.iter().map(|s| s.mean_trials.unwrap_or(f64::INFINITY)).collect();
    let bounded = means.iter().all(|&m| m <= ORACLE_MAX_MEAN);
    let rect = means[0];
    let rect_highest = means[1..].iter().all(|&m| rect > m);
    (
        all_success && bounded && rect_highest,
        format!("{} (rectangle highest: {rect_highest})", describe(&runs)),
    )
}

fn noisy() -> (bool, String) {
    let mut cfg = ExperimentConfig::default();
    cfg.episodes = NOISY_EPISODES;
    cfg.seed = 2024;
    let runs = experiments(&cfg, &setups(&cfg, &TRAINING_SHAPES), &Estimator::Noisy(cfg.noise), 0);
    let ok = runs.iter().all(|s| {
        s.episodes == NOISY_EPISODES
            && s.success_rate.unwrap_or(0.0) >= NOISY_MIN_SUCCESS
            && s.mean_trials.unwrap_or(f64::INFINITY) <= NOISY_MAX_MEAN
    });
    // Failed episodes must enter the mean as max_trials + 1.
    let failure_count_ok = runs
        .iter()
        .flat_map(|s| &s.records)
        .all(|r| r.success || r.trial_count == cfg.max_trials + 1);
    (ok && failure_count_ok, describe(&runs))
}

/// Dataset, fit and held-out metrics shared by criteria 5 and 6.
struct Fitted {
    estimator: Arc<tactile_pack::estimation::LinearEstimator>,
    accuracy: f64,
    mae_x: f64,
    mae_theta: f64,
    samples: usize,
}

fn fit_training_set() -> Fitted {
    let cfg = ExperimentConfig::default();
    let ds = collect_all(&cfg, &setups(&cfg, &TRAINING_SHAPES)).expect("dataset");
    let labeled = ds.labeled();
    let (train_idx, test_idx) = split_indices(labeled.len(), cfg.test_fraction, cfg.seed);
    let train: Vec<_> = train_idx.iter().map(|&i| labeled[i].clone()).collect();
    let test: Vec<_> = test_idx.iter().map(|&i| labeled[i].clone()).collect();
    let model = fit_linear_estimator(&train, &cfg.fit).expect("fit");
    let m = model.evaluate(&test).expect("evaluate");
    Fitted {
        estimator: Arc::new(model),
        accuracy: m.accuracy,
        mae_x: m.mae_x,
        mae_theta: m.mae_theta,
        samples: labeled.len(),
    }
}

fn generalization(fitted: &Fitted) -> (bool, String) {
    let mut cfg = ExperimentConfig::default();
    cfg.episodes = GEN_EPISODES;
    cfg.seed = 2024;
    let runs = experiments(
        &cfg,
        &setups(&cfg, &GENERALIZATION_SHAPES),
        &Estimator::Linear(fitted.estimator.clone()),
        TRAINING_SHAPES.len(),
    );
    let n: usize = runs.iter().map(|s| s.episodes).sum();
    let ok_count = runs.iter().flat_map(|s| &s.records).filter(|r| r.success).count();
    let trials: u64 = runs.iter().flat_map(|s| &s.records).map(|r| r.trial_count as u64).sum();
    let rate = ok_count as f64 / n as f64;
    let mean = trials as f64 / n as f64;
    let gaps_ok = runs.iter().zip(setups(&cfg, &GENERALIZATION_SHAPES)).all(|(_, s)| {
        (s.env.gap_width - (s.spec.nominal_width() + 2.0 * cfg.clearance)).abs() < 1e-12
    });
    (
        n == 2 * GEN_EPISODES && rate >= GEN_MIN_SUCCESS && mean <= GEN_MAX_MEAN && gaps_ok,
        format!("pooled success {:.1}%, pooled mean {mean:.2} ({})", 100.0 * rate, describe(&runs)),
    )
}

fn quality(f: &Fitted) -> (bool, String) {
    (
        f.accuracy >= MIN_ACCURACY.max(NETWORK_ACCURACY)
            && f.mae_x <= MAX_MAE_X
            && f.mae_theta <= MAX_MAE_THETA,
        format!(
            "accuracy {:.4}, mae {:.3} mm / {:.3} deg on held-out of {} samples",
            f.accuracy, f.mae_x, f.mae_theta, f.samples
        ),
    )
}

fn render(setup: &ShapeSetup, cfg: &ExperimentConfig, e: ErrorState) -> Option<TactileSequence> {
    let ev = descend(&setup.section, e, &setup.env);
    if !ev.blocked {
        return None;
    }
    let tw = pivot_twist(&ev, &cfg.contact).expect("twist");
    let d = decompose_twist(&tw, &ev);
    Some(render_sequence(&d, &tw, &cfg.layout, 0.0, 1).expect("render"))
}

fn physics() -> (bool, String) {
    let cfg = ExperimentConfig::default();
    let all = setups(&cfg, &TRAINING_SHAPES);
    let mut translation_pressure: f64 = 0.0;
    let mut translation_cases = 0;
    let mut mirror_dev: f64 = 0.0;
    let mut mirror_cases = 0;
    let mut linear_dev: f64 = 0.0;
    let n = 21;
    for s in &all {
        for i in 0..n {
            let dx = -s.range_x + 2.0 * s.range_x * i as f64 / (n - 1) as f64;
            if let Some(seq) = render(s, &cfg, ErrorState::new(dx, 0.0)) {
                translation_cases += 1;
                for f in &seq.frames {
                    translation_pressure = translation_pressure.max(f.a.max_abs_pressure()).max(f.b.max_abs_pressure());
                }
            }
            for j in 0..n {
                let dt = -15.0 + 30.0 * j as f64 / (n - 1) as f64;
                let e = ErrorState::new(dx, dt);
                let (Some(orig), Some(mirr)) = (render(s, &cfg, e), render(s, &cfg, e.negated())) else {
                    continue;
                };
                mirror_cases += 1;
                for (fo, fm) in orig.frames.iter().zip(&mirr.frames) {
                    for (src, dst) in [(&fo.b, &fm.a), (&fo.a, &fm.b)] {
                        for k in 0..src.shear.len() {
                            mirror_dev = mirror_dev
                                .max((dst.shear[k][0] + src.shear[k][0]).abs())
                                .max((dst.shear[k][1] - src.shear[k][1]).abs())
                                .max((dst.pressure[k] + src.pressure[k]).abs());
                        }
                    }
                }
                let (f3, f5) = (&orig.frames[2], &orig.frames[4]);
                for (m3, m5) in [(&f3.a, &f5.a), (&f3.b, &f5.b)] {
                    for k in 0..m3.shear.len() {
                        linear_dev = linear_dev
                            .max((m5.shear[k][0] - 2.0 * m3.shear[k][0]).abs())
                            .max((m5.shear[k][1] - 2.0 * m3.shear[k][1]).abs())
                            .max((m5.pressure[k] - 2.0 * m3.pressure[k]).abs());
                    }
                }
            }
        }
    }
    let tw = Twist::zero(8);
    let ev = descend(&all[0].section, ErrorState::new(14.0, 0.0), &all[0].env);
    let zero = render_sequence(&decompose_twist(&tw, &ev), &tw, &SensorLayout::default(), 0.0, 3).expect("render");
    let zero_ok = zero.is_zero() && zero.frames.len() == 8;
    (
        translation_cases > 0
            && translation_pressure == 0.0
            && zero_ok
            && mirror_cases > 0
            && mirror_dev <= PHYSICS_TOL
            && linear_dev <= PHYSICS_TOL,
        format!(
            "translation max |p| {translation_pressure:e} over {translation_cases}, zero twist ok {zero_ok}, \
             mirror dev {mirror_dev:.1e} over {mirror_cases}, frame 5 vs 2x frame 3 dev {linear_dev:.1e}"
        ),
    )
}

fn rotation_classes() -> (bool, String) {
    let mut cfg = ExperimentConfig::default();
    cfg.dataset.samples_per_shape = MIN_ROTATION_ATTEMPTS;
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, idx) in [("circle", 1), ("hexagon", 3)] {
        let setup = cfg.setup(&preset(name).unwrap()).unwrap();
        let (samples, stats) = collect_dataset(&cfg, &setup, idx).expect("dataset");
        let rot = samples
            .iter()
            .filter(|s| matches!(s.class_label, DirectionClass::C7 | DirectionClass::C8))
            .count();
        ok &= stats.attempts >= MIN_ROTATION_ATTEMPTS && rot == 0;
        parts.push(format!("{name}: {rot} class-7/8 over {} attempts", stats.attempts));
    }
    (ok, parts.join(", "))
}

fn run_all_writes(dir: &Path, execution: Execution) {
    let mut cfg = ExperimentConfig::default();
    cfg.seed = 99;
    cfg.execution = execution;
    cfg.dataset.samples_per_shape = 300;
    cfg.dataset.noise_sigma = 0.02;
    cfg.tactile_noise = 0.02;
    let train = setups(&cfg, &TRAINING_SHAPES);
    let ds = collect_all(&cfg, &train).unwrap();
    write_dataset(&ds, &dir.join("dataset.csv")).unwrap();
    let runs = experiments(&cfg, &train, &Estimator::Noisy(cfg.noise), 0);
    write_summary_csv(&runs, &dir.join("summary.csv")).unwrap();
    write_scatter_csv(&runs, &dir.join("scatter.csv")).unwrap();
}

fn determinism() -> (bool, String) {
    let dirs: Vec<_> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    run_all_writes(dirs[0].path(), Execution::Parallel);
    run_all_writes(dirs[1].path(), Execution::Parallel);
    run_all_writes(dirs[2].path(), Execution::Sequential);
    let mut ok = true;
    let mut bytes = 0;
    for f in ["dataset.csv", "summary.csv", "scatter.csv"] {
        let a = std::fs::read(dirs[0].path().join(f)).unwrap();
        bytes += a.len();
        for d in &dirs[1..] {
            ok &= std::fs::read(d.path().join(f)).unwrap() == a;
        }
    }
    (ok, format!("3 runs (2 parallel, 1 sequential) byte-identical over {bytes} bytes: {ok}"))
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

fn main() {
    let mut r = Report { failures: vec![] };
    let secs = Duration::from_secs;

    let ((ok, d), t) = timed(correction_law);
    r.line(1, "correction law", ok, t, secs(1), d);
    let ((ok, d), t) = timed(taxonomy);
    r.line(2, "region taxonomy", ok, t, secs(1), d);
    let ((ok, d), t) = timed(oracle_grid);
    r.line(3, "oracle convergence", ok, t, secs(30), d);
    let ((ok, d), t) = timed(noisy);
    r.line(4, "calibrated noise", ok, t, secs(120), d);
    let (fitted, t_fit) = timed(fit_training_set);
    let ((ok, d), t) = timed(|| generalization(&fitted));
    r.line(5, "generalization", ok, t + t_fit, secs(180), d);
    let (ok, d) = quality(&fitted);
    r.line(6, "estimator quality", ok, t_fit, secs(180), d);
    let ((ok, d), t) = timed(physics);
    r.line(7, "tactile invariants", ok, t, secs(30), d);
    let ((ok, d), t) = timed(rotation_classes);
    r.line(8, "no rotation classes on circle/hexagon", ok, t, secs(120), d);
    let ((ok, d), t) = timed(determinism);
    r.line(9, "determinism", ok, t, secs(120), d);

    if !r.failures.is_empty() {
        eprintln!("failed criteria: {:?}", r.failures);
        std::process::exit(1);
    }
}
