//! Run configuration and its flat `section.key = value` text form.
//!
//! ```text
//! # comment
//! shape.names = rectangle, circle, rounded_rectangle(50, 90, 10)
//! run.estimator = noisy
//! noise.direction_accuracy = 0.744
//! ```
//!
//! Every key is optional; unknown keys are rejected with their line number.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::contact::ContactParams;
use crate::controller::ControllerParams;
use crate::error::{Error, Result};
use crate::estimation::{ClassifierThresholds, Confusion, FitParams, NoiseModel};
use crate::exec::Execution;
use crate::geometry::{
    fits_gap, make_cross_section, CrossSection, ErrorState, GapEnvironment, ShapeKind, ShapeSpec,
    DEFAULT_CURVE_VERTICES,
};
use crate::tactile::{SensorLayout, DEFAULT_TAU_SLIP};

pub const TRAINING_SHAPES: [&str; 4] = ["rectangle", "circle", "ellipse", "hexagon"];
pub const GENERALIZATION_SHAPES: [&str; 2] = ["rounded_long", "rounded_short"];

/// Gap used with the four training objects.
pub const TRAINING_GAP: f64 = 56.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeEntry {
    pub name: String,
    pub spec: ShapeSpec,
    /// Fixed gap for presets that come with one.
    pub gap_width: Option<f64>,
}

pub fn preset(name: &str) -> Option<ShapeEntry> {
    let (spec, gap) = match name {
        "rectangle" => (
            ShapeSpec::Rectangle {
                width: 51.0,
                length: 80.0,
            },
            Some(TRAINING_GAP),
        ),
        "circle" => (ShapeSpec::Circle { radius: 25.5 }, Some(TRAINING_GAP)),
        "ellipse" => (
            ShapeSpec::Ellipse {
                width: 51.0,
                length: 105.0,
            },
            Some(TRAINING_GAP),
        ),
        "hexagon" => (ShapeSpec::Hexagon { circumradius: 25.5 }, Some(TRAINING_GAP)),
        "rounded_long" => (
            ShapeSpec::RoundedRectangle {
                width: 50.0,
                length: 90.0,
                corner_radius: 10.0,
            },
            None,
        ),
        "rounded_short" => (
            ShapeSpec::RoundedRectangle {
                width: 53.0,
                length: 75.0,
                corner_radius: 4.0,
            },
            None,
        ),
        _ => return None,
    };
    Some(ShapeEntry {
        name: name.to_string(),
        spec,
        gap_width: gap,
    })
}

/// A preset name, or `kind(a, b, ...)` with the kind's dimensions in mm.
pub fn parse_shape(text: &str) -> Result<ShapeEntry> {
    let text = text.trim();
    if let Some(p) = preset(text) {
        return Ok(p);
    }
    let bad = |m: String| Error::InvalidParameter(m);
    let (kind, args) = text
        .strip_suffix(')')
        .and_then(|t| t.split_once('('))
        .ok_or_else(|| bad(format!("unknown shape `{text}`")))?;
    let kind = ShapeKind::parse(kind.trim()).ok_or_else(|| bad(format!("unknown shape kind `{kind}`")))?;
    let vals: Vec<f64> = args
        .split(',')
        .map(|a| a.trim().parse::<f64>().map_err(|_| bad(format!("bad dimension `{a}` in `{text}`"))))
        .collect::<Result<_>>()?;
    let need = match kind {
        ShapeKind::Circle | ShapeKind::Hexagon => 1,
        ShapeKind::Rectangle | ShapeKind::Ellipse => 2,
        ShapeKind::RoundedRectangle => 3,
    };
    if vals.len() != need {
        return Err(bad(format!("{} takes {need} dimensions, got {}", kind.name(), vals.len())));
    }
    let spec = match kind {
        ShapeKind::Circle => ShapeSpec::Circle { radius: vals[0] },
        ShapeKind::Hexagon => ShapeSpec::Hexagon { circumradius: vals[0] },
        ShapeKind::Rectangle => ShapeSpec::Rectangle {
            width: vals[0],
            length: vals[1],
        },
        ShapeKind::Ellipse => ShapeSpec::Ellipse {
            width: vals[0],
            length: vals[1],
        },
        ShapeKind::RoundedRectangle => ShapeSpec::RoundedRectangle {
            width: vals[0],
            length: vals[1],
            corner_radius: vals[2],
        },
    };
    spec.validate()?;
    let dims: Vec<String> = vals.iter().map(|v| v.to_string()).collect();
    Ok(ShapeEntry {
        name: format!("{}_{}", kind.name(), dims.join("x")),
        spec,
        gap_width: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EstimatorKind {
    Oracle,
    Noisy,
    Linear,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Oracle => "oracle",
            EstimatorKind::Noisy => "noisy",
            EstimatorKind::Linear => "linear",
        }
    }

    pub fn parse(s: &str) -> Option<EstimatorKind> {
        match s {
            "oracle" => Some(EstimatorKind::Oracle),
            "noisy" => Some(EstimatorKind::Noisy),
            "linear" => Some(EstimatorKind::Linear),
            _ => None,
        }
    }
}

/// How initial errors of an experiment are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ErrorMode {
    /// Uniform over the ranges.
    Sampled,
    /// `grid_points x grid_points` lattice over the ranges; the episode
    /// count is ignored.
    Grid,
    /// The four range corners first, then uniform samples.
    SampledExtremes,
}

impl ErrorMode {
    pub fn name(self) -> &'static str {
        match self {
            ErrorMode::Sampled => "sampled",
            ErrorMode::Grid => "grid",
            ErrorMode::SampledExtremes => "sampled_extremes",
        }
    }

    pub fn parse(s: &str) -> Option<ErrorMode> {
        match s {
            "sampled" => Some(ErrorMode::Sampled),
            "grid" => Some(ErrorMode::Grid),
            "sampled_extremes" => Some(ErrorMode::SampledExtremes),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub samples_per_shape: usize,
    pub range_x: f64,
    pub range_theta: f64,
    /// Marker noise for recorded sequences.
    pub noise_sigma: f64,
    /// Attempt budget per shape; 0 means 200 per requested sample.
    pub max_attempts: usize,
    pub double_rotation_classes: bool,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            samples_per_shape: 2000,
            range_x: 15.0,
            range_theta: 15.0,
            noise_sigma: 0.0,
            max_attempts: 0,
            double_rotation_classes: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub shapes: Vec<ShapeEntry>,
    pub curve_vertices: usize,
    /// Overrides every shape's gap when set.
    pub gap_width: Option<f64>,
    pub clearance: f64,
    pub error_mode: ErrorMode,
    /// mm per side; `None` means `range_x_fraction` of the shape width.
    pub range_x: Option<f64>,
    pub range_x_fraction: f64,
    pub range_theta: f64,
    pub grid_points: usize,
    pub max_trials: u32,
    pub episodes: usize,
    pub estimator: EstimatorKind,
    pub weights: Option<PathBuf>,
    pub seed: u64,
    pub execution: Execution,
    pub noise: NoiseModel,
    pub thresholds: ClassifierThresholds,
    pub controller: ControllerParams,
    pub contact: ContactParams,
    pub layout: SensorLayout,
    pub tactile_noise: f64,
    pub tau_slip: f64,
    pub dataset: DatasetConfig,
    pub fit: FitParams,
    pub test_fraction: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            shapes: TRAINING_SHAPES.iter().map(|n| preset(n).expect("preset")).collect(),
            curve_vertices: DEFAULT_CURVE_VERTICES,
            gap_width: None,
            clearance: 2.0,
            error_mode: ErrorMode::SampledExtremes,
            range_x: None,
            range_x_fraction: 0.3,
            range_theta: 15.0,
            grid_points: 31,
            max_trials: 15,
            episodes: 30,
            estimator: EstimatorKind::Oracle,
            weights: None,
            seed: 0,
            execution: Execution::Parallel,
            noise: NoiseModel::default(),
            thresholds: ClassifierThresholds::default(),
            controller: ControllerParams::default(),
            contact: ContactParams::default(),
            layout: SensorLayout::default(),
            tactile_noise: 0.0,
            tau_slip: DEFAULT_TAU_SLIP,
            dataset: DatasetConfig::default(),
            fit: FitParams::default(),
            test_fraction: 0.2,
        }
    }
}

/// Everything an episode needs about one object.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeSetup {
    pub name: String,
    pub spec: ShapeSpec,
    pub section: CrossSection,
    pub env: GapEnvironment,
    pub range_x: f64,
    pub range_theta: f64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.shapes.is_empty() {
            return bad("at least one shape is required".into());
        }
        if self.max_trials == 0 {
            return bad("max_trials must be at least 1".into());
        }
        for (name, v) in [
            ("errors.range_theta", self.range_theta),
            ("errors.range_x_fraction", self.range_x_fraction),
            ("gap.clearance", self.clearance),
            ("dataset.range_x", self.dataset.range_x),
            ("dataset.range_theta", self.dataset.range_theta),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be non-negative, got {v}"));
            }
        }
        if let Some(r) = self.range_x {
            if !(r.is_finite() && r >= 0.0) {
                return bad(format!("errors.range_x must be non-negative, got {r}"));
            }
        }
        if self.grid_points == 0 {
            return bad("errors.grid_points must be at least 1".into());
        }
        if !(self.tactile_noise.is_finite() && self.tactile_noise >= 0.0) {
            return bad("tactile.noise_sigma must be non-negative".into());
        }
        if !(self.dataset.noise_sigma.is_finite() && self.dataset.noise_sigma >= 0.0) {
            return bad("dataset.noise_sigma must be non-negative".into());
        }
        if !(self.tau_slip.is_finite() && self.tau_slip > 0.0) {
            return bad(format!("tactile.tau_slip must be positive, got {}", self.tau_slip));
        }
        if !(0.0..1.0).contains(&self.test_fraction) {
            return bad(format!("fit.test_fraction must lie in [0, 1), got {}", self.test_fraction));
        }
        if self.curve_vertices < 8 {
            return bad("shape.curve_vertices must be at least 8".into());
        }
        if self.dataset.samples_per_shape == 0 {
            return bad("dataset.samples_per_shape must be at least 1".into());
        }
        if self.contact.frames as usize != crate::tactile::FRAMES {
            return bad(format!(
                "contact.frames must be {} (the feature layout is fixed)",
                crate::tactile::FRAMES
            ));
        }
        self.noise.validate()?;
        self.thresholds.validate()?;
        self.controller.validate()?;
        self.contact.validate()?;
        self.layout.validate()?;
        Ok(())
    }

    pub fn gap_for(&self, entry: &ShapeEntry) -> f64 {
        self.gap_width
            .or(entry.gap_width)
            .unwrap_or(entry.spec.nominal_width() + 2.0 * self.clearance)
    }

    pub fn setup(&self, entry: &ShapeEntry) -> Result<ShapeSetup> {
        entry.spec.validate()?;
        let section = make_cross_section(&entry.spec, self.curve_vertices)?;
        let env = GapEnvironment::with_gap(self.gap_for(entry));
        env.validate()?;
        env.check_shape_length(&section)?;
        if !fits_gap(&section, ErrorState::default(), &env) {
            return Err(Error::InvalidParameter(format!(
                "{} does not fit a {} mm gap even without error",
                entry.name, env.gap_width
            )));
        }
        Ok(ShapeSetup {
            name: entry.name.clone(),
            spec: entry.spec,
            section,
            env,
            range_x: self
                .range_x
                .unwrap_or(self.range_x_fraction * entry.spec.nominal_width()),
            range_theta: self.range_theta,
        })
    }

    pub fn setups(&self) -> Result<Vec<ShapeSetup>> {
        self.shapes.iter().map(|s| self.setup(s)).collect()
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = ExperimentConfig::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    /// Applies every assignment in `text` on top of the current values.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
                line: line_no,
                message: format!("expected `section.key = value`, got `{line}`"),
            })?;
            self.set(key.trim(), value.trim()).map_err(|message| Error::Config {
                line: line_no,
                message,
            })?;
        }
        Ok(())
    }

    /// Sets one key; errors are plain messages so the caller can attach the
    /// line number.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> std::result::Result<T, String> {
            v.parse::<T>()
                .map_err(|_| format!("`{key}`: cannot parse `{v}`"))
        }
        fn auto(key: &str, v: &str) -> std::result::Result<Option<f64>, String> {
            if v == "auto" {
                Ok(None)
            } else {
                num(key, v).map(Some)
            }
        }
        fn flag(key: &str, v: &str) -> std::result::Result<bool, String> {
            match v {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                _ => Err(format!("`{key}`: expected true or false, got `{v}`")),
            }
        }
        let k = key;
        let v = value;
        match k {
            "shape.names" => {
                self.shapes = split_shape_list(v)
                    .iter()
                    .map(|s| parse_shape(s).map_err(|e| e.to_string()))
                    .collect::<std::result::Result<_, _>>()?;
            }
            "shape.curve_vertices" => self.curve_vertices = num(k, v)?,
            "gap.width" => self.gap_width = auto(k, v)?,
            "gap.clearance" => self.clearance = num(k, v)?,
            "errors.mode" => {
                self.error_mode = ErrorMode::parse(v).ok_or_else(|| format!("`{k}`: unknown mode `{v}`"))?
            }
            "errors.range_x" => self.range_x = auto(k, v)?,
            "errors.range_x_fraction" => self.range_x_fraction = num(k, v)?,
            "errors.range_theta" => self.range_theta = num(k, v)?,
            "errors.grid_points" => self.grid_points = num(k, v)?,
            "run.seed" => self.seed = num(k, v)?,
            "run.episodes" => self.episodes = num(k, v)?,
            "run.max_trials" => self.max_trials = num(k, v)?,
            "run.estimator" => {
                self.estimator =
                    EstimatorKind::parse(v).ok_or_else(|| format!("`{k}`: unknown estimator `{v}`"))?
            }
            "run.weights" => self.weights = Some(PathBuf::from(v)),
            "run.execution" => {
                self.execution = match v {
                    "parallel" => Execution::Parallel,
                    "sequential" => Execution::Sequential,
                    _ => return Err(format!("`{k}`: expected parallel or sequential, got `{v}`")),
                }
            }
            "noise.direction_accuracy" => self.noise.direction_accuracy = num(k, v)?,
            "noise.confusion" => {
                self.noise.confusion =
                    Confusion::parse(v).ok_or_else(|| format!("`{k}`: unknown confusion `{v}`"))?
            }
            "noise.half_width_x" => self.noise.half_width_x = num(k, v)?,
            "noise.half_width_theta" => self.noise.half_width_theta = num(k, v)?,
            "thresholds.t_x" => self.thresholds.t_x = num(k, v)?,
            "thresholds.t_theta" => self.thresholds.t_theta = num(k, v)?,
            "controller.consistent_factor" => self.controller.consistent_factor = num(k, v)?,
            "controller.no_sign_factor" => self.controller.no_sign_factor = num(k, v)?,
            "controller.constant_step_x" => self.controller.constant_step_x = num(k, v)?,
            "controller.constant_step_theta" => self.controller.constant_step_theta = num(k, v)?,
            "controller.clip_x" => self.controller.clip_x = num(k, v)?,
            "controller.clip_theta" => self.controller.clip_theta = num(k, v)?,
            "controller.clip_from_trial" => self.controller.clip_from_trial = num(k, v)?,
            "contact.descent_per_frame" => self.contact.descent_per_frame = num(k, v)?,
            "contact.frames" => self.contact.frames = num(k, v)?,
            "contact.min_lever" => self.contact.min_lever = num(k, v)?,
            "tactile.rows" => self.layout.rows = num(k, v)?,
            "tactile.cols" => self.layout.cols = num(k, v)?,
            "tactile.spacing" => self.layout.spacing = num(k, v)?,
            "tactile.patch_x" => self.layout.patch_center.x = num(k, v)?,
            "tactile.patch_z" => self.layout.patch_center.y = num(k, v)?,
            "tactile.noise_sigma" => self.tactile_noise = num(k, v)?,
            "tactile.tau_slip" => self.tau_slip = num(k, v)?,
            "dataset.samples_per_shape" => self.dataset.samples_per_shape = num(k, v)?,
            "dataset.range_x" => self.dataset.range_x = num(k, v)?,
            "dataset.range_theta" => self.dataset.range_theta = num(k, v)?,
            "dataset.noise_sigma" => self.dataset.noise_sigma = num(k, v)?,
            "dataset.max_attempts" => self.dataset.max_attempts = num(k, v)?,
            "dataset.double_rotation_classes" => self.dataset.double_rotation_classes = flag(k, v)?,
            "fit.reg_lambda" => self.fit.reg_lambda = num(k, v)?,
            "fit.iterations" => self.fit.iterations = num(k, v)?,
            "fit.learning_rate" => self.fit.learning_rate = num(k, v)?,
            "fit.test_fraction" => self.test_fraction = num(k, v)?,
            _ => return Err(format!("unknown key `{k}`")),
        }
        Ok(())
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

/// Splits on commas that are not inside parentheses.
pub fn split_shape_list(v: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for ch in v.chars() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(std::mem::take(&mut cur).trim().to_string());
                continue;
            }
            _ => {}
        }
        cur.push(ch);
    }
    if !cur.trim().is_empty() {
        out.push(cur.trim().to_string());
    }
    out.retain(|s| !s.is_empty());
    out
}
