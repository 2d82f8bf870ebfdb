use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{ErrorMode, ExperimentConfig, ShapeSetup};
use super::episode::{episode_rng, run_episode, sample_error, EpisodeRecord, Estimator};
use crate::error::{Error, Result};
use crate::exec::map_indexed;
use crate::geometry::ErrorState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub shape: String,
    pub estimator: String,
    pub episodes: usize,
    /// Absent when there are no episodes.
    pub success_rate: Option<f64>,
    pub mean_trials: Option<f64>,
    pub max_trials: Option<u32>,
    pub records: Vec<EpisodeRecord>,
}

impl ExperimentSummary {
    pub fn from_records(shape: &str, estimator: &str, records: Vec<EpisodeRecord>) -> ExperimentSummary {
        let n = records.len();
        let (rate, mean, max) = if n == 0 {
            (None, None, None)
        } else {
            let ok = records.iter().filter(|r| r.success).count();
            let total: u64 = records.iter().map(|r| r.trial_count as u64).sum();
            (
                Some(ok as f64 / n as f64),
                Some(total as f64 / n as f64),
                records.iter().map(|r| r.trial_count).max(),
            )
        };
        ExperimentSummary {
            shape: shape.to_string(),
            estimator: estimator.to_string(),
            episodes: n,
            success_rate: rate,
            mean_trials: mean,
            max_trials: max,
            records,
        }
    }
}

/// Stream id of episode `episode` on shape `shape_index`.
pub fn stream_id(shape_index: usize, episode: usize) -> u64 {
    ((shape_index as u64) << 32) | episode as u64
}

/// Initial errors for one shape according to the configured mode.
pub fn initial_errors(cfg: &ExperimentConfig, setup: &ShapeSetup, shape_index: usize) -> Vec<ErrorState> {
    let (rx, rt) = (setup.range_x, setup.range_theta);
    match cfg.error_mode {
        ErrorMode::Grid => {
            let n = cfg.grid_points;
            let at = |i: usize, r: f64| {
                if n == 1 {
                    0.0
                } else {
                    -r + 2.0 * r * i as f64 / (n - 1) as f64
                }
            };
            (0..n * n).map(|k| ErrorState::new(at(k / n, rx), at(k % n, rt))).collect()
        }
        ErrorMode::Sampled | ErrorMode::SampledExtremes => {
            let corners = [(-rx, -rt), (-rx, rt), (rx, -rt), (rx, rt)];
            (0..cfg.episodes)
                .map(|i| {
                    if cfg.error_mode == ErrorMode::SampledExtremes && i < corners.len() {
                        ErrorState::new(corners[i].0, corners[i].1)
                    } else {
                        // A dedicated stream so the draw does not depend on
                        // how many numbers earlier episodes consumed.
                        sample_error(rx, rt, &mut episode_rng(cfg.seed ^ 0x9e37_79b9_7f4a_7c15, stream_id(shape_index, i)))
                    }
                })
                .collect()
        }
    }
}

pub fn run_experiment(
    cfg: &ExperimentConfig,
    setup: &ShapeSetup,
    shape_index: usize,
    estimator: &Estimator,
) -> Result<ExperimentSummary> {
    let starts = initial_errors(cfg, setup, shape_index);
    let records = map_indexed(cfg.execution, starts.len(), |i| {
        let mut rng = episode_rng(cfg.seed, stream_id(shape_index, i));
        run_episode(cfg, setup, estimator, i, starts[i], &mut rng)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentSummary::from_records(&setup.name, estimator.name(), records))
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::format(path.display().to_string(), e.to_string())
}

pub const SUMMARY_HEADER: [&str; 6] = ["shape", "estimator", "episodes", "success_rate", "mean_trials", "max_trials"];

pub fn write_summary_csv(summaries: &[ExperimentSummary], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(SUMMARY_HEADER).map_err(csv_err(path))?;
    for s in summaries {
        w.write_record([
            s.shape.clone(),
            s.estimator.clone(),
            s.episodes.to_string(),
            opt(s.success_rate.map(|v| format!("{v:.6}"))),
            opt(s.mean_trials.map(|v| format!("{v:.6}"))),
            opt(s.max_trials),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_scatter_csv(summaries: &[ExperimentSummary], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(["shape", "estimator", "dx0", "dtheta0", "trials", "success"])
        .map_err(csv_err(path))?;
    for s in summaries {
        for r in &s.records {
            w.write_record([
                s.shape.clone(),
                s.estimator.clone(),
                r.initial_error.dx.to_string(),
                r.initial_error.dtheta.to_string(),
                r.trial_count.to_string(),
                r.success.to_string(),
            ])
            .map_err(csv_err(path))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct TrialLine<'a> {
    episode: usize,
    trial: u32,
    dx: f64,
    dtheta: f64,
    blocked: bool,
    side: &'a str,
    class_true: u8,
    class_est: Option<u8>,
    dxe: Option<f64>,
    dthetae: Option<f64>,
    cx: Option<f64>,
    ctheta: Option<f64>,
}

/// One JSON object per trial.
pub fn write_episodes_jsonl(summary: &ExperimentSummary, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    for r in &summary.records {
        for t in &r.trials {
            let line = TrialLine {
                episode: r.episode_id,
                trial: t.trial_index,
                dx: t.error_before.dx,
                dtheta: t.error_before.dtheta,
                blocked: t.blocked,
                side: t.side.name(),
                class_true: t.class_true.number(),
                class_est: t.class_est.map(|c| c.number()),
                dxe: t.estimate.map(|e| e.dx_e),
                dthetae: t.estimate.map(|e| e.dtheta_e),
                cx: t.correction.map(|c| c.c_x),
                ctheta: t.correction.map(|c| c.c_theta),
            };
            let text = serde_json::to_string(&line).map_err(|e| Error::format("episode record", e.to_string()))?;
            writeln!(out, "{text}").map_err(|e| Error::io(path, e))?;
        }
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// One table row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub shape: String,
    pub estimator: String,
    pub episodes: usize,
    pub success_rate: Option<f64>,
    pub mean_trials: Option<f64>,
    pub max_trials: Option<u32>,
}

impl From<&ExperimentSummary> for SummaryRow {
    fn from(s: &ExperimentSummary) -> Self {
        SummaryRow {
            shape: s.shape.clone(),
            estimator: s.estimator.clone(),
            episodes: s.episodes,
            success_rate: s.success_rate,
            mean_trials: s.mean_trials,
            max_trials: s.max_trials,
        }
    }
}

/// Fixed-width text table: success rate, mean and max trials per row.
pub fn format_table(rows: &[SummaryRow]) -> String {
    let w = rows.iter().map(|r| r.shape.len()).chain([5]).max().unwrap_or(5);
    let mut out = format!(
        "{:<w$}  {:<9}  {:>8}  {:>8}  {:>6}  {:>4}\n",
        "shape", "estimator", "episodes", "success", "mean", "max"
    );
    for r in rows {
        let dash = || "-".to_string();
        out.push_str(&format!(
            "{:<w$}  {:<9}  {:>8}  {:>8}  {:>6}  {:>4}\n",
            r.shape,
            r.estimator,
            r.episodes,
            r.success_rate.map(|v| format!("{:.1}%", v * 100.0)).unwrap_or_else(dash),
            r.mean_trials.map(|v| format!("{v:.2}")).unwrap_or_else(dash),
            r.max_trials.map(|v| v.to_string()).unwrap_or_else(dash),
        ));
    }
    out
}
