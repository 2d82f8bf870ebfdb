//! `tactile-pack` command line: `datagen`, `fit`, `experiment`, `report`.
//!
//! Exit codes: 0 on success, 1 for usage or configuration errors, 2 for
//! runtime failures. Errors are printed to stderr as `error[<kind>]: <msg>`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::error::{Error, Result};
use crate::estimation::linear::split_indices;
use crate::estimation::{fit_linear_estimator, DirectionClass, LinearEstimator};
use crate::exec::configure_threads;
use crate::harness::config::{parse_shape, split_shape_list};
use crate::harness::dataset::{collect_all, read_dataset, write_dataset, write_markers};
use crate::harness::experiment::{
    format_table, write_episodes_jsonl, write_scatter_csv, write_summary_csv, SummaryRow,
};
use crate::harness::report::{merge_runs, EXPERIMENT_MANIFEST, SCHEMA_VERSION};
use crate::harness::{run_experiment, EstimatorKind, Estimator, ExperimentConfig};

#[derive(Debug, Parser)]
#[command(name = "tactile-pack", version, about = "Tactile-feedback gap insertion simulator")]
struct Cli {
    /// Config file with `section.key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default `tactile-pack-out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true, env = "TACTILE_PACK_THREADS")]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum)]
    estimator: Option<EstimatorArg>,
    /// Weights file for the linear estimator.
    #[arg(long, global = true)]
    weights: Option<PathBuf>,
    #[arg(long, global = true)]
    episodes: Option<usize>,
    /// Comma-separated shapes: preset names or `kind(dims...)`.
    #[arg(long, global = true)]
    shape: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum EstimatorArg {
    Oracle,
    Noisy,
    Linear,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Collect a labelled tactile dataset.
    Datagen {
        /// Blocked samples per shape.
        #[arg(long)]
        samples: Option<usize>,
        /// Also write the full marker table.
        #[arg(long)]
        markers: bool,
    },
    /// Fit the linear estimator on a dataset (80/20 split).
    Fit {
        /// Dataset file (default `<out>/dataset.csv`).
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Run probe-correct episodes per shape.
    Experiment,
    /// Merge summaries of several experiment runs.
    Report {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
    },
}

pub fn run() -> i32 {
    run_from(std::env::args_os())
}

pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error[{}]: {}", e.kind(), e);
            if e.is_usage() {
                1
            } else {
                2
            }
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                Error::InvalidParameter(format!("cannot read config {}: {e}", path.display()))
            })?;
            let mut cfg = ExperimentConfig::default();
            cfg.apply_text(&text)?;
            cfg
        }
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(n) = cli.episodes {
        cfg.episodes = n;
    }
    if let Some(e) = cli.estimator {
        cfg.estimator = match e {
            EstimatorArg::Oracle => EstimatorKind::Oracle,
            EstimatorArg::Noisy => EstimatorKind::Noisy,
            EstimatorArg::Linear => EstimatorKind::Linear,
        };
    }
    if let Some(w) = &cli.weights {
        cfg.weights = Some(w.clone());
    }
    if let Some(list) = &cli.shape {
        cfg.shapes = split_shape_list(list)
            .iter()
            .map(|s| parse_shape(s))
            .collect::<Result<_>>()?;
    }
    Ok(cfg)
}

fn out_dir(cli: &Cli) -> Result<PathBuf> {
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("tactile-pack-out"));
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

/// Writes `<dir>/manifest-<command>.json` through a temporary file and a
/// rename so readers never see a partial manifest.
fn write_manifest(
    dir: &Path,
    command: &str,
    cfg: &ExperimentConfig,
    outputs: &[PathBuf],
    started: Instant,
    extra: serde_json::Value,
) -> Result<PathBuf> {
    let now = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let run_id = dir
        .canonicalize()
        .ok()
        .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "run".to_string());
    let manifest = json!({
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "tool_version": env!("CARGO_PKG_VERSION"),
        "run_id": run_id,
        "seed": cfg.seed,
        "config": cfg,
        "outputs": outputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        "created_unix": now,
        "wall_clock_seconds": started.elapsed().as_secs_f64(),
        "results": extra,
    });
    let path = dir.join(format!("manifest-{command}.json"));
    let tmp = dir.join(format!(".manifest-{command}.json.tmp"));
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::format("manifest", e.to_string()))?;
    std::fs::write(&tmp, text + "\n").map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn execute(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Error::InvalidParameter("--threads must be at least 1".into()));
        }
        configure_threads(t);
    }
    let mut cfg = load_config(&cli)?;
    let started = Instant::now();
    match &cli.command {
        Command::Datagen { samples, markers } => {
            if let Some(n) = samples {
                cfg.dataset.samples_per_shape = *n;
            }
            cfg.validate()?;
            cmd_datagen(&cli, &cfg, *markers, started)
        }
        Command::Fit { dataset, lambda } => {
            if let Some(l) = lambda {
                cfg.fit.reg_lambda = *l;
            }
            cfg.validate()?;
            cmd_fit(&cli, &cfg, dataset.clone(), started)
        }
        Command::Experiment => {
            cfg.validate()?;
            cmd_experiment(&cli, &cfg, started)
        }
        Command::Report { runs } => cmd_report(&cli, &cfg, runs, started),
    }
}

fn cmd_datagen(cli: &Cli, cfg: &ExperimentConfig, markers: bool, started: Instant) -> Result<()> {
    let dir = out_dir(cli)?;
    let setups = cfg.setups()?;
    let ds = collect_all(cfg, &setups)?;
    let path = dir.join("dataset.csv");
    write_dataset(&ds, &path)?;
    let mut outputs = vec![path.clone()];
    if markers {
        let m = dir.join("markers.csv");
        write_markers(&ds, cfg, &setups, &m)?;
        outputs.push(m);
    }
    let counts = ds.class_counts();
    println!("dataset: {} samples -> {}", ds.samples.len(), path.display());
    for st in &ds.stats {
        println!(
            "shape {}: {} attempts, {} blocked, {} doubled",
            st.shape, st.attempts, st.blocked, st.doubled
        );
    }
    for c in DirectionClass::ALL {
        println!("class {c}: {}", counts[c.index()]);
    }
    let counts_json: serde_json::Map<String, serde_json::Value> = DirectionClass::ALL
        .iter()
        .map(|c| (c.to_string(), json!(counts[c.index()])))
        .collect();
    write_manifest(
        &dir,
        "datagen",
        cfg,
        &outputs,
        started,
        json!({ "samples": ds.samples.len(), "class_counts": counts_json, "shapes": ds.stats }),
    )?;
    Ok(())
}

fn cmd_fit(cli: &Cli, cfg: &ExperimentConfig, dataset: Option<PathBuf>, started: Instant) -> Result<()> {
    let dir = out_dir(cli)?;
    let path = dataset.unwrap_or_else(|| dir.join("dataset.csv"));
    let ds = read_dataset(&path)?;
    let labeled = ds.labeled();
    if labeled.is_empty() {
        return Err(Error::EmptyDataset(path.display().to_string()));
    }
    let (train_idx, test_idx) = split_indices(labeled.len(), cfg.test_fraction, cfg.seed);
    let train: Vec<_> = train_idx.iter().map(|&i| labeled[i].clone()).collect();
    let test: Vec<_> = test_idx.iter().map(|&i| labeled[i].clone()).collect();
    let classes: std::collections::BTreeSet<_> = train.iter().map(|s| s.class).collect();
    if classes.len() < 2 {
        return Err(Error::Fit(format!(
            "training split has {} distinct class(es); need at least 2",
            classes.len()
        )));
    }
    let mut params = cfg.fit;
    params.execution = cfg.execution;
    let est = fit_linear_estimator(&train, &params)?;
    let weights = cfg.weights.clone().unwrap_or_else(|| dir.join("weights.txt"));
    if let Some(parent) = weights.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    est.save(&weights)?;
    let m = est.evaluate(if test.is_empty() { &train } else { &test })?;
    println!("train={} test={}", train.len(), test.len());
    println!("direction_accuracy={:.4}", m.accuracy);
    println!("mae_x_mm={:.4}", m.mae_x);
    println!("mae_theta_deg={:.4}", m.mae_theta);
    println!("weights -> {}", weights.display());
    write_manifest(&dir, "fit", cfg, &[weights], started, json!({ "dataset": path, "train": train.len(), "metrics": m }))?;
    Ok(())
}

fn build_estimator(cfg: &ExperimentConfig, dir: &Path) -> Result<Estimator> {
    Ok(match cfg.estimator {
        EstimatorKind::Oracle => Estimator::Oracle,
        EstimatorKind::Noisy => Estimator::Noisy(cfg.noise),
        EstimatorKind::Linear => {
            let path = cfg.weights.clone().unwrap_or_else(|| dir.join("weights.txt"));
            Estimator::Linear(Arc::new(LinearEstimator::load(&path)?))
        }
    })
}

fn cmd_experiment(cli: &Cli, cfg: &ExperimentConfig, started: Instant) -> Result<()> {
    let dir = out_dir(cli)?;
    let setups = cfg.setups()?;
    let estimator = build_estimator(cfg, &dir)?;
    let mut summaries = Vec::new();
    let mut outputs = Vec::new();
    for (i, setup) in setups.iter().enumerate() {
        let s = run_experiment(cfg, setup, i, &estimator)?;
        let p = dir.join(format!("episodes_{}.jsonl", setup.name));
        write_episodes_jsonl(&s, &p)?;
        outputs.push(p);
        summaries.push(s);
    }
    for (name, f) in [
        ("summary.csv", write_summary_csv as fn(&_, &Path) -> Result<()>),
        ("scatter.csv", write_scatter_csv),
    ] {
        let p = dir.join(name);
        f(&summaries, &p)?;
        outputs.push(p);
    }
    let rows: Vec<SummaryRow> = summaries.iter().map(SummaryRow::from).collect();
    let table = format_table(&rows);
    let p = dir.join("table.txt");
    std::fs::write(&p, &table).map_err(|e| Error::io(&p, e))?;
    outputs.push(p);
    print!("{table}");
    let manifest = write_manifest(&dir, "experiment", cfg, &outputs, started, json!({ "summaries": rows }))?;
    debug_assert!(manifest.ends_with(EXPERIMENT_MANIFEST));
    Ok(())
}

fn cmd_report(cli: &Cli, cfg: &ExperimentConfig, runs: &[PathBuf], started: Instant) -> Result<()> {
    let dirs: Vec<&Path> = runs.iter().map(PathBuf::as_path).collect();
    let rows = merge_runs(&dirs)?;
    let table = format_table(&rows);
    print!("{table}");
    if cli.out.is_some() {
        let dir = out_dir(cli)?;
        let p = dir.join("report.txt");
        std::fs::write(&p, &table).map_err(|e| Error::io(&p, e))?;
        write_manifest(&dir, "report", cfg, &[p], started, json!({ "runs": runs, "rows": rows }))?;
    }
    Ok(())
}
