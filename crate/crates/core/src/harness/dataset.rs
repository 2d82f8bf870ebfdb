//! Self-supervised dataset: random poses, keep the blocked ones together with
//! their tactile window and label.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ShapeSetup};
use super::episode::{episode_rng, sample_error};
use super::experiment::stream_id;
use crate::contact::{decompose_twist, descend, pivot_twist};
use crate::error::{Error, Result};
use crate::estimation::features::feature_names;
use crate::estimation::{extract_features, label_blocked, DirectionClass, LabeledFeatures, FEATURE_DIM, NUM_CLASSES};
use crate::exec::map_indexed;
use crate::geometry::ErrorState;
use crate::tactile::{render_sequence, TactileSequence};

const DATASET_MAGIC: &str = "# tactile-pack dataset v1";
const BATCH: usize = 1024;
const DATASET_STREAM_SALT: u64 = 0x5eed_da7a_5e75_0001;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSample {
    pub shape_id: String,
    pub error_label: ErrorState,
    pub class_label: DirectionClass,
    /// Labelled by the dominant component (inside the threshold box).
    pub flagged: bool,
    /// Copy added by the rotation-class doubling.
    pub duplicate: bool,
    /// Seed of the marker noise; with the shape setup this regenerates the
    /// sequence exactly.
    pub render_seed: u64,
    pub features: Vec<f64>,
}

impl DatasetSample {
    pub fn labeled(&self) -> LabeledFeatures {
        LabeledFeatures {
            features: self.features.clone(),
            class: self.class_label,
            error: self.error_label,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeStats {
    pub shape: String,
    pub attempts: usize,
    pub blocked: usize,
    pub doubled: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub seed: u64,
    pub stats: Vec<ShapeStats>,
    pub samples: Vec<DatasetSample>,
}

impl Dataset {
    pub fn class_counts(&self) -> [usize; NUM_CLASSES] {
        class_counts(&self.samples)
    }

    pub fn labeled(&self) -> Vec<LabeledFeatures> {
        self.samples.iter().map(DatasetSample::labeled).collect()
    }
}

pub fn class_counts(samples: &[DatasetSample]) -> [usize; NUM_CLASSES] {
    let mut c = [0; NUM_CLASSES];
    for s in samples {
        c[s.class_label.index()] += 1;
    }
    c
}

/// Tactile window of a blocked pose, `None` if the pose fits.
pub fn render_pose(
    cfg: &ExperimentConfig,
    setup: &ShapeSetup,
    error: ErrorState,
    noise_seed: u64,
) -> Result<Option<TactileSequence>> {
    let event = descend(&setup.section, error, &setup.env);
    if !event.blocked {
        return Ok(None);
    }
    let twist = pivot_twist(&event, &cfg.contact)?;
    let decomp = decompose_twist(&twist, &event);
    render_sequence(&decomp, &twist, &cfg.layout, cfg.dataset.noise_sigma, noise_seed).map(Some)
}

struct Attempt {
    sample: DatasetSample,
    duplicate_seed: u64,
}

fn attempt(cfg: &ExperimentConfig, setup: &ShapeSetup, shape_index: usize, j: usize) -> Result<Option<Attempt>> {
    let mut rng = episode_rng(cfg.seed ^ DATASET_STREAM_SALT, stream_id(shape_index, j));
    let error = sample_error(cfg.dataset.range_x, cfg.dataset.range_theta, &mut rng);
    let seed = rng.next_u64();
    let duplicate_seed = rng.next_u64();
    let Some(seq) = render_pose(cfg, setup, error, seed)? else {
        return Ok(None);
    };
    let (class_label, flagged) = label_blocked(error, &cfg.thresholds);
    Ok(Some(Attempt {
        sample: DatasetSample {
            shape_id: setup.name.clone(),
            error_label: error,
            class_label,
            flagged,
            duplicate: false,
            render_seed: seed,
            features: extract_features(&seq)?,
        },
        duplicate_seed,
    }))
}

/// Samples poses over the dataset ranges until `samples_per_shape` blocked
/// contacts are found (or the attempt budget runs out), then doubles the
/// pure-rotation classes with fresh noise.
pub fn collect_dataset(
    cfg: &ExperimentConfig,
    setup: &ShapeSetup,
    shape_index: usize,
) -> Result<(Vec<DatasetSample>, ShapeStats)> {
    let want = cfg.dataset.samples_per_shape;
    let budget = if cfg.dataset.max_attempts == 0 {
        want.saturating_mul(200)
    } else {
        cfg.dataset.max_attempts
    };
    let mut kept: Vec<Attempt> = Vec::with_capacity(want);
    let mut attempts = 0usize;
    while kept.len() < want && attempts < budget {
        let n = BATCH.min(budget - attempts);
        let base = attempts;
        let batch = map_indexed(cfg.execution, n, |i| attempt(cfg, setup, shape_index, base + i));
        for (i, a) in batch.into_iter().enumerate() {
            if let Some(a) = a? {
                kept.push(a);
                if kept.len() == want {
                    attempts = base + i + 1;
                    break;
                }
            }
        }
        if kept.len() < want {
            attempts = base + n;
        }
    }
    if kept.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "{} never blocked in {attempts} attempts",
            setup.name
        )));
    }
    let blocked = kept.len();
    let mut samples: Vec<DatasetSample> = Vec::with_capacity(blocked * 21 / 20);
    let mut extra = Vec::new();
    for a in kept {
        let rotation = matches!(a.sample.class_label, DirectionClass::C7 | DirectionClass::C8);
        if cfg.dataset.double_rotation_classes && rotation {
            let mut copy = a.sample.clone();
            copy.duplicate = true;
            copy.render_seed = a.duplicate_seed;
            if cfg.dataset.noise_sigma > 0.0 {
                let seq = render_pose(cfg, setup, copy.error_label, copy.render_seed)?
                    .expect("pose was blocked");
                copy.features = extract_features(&seq)?;
            }
            extra.push(copy);
        }
        samples.push(a.sample);
    }
    let doubled = extra.len();
    samples.extend(extra);
    Ok((
        samples,
        ShapeStats {
            shape: setup.name.clone(),
            attempts,
            blocked,
            doubled,
        },
    ))
}

pub fn collect_all(cfg: &ExperimentConfig, setups: &[ShapeSetup]) -> Result<Dataset> {
    let mut ds = Dataset {
        seed: cfg.seed,
        stats: Vec::new(),
        samples: Vec::new(),
    };
    for (i, setup) in setups.iter().enumerate() {
        let (s, st) = collect_dataset(cfg, setup, i)?;
        ds.samples.extend(s);
        ds.stats.push(st);
    }
    Ok(ds)
}

fn format_counts(c: &[usize; NUM_CLASSES]) -> String {
    DirectionClass::ALL
        .iter()
        .map(|k| format!("{}:{}", k, c[k.index()]))
        .collect::<Vec<_>>()
        .join(",")
}

/// CSV body with `#` header lines (counts, seed, feature layout).
pub fn write_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(out, "{DATASET_MAGIC}").map_err(io)?;
    writeln!(out, "# seed={}", ds.seed).map_err(io)?;
    writeln!(out, "# samples={}", ds.samples.len()).map_err(io)?;
    writeln!(out, "# feature_dim={FEATURE_DIM}").map_err(io)?;
    writeln!(
        out,
        "# features: per frame 1..8 and pad a,b seven statistics, then per-pad sums over frames"
    )
    .map_err(io)?;
    writeln!(out, "# class_counts={}", format_counts(&ds.class_counts())).map_err(io)?;
    for st in &ds.stats {
        writeln!(
            out,
            "# shape={} attempts={} blocked={} doubled={}",
            st.shape, st.attempts, st.blocked, st.doubled
        )
        .map_err(io)?;
    }
    {
        let mut w = csv::Writer::from_writer(&mut out);
        let err = |e: csv::Error| Error::format(path.display().to_string(), e.to_string());
        let mut header: Vec<String> = ["shape", "dx", "dtheta", "class", "flagged", "duplicate", "render_seed"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        header.extend(feature_names());
        w.write_record(&header).map_err(err)?;
        for s in &ds.samples {
            let mut rec = vec![
                s.shape_id.clone(),
                s.error_label.dx.to_string(),
                s.error_label.dtheta.to_string(),
                s.class_label.number().to_string(),
                (s.flagged as u8).to_string(),
                (s.duplicate as u8).to_string(),
                s.render_seed.to_string(),
            ];
            rec.extend(s.features.iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(err)?;
        }
        w.flush().map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = std::io::BufReader::new(file);
    let bad = |m: String| Error::format(path.display().to_string(), m);
    let mut first = String::new();
    reader.read_line(&mut first).map_err(|e| Error::io(path, e))?;
    if first.trim_end() != DATASET_MAGIC {
        return Err(bad("not a tactile-pack dataset (missing header)".into()));
    }
    let rest: Vec<String> = reader.lines().collect::<std::io::Result<_>>().map_err(|e| Error::io(path, e))?;
    let mut seed = 0u64;
    let mut stats = Vec::new();
    let mut body = String::new();
    for line in &rest {
        if let Some(h) = line.strip_prefix("# ") {
            if let Some(v) = h.strip_prefix("seed=") {
                seed = v.parse().map_err(|_| bad(format!("bad seed `{v}`")))?;
            } else if let Some(v) = h.strip_prefix("shape=") {
                let fields: BTreeMap<&str, &str> = std::iter::once(("shape", v.split(' ').next().unwrap_or("")))
                    .chain(v.split(' ').skip(1).filter_map(|kv| kv.split_once('=')))
                    .collect();
                let num = |k: &str| -> Result<usize> {
                    fields
                        .get(k)
                        .and_then(|v| v.parse().ok())
                        .ok_or_else(|| bad(format!("bad shape header `{line}`")))
                };
                stats.push(ShapeStats {
                    shape: fields["shape"].to_string(),
                    attempts: num("attempts")?,
                    blocked: num("blocked")?,
                    doubled: num("doubled")?,
                });
            }
        } else if !line.starts_with('#') {
            body.push_str(line);
            body.push('\n');
        }
    }
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    let header = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.len() != 7 + FEATURE_DIM {
        return Err(bad(format!(
            "expected {} columns, found {}",
            7 + FEATURE_DIM,
            header.len()
        )));
    }
    let mut samples = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let at = |m: &str| bad(format!("row {}: {m}", row + 1));
        let f = |i: usize| -> Result<f64> {
            rec[i].parse::<f64>().map_err(|_| at(&format!("bad number `{}`", &rec[i])))
        };
        let class = rec[3]
            .parse::<u8>()
            .ok()
            .and_then(DirectionClass::from_number)
            .ok_or_else(|| at(&format!("bad class `{}`", &rec[3])))?;
        samples.push(DatasetSample {
            shape_id: rec[0].to_string(),
            error_label: ErrorState::new(f(1)?, f(2)?),
            class_label: class,
            flagged: &rec[4] == "1",
            duplicate: &rec[5] == "1",
            render_seed: rec[6].parse().map_err(|_| at("bad render_seed"))?,
            features: (7..7 + FEATURE_DIM).map(f).collect::<Result<_>>()?,
        });
    }
    Ok(Dataset { seed, stats, samples })
}

/// Full marker table for every sample, regenerated from the stored seeds.
/// Columns: `sample`, then the tactile marker layout.
pub fn write_markers(ds: &Dataset, cfg: &ExperimentConfig, setups: &[ShapeSetup], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    let err = |e: csv::Error| Error::format(path.display().to_string(), e.to_string());
    w.write_record(["sample", "frame", "sensor", "row", "col", "shear_x", "shear_z", "pressure"])
        .map_err(err)?;
    for (i, s) in ds.samples.iter().enumerate() {
        let setup = setups
            .iter()
            .find(|x| x.name == s.shape_id)
            .ok_or_else(|| Error::Contract(format!("no setup for shape {}", s.shape_id)))?;
        let seq = render_pose(cfg, setup, s.error_label, s.render_seed)?
            .ok_or_else(|| Error::Contract("dataset sample is not a blocked pose".into()))?;
        for (k, frame) in seq.frames.iter().enumerate() {
            for (p, field) in frame.sensors().into_iter().enumerate() {
                for r in 0..field.rows {
                    for c in 0..field.cols {
                        let m = field.index(r, c);
                        w.write_record(&[
                            i.to_string(),
                            (k + 1).to_string(),
                            if p == 0 { "A" } else { "B" }.to_string(),
                            r.to_string(),
                            c.to_string(),
                            field.shear[m][0].to_string(),
                            field.shear[m][1].to_string(),
                            field.pressure[m].to_string(),
                        ])
                        .map_err(err)?;
                    }
                }
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::preset;

    fn small_cfg(n: usize) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.dataset.samples_per_shape = n;
        cfg
    }

    #[test]
    fn only_blocked_poses_are_kept() {
        let cfg = small_cfg(200);
        let setup = cfg.setup(&preset("rectangle").unwrap()).unwrap();
        let (samples, st) = collect_dataset(&cfg, &setup, 0).unwrap();
        assert_eq!(st.blocked, 200);
        assert!(st.attempts >= 200);
        assert_eq!(samples.len(), 200 + st.doubled);
        for s in &samples {
            assert!(descend(&setup.section, s.error_label, &setup.env).blocked);
        }
    }

    #[test]
    fn rotation_classes_are_doubled() {
        let cfg = small_cfg(400);
        let setup = cfg.setup(&preset("ellipse").unwrap()).unwrap();
        let (samples, st) = collect_dataset(&cfg, &setup, 0).unwrap();
        let orig: Vec<_> = samples.iter().filter(|s| !s.duplicate).collect();
        let c7 = orig.iter().filter(|s| s.class_label == DirectionClass::C7).count();
        let c7_all = samples.iter().filter(|s| s.class_label == DirectionClass::C7).count();
        assert!(c7 > 0);
        assert_eq!(c7_all, 2 * c7);
        assert_eq!(st.doubled, samples.len() - orig.len());
    }

    #[test]
    fn file_round_trip() {
        let cfg = small_cfg(30);
        let setups = vec![cfg.setup(&preset("hexagon").unwrap()).unwrap()];
        let ds = collect_all(&cfg, &setups).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        write_dataset(&ds, &p).unwrap();
        assert_eq!(read_dataset(&p).unwrap(), ds);
        write_markers(&ds, &cfg, &setups, &dir.path().join("m.csv")).unwrap();
    }

    #[test]
    fn shape_that_never_blocks_is_an_error() {
        let mut cfg = small_cfg(5);
        cfg.dataset.range_x = 0.0;
        cfg.dataset.range_theta = 0.0;
        cfg.dataset.max_attempts = 50;
        let setup = cfg.setup(&preset("circle").unwrap()).unwrap();
        assert!(matches!(collect_dataset(&cfg, &setup, 0), Err(Error::EmptyDataset(_))));
    }
}
