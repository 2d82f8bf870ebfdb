//! Synthetic marker-field rendering for the two gel pads of a parallel
//! gripper, plus the incipient-slip monitor.
//!
//! Frames are produced directly as differences from the first contact frame.
//! Coordinates on the gel plane are `(x, z)`: x across the gap, z up, with the
//! object bottom (the pivot height) at `z = 0`.

use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::contact::{Twist, TwistDecomposition};
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::sign::Sign;

/// Frames per contact window.
pub const FRAMES: usize = 8;

/// Default slip threshold, mm of marker shear.
///
/// Half of the smallest frame-8 peak shear over one-sided rectangle contacts
/// with default parameters (see the calibration sweep in the tests).
pub const DEFAULT_TAU_SLIP: f64 = 2.85;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorLayout {
    pub rows: usize,
    pub cols: usize,
    pub spacing: f64,
    /// Patch centre `(x, z)` on the gel plane.
    pub patch_center: Vec2,
    /// `Pos` for the +y pad (sensor A), `Neg` for the opposing pad.
    pub gel_normal: Sign,
}

impl Default for SensorLayout {
    fn default() -> Self {
        SensorLayout {
            rows: 9,
            cols: 9,
            spacing: 2.0,
            patch_center: Vec2::new(0.0, 20.0),
            gel_normal: Sign::Pos,
        }
    }
}

impl SensorLayout {
    pub fn opposite(&self) -> SensorLayout {
        SensorLayout {
            gel_normal: self.gel_normal.flip(),
            ..*self
        }
    }

    pub fn markers(&self) -> usize {
        self.rows * self.cols
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::InvalidParameter("sensor grid must be non-empty".into()));
        }
        if !(self.spacing.is_finite() && self.spacing > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "marker spacing must be positive, got {}",
                self.spacing
            )));
        }
        if !(self.patch_center.x.is_finite() && self.patch_center.y.is_finite()) {
            return Err(Error::InvalidParameter("patch centre must be finite".into()));
        }
        // The pressure taper is normalized by the patch height.
        if self.patch_center.y <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "patch centre must sit above the object bottom, got z = {}",
                self.patch_center.y
            )));
        }
        if self.gel_normal.is_zero() {
            return Err(Error::InvalidParameter("gel normal must be +y or -y".into()));
        }
        Ok(())
    }

    /// Gel-plane position of marker `(row, col)` as seen from the pad.
    pub fn marker_position(&self, row: usize, col: usize) -> Vec2 {
        let u = self.patch_center.x + (col as f64 - (self.cols as f64 - 1.0) / 2.0) * self.spacing;
        let w = self.patch_center.y + (row as f64 - (self.rows as f64 - 1.0) / 2.0) * self.spacing;
        Vec2::new(u, w)
    }
}

/// Per-marker shear `(x, z)` and signed pressure change, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkerField {
    pub rows: usize,
    pub cols: usize,
    pub shear: Vec<[f64; 2]>,
    pub pressure: Vec<f64>,
}

impl MarkerField {
    pub fn zeros(rows: usize, cols: usize) -> MarkerField {
        MarkerField {
            rows,
            cols,
            shear: vec![[0.0; 2]; rows * cols],
            pressure: vec![0.0; rows * cols],
        }
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    pub fn max_shear(&self) -> f64 {
        self.shear
            .iter()
            .map(|s| s[0].hypot(s[1]))
            .fold(0.0, f64::max)
    }

    pub fn max_abs_pressure(&self) -> f64 {
        self.pressure.iter().map(|p| p.abs()).fold(0.0, f64::max)
    }

    pub fn scaled(&self, factor: f64) -> MarkerField {
        MarkerField {
            rows: self.rows,
            cols: self.cols,
            shear: self.shear.iter().map(|s| [s[0] * factor, s[1] * factor]).collect(),
            pressure: self.pressure.iter().map(|p| p * factor).collect(),
        }
    }

    fn is_finite(&self) -> bool {
        self.shear.iter().all(|s| s[0].is_finite() && s[1].is_finite())
            && self.pressure.iter().all(|p| p.is_finite())
    }
}

/// One pair of fields per frame: `(sensor A, sensor B)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TactileFrame {
    pub a: MarkerField,
    pub b: MarkerField,
}

impl TactileFrame {
    pub fn sensors(&self) -> [&MarkerField; 2] {
        [&self.a, &self.b]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TactileSequence {
    pub frames: Vec<TactileFrame>,
}

impl TactileSequence {
    pub fn zeros(layout: &SensorLayout, frames: usize) -> TactileSequence {
        let f = MarkerField::zeros(layout.rows, layout.cols);
        TactileSequence {
            frames: (0..frames)
                .map(|_| TactileFrame {
                    a: f.clone(),
                    b: f.clone(),
                })
                .collect(),
        }
    }

    pub fn scaled(&self, factor: f64) -> TactileSequence {
        TactileSequence {
            frames: self
                .frames
                .iter()
                .map(|fr| TactileFrame {
                    a: fr.a.scaled(factor),
                    b: fr.b.scaled(factor),
                })
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.frames.iter().all(|f| f.a.is_finite() && f.b.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.frames.iter().all(|f| {
            f.sensors().iter().all(|m| {
                m.pressure.iter().all(|&p| p == 0.0) && m.shear.iter().all(|s| s[0] == 0.0 && s[1] == 0.0)
            })
        })
    }
}

fn render_field(
    layout: &SensorLayout,
    sigma: f64,
    alpha: f64,
    pivot_x: f64,
    pressure_amp: f64,
) -> MarkerField {
    let mut field = MarkerField::zeros(layout.rows, layout.cols);
    let mirror = layout.gel_normal.as_f64();
    let h = layout.patch_center.y;
    for r in 0..layout.rows {
        for c in 0..layout.cols {
            let p = layout.marker_position(r, c);
            // The opposing pad sees the gel plane from the other side.
            let x = mirror * p.x;
            let w = p.y;
            let i = field.index(r, c);
            field.shear[i] = [sigma * alpha * w, -sigma * alpha * (x - pivot_x)];
            field.pressure[i] = mirror * pressure_amp * (w / h);
        }
    }
    field
}

/// Renders the contact window for a blocked pivot.
///
/// In frame `k` the object has turned by `(k-1)` times the per-frame angle.
/// Shear is the in-plane rotation of the gel contact points about the pivot
/// edge; pressure follows the out-of-plane tip with a linear taper in z.
pub fn render_sequence(
    decomp: &TwistDecomposition,
    twist: &Twist,
    layout: &SensorLayout,
    noise_sigma: f64,
    rng_seed: u64,
) -> Result<TactileSequence> {
    layout.validate()?;
    if !(noise_sigma.is_finite() && noise_sigma >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "noise_sigma must be non-negative, got {noise_sigma}"
        )));
    }
    if twist.frames == 0 {
        return Err(Error::Contract("twist has no frames".into()));
    }
    if !(decomp.in_plane.is_finite() && decomp.out_of_plane.is_finite() && decomp.lever_arm.is_finite()) {
        return Err(Error::Contract("non-finite twist decomposition".into()));
    }
    let sigma = decomp.shear_sign.as_f64();
    let lever = decomp.lever_arm;
    let pivot_x = -sigma * lever;
    let layout_a = SensorLayout {
        gel_normal: Sign::Pos,
        ..*layout
    };
    let layout_b = layout_a.opposite();

    let normal = if noise_sigma > 0.0 {
        Some(Normal::new(0.0, noise_sigma).expect("validated sigma"))
    } else {
        None
    };
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);

    let mut frames = Vec::with_capacity(twist.frames as usize);
    for k in 0..twist.frames {
        let steps = k as f64;
        let alpha = (steps * decomp.in_plane).to_radians();
        let beta = (steps * decomp.out_of_plane.abs()).to_radians();
        let amp = decomp.pressure_sign.as_f64() * beta * lever;
        let mut a = render_field(&layout_a, sigma, alpha, pivot_x, amp);
        let mut b = render_field(&layout_b, sigma, alpha, pivot_x, amp);
        if let (Some(n), true) = (&normal, k > 0) {
            for f in [&mut a, &mut b] {
                for s in f.shear.iter_mut() {
                    s[0] += n.sample(&mut rng);
                    s[1] += n.sample(&mut rng);
                }
                for p in f.pressure.iter_mut() {
                    *p += n.sample(&mut rng);
                }
            }
        }
        frames.push(TactileFrame { a, b });
    }
    Ok(TactileSequence { frames })
}

/// Peak marker shear magnitude in the latest frame, over both pads.
pub fn slip_metric(frames: &[TactileFrame]) -> f64 {
    frames
        .last()
        .map(|f| f.a.max_shear().max(f.b.max_shear()))
        .unwrap_or(0.0)
}

pub fn incipient_slip(frames: &[TactileFrame], tau_slip: f64) -> Result<bool> {
    if !(tau_slip.is_finite() && tau_slip > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tau_slip must be positive, got {tau_slip}"
        )));
    }
    Ok(slip_metric(frames) >= tau_slip)
}

/// First 1-based frame at which the slip monitor fires, if any.
pub fn slip_frame(seq: &TactileSequence, tau_slip: f64) -> Result<Option<usize>> {
    for n in 1..=seq.frames.len() {
        if incipient_slip(&seq.frames[..n], tau_slip)? {
            return Ok(Some(n));
        }
    }
    Ok(None)
}

fn sensor_name(i: usize) -> &'static str {
    if i == 0 {
        "A"
    } else {
        "B"
    }
}

/// Marker table: `frame, sensor, row, col, shear_x, shear_z, pressure`.
pub fn write_marker_csv<W: Write>(seq: &TactileSequence, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let wrap = |e: csv::Error| Error::format("marker csv", e.to_string());
    w.write_record(["frame", "sensor", "row", "col", "shear_x", "shear_z", "pressure"])
        .map_err(wrap)?;
    for (k, frame) in seq.frames.iter().enumerate() {
        for (s, field) in frame.sensors().into_iter().enumerate() {
            for r in 0..field.rows {
                for c in 0..field.cols {
                    let i = field.index(r, c);
                    w.write_record(&[
                        (k + 1).to_string(),
                        sensor_name(s).to_string(),
                        r.to_string(),
                        c.to_string(),
                        field.shear[i][0].to_string(),
                        field.shear[i][1].to_string(),
                        field.pressure[i].to_string(),
                    ])
                    .map_err(wrap)?;
                }
            }
        }
    }
    w.flush().map_err(|e| Error::format("marker csv", e.to_string()))?;
    Ok(())
}

/// Binary P5 image of the pressure channel; mid-grey is zero, scaled by the
/// largest magnitude over the whole sequence so frames are comparable.
pub fn pressure_pgm(field: &MarkerField, scale: f64) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", field.cols, field.rows).into_bytes();
    for &p in &field.pressure {
        let v = if scale > 0.0 { 128.0 + p / scale * 127.0 } else { 128.0 };
        out.push(v.round().clamp(0.0, 255.0) as u8);
    }
    out
}

/// Writes `frame<k>_<sensor>.pgm` for every frame and pad plus `markers.csv`.
pub fn dump_sequence(seq: &TactileSequence, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let scale = seq
        .frames
        .iter()
        .flat_map(|f| f.sensors())
        .map(MarkerField::max_abs_pressure)
        .fold(0.0, f64::max);
    for (k, frame) in seq.frames.iter().enumerate() {
        for (s, field) in frame.sensors().into_iter().enumerate() {
            let path = dir.join(format!("frame{}_{}.pgm", k + 1, sensor_name(s)));
            std::fs::write(&path, pressure_pgm(field, scale)).map_err(|e| Error::io(&path, e))?;
        }
    }
    let path = dir.join("markers.csv");
    let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    write_marker_csv(seq, std::io::BufWriter::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contact::{decompose_twist, descend, pivot_twist, ContactParams, ContactSide};
    use crate::geometry::{make_cross_section, ErrorState, GapEnvironment, ShapeSpec};

    fn rect() -> crate::geometry::CrossSection {
        make_cross_section(
            &ShapeSpec::Rectangle {
                width: 51.0,
                length: 80.0,
            },
            4,
        )
        .unwrap()
    }

    fn render_for(e: ErrorState, sigma: f64) -> Option<TactileSequence> {
        let env = GapEnvironment::with_gap(56.0);
        let ev = descend(&rect(), e, &env);
        if !ev.blocked {
            return None;
        }
        let tw = pivot_twist(&ev, &ContactParams::default()).unwrap();
        let d = decompose_twist(&tw, &ev);
        Some(render_sequence(&d, &tw, &SensorLayout::default(), sigma, 7).unwrap())
    }

    #[test]
    fn first_frame_is_zero_even_with_noise() {
        let seq = render_for(ErrorState::new(10.0, 8.0), 0.05).unwrap();
        assert_eq!(seq.frames.len(), FRAMES);
        let f1 = TactileSequence {
            frames: vec![seq.frames[0].clone()],
        };
        assert!(f1.is_zero());
        assert!(!seq.is_zero());
    }

    #[test]
    fn pressure_is_opposite_on_the_two_pads() {
        let seq = render_for(ErrorState::new(10.0, 8.0), 0.0).unwrap();
        for f in &seq.frames {
            for (pa, pb) in f.a.pressure.iter().zip(&f.b.pressure) {
                assert_eq!(*pa, -*pb);
            }
        }
        assert!(seq.frames[7].a.max_abs_pressure() > 0.0);
    }

    #[test]
    fn slip_metric_grows_over_frames() {
        let seq = render_for(ErrorState::new(-12.0, 3.0), 0.0).unwrap();
        let m: Vec<f64> = (1..=FRAMES).map(|n| slip_metric(&seq.frames[..n])).collect();
        assert_eq!(m[0], 0.0);
        assert!(m.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(slip_metric(&[]), 0.0);
    }

    #[test]
    fn incipient_slip_rejects_bad_threshold() {
        assert!(incipient_slip(&[], 0.0).is_err());
        assert!(!incipient_slip(&[], 1.0).unwrap());
    }

    #[test]
    fn seeded_noise_is_reproducible() {
        let a = render_for(ErrorState::new(10.0, 8.0), 0.05).unwrap();
        let b = render_for(ErrorState::new(10.0, 8.0), 0.05).unwrap();
        assert_eq!(a, b);
    }

    // Independent calibration sweep for the default slip threshold: half of
    // the weakest frame-8 peak shear over one-sided rectangle contacts.
    #[test]
    fn default_tau_slip_matches_calibration_sweep() {
        let env = GapEnvironment::with_gap(56.0);
        let shape = rect();
        let params = ContactParams::default();
        let n = 121;
        let mut weakest = f64::INFINITY;
        for i in 0..n {
            for j in 0..n {
                let e = ErrorState::new(
                    -15.0 + 30.0 * i as f64 / (n - 1) as f64,
                    -15.0 + 30.0 * j as f64 / (n - 1) as f64,
                );
                let ev = descend(&shape, e, &env);
                if !matches!(ev.side, ContactSide::Left | ContactSide::Right) {
                    continue;
                }
                // Closed form for the farthest marker from the pivot.
                let lever = ev.lever_arm.max(params.min_lever);
                let alpha = 7.0 * params.descent_per_frame / lever * e.dtheta.to_radians().cos();
                let sx = if ev.side == ContactSide::Left { 1.0 } else { -1.0 };
                let pivot = -sx * lever;
                let mut peak: f64 = 0.0;
                for c in 0..9 {
                    for r in 0..9 {
                        let w = 12.0 + 2.0 * r as f64;
                        for x in [-8.0 + 2.0 * c as f64, 8.0 - 2.0 * c as f64] {
                            peak = peak.max(alpha * w.hypot(x - pivot));
                        }
                    }
                }
                weakest = weakest.min(peak);
            }
        }
        let tau = 0.5 * weakest;
        assert!(
            (tau - DEFAULT_TAU_SLIP).abs() < 0.01,
            "calibrated tau {tau:.4} vs default {DEFAULT_TAU_SLIP}"
        );
    }

    #[test]
    fn pgm_header_and_midgrey() {
        let f = MarkerField::zeros(9, 9);
        let img = pressure_pgm(&f, 0.0);
        assert!(img.starts_with(b"P5\n9 9\n255\n"));
        assert_eq!(img.len(), 11 + 81);
        assert!(img[11..].iter().all(|&v| v == 128));
    }

    #[test]
    fn marker_csv_has_one_row_per_marker() {
        let seq = render_for(ErrorState::new(10.0, 8.0), 0.0).unwrap();
        let mut buf = Vec::new();
        write_marker_csv(&seq, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "frame,sensor,row,col,shear_x,shear_z,pressure");
        assert_eq!(lines.len(), 1 + FRAMES * 2 * 81);
    }
}
