//! Planar object footprints, the two-block gap environment and the
//! insertion-feasibility predicate.
//!
//! Frames: `x` runs across the gap (gap centre at `x = 0`), `y` along the
//! gap length. A body-frame [`CrossSection`] is centred on its centroid with
//! its width along `x` and its length along `y`; the yaw error rotates it
//! about the vertical axis.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default vertex count for curved outlines.
pub const DEFAULT_CURVE_VERTICES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Counter-clockwise rotation by `angle_deg` degrees.
    pub fn rotated(self, angle_deg: f64) -> Vec2 {
        let (s, c) = angle_deg.to_radians().sin_cos();
        Vec2::new(self.x * c - self.y * s, self.x * s + self.y * c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ShapeKind {
    Circle,
    Rectangle,
    Ellipse,
    Hexagon,
    RoundedRectangle,
}

impl ShapeKind {
    pub fn name(self) -> &'static str {
        match self {
            ShapeKind::Circle => "circle",
            ShapeKind::Rectangle => "rectangle",
            ShapeKind::Ellipse => "ellipse",
            ShapeKind::Hexagon => "hexagon",
            ShapeKind::RoundedRectangle => "rounded_rectangle",
        }
    }

    pub fn parse(name: &str) -> Option<ShapeKind> {
        Some(match name {
            "circle" => ShapeKind::Circle,
            "rectangle" => ShapeKind::Rectangle,
            "ellipse" => ShapeKind::Ellipse,
            "hexagon" => ShapeKind::Hexagon,
            "rounded_rectangle" => ShapeKind::RoundedRectangle,
            _ => return None,
        })
    }
}

/// Footprint description in millimetres.
///
/// Widths are measured across the gap, lengths along it. The ellipse takes
/// full axis lengths; the hexagon is oriented corner-to-corner across the gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ShapeSpec {
    Circle { radius: f64 },
    Rectangle { width: f64, length: f64 },
    Ellipse { width: f64, length: f64 },
    Hexagon { circumradius: f64 },
    RoundedRectangle { width: f64, length: f64, corner_radius: f64 },
}

impl ShapeSpec {
    pub fn kind(&self) -> ShapeKind {
        match self {
            ShapeSpec::Circle { .. } => ShapeKind::Circle,
            ShapeSpec::Rectangle { .. } => ShapeKind::Rectangle,
            ShapeSpec::Ellipse { .. } => ShapeKind::Ellipse,
            ShapeSpec::Hexagon { .. } => ShapeKind::Hexagon,
            ShapeSpec::RoundedRectangle { .. } => ShapeKind::RoundedRectangle,
        }
    }

    /// Nominal extent across the gap at zero yaw.
    pub fn nominal_width(&self) -> f64 {
        match *self {
            ShapeSpec::Circle { radius } => 2.0 * radius,
            ShapeSpec::Rectangle { width, .. }
            | ShapeSpec::Ellipse { width, .. }
            | ShapeSpec::RoundedRectangle { width, .. } => width,
            ShapeSpec::Hexagon { circumradius } => 2.0 * circumradius,
        }
    }

    /// Named dimensions as `(key, mm)` pairs, in config-file order.
    pub fn params(&self) -> Vec<(&'static str, f64)> {
        match *self {
            ShapeSpec::Circle { radius } => vec![("radius", radius)],
            ShapeSpec::Rectangle { width, length } | ShapeSpec::Ellipse { width, length } => {
                vec![("width", width), ("length", length)]
            }
            ShapeSpec::Hexagon { circumradius } => vec![("circumradius", circumradius)],
            ShapeSpec::RoundedRectangle {
                width,
                length,
                corner_radius,
            } => vec![
                ("width", width),
                ("length", length),
                ("corner_radius", corner_radius),
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in self.params() {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{} {name} must be a positive finite length, got {value}",
                    self.kind().name()
                )));
            }
        }
        match *self {
            ShapeSpec::Rectangle { width, length }
            | ShapeSpec::Ellipse { width, length }
            | ShapeSpec::RoundedRectangle { width, length, .. }
                if width > length =>
            {
                Err(Error::InvalidParameter(format!(
                    "{} width {width} exceeds length {length}",
                    self.kind().name()
                )))
            }
            ShapeSpec::RoundedRectangle {
                width,
                corner_radius,
                ..
            } if 2.0 * corner_radius >= width => Err(Error::InvalidParameter(format!(
                "corner radius {corner_radius} must be below half the width {width}"
            ))),
            _ => Ok(()),
        }
    }
}

/// Convex counter-clockwise polygon centred on its centroid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossSection {
    vertices: Vec<Vec2>,
}

impl CrossSection {
    /// Builds a cross-section from raw vertices, checking convexity and
    /// orientation, then recentring on the area centroid.
    pub fn from_vertices(vertices: Vec<Vec2>) -> Result<CrossSection> {
        if vertices.len() < 3 {
            return Err(Error::InvalidParameter(format!(
                "a cross-section needs at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        let n = vertices.len();
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let c = vertices[(i + 2) % n];
            let cross = (b.x - a.x) * (c.y - b.y) - (b.y - a.y) * (c.x - b.x);
            if cross <= 0.0 {
                return Err(Error::InvalidParameter(
                    "vertices must form a strictly convex counter-clockwise polygon".into(),
                ));
            }
        }
        let centroid = polygon_centroid(&vertices);
        let vertices = vertices
            .into_iter()
            .map(|v| Vec2::new(v.x - centroid.x, v.y - centroid.y))
            .collect();
        Ok(CrossSection { vertices })
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    /// Extent along `y` at zero yaw, as `(min, max)`.
    pub fn y_extent(&self) -> (f64, f64) {
        self.vertices
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v.y), hi.max(v.y))
            })
    }
}

fn signed_area(vertices: &[Vec2]) -> f64 {
    let n = vertices.len();
    (0..n)
        .map(|i| {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            a.x * b.y - b.x * a.y
        })
        .sum::<f64>()
        / 2.0
}

fn polygon_centroid(vertices: &[Vec2]) -> Vec2 {
    let n = vertices.len();
    let area = signed_area(vertices);
    let (mut cx, mut cy) = (0.0, 0.0);
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        let w = a.x * b.y - b.x * a.y;
        cx += (a.x + b.x) * w;
        cy += (a.y + b.y) * w;
    }
    Vec2::new(cx / (6.0 * area), cy / (6.0 * area))
}

/// Polygonal stand-in for a footprint.
///
/// Rectangles yield their 4 corners and hexagons their 6 corners regardless
/// of `vertex_count`; curved outlines are sampled at `vertex_count`
/// uniformly spaced parameter values starting on the `+x` axis.
pub fn make_cross_section(spec: &ShapeSpec, vertex_count: usize) -> Result<CrossSection> {
    spec.validate()?;
    if vertex_count < 3 {
        return Err(Error::InvalidParameter(format!(
            "vertex_count must be at least 3, got {vertex_count}"
        )));
    }
    let ring = |n: usize, a: f64, b: f64| -> Vec<Vec2> {
        (0..n)
            .map(|i| {
                let t = std::f64::consts::TAU * i as f64 / n as f64;
                Vec2::new(a * t.cos(), b * t.sin())
            })
            .collect()
    };
    let vertices = match *spec {
        ShapeSpec::Circle { radius } => ring(vertex_count, radius, radius),
        ShapeSpec::Ellipse { width, length } => ring(vertex_count, width / 2.0, length / 2.0),
        ShapeSpec::Hexagon { circumradius } => ring(6, circumradius, circumradius),
        ShapeSpec::Rectangle { width, length } => {
            let (hx, hy) = (width / 2.0, length / 2.0);
            vec![
                Vec2::new(-hx, -hy),
                Vec2::new(hx, -hy),
                Vec2::new(hx, hy),
                Vec2::new(-hx, hy),
            ]
        }
        ShapeSpec::RoundedRectangle {
            width,
            length,
            corner_radius,
        } => {
            // Arc endpoints are included so each straight side is one edge.
            let per_corner = (vertex_count / 4).max(2);
            let (hx, hy) = (width / 2.0 - corner_radius, length / 2.0 - corner_radius);
            let centres = [
                Vec2::new(hx, -hy),
                Vec2::new(hx, hy),
                Vec2::new(-hx, hy),
                Vec2::new(-hx, -hy),
            ];
            let mut out = Vec::with_capacity(per_corner * 4);
            for (q, c) in centres.iter().enumerate() {
                let start = -std::f64::consts::FRAC_PI_2 + q as f64 * std::f64::consts::FRAC_PI_2;
                for j in 0..per_corner {
                    let t = start
                        + std::f64::consts::FRAC_PI_2 * j as f64 / (per_corner - 1) as f64;
                    out.push(Vec2::new(
                        c.x + corner_radius * t.cos(),
                        c.y + corner_radius * t.sin(),
                    ));
                }
            }
            if hy == 0.0 {
                // Square rounded rectangle: the two arcs meet on the y-axis
                // at duplicate points.
                out.dedup_by(|a, b| (a.x - b.x).abs() < 1e-12 && (a.y - b.y).abs() < 1e-12);
            }
            out
        }
    };
    CrossSection::from_vertices(vertices)
}

/// Closed interval along `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub min: f64,
    pub max: f64,
}

impl Interval {
    pub fn width(&self) -> f64 {
        self.max - self.min
    }

    pub fn shifted(self, dx: f64) -> Interval {
        Interval {
            min: self.min + dx,
            max: self.max + dx,
        }
    }
}

/// Exact `x`-extent of the polygon after a yaw of `dtheta` degrees.
pub fn rotated_footprint_interval(shape: &CrossSection, dtheta: f64) -> Interval {
    let (s, c) = dtheta.to_radians().sin_cos();
    shape.vertices().iter().fold(
        Interval {
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        },
        |acc, v| {
            let x = v.x * c - v.y * s;
            Interval {
                min: acc.min.min(x),
                max: acc.max.max(x),
            }
        },
    )
}

/// Two fixed blocks with a shared top surface at `block_top_z`, separated by
/// a gap of `gap_width` centred on `x = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapEnvironment {
    pub gap_width: f64,
    pub block_top_z: f64,
    pub block_extent_x: f64,
    pub block_extent_y: f64,
    pub target_depth: f64,
}

impl Default for GapEnvironment {
    fn default() -> Self {
        GapEnvironment {
            gap_width: 56.0,
            block_top_z: 0.0,
            block_extent_x: 45.0,
            block_extent_y: 155.0,
            target_depth: 20.0,
        }
    }
}

impl GapEnvironment {
    pub fn with_gap(gap_width: f64) -> Self {
        GapEnvironment {
            gap_width,
            ..Default::default()
        }
    }

    pub fn half_gap(&self) -> f64 {
        self.gap_width / 2.0
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("gap_width", self.gap_width),
            ("target_depth", self.target_depth),
            ("block_extent_x", self.block_extent_x),
            ("block_extent_y", self.block_extent_y),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !self.block_top_z.is_finite() {
            return Err(Error::InvalidParameter("block_top_z must be finite".into()));
        }
        Ok(())
    }

    /// The object must not overhang the blocks along the gap length.
    pub fn check_shape_length(&self, shape: &CrossSection) -> Result<()> {
        let (lo, hi) = shape.y_extent();
        if hi - lo > self.block_extent_y {
            return Err(Error::InvalidParameter(format!(
                "object length {:.2} mm exceeds block length {:.2} mm",
                hi - lo,
                self.block_extent_y
            )));
        }
        Ok(())
    }
}

/// True positional error of the insertion pose relative to the gap.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ErrorState {
    /// Translation across the gap, mm.
    pub dx: f64,
    /// Yaw, degrees.
    pub dtheta: f64,
}

impl ErrorState {
    pub const fn new(dx: f64, dtheta: f64) -> Self {
        ErrorState { dx, dtheta }
    }

    pub fn negated(self) -> Self {
        ErrorState::new(-self.dx, -self.dtheta)
    }
}

/// Rotated, translated footprint lies strictly inside the gap.
pub fn fits_gap(shape: &CrossSection, error: ErrorState, env: &GapEnvironment) -> bool {
    let span = rotated_footprint_interval(shape, error.dtheta).shifted(error.dx);
    let half = env.half_gap();
    span.min > -half && span.max < half
}
