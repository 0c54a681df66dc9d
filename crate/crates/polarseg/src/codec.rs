//! Conversion between contours and the center-plus-rays polar form.
//!
//! Two encoders are provided. [`encode_traversal`] walks the contour points,
//! bins their angles and reads distances off the bins, mirroring how dense
//! traced contours are labeled in practice. [`encode_raycast`] intersects
//! each ray with the contour segments analytically and is the exact-geometry
//! reference the traversal encoder is validated against.
//!
//! Everything here is a pure function over immutable inputs; instances can
//! be encoded and decoded in parallel without coordination.

use std::f64::consts::TAU;
use std::fmt;

use crate::geometry::{Contour, GeometryError, Point};

/// Minimum ray length assigned when a ray meets no contour (paper constant).
pub const DEFAULT_EPSILON: f64 = 1e-6;

/// Angular sub-bins per ray sector used by the traversal encoder. With 36
/// rays this reproduces one-degree binning.
const FINE_BINS_PER_RAY: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub enum CodecError {
    /// Fewer than 3 rays cannot bound an area.
    InvalidRayCount(usize),
    /// A ray length was non-finite or not positive.
    InvalidRay {
        index: usize,
        value: f64,
    },
    /// Ray vector length does not match the grid.
    RayCountMismatch {
        expected: usize,
        got: usize,
    },
    /// Center coordinates must be finite.
    NonFiniteCenter,
    /// Configured epsilon or tolerance out of range.
    InvalidConfig(String),
    Geometry(GeometryError),
}

impl fmt::Display for CodecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CodecError::InvalidRayCount(n) => write!(f, "ray count {n} below minimum of 3"),
            CodecError::InvalidRay { index, value } => {
                write!(f, "ray {index} has invalid length {value}")
            }
            CodecError::RayCountMismatch { expected, got } => {
                write!(f, "expected {expected} rays, got {got}")
            }
            CodecError::NonFiniteCenter => write!(f, "center coordinates must be finite"),
            CodecError::InvalidConfig(msg) => write!(f, "invalid codec config: {msg}"),
            CodecError::Geometry(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CodecError {}

impl From<GeometryError> for CodecError {
    fn from(e: GeometryError) -> Self {
        CodecError::Geometry(e)
    }
}

/// Uniform grid of `n` ray angles starting at 0, spaced `2*pi / n`,
/// measured from +x rotating toward +y (downward in image coordinates).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AngleGrid {
    n: usize,
}

impl AngleGrid {
    pub fn new(n: usize) -> Result<Self, CodecError> {
        if n < 3 {
            return Err(CodecError::InvalidRayCount(n));
        }
        Ok(AngleGrid { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn delta_theta(&self) -> f64 {
        TAU / self.n as f64
    }

    /// Angle of ray `i` in radians, in `[0, 2*pi)`.
    pub fn angle(&self, i: usize) -> f64 {
        debug_assert!(i < self.n);
        TAU * i as f64 / self.n as f64
    }

    pub fn angles(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(|i| self.angle(i))
    }
}

/// Which point serves as the polar origin of an instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CenterMode {
    /// Area centroid of the contour.
    Mass,
    /// Center of the axis-aligned bounding box.
    Box,
    /// Caller-supplied point.
    Explicit(Point),
}

impl CenterMode {
    pub fn resolve(&self, contour: &Contour) -> Point {
        match self {
            CenterMode::Mass => contour.mass_center(),
            CenterMode::Box => contour.box_center(),
            CenterMode::Explicit(p) => *p,
        }
    }
}

/// Encoder settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodecConfig {
    /// Floor for ray lengths; assigned when a ray meets no contour.
    pub epsilon: f64,
    /// How far (radians) the traversal encoder searches for a populated
    /// angle bin before falling back to epsilon. `None` means half the
    /// grid spacing.
    pub angle_match_tolerance: Option<f64>,
    pub center_mode: CenterMode,
}

impl Default for CodecConfig {
    fn default() -> Self {
        CodecConfig {
            epsilon: DEFAULT_EPSILON,
            angle_match_tolerance: None,
            center_mode: CenterMode::Mass,
        }
    }
}

impl CodecConfig {
    fn validate(&self, grid: &AngleGrid) -> Result<f64, CodecError> {
        if !self.epsilon.is_finite() || self.epsilon <= 0.0 {
            return Err(CodecError::InvalidConfig(format!(
                "epsilon must be positive and finite, got {}",
                self.epsilon
            )));
        }
        let half = grid.delta_theta() / 2.0;
        let tol = self.angle_match_tolerance.unwrap_or(half);
        if tol.is_nan() || tol <= 0.0 || tol > half + 1e-12 {
            return Err(CodecError::InvalidConfig(format!(
                "angle_match_tolerance must lie in (0, {half}], got {tol}"
            )));
        }
        Ok(tol)
    }
}

/// One instance mask as a center plus `n` ray lengths on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarInstance {
    center: Point,
    grid: AngleGrid,
    rays: Vec<f64>,
}

impl PolarInstance {
    pub fn new(center: Point, grid: AngleGrid, rays: Vec<f64>) -> Result<Self, CodecError> {
        if !center.is_finite() {
            return Err(CodecError::NonFiniteCenter);
        }
        if rays.len() != grid.n() {
            return Err(CodecError::RayCountMismatch {
                expected: grid.n(),
                got: rays.len(),
            });
        }
        for (index, &value) in rays.iter().enumerate() {
            if !value.is_finite() || value <= 0.0 {
                return Err(CodecError::InvalidRay { index, value });
            }
        }
        Ok(PolarInstance { center, grid, rays })
    }

    pub fn center(&self) -> Point {
        self.center
    }

    pub fn grid(&self) -> AngleGrid {
        self.grid
    }

    pub fn rays(&self) -> &[f64] {
        &self.rays
    }
}

/// Encode by traversing contour points, as distance labels are generated
/// from traced contours.
///
/// Each contour point is assigned to a fine angular bin (ten per ray
/// sector); per bin the maximum distance wins, which resolves rays that
/// cross the contour several times. A ray whose own bin is empty takes the
/// nearest populated bin within the configured tolerance, preferring the
/// counter-clockwise side on ties, and falls back to epsilon when nothing
/// is in range.
pub fn encode_traversal(
    contour: &Contour,
    center: Point,
    grid: AngleGrid,
    cfg: &CodecConfig,
) -> Result<PolarInstance, CodecError> {
    let tol = cfg.validate(&grid)?;
    if !center.is_finite() {
        return Err(CodecError::NonFiniteCenter);
    }

    let n_fine = grid.n() * FINE_BINS_PER_RAY;
    let fine_width = TAU / n_fine as f64;
    let mut best: Vec<Option<f64>> = vec![None; n_fine];
    for p in contour.points() {
        let dx = p.x - center.x;
        let dy = p.y - center.y;
        let dist = dx.hypot(dy);
        let angle = dy.atan2(dx).rem_euclid(TAU);
        let bin = (angle / fine_width).round() as usize % n_fine;
        best[bin] = Some(best[bin].map_or(dist, |d: f64| d.max(dist)));
    }

    let k_max = (tol / fine_width + 1e-9).floor() as usize;
    let mut rays = Vec::with_capacity(grid.n());
    for i in 0..grid.n() {
        let home = i * FINE_BINS_PER_RAY;
        let mut found = None;
        for k in 0..=k_max {
            if let Some(d) = best[(home + k) % n_fine] {
                found = Some(d);
                break;
            }
            if k > 0 {
                if let Some(d) = best[(home + n_fine - k) % n_fine] {
                    found = Some(d);
                    break;
                }
            }
        }
        rays.push(found.unwrap_or(cfg.epsilon).max(cfg.epsilon));
    }
    PolarInstance::new(center, grid, rays)
}

/// Encode by casting each grid ray from the center and intersecting it with
/// every contour segment analytically; the maximum-distance intersection
/// wins, epsilon when the ray misses entirely.
pub fn encode_raycast(
    contour: &Contour,
    center: Point,
    grid: AngleGrid,
    cfg: &CodecConfig,
) -> Result<PolarInstance, CodecError> {
    cfg.validate(&grid)?;
    if !center.is_finite() {
        return Err(CodecError::NonFiniteCenter);
    }

    let pts = contour.points();
    let n_pts = pts.len();
    let mut rays = Vec::with_capacity(grid.n());
    for theta in grid.angles() {
        let (ux, uy) = (theta.cos(), theta.sin());
        let mut furthest: Option<f64> = None;
        for j in 0..n_pts {
            let p = pts[j];
            let q = pts[(j + 1) % n_pts];
            if let Some(t) = ray_segment_distance(center, ux, uy, p, q) {
                furthest = Some(furthest.map_or(t, |d: f64| d.max(t)));
            }
        }
        rays.push(furthest.unwrap_or(cfg.epsilon).max(cfg.epsilon));
    }
    PolarInstance::new(center, grid, rays)
}

/// Distance along the ray `origin + t*(ux, uy)` to segment `p -> q`, if any.
///
/// Endpoints are included with a sliver of tolerance: a ray passing exactly
/// through a shared vertex must not slip between the two adjacent segments
/// when rounding pushes the hit just outside both. A vertex hit may then be
/// reported by both segments, which the max-distance rule collapses.
fn ray_segment_distance(origin: Point, ux: f64, uy: f64, p: Point, q: Point) -> Option<f64> {
    const S_TOL: f64 = 1e-9;
    let ex = q.x - p.x;
    let ey = q.y - p.y;
    let denom = ux * ey - uy * ex;
    let wx = p.x - origin.x;
    let wy = p.y - origin.y;
    if denom == 0.0 {
        // Parallel. Collinear segments contribute their endpoints.
        if wx * uy - wy * ux != 0.0 {
            return None;
        }
        let t_p = wx * ux + wy * uy;
        let t_q = (q.x - origin.x) * ux + (q.y - origin.y) * uy;
        let t = t_p.max(t_q);
        return (t >= 0.0).then_some(t);
    }
    let t = (wx * ey - wy * ex) / denom;
    let s = (wx * uy - wy * ux) / denom;
    (t >= 0.0 && (-S_TOL..=1.0 + S_TOL).contains(&s)).then_some(t)
}

/// Assemble the contour back from the polar form: point `i` sits at
/// `(cos(theta_i) * d_i + x_c, sin(theta_i) * d_i + y_c)`, connected in
/// angle order starting from the ray at zero.
pub fn decode(instance: &PolarInstance) -> Result<Contour, CodecError> {
    let c = instance.center();
    let points = instance
        .grid()
        .angles()
        .zip(instance.rays())
        .map(|(theta, &d)| Point::new(theta.cos() * d + c.x, theta.sin() * d + c.y))
        .collect();
    Ok(Contour::new(points)?)
}

/// IoU between a contour's raster and the raster of its own encode-decode
/// reconstruction: the best any predictor using this representation can do.
pub fn reconstruction_iou(
    contour: &Contour,
    grid: AngleGrid,
    cfg: &CodecConfig,
    raster: (usize, usize),
) -> Result<f64, CodecError> {
    let (width, height) = raster;
    let truth = contour.rasterize(width, height)?;
    reconstruction_iou_against(contour, &truth, grid, cfg)
}

/// Same as [`reconstruction_iou`] but reusing a precomputed ground-truth
/// raster, for sweeps that evaluate many ray counts on one contour.
pub fn reconstruction_iou_against(
    contour: &Contour,
    truth: &crate::geometry::BitMask,
    grid: AngleGrid,
    cfg: &CodecConfig,
) -> Result<f64, CodecError> {
    let center = cfg.center_mode.resolve(contour);
    let encoded = encode_raycast(contour, center, grid, cfg)?;
    let decoded = decode(&encoded)?;
    let reconstructed = decoded.rasterize(truth.width(), truth.height())?;
    Ok(truth.iou(&reconstructed)?)
}
