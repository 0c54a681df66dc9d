//! Planar geometry primitives: polygons, axis-aligned boxes, binary masks,
//! rasterization and contour tracing.
//!
//! Everything here works in image coordinates: origin at the top-left,
//! `x` grows rightward, `y` grows downward, one unit per pixel. Pixel
//! `(col, row)` occupies the unit square `[col, col+1] x [row, row+1]`
//! and its center sits at `(col + 0.5, row + 0.5)`.
//!
//! All types are immutable after construction and all operations are pure,
//! so they are safe to call concurrently without synchronization.

mod bitmask;
mod raster;
mod trace;

pub use bitmask::BitMask;

use std::fmt;

/// Contours with enclosed area below this are rejected as degenerate.
pub const MIN_CONTOUR_AREA: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum GeometryError {
    /// Fewer than 3 points or enclosed area below [`MIN_CONTOUR_AREA`].
    DegenerateContour,
    /// A coordinate was NaN or infinite.
    NonFinitePoint,
    /// Mask has no set pixels.
    EmptyMask,
    /// Rasterization covered no pixel centers.
    EmptyRaster,
    /// Raster dimensions must be at least 1x1.
    InvalidDimensions,
    /// Masks of different sizes cannot be compared.
    DimensionMismatch,
    /// IoU of two empty operands is undefined.
    BothEmpty,
    /// Box with min > max or non-finite bounds.
    InvalidBox,
}

impl fmt::Display for GeometryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeometryError::DegenerateContour => write!(f, "degenerate contour"),
            GeometryError::NonFinitePoint => write!(f, "non-finite coordinate"),
            GeometryError::EmptyMask => write!(f, "mask has no set pixels"),
            GeometryError::EmptyRaster => write!(f, "contour covers no pixel centers"),
            GeometryError::InvalidDimensions => write!(f, "raster dimensions must be >= 1"),
            GeometryError::DimensionMismatch => write!(f, "mask dimensions differ"),
            GeometryError::BothEmpty => write!(f, "IoU of two empty operands is undefined"),
            GeometryError::InvalidBox => write!(f, "invalid bounding box"),
        }
    }
}

impl std::error::Error for GeometryError {}

/// A 2-D point in image coordinates (pixels).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BoundingBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self, GeometryError> {
        if ![x_min, y_min, x_max, y_max].iter().all(|v| v.is_finite()) {
            return Err(GeometryError::NonFinitePoint);
        }
        if x_min > x_max || y_min > y_max {
            return Err(GeometryError::InvalidBox);
        }
        Ok(BoundingBox {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    /// Smallest box enclosing all points. Points must be non-empty and finite.
    pub fn of_points(points: &[Point]) -> Result<Self, GeometryError> {
        let first = points.first().ok_or(GeometryError::InvalidBox)?;
        let mut b = (first.x, first.y, first.x, first.y);
        for p in points {
            if !p.is_finite() {
                return Err(GeometryError::NonFinitePoint);
            }
            b.0 = b.0.min(p.x);
            b.1 = b.1.min(p.y);
            b.2 = b.2.max(p.x);
            b.3 = b.3.max(p.y);
        }
        BoundingBox::new(b.0, b.1, b.2, b.3)
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> Point {
        Point::new(
            0.5 * (self.x_min + self.x_max),
            0.5 * (self.y_min + self.y_max),
        )
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    /// Intersection-over-union of two boxes.
    ///
    /// Degenerate (zero-area) boxes yield 0 against anything else; two
    /// identical zero-area boxes have no defined ratio and are reported
    /// as [`GeometryError::BothEmpty`].
    pub fn iou(&self, other: &BoundingBox) -> Result<f64, GeometryError> {
        let ix = (self.x_max.min(other.x_max) - self.x_min.max(other.x_min)).max(0.0);
        let iy = (self.y_max.min(other.y_max) - self.y_min.max(other.y_min)).max(0.0);
        let inter = ix * iy;
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            return Err(GeometryError::BothEmpty);
        }
        Ok(inter / union)
    }
}

/// A closed polygonal contour bounding one instance.
///
/// Construction validates the invariants once: at least 3 finite points and
/// an enclosed area of at least [`MIN_CONTOUR_AREA`], with the vertex order
/// normalized so the shoelace signed area is positive. Every accessor below
/// is therefore infallible.
#[derive(Debug, Clone, PartialEq)]
pub struct Contour {
    points: Vec<Point>,
    closed: bool,
}

impl Contour {
    pub fn new(points: Vec<Point>) -> Result<Self, GeometryError> {
        if points.len() < 3 {
            return Err(GeometryError::DegenerateContour);
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(GeometryError::NonFinitePoint);
        }
        let signed = shoelace(&points);
        if signed.abs() < MIN_CONTOUR_AREA {
            return Err(GeometryError::DegenerateContour);
        }
        let mut points = points;
        if signed < 0.0 {
            points.reverse();
        }
        Ok(Contour {
            points,
            closed: true,
        })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    /// Enclosed area in pixels^2 (shoelace formula). Always positive.
    pub fn area(&self) -> f64 {
        shoelace(&self.points)
    }

    /// Area centroid via the polygon centroid formula.
    ///
    /// May lie outside the filled region for non-convex shapes.
    pub fn mass_center(&self) -> Point {
        let pts = &self.points;
        let n = pts.len();
        let mut a2 = 0.0; // twice the signed area
        let mut cx = 0.0;
        let mut cy = 0.0;
        for i in 0..n {
            let p = pts[i];
            let q = pts[(i + 1) % n];
            let cross = p.x * q.y - q.x * p.y;
            a2 += cross;
            cx += (p.x + q.x) * cross;
            cy += (p.y + q.y) * cross;
        }
        Point::new(cx / (3.0 * a2), cy / (3.0 * a2))
    }

    /// Center of the axis-aligned bounding box.
    pub fn box_center(&self) -> Point {
        self.bounding_box().center()
    }

    pub fn bounding_box(&self) -> BoundingBox {
        BoundingBox::of_points(&self.points).expect("validated at construction")
    }

    /// Rasterize with the pixel-center even-odd rule: pixel `(col, row)` is
    /// set iff its center `(col + 0.5, row + 0.5)` lies inside the polygon.
    pub fn rasterize(&self, width: usize, height: usize) -> Result<BitMask, GeometryError> {
        raster::rasterize(self, width, height)
    }

    /// Resample edges so no segment exceeds `max_spacing`, inserting evenly
    /// spaced collinear points. The enclosed region is unchanged; traversal
    /// encoders need this density when the input is a sparse hand-written
    /// polygon rather than a traced boundary.
    pub fn densify(&self, max_spacing: f64) -> Contour {
        let spacing = if max_spacing.is_finite() && max_spacing > 0.0 {
            max_spacing
        } else {
            1.0
        };
        let n = self.points.len();
        let mut pts = Vec::with_capacity(n * 4);
        for i in 0..n {
            let p = self.points[i];
            let q = self.points[(i + 1) % n];
            let steps = (p.distance(&q) / spacing).ceil().max(1.0) as usize;
            for k in 0..steps {
                let t = k as f64 / steps as f64;
                pts.push(Point::new(p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)));
            }
        }
        Contour::new(pts).expect("densification preserves the polygon")
    }

    /// True when all turns agree in sign (collinear runs allowed).
    pub fn is_convex(&self) -> bool {
        let pts = &self.points;
        let n = pts.len();
        for i in 0..n {
            let a = pts[i];
            let b = pts[(i + 1) % n];
            let c = pts[(i + 2) % n];
            let cross = (b.x - a.x) * (c.y - b.y) - (b.y - a.y) * (c.x - b.x);
            if cross < -1e-12 {
                return false;
            }
        }
        true
    }
}

fn shoelace(points: &[Point]) -> f64 {
    let n = points.len();
    let mut sum = 0.0;
    for i in 0..n {
        let p = points[i];
        let q = points[(i + 1) % n];
        sum += p.x * q.y - q.x * p.y;
    }
    0.5 * sum
}

/// Even-odd point-in-polygon test (half-open edge rule).
pub fn point_in_polygon(p: &Point, polygon: &[Point]) -> bool {
    let n = polygon.len();
    let mut inside = false;
    for i in 0..n {
        let a = polygon[i];
        let b = polygon[(i + 1) % n];
        if (a.y <= p.y && p.y < b.y) || (b.y <= p.y && p.y < a.y) {
            let t = (p.y - a.y) / (b.y - a.y);
            let x = a.x + t * (b.x - a.x);
            if p.x < x {
                inside = !inside;
            }
        }
    }
    inside
}
