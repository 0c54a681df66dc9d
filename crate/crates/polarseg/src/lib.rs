//! Instance masks as one center plus `n` rays on a uniform angle grid.
//!
//! The crate covers the full life of the representation:
//!
//! - [`geometry`] — polygons, rasterization, contour tracing and the
//!   pixel-level IoU oracle everything else is validated against.
//! - [`codec`] — distance-label encoding (contour traversal and exact ray
//!   casting), mask assembly back to a contour, and reconstruction IoU.
//! - [`losses`] — polar IoU in power and simplified forms, the log-ratio
//!   loss with analytic gradient, a smooth-l1 baseline, polar centerness
//!   and center-sample generation.
//! - [`postprocess`] — score thresholding, per-level top-k, bounding-box
//!   extraction and greedy class-aware NMS.
//! - [`experiments`] — synthetic corpora, the ray-count upper-bound sweep
//!   and the loss-comparison fitting study.
//! - [`io`] — JSON instance/candidate files and atomic writes.

pub mod codec;
pub mod experiments;
pub mod geometry;
pub mod io;
pub mod losses;
pub mod postprocess;

pub use codec::{AngleGrid, CenterMode, CodecConfig, PolarInstance};
pub use geometry::{BitMask, BoundingBox, Contour, Point};
pub use losses::RayPair;
pub use postprocess::{Candidate, NmsConfig};
