//! Desk-scale experiment harness: synthetic shape corpora, the ray-count
//! upper-bound sweep with mass-center vs box-center comparison, and the
//! loss-comparison ray-fitting study.
//!
//! Every experiment is reproducible bit-for-bit from its seed and config.
//! Corpus items are independent; aggregation iterates instances in id order
//! so results do not depend on scheduling.

use std::fmt;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::codec::{
    encode_raycast, reconstruction_iou_against, AngleGrid, CenterMode, CodecConfig, CodecError,
    PolarInstance,
};
use crate::geometry::{Contour, GeometryError, Point};
use crate::losses::{
    polar_iou_loss, polar_iou_loss_grad, smooth_l1_loss, smooth_l1_loss_grad, LossError, RayPair,
    SmoothL1Config, MIN_RAY,
};

#[derive(Debug)]
pub enum ExperimentError {
    /// The optimizer produced a NaN or infinite loss; the step size is too
    /// large for the target.
    NonFiniteLoss,
    /// Reports require at least one record.
    EmptyRecords,
    /// Experiment configuration out of range.
    InvalidConfig(String),
    Codec(CodecError),
    Loss(LossError),
    Geometry(GeometryError),
    Io(std::io::Error),
}

impl fmt::Display for ExperimentError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExperimentError::NonFiniteLoss => write!(f, "loss became non-finite during fitting"),
            ExperimentError::EmptyRecords => write!(f, "no records to report"),
            ExperimentError::InvalidConfig(msg) => write!(f, "invalid experiment config: {msg}"),
            ExperimentError::Codec(e) => write!(f, "{e}"),
            ExperimentError::Loss(e) => write!(f, "{e}"),
            ExperimentError::Geometry(e) => write!(f, "{e}"),
            ExperimentError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for ExperimentError {}

impl From<CodecError> for ExperimentError {
    fn from(e: CodecError) -> Self {
        ExperimentError::Codec(e)
    }
}

impl From<LossError> for ExperimentError {
    fn from(e: LossError) -> Self {
        ExperimentError::Loss(e)
    }
}

impl From<GeometryError> for ExperimentError {
    fn from(e: GeometryError) -> Self {
        ExperimentError::Geometry(e)
    }
}

impl From<std::io::Error> for ExperimentError {
    fn from(e: std::io::Error) -> Self {
        ExperimentError::Io(e)
    }
}

/// One ground-truth instance: id, contour, and the raster it lives on.
#[derive(Debug, Clone)]
pub struct CorpusInstance {
    pub id: String,
    pub contour: Contour,
    /// (width, height) of the image raster in pixels.
    pub image_size: (usize, usize),
    pub category: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusSource {
    Synthetic,
    File,
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub instances: Vec<CorpusInstance>,
    pub source: CorpusSource,
}

/// Shape families for the synthetic corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeKind {
    Ellipse,
    ConvexPoly,
    Star,
}

impl ShapeKind {
    pub fn label(&self) -> &'static str {
        match self {
            ShapeKind::Ellipse => "ellipse",
            ShapeKind::ConvexPoly => "convex",
            ShapeKind::Star => "star",
        }
    }
}

const CORPUS_IMAGE: (usize, usize) = (512, 512);

/// Deterministic synthetic corpus. Shapes are centered near the middle of a
/// 512x512 raster with enough margin to stay in frame, and every instance
/// has area well above 100 square pixels.
pub fn synth_corpus(seed: u64, count: usize, kind: ShapeKind) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut instances = Vec::with_capacity(count);
    for i in 0..count {
        let contour = loop {
            let candidate = match kind {
                ShapeKind::Ellipse => gen_ellipse(&mut rng),
                ShapeKind::ConvexPoly => gen_convex(&mut rng),
                ShapeKind::Star => gen_star(&mut rng),
            };
            match candidate {
                Ok(c) if c.area() >= 100.0 => break c,
                _ => continue,
            }
        };
        instances.push(CorpusInstance {
            id: format!("{}-{:04}", kind.label(), i),
            contour,
            image_size: CORPUS_IMAGE,
            category: 0,
        });
    }
    Corpus {
        instances,
        source: CorpusSource::Synthetic,
    }
}

fn jittered_center(rng: &mut ChaCha8Rng) -> (f64, f64) {
    (
        256.0 + rng.gen_range(-20.0..20.0),
        256.0 + rng.gen_range(-20.0..20.0),
    )
}

fn gen_ellipse(rng: &mut ChaCha8Rng) -> Result<Contour, GeometryError> {
    let (cx, cy) = jittered_center(rng);
    let a = rng.gen_range(110.0..170.0);
    let b = a * rng.gen_range(0.45..1.0);
    let rot: f64 = rng.gen_range(0.0..std::f64::consts::PI);
    let (cos_r, sin_r) = (rot.cos(), rot.sin());
    let pts = (0..160)
        .map(|k| {
            let t = std::f64::consts::TAU * k as f64 / 160.0;
            let (ex, ey) = (a * t.cos(), b * t.sin());
            Point::new(cx + cos_r * ex - sin_r * ey, cy + sin_r * ex + cos_r * ey)
        })
        .collect();
    Contour::new(pts)
}

fn gen_convex(rng: &mut ChaCha8Rng) -> Result<Contour, GeometryError> {
    let (cx, cy) = jittered_center(rng);
    let radius = rng.gen_range(110.0..170.0);
    let m = rng.gen_range(8..=16);
    let raw: Vec<Point> = (0..m)
        .map(|_| {
            let t = rng.gen_range(0.0..std::f64::consts::TAU);
            let r = radius * rng.gen_range(0.55..1.0);
            Point::new(cx + r * t.cos(), cy + r * t.sin())
        })
        .collect();
    Contour::new(convex_hull(raw))
}

fn gen_star(rng: &mut ChaCha8Rng) -> Result<Contour, GeometryError> {
    let (cx, cy) = jittered_center(rng);
    let base = rng.gen_range(110.0..170.0);
    let total: f64 = rng.gen_range(0.08..0.30);
    let weights: Vec<f64> = (2..=5).map(|_| rng.gen_range(0.2..1.0)).collect();
    let wsum: f64 = weights.iter().sum();
    let amps: Vec<f64> = weights.iter().map(|w| total * w / wsum).collect();
    let phases: Vec<f64> = (2..=5)
        .map(|_| rng.gen_range(0.0..std::f64::consts::TAU))
        .collect();
    let pts = (0..180)
        .map(|j| {
            let theta = std::f64::consts::TAU * j as f64 / 180.0;
            let mut factor = 1.0;
            for (k, (&a, &phi)) in (2..=5usize).zip(amps.iter().zip(&phases)) {
                factor += a * (k as f64 * theta + phi).sin();
            }
            let r = base * factor;
            Point::new(cx + r * theta.cos(), cy + r * theta.sin())
        })
        .collect();
    Contour::new(pts)
}

/// Andrew's monotone chain, counter-clockwise output.
fn convex_hull(mut pts: Vec<Point>) -> Vec<Point> {
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup_by(|a, b| a.x == b.x && a.y == b.y);
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: &Point, a: &Point, b: &Point| -> f64 {
        (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
    };
    let mut hull: Vec<Point> = Vec::with_capacity(pts.len() * 2);
    for p in pts.iter().chain(pts.iter().rev().skip(1)) {
        while hull.len() >= 2 && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(*p);
    }
    hull.pop();
    hull
}

/// Which center an experiment measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CenterKind {
    Mass,
    Box,
}

impl CenterKind {
    pub fn label(&self) -> &'static str {
        match self {
            CenterKind::Mass => "mass",
            CenterKind::Box => "box",
        }
    }

    pub fn to_codec_mode(self) -> CenterMode {
        match self {
            CenterKind::Mass => CenterMode::Mass,
            CenterKind::Box => CenterMode::Box,
        }
    }
}

/// One row of harness output.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub ray_count: usize,
    pub center_mode: CenterKind,
    pub mean_iou: f64,
    pub median_iou: f64,
    pub instance_count: usize,
    pub wall_time_ms: f64,
}

/// Reconstruction IoU of every corpus instance for each ray count and
/// center mode; one record per combination, ray counts outermost.
pub fn upper_bound_sweep(
    corpus: &Corpus,
    ray_counts: &[usize],
    modes: &[CenterKind],
    raster: (usize, usize),
) -> Result<Vec<ExperimentRecord>, ExperimentError> {
    if corpus.instances.is_empty() {
        return Err(ExperimentError::InvalidConfig("corpus is empty".into()));
    }
    let mut order: Vec<usize> = (0..corpus.instances.len()).collect();
    order.sort_by(|&a, &b| corpus.instances[a].id.cmp(&corpus.instances[b].id));

    // Ground-truth rasters are shared across all (ray count, mode) pairs.
    let truths: Vec<crate::geometry::BitMask> = order
        .iter()
        .map(|&i| {
            corpus.instances[i]
                .contour
                .rasterize(raster.0, raster.1)
                .map_err(ExperimentError::from)
        })
        .collect::<Result<_, _>>()?;

    let mut records = Vec::with_capacity(ray_counts.len() * modes.len());
    for &n in ray_counts {
        let grid = AngleGrid::new(n)?;
        for &mode in modes {
            let cfg = CodecConfig {
                center_mode: mode.to_codec_mode(),
                ..CodecConfig::default()
            };
            let start = Instant::now();
            let mut ious = Vec::with_capacity(order.len());
            for (&i, truth) in order.iter().zip(&truths) {
                let iou =
                    reconstruction_iou_against(&corpus.instances[i].contour, truth, grid, &cfg)?;
                ious.push(iou);
            }
            let wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
            records.push(ExperimentRecord {
                ray_count: n,
                center_mode: mode,
                mean_iou: mean(&ious),
                median_iou: median(&mut ious.clone()),
                instance_count: ious.len(),
                wall_time_ms,
            });
        }
    }
    Ok(records)
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    PolarIou,
    SmoothL1,
}

/// Optimizer settings for the ray-fitting study.
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub loss_kind: LossKind,
    pub steps: usize,
    /// Fixed step size applied to the log-length parameters.
    pub step_size: f64,
    pub seed: u64,
    pub smooth_l1: SmoothL1Config,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            loss_kind: LossKind::PolarIou,
            steps: 500,
            step_size: 0.05,
            seed: 0,
            smooth_l1: SmoothL1Config::default(),
        }
    }
}

/// Fit predicted rays to a target contour by fixed-step gradient descent.
///
/// Ground-truth rays come from the exact encoder at the mass center. The
/// log-length parameterization `d* = exp(u)` keeps predictions positive;
/// initialization is the log of the mean ground-truth ray plus per-ray
/// uniform noise in [-0.5, 0.5] drawn from the seed. Returns the fitted
/// instance and the loss value recorded before each step.
pub fn fit_rays(
    target: &Contour,
    grid: AngleGrid,
    cfg: &FitConfig,
) -> Result<(PolarInstance, Vec<f64>), ExperimentError> {
    let center = target.mass_center();
    let truth = encode_raycast(target, center, grid, &CodecConfig::default())?;
    let mean_ray = mean(truth.rays());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let init: Vec<f64> = (0..grid.n())
        .map(|_| (mean_ray.ln() + rng.gen_range(-0.5..=0.5)).exp())
        .collect();
    fit_rays_from(&truth, &init, cfg)
}

/// Same optimization as [`fit_rays`] but starting from caller-provided rays.
pub fn fit_rays_from(
    truth: &PolarInstance,
    init: &[f64],
    cfg: &FitConfig,
) -> Result<(PolarInstance, Vec<f64>), ExperimentError> {
    if cfg.steps == 0 {
        return Err(ExperimentError::InvalidConfig("steps must be >= 1".into()));
    }
    if !cfg.step_size.is_finite() || cfg.step_size <= 0.0 {
        return Err(ExperimentError::InvalidConfig(format!(
            "step_size must be positive and finite, got {}",
            cfg.step_size
        )));
    }
    let d = truth.rays().to_vec();
    let mut d_star: Vec<f64> = init.iter().map(|&v| v.max(MIN_RAY)).collect();
    let mut trace = Vec::with_capacity(cfg.steps);

    for _ in 0..cfg.steps {
        let pair = RayPair::new(d.clone(), d_star.clone())?;
        let (loss, grad) = match cfg.loss_kind {
            LossKind::PolarIou => (polar_iou_loss(&pair), polar_iou_loss_grad(&pair)),
            LossKind::SmoothL1 => (
                smooth_l1_loss(&pair, &cfg.smooth_l1)?,
                smooth_l1_loss_grad(&pair, &cfg.smooth_l1)?,
            ),
        };
        if !loss.is_finite() {
            return Err(ExperimentError::NonFiniteLoss);
        }
        trace.push(loss);
        for i in 0..d_star.len() {
            // The gradient step acts on u = ln(d*); applied multiplicatively
            // it keeps rays positive and leaves exact ties untouched.
            d_star[i] = (d_star[i] * (-cfg.step_size * grad[i] * d_star[i]).exp()).max(MIN_RAY);
            if !d_star[i].is_finite() {
                return Err(ExperimentError::NonFiniteLoss);
            }
        }
    }

    let fitted = PolarInstance::new(truth.center(), truth.grid(), d_star)?;
    Ok((fitted, trace))
}

/// Write records as CSV with the fixed column order
/// `ray_count,center_mode,mean_iou,median_iou,instance_count,wall_time_ms`.
/// Identical records produce identical bytes; nothing is written on error.
pub fn report(records: &[ExperimentRecord], path: &Path) -> Result<(), ExperimentError> {
    if records.is_empty() {
        return Err(ExperimentError::EmptyRecords);
    }
    let mut out =
        String::from("ray_count,center_mode,mean_iou,median_iou,instance_count,wall_time_ms\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{:.6},{:.6},{},{:.3}\n",
            r.ray_count,
            r.center_mode.label(),
            r.mean_iou,
            r.median_iou,
            r.instance_count,
            r.wall_time_ms
        ));
    }
    crate::io::write_atomic(path, out.as_bytes())?;
    Ok(())
}
