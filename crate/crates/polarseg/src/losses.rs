//! Ray-space losses and scores: polar IoU in its power and simplified forms,
//! the log-ratio loss with its analytic gradient, a smooth-l1 baseline, the
//! min-over-max centerness score, and positive-sample generation around the
//! mass center.
//!
//! All functions are pure and stateless; batches of [`RayPair`]s can be
//! mapped over in parallel freely.

use std::fmt;

use crate::geometry::{BoundingBox, Point};

/// Smallest admissible ray length. Matches the encoder's default epsilon.
pub const MIN_RAY: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub enum LossError {
    /// A ray was non-finite or below [`MIN_RAY`], or vector lengths differ.
    InvalidRays(String),
    /// Loss configuration out of range.
    InvalidConfig(String),
    /// The sampling center lies outside the feature extent.
    OutOfExtent,
    /// Score argument outside its documented range.
    OutOfRange(String),
}

impl fmt::Display for LossError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LossError::InvalidRays(msg) => write!(f, "invalid rays: {msg}"),
            LossError::InvalidConfig(msg) => write!(f, "invalid config: {msg}"),
            LossError::OutOfExtent => write!(f, "center outside feature extent"),
            LossError::OutOfRange(msg) => write!(f, "argument out of range: {msg}"),
        }
    }
}

impl std::error::Error for LossError {}

fn validate_rays(rays: &[f64]) -> Result<(), LossError> {
    if rays.is_empty() {
        return Err(LossError::InvalidRays("empty ray vector".into()));
    }
    for (i, &r) in rays.iter().enumerate() {
        if !r.is_finite() || r < MIN_RAY {
            return Err(LossError::InvalidRays(format!(
                "ray {i} = {r} (must be finite and >= {MIN_RAY})"
            )));
        }
    }
    Ok(())
}

/// Ground-truth and predicted ray lengths for one instance, validated once
/// at construction: equal lengths, every entry finite and at least
/// [`MIN_RAY`].
#[derive(Debug, Clone, PartialEq)]
pub struct RayPair {
    target: Vec<f64>,
    predicted: Vec<f64>,
}

impl RayPair {
    pub fn new(target: Vec<f64>, predicted: Vec<f64>) -> Result<Self, LossError> {
        if target.len() != predicted.len() {
            return Err(LossError::InvalidRays(format!(
                "length mismatch: {} targets vs {} predictions",
                target.len(),
                predicted.len()
            )));
        }
        validate_rays(&target)?;
        validate_rays(&predicted)?;
        Ok(RayPair { target, predicted })
    }

    pub fn len(&self) -> usize {
        self.target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target.is_empty()
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn predicted(&self) -> &[f64] {
        &self.predicted
    }

    /// Elementwise (sum of min, sum of max).
    fn min_max_sums(&self) -> (f64, f64) {
        let mut s_min = 0.0;
        let mut s_max = 0.0;
        for (&d, &p) in self.target.iter().zip(&self.predicted) {
            s_min += d.min(p);
            s_max += d.max(p);
        }
        (s_min, s_max)
    }
}

/// Square root of the min ray over the max ray. 1 iff all rays are equal;
/// uniform scaling of the rays leaves it unchanged.
pub fn polar_centerness(rays: &[f64]) -> Result<f64, LossError> {
    validate_rays(rays)?;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &r in rays {
        lo = lo.min(r);
        hi = hi.max(r);
    }
    Ok((lo / hi).sqrt())
}

/// Ratio of summed elementwise minima over summed maxima.
pub fn polar_iou_simplified(pair: &RayPair) -> f64 {
    let (s_min, s_max) = pair.min_max_sums();
    s_min / s_max
}

/// Squared-ray form: sum of min^2 over sum of max^2. For rays sampled
/// densely from two star-convex masks sharing a center this approaches
/// their true mask IoU.
pub fn polar_iou_power(pair: &RayPair) -> f64 {
    let mut s_min = 0.0;
    let mut s_max = 0.0;
    for (&d, &p) in pair.target().iter().zip(pair.predicted()) {
        let lo = d.min(p);
        let hi = d.max(p);
        s_min += lo * lo;
        s_max += hi * hi;
    }
    s_min / s_max
}

/// Negative logarithm of the simplified polar IoU. Zero iff the rays match.
pub fn polar_iou_loss(pair: &RayPair) -> f64 {
    let (s_min, s_max) = pair.min_max_sums();
    (s_max / s_min).ln()
}

/// Analytic gradient of [`polar_iou_loss`] with respect to each predicted
/// ray: `1 / sum(max)` where the prediction exceeds the target,
/// `-1 / sum(min)` where it falls short, and the average of the two
/// one-sided values at exact ties, which makes the gradient vanish at the
/// optimum.
pub fn polar_iou_loss_grad(pair: &RayPair) -> Vec<f64> {
    let (s_min, s_max) = pair.min_max_sums();
    let up = 1.0 / s_max;
    let down = -1.0 / s_min;
    pair.target()
        .iter()
        .zip(pair.predicted())
        .map(|(&d, &p)| {
            if p > d {
                up
            } else if p < d {
                down
            } else {
                0.5 * (up + down)
            }
        })
        .collect()
}

/// Balance factor and quadratic-to-linear switch point for the smooth-l1
/// baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothL1Config {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for SmoothL1Config {
    fn default() -> Self {
        SmoothL1Config {
            alpha: 1.0,
            beta: 1.0,
        }
    }
}

impl SmoothL1Config {
    fn validate(&self) -> Result<(), LossError> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.alpha) || !positive(self.beta) {
            return Err(LossError::InvalidConfig(format!(
                "alpha and beta must be positive, got alpha={} beta={}",
                self.alpha, self.beta
            )));
        }
        Ok(())
    }
}

/// Mean per-ray smooth-l1 of the prediction errors, scaled by alpha:
/// quadratic within `beta` of zero, linear outside.
pub fn smooth_l1_loss(pair: &RayPair, cfg: &SmoothL1Config) -> Result<f64, LossError> {
    cfg.validate()?;
    let n = pair.len() as f64;
    let sum: f64 = pair
        .target()
        .iter()
        .zip(pair.predicted())
        .map(|(&d, &p)| {
            let x = (p - d).abs();
            if x < cfg.beta {
                x * x / (2.0 * cfg.beta)
            } else {
                x - cfg.beta / 2.0
            }
        })
        .sum();
    Ok(cfg.alpha * sum / n)
}

/// Gradient of [`smooth_l1_loss`] with respect to each predicted ray.
pub fn smooth_l1_loss_grad(pair: &RayPair, cfg: &SmoothL1Config) -> Result<Vec<f64>, LossError> {
    cfg.validate()?;
    let scale = cfg.alpha / pair.len() as f64;
    Ok(pair
        .target()
        .iter()
        .zip(pair.predicted())
        .map(|(&d, &p)| {
            let x = p - d;
            scale
                * if x.abs() < cfg.beta {
                    x / cfg.beta
                } else {
                    x.signum()
                }
        })
        .collect())
}

/// Feature-grid geometry for positive-sample selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingConfig {
    /// Pixels per feature cell.
    pub stride: usize,
    /// Window half-width in strides around the mass center.
    pub radius_factor: f64,
}

impl SamplingConfig {
    pub fn new(stride: usize) -> Self {
        SamplingConfig {
            stride,
            radius_factor: 1.5,
        }
    }
}

/// Feature-grid cell centers whose x and y each lie within
/// `radius_factor * stride` of the mass center, clipped to the extent.
///
/// The grid is anchored at the extent origin with cell centers at
/// half-stride offsets. With the default factor of 1.5 an interior window
/// always yields 9 to 16 samples.
pub fn center_samples(
    mass_center: Point,
    cfg: &SamplingConfig,
    extent: &BoundingBox,
) -> Result<Vec<Point>, LossError> {
    if cfg.stride == 0 || cfg.radius_factor.is_nan() || cfg.radius_factor <= 0.0 {
        return Err(LossError::InvalidConfig(format!(
            "stride must be >= 1 and radius_factor positive, got {} and {}",
            cfg.stride, cfg.radius_factor
        )));
    }
    if !extent.contains(&mass_center) {
        return Err(LossError::OutOfExtent);
    }
    let s = cfg.stride as f64;
    let radius = cfg.radius_factor * s;

    let axis = |lo: f64, hi: f64, c: f64| -> Vec<f64> {
        let mut out = Vec::new();
        let mut k = (((c - radius) - lo) / s - 0.5).ceil().max(0.0) as usize;
        loop {
            let center = lo + (k as f64 + 0.5) * s;
            if center > hi || center > c + radius {
                break;
            }
            if (center - c).abs() <= radius {
                out.push(center);
            }
            k += 1;
        }
        out
    };

    let xs = axis(extent.x_min, extent.x_max, mass_center.x);
    let ys = axis(extent.y_min, extent.y_max, mass_center.y);
    let mut samples = Vec::with_capacity(xs.len() * ys.len());
    for &y in &ys {
        for &x in &xs {
            samples.push(Point::new(x, y));
        }
    }
    Ok(samples)
}

/// Final confidence: centerness multiplied into the classification score.
pub fn fused_score(class_score: f64, centerness: f64) -> Result<f64, LossError> {
    if !(0.0..=1.0).contains(&class_score) {
        return Err(LossError::OutOfRange(format!(
            "class_score {class_score} outside [0, 1]"
        )));
    }
    if !(centerness > 0.0 && centerness <= 1.0) {
        return Err(LossError::OutOfRange(format!(
            "centerness {centerness} outside (0, 1]"
        )));
    }
    Ok(class_score * centerness)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(d: &[f64], p: &[f64]) -> RayPair {
        RayPair::new(d.to_vec(), p.to_vec()).unwrap()
    }

    #[test]
    fn centerness_all_equal_is_one() {
        assert_eq!(polar_centerness(&[2.0, 2.0, 2.0, 2.0]).unwrap(), 1.0);
    }

    #[test]
    fn centerness_quarter_ratio_is_half() {
        assert!((polar_centerness(&[1.0, 2.0, 3.0, 4.0]).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn centerness_downweights_epsilon_rays() {
        let c = polar_centerness(&[1e-6, 10.0, 10.0, 10.0]).unwrap();
        assert!((c - 1e-7f64.sqrt()).abs() < 1e-18);
        assert!((c - 3.1622776601683794e-4).abs() < 1e-12);
    }

    #[test]
    fn centerness_rejects_bad_rays() {
        assert!(polar_centerness(&[1.0, 1e-9]).is_err());
        assert!(polar_centerness(&[1.0, f64::NAN]).is_err());
        assert!(polar_centerness(&[]).is_err());
    }

    #[test]
    fn simplified_iou_cases() {
        let p = pair(&[1.0, 2.0], &[1.0, 2.0]);
        assert_eq!(polar_iou_simplified(&p), 1.0);

        let p = pair(&[1.0, 3.0], &[3.0, 1.0]);
        assert!((polar_iou_simplified(&p) - 1.0 / 3.0).abs() < 1e-15);

        // Vanishing prediction: value approaches n * eps / sum(d).
        let d = vec![5.0, 7.0, 9.0];
        let p = pair(&d, &[MIN_RAY; 3]);
        let expected = 3.0 * MIN_RAY / 21.0;
        assert!((polar_iou_simplified(&p) - expected).abs() < 1e-18);
    }

    #[test]
    fn power_iou_concentric_circles() {
        let p = pair(&[1.0; 36], &[2.0; 36]);
        assert!((polar_iou_power(&p) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn power_iou_matches_pixel_iou_for_disks() {
        use crate::geometry::{Contour, Point};
        // Concentric disks of radii 40 and 80: analytic area ratio 1/4.
        let disk = |r: f64| {
            let pts: Vec<Point> = (0..512)
                .map(|i| {
                    let t = std::f64::consts::TAU * i as f64 / 512.0;
                    Point::new(128.0 + r * t.cos(), 128.0 + r * t.sin())
                })
                .collect();
            Contour::new(pts).unwrap()
        };
        let a = disk(40.0).rasterize(256, 256).unwrap();
        let b = disk(80.0).rasterize(256, 256).unwrap();
        let pixel = a.iou(&b).unwrap();
        let polar = polar_iou_power(&pair(&[40.0; 720], &[80.0; 720]));
        assert!((polar - 0.25).abs() < 1e-15);
        assert!(
            (pixel - polar).abs() < 0.02,
            "pixel {pixel} vs polar {polar}"
        );
    }

    #[test]
    fn iou_symmetry_and_bounds() {
        let d = vec![2.0, 5.0, 1.0, 8.0];
        let p = vec![3.0, 4.0, 2.0, 8.0];
        let ab = pair(&d, &p);
        let ba = pair(&p, &d);
        assert_eq!(polar_iou_simplified(&ab), polar_iou_simplified(&ba));
        assert_eq!(polar_iou_power(&ab), polar_iou_power(&ba));
        for v in [polar_iou_simplified(&ab), polar_iou_power(&ab)] {
            assert!(v > 0.0 && v < 1.0);
        }
    }

    #[test]
    fn loss_cases() {
        let p = pair(&[1.0, 2.0], &[1.0, 2.0]);
        assert_eq!(polar_iou_loss(&p), 0.0);

        let p = pair(&[1.0, 3.0], &[3.0, 1.0]);
        assert!((polar_iou_loss(&p) - 3.0f64.ln()).abs() < 1e-15);

        let p = pair(&[1.0; 5], &[2.0; 5]);
        assert!((polar_iou_loss(&p) - 2.0f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn loss_scale_invariant() {
        let d = vec![2.0, 5.0, 1.0, 8.0];
        let p = vec![3.0, 4.0, 2.0, 8.5];
        let base = polar_iou_loss(&pair(&d, &p));
        for k in [0.25, 3.0, 117.0] {
            let ds: Vec<f64> = d.iter().map(|v| v * k).collect();
            let ps: Vec<f64> = p.iter().map(|v| v * k).collect();
            let scaled = polar_iou_loss(&pair(&ds, &ps));
            assert!((scaled - base).abs() < 1e-12, "k={k}: {scaled} vs {base}");
        }
    }

    #[test]
    fn grad_zero_at_ties() {
        let p = pair(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]);
        assert!(polar_iou_loss_grad(&p).iter().all(|&g| g == 0.0));
    }

    #[test]
    fn grad_hand_example() {
        let p = pair(&[1.0, 3.0], &[3.0, 1.0]);
        let g = polar_iou_loss_grad(&p);
        assert!((g[0] - 1.0 / 6.0).abs() < 1e-15);
        assert!((g[1] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn grad_matches_central_differences() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let h = 1e-6;
        for _ in 0..200 {
            let n = rng.gen_range(4..40);
            let d: Vec<f64> = (0..n).map(|_| rng.gen_range(1.0..50.0)).collect();
            // Keep pairs tie-free so the perturbation never crosses a kink.
            let p: Vec<f64> = d
                .iter()
                .map(|&v| {
                    let delta = rng.gen_range(0.01..5.0);
                    if rng.gen_bool(0.5) {
                        v + delta
                    } else {
                        (v - delta).max(0.005)
                    }
                })
                .collect();
            let rp = pair(&d, &p);
            let analytic = polar_iou_loss_grad(&rp);
            for i in 0..n {
                let mut hi = p.clone();
                let mut lo = p.clone();
                hi[i] += h;
                lo[i] -= h;
                let fd =
                    (polar_iou_loss(&pair(&d, &hi)) - polar_iou_loss(&pair(&d, &lo))) / (2.0 * h);
                let denom = analytic[i].abs().max(fd.abs()).max(1e-12);
                assert!(
                    (analytic[i] - fd).abs() / denom <= 1e-5,
                    "component {i}: analytic {} vs fd {}",
                    analytic[i],
                    fd
                );
            }
        }
    }

    #[test]
    fn smooth_l1_cases() {
        let cfg = SmoothL1Config::default();
        let p = pair(&[1.0, 2.0], &[1.0, 2.0]);
        assert_eq!(smooth_l1_loss(&p, &cfg).unwrap(), 0.0);

        let p = pair(&[0.5], &[1.5]);
        assert!((smooth_l1_loss(&p, &cfg).unwrap() - 0.5).abs() < 1e-15);

        let d = vec![2.0, 7.0, 3.0];
        let pr = vec![2.5, 5.0, 3.1];
        let base = smooth_l1_loss(&pair(&d, &pr), &cfg).unwrap();
        let scaled = smooth_l1_loss(
            &pair(&d, &pr),
            &SmoothL1Config {
                alpha: 0.05,
                beta: 1.0,
            },
        )
        .unwrap();
        assert!((scaled - 0.05 * base).abs() < 1e-15);
    }

    #[test]
    fn smooth_l1_grad_matches_central_differences() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let cfg = SmoothL1Config {
            alpha: 0.3,
            beta: 1.0,
        };
        let h = 1e-6;
        for _ in 0..50 {
            let d: Vec<f64> = (0..12).map(|_| rng.gen_range(1.0..40.0)).collect();
            let p: Vec<f64> = d
                .iter()
                .map(|&v| (v + rng.gen_range(-6.0..6.0)).max(0.01))
                .collect();
            // Stay away from the |x| = beta kink and from ties.
            if d.iter()
                .zip(&p)
                .any(|(&a, &b)| ((a - b).abs() - cfg.beta).abs() < 1e-4 || (a - b).abs() < 1e-4)
            {
                continue;
            }
            let rp = pair(&d, &p);
            let analytic = smooth_l1_loss_grad(&rp, &cfg).unwrap();
            for i in 0..d.len() {
                let mut hi = p.clone();
                let mut lo = p.clone();
                hi[i] += h;
                lo[i] -= h;
                let fd = (smooth_l1_loss(&pair(&d, &hi), &cfg).unwrap()
                    - smooth_l1_loss(&pair(&d, &lo), &cfg).unwrap())
                    / (2.0 * h);
                assert!(
                    (analytic[i] - fd).abs() <= 1e-6 * analytic[i].abs().max(1.0),
                    "component {i}: {} vs {}",
                    analytic[i],
                    fd
                );
            }
        }
    }

    #[test]
    fn center_samples_on_cell_center_gives_nine() {
        let extent = BoundingBox::new(0.0, 0.0, 256.0, 256.0).unwrap();
        let cfg = SamplingConfig::new(8);
        // (100, 100) = (12 + 0.5) * 8: exactly a cell center.
        let samples = center_samples(Point::new(100.0, 100.0), &cfg, &extent).unwrap();
        assert_eq!(samples.len(), 9);
    }

    #[test]
    fn center_samples_on_cell_corner_gives_sixteen() {
        let extent = BoundingBox::new(0.0, 0.0, 256.0, 256.0).unwrap();
        let cfg = SamplingConfig::new(8);
        // (96, 96) = 12 * 8: a cell corner.
        let samples = center_samples(Point::new(96.0, 96.0), &cfg, &extent).unwrap();
        assert_eq!(samples.len(), 16);
    }

    #[test]
    fn center_samples_clipped_at_extent_corner() {
        let extent = BoundingBox::new(0.0, 0.0, 256.0, 256.0).unwrap();
        let cfg = SamplingConfig::new(8);
        let samples = center_samples(Point::new(1.0, 1.0), &cfg, &extent).unwrap();
        assert!(
            !samples.is_empty() && samples.len() < 9,
            "{}",
            samples.len()
        );
        for p in &samples {
            assert!(extent.contains(p));
        }
    }

    #[test]
    fn center_samples_outside_extent_rejected() {
        let extent = BoundingBox::new(0.0, 0.0, 64.0, 64.0).unwrap();
        let cfg = SamplingConfig::new(8);
        assert_eq!(
            center_samples(Point::new(-1.0, 10.0), &cfg, &extent).unwrap_err(),
            LossError::OutOfExtent
        );
    }

    #[test]
    fn fused_score_cases() {
        assert_eq!(fused_score(1.0, 1.0).unwrap(), 1.0);
        assert!((fused_score(0.8, 0.5).unwrap() - 0.4).abs() < 1e-15);
        for s in [0.0, 0.3, 0.77, 1.0] {
            assert_eq!(fused_score(s, 1.0).unwrap(), s);
        }
        assert!(fused_score(1.2, 0.5).is_err());
        assert!(fused_score(0.5, 0.0).is_err());
        let f = fused_score(0.6, 0.9).unwrap();
        assert!(f <= 0.6f64.min(0.9));
    }
}
