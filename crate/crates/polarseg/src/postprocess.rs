//! Inference-side mask assembly: confidence thresholding, per-level top-k
//! selection, decoding, bounding-box extraction and greedy class-aware NMS.
//!
//! Selection and decoding are independent per candidate; the greedy
//! suppression pass is sequential by nature. Output order is always
//! descending fused score with ties broken by input position, so results
//! are deterministic regardless of how callers batch the work.

use crate::codec::{decode, CodecError, PolarInstance};
use crate::geometry::{BitMask, BoundingBox};
use crate::losses::{fused_score, LossError};

/// One detection hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub instance: PolarInstance,
    pub class_score: f64,
    pub centerness: f64,
    /// Source pyramid level; an opaque grouping tag for per-level top-k.
    pub level: u32,
    pub category: u32,
}

impl Candidate {
    pub fn new(
        instance: PolarInstance,
        class_score: f64,
        centerness: f64,
        level: u32,
        category: u32,
    ) -> Result<Self, LossError> {
        fused_score(class_score, centerness)?;
        Ok(Candidate {
            instance,
            class_score,
            centerness,
            level,
            category,
        })
    }

    /// Classification score times centerness.
    pub fn fused_score(&self) -> f64 {
        self.class_score * self.centerness
    }
}

/// Thresholds for selection and suppression. Both thresholds live in
/// `[0, 1]` and `top_k_per_level` must be at least 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NmsConfig {
    pub score_threshold: f64,
    pub top_k_per_level: usize,
    pub iou_threshold: f64,
}

impl Default for NmsConfig {
    fn default() -> Self {
        NmsConfig {
            score_threshold: 0.05,
            top_k_per_level: 1000,
            iou_threshold: 0.5,
        }
    }
}

impl NmsConfig {
    pub fn validate(&self) -> Result<(), LossError> {
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        if !in_unit(self.score_threshold) || !in_unit(self.iou_threshold) {
            return Err(LossError::InvalidConfig(format!(
                "thresholds must lie in [0, 1], got score {} and iou {}",
                self.score_threshold, self.iou_threshold
            )));
        }
        if self.top_k_per_level == 0 {
            return Err(LossError::InvalidConfig(
                "top_k_per_level must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Sort indices by descending fused score, input position breaking ties.
fn ranked_indices(cands: &[Candidate]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..cands.len()).collect();
    idx.sort_by(|&a, &b| {
        cands[b]
            .fused_score()
            .total_cmp(&cands[a].fused_score())
            .then(a.cmp(&b))
    });
    idx
}

/// Per level: drop candidates with fused score below the threshold and keep
/// the top-k by fused score; levels are then merged and ordered by
/// descending fused score (stable on ties).
pub fn select_candidates(cands: &[Candidate], cfg: &NmsConfig) -> Vec<Candidate> {
    use std::collections::BTreeMap;
    let mut by_level: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, c) in cands.iter().enumerate() {
        if c.fused_score() >= cfg.score_threshold {
            by_level.entry(c.level).or_default().push(i);
        }
    }
    let mut kept: Vec<usize> = Vec::new();
    for (_, mut idx) in by_level {
        idx.sort_by(|&a, &b| {
            cands[b]
                .fused_score()
                .total_cmp(&cands[a].fused_score())
                .then(a.cmp(&b))
        });
        idx.truncate(cfg.top_k_per_level);
        kept.extend(idx);
    }
    kept.sort_by(|&a, &b| {
        cands[b]
            .fused_score()
            .total_cmp(&cands[a].fused_score())
            .then(a.cmp(&b))
    });
    kept.into_iter().map(|i| cands[i].clone()).collect()
}

/// Smallest axis-aligned box around the decoded contour.
pub fn mask_bbox(instance: &PolarInstance) -> Result<BoundingBox, CodecError> {
    Ok(decode(instance)?.bounding_box())
}

/// Greedy class-aware NMS on mask bounding boxes: highest fused score first,
/// suppressing any same-category candidate whose box IoU with a kept one
/// exceeds the threshold.
pub fn nms(cands: &[Candidate], cfg: &NmsConfig) -> Result<Vec<Candidate>, CodecError> {
    let order = ranked_indices(cands);
    let boxes: Vec<BoundingBox> = cands
        .iter()
        .map(|c| mask_bbox(&c.instance))
        .collect::<Result<_, _>>()?;

    let mut kept: Vec<usize> = Vec::new();
    'outer: for &i in &order {
        for &k in &kept {
            if cands[k].category != cands[i].category {
                continue;
            }
            // Identical zero-area boxes are the same degenerate detection.
            let overlap = boxes[k].iou(&boxes[i]).unwrap_or(1.0);
            if overlap > cfg.iou_threshold {
                continue 'outer;
            }
        }
        kept.push(i);
    }
    Ok(kept.into_iter().map(|i| cands[i].clone()).collect())
}

/// Full pipeline: select, suppress, decode each survivor and rasterize it.
pub fn assemble(
    cands: &[Candidate],
    cfg: &NmsConfig,
    raster: (usize, usize),
) -> Result<Vec<(Candidate, BitMask)>, CodecError> {
    let selected = select_candidates(cands, cfg);
    let survivors = nms(&selected, cfg)?;
    let (width, height) = raster;
    survivors
        .into_iter()
        .map(|c| {
            let mask = decode(&c.instance)?.rasterize(width, height)?;
            Ok((c, mask))
        })
        .collect()
}
