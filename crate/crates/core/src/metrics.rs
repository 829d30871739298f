//! Mask overlap metrics and surface distances.
//!
//! Chamfer distance is the sum of the two directed mean nearest-surface
//! distances; mean surface distance is their average, so `msd = chamfer / 2`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::{surface_samples, MeshError, SurfaceIndex, TriMesh};
use crate::slicer::BinaryMask;

/// Surface samples per mesh used by default for CD / MSD.
pub const DEFAULT_SURFACE_SAMPLES: usize = 10_000;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("mask sizes differ ({0} vs {1})")]
    MaskSizeMismatch(usize, usize),
    #[error("pixel spacing must be positive")]
    BadSpacing,
    #[error("series lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("empty series")]
    EmptySeries,
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskMetrics {
    pub accuracy: f64,
    pub dice: f64,
    pub iou: f64,
    /// Symmetric boundary Hausdorff distance in mm.
    pub hausdorff: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshMetrics {
    pub chamfer: f64,
    pub msd: f64,
}

/// On-pixels with at least one off (or out-of-image) 4-neighbor.
fn boundary_pixels(mask: &BinaryMask) -> Vec<(i64, i64)> {
    let n = mask.size();
    let on = |r: i64, c: i64| r >= 0 && c >= 0 && (r as usize) < n && (c as usize) < n && mask.get(r as usize, c as usize);
    let mut out = Vec::new();
    for r in 0..n as i64 {
        for c in 0..n as i64 {
            if on(r, c) && !(on(r - 1, c) && on(r + 1, c) && on(r, c - 1) && on(r, c + 1)) {
                out.push((r, c));
            }
        }
    }
    out
}

fn directed_hausdorff_px2(from: &[(i64, i64)], to: &[(i64, i64)]) -> i64 {
    from.iter()
        .map(|&(r, c)| {
            to.iter()
                .map(|&(r2, c2)| (r - r2).pow(2) + (c - c2).pow(2))
                .min()
                .unwrap_or(i64::MAX)
        })
        .max()
        .unwrap_or(0)
}

/// Accuracy, Dice, IoU and boundary Hausdorff distance (isotropic `spacing`
/// in mm/px).
///
/// Two empty masks score Dice = IoU = 1 and HD = 0. If exactly one is empty,
/// Dice = IoU = 0 and HD is the image diagonal.
pub fn mask_metrics(pred: &BinaryMask, truth: &BinaryMask, spacing: f64) -> Result<MaskMetrics, MetricsError> {
    if pred.size() != truth.size() {
        return Err(MetricsError::MaskSizeMismatch(pred.size(), truth.size()));
    }
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(MetricsError::BadSpacing);
    }
    let (mut tp, mut tn, mut fp, mut fn_) = (0usize, 0usize, 0usize, 0usize);
    for (&p, &t) in pred.values().iter().zip(truth.values()) {
        match (p != 0, t != 0) {
            (true, true) => tp += 1,
            (false, false) => tn += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
        }
    }
    let total = (tp + tn + fp + fn_) as f64;
    let accuracy = if total > 0.0 { (tp + tn) as f64 / total } else { 1.0 };
    let union = tp + fp + fn_;
    let (dice, iou) = if union == 0 {
        (1.0, 1.0)
    } else {
        (
            2.0 * tp as f64 / (2 * tp + fp + fn_) as f64,
            tp as f64 / union as f64,
        )
    };

    let (pb, tb) = (boundary_pixels(pred), boundary_pixels(truth));
    let hausdorff = match (pb.is_empty(), tb.is_empty()) {
        (true, true) => 0.0,
        (true, false) | (false, true) => spacing * (2.0f64).sqrt() * pred.size() as f64,
        (false, false) => {
            let d2 = directed_hausdorff_px2(&pb, &tb).max(directed_hausdorff_px2(&tb, &pb));
            spacing * (d2 as f64).sqrt()
        }
    };
    Ok(MaskMetrics {
        accuracy,
        dice,
        iou,
        hausdorff,
    })
}

fn directed_mean(samples: &[nalgebra::Point3<f64>], index: &SurfaceIndex<'_>) -> f64 {
    let d: Vec<f64> = samples.par_iter().map(|p| index.distance(p)).collect();
    d.iter().sum::<f64>() / d.len().max(1) as f64
}

/// Chamfer distance and mean surface distance from `n` area-uniform samples
/// per surface, using exact point-to-triangle distances. Both surfaces are
/// sampled with the same `seed`.
pub fn mesh_metrics(a: &TriMesh, b: &TriMesh, n: usize, seed: u64) -> Result<MeshMetrics, MetricsError> {
    let ia = SurfaceIndex::new(a)?;
    let ib = SurfaceIndex::new(b)?;
    let sa = surface_samples(a, n, seed)?;
    let sb = surface_samples(b, n, seed)?;
    let chamfer = directed_mean(&sa, &ib) + directed_mean(&sb, &ia);
    Ok(MeshMetrics {
        chamfer,
        msd: chamfer / 2.0,
    })
}

pub fn chamfer(a: &TriMesh, b: &TriMesh, n: usize, seed: u64) -> Result<f64, MetricsError> {
    mesh_metrics(a, b, n, seed).map(|m| m.chamfer)
}

pub fn msd(a: &TriMesh, b: &TriMesh, n: usize, seed: u64) -> Result<f64, MetricsError> {
    mesh_metrics(a, b, n, seed).map(|m| m.msd)
}

/// Root mean square error between paired series.
pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64, MetricsError> {
    if pred.len() != truth.len() {
        return Err(MetricsError::LengthMismatch(pred.len(), truth.len()));
    }
    if pred.is_empty() {
        return Err(MetricsError::EmptySeries);
    }
    let ss: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok((ss / pred.len() as f64).sqrt())
}
