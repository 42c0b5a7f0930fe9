//! Classical edge detection and tolerance-matched boundary scoring.
//!
//! A fixed 3x3 Sobel detector applied identically to every policy arm, plus a
//! greedy boundary F-score. Only relative orderings between arms are
//! meaningful; no equivalence with learned detectors is claimed.

use crate::bitmap::Bitmap;
use crate::raster::Raster;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EdgeError {
    #[error("image dimensions differ: {a_w}x{a_h} vs {b_w}x{b_h}")]
    DimensionMismatch {
        a_w: usize,
        a_h: usize,
        b_w: usize,
        b_h: usize,
    },
}

/// 3x3 Sobel gradient magnitude. Border pixels are set to 0 so every arm sees
/// the same support.
pub fn sobel_magnitude(img: &Raster) -> Raster {
    let (w, h) = (img.width(), img.height());
    let mut out = Raster::filled(w, h, 0.0);
    if w < 3 || h < 3 {
        return out;
    }
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let p = |dx: i64, dy: i64| img.get((x as i64 + dx) as usize, (y as i64 + dy) as usize);
            let gx = (p(1, -1) + 2.0 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2.0 * p(-1, 0) + p(-1, 1));
            let gy = (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2.0 * p(0, -1) + p(1, -1));
            out.set(x, y, (gx * gx + gy * gy).sqrt());
        }
    }
    out
}

/// Threshold a gradient-magnitude image into a binary edge map.
pub fn threshold_edges(gradient: &Raster, threshold: f64) -> Bitmap {
    Bitmap::from_fn(gradient.width(), gradient.height(), |x, y| {
        gradient.get(x, y) > threshold
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FScore {
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
}

/// Greedy one-to-one matching of predicted to ground-truth edge pixels within
/// Chebyshev radius `tol`. Predictions are visited in row-major order and
/// claim the nearest unmatched ground-truth pixel (row-major tie-break).
/// F = 2PR/(P+R), defined as 0 when P + R = 0.
pub fn boundary_fscore(pred: &Bitmap, gt: &Bitmap, tol: u32) -> Result<FScore, EdgeError> {
    if !pred.same_dimensions(gt) {
        return Err(EdgeError::DimensionMismatch {
            a_w: pred.width(),
            a_h: pred.height(),
            b_w: gt.width(),
            b_h: gt.height(),
        });
    }
    let (w, h) = (pred.width(), pred.height());
    let n_pred = pred.count_ones();
    let n_gt = gt.count_ones();
    if n_pred == 0 || n_gt == 0 {
        let f = if n_pred == 0 && n_gt == 0 { 1.0 } else { 0.0 };
        return Ok(FScore {
            precision: if n_pred == 0 { f } else { 0.0 },
            recall: if n_gt == 0 { f } else { 0.0 },
            f,
        });
    }

    let mut claimed = Bitmap::zeros(w, h);
    let tol = tol as i64;
    let mut matched = 0u64;
    for y in 0..h {
        for x in 0..w {
            if !pred.get(x, y) {
                continue;
            }
            // Nearest unmatched gt pixel within the Chebyshev ball, scanning
            // radius shells outward, row-major within each shell.
            'search: for r in 0..=tol {
                for dy in -r..=r {
                    let yy = y as i64 + dy;
                    if yy < 0 || yy >= h as i64 {
                        continue;
                    }
                    for dx in -r..=r {
                        if dy.abs() != r && dx.abs() != r {
                            continue; // interior of the shell already scanned
                        }
                        let xx = x as i64 + dx;
                        if xx < 0 || xx >= w as i64 {
                            continue;
                        }
                        let (ux, uy) = (xx as usize, yy as usize);
                        if gt.get(ux, uy) && !claimed.get(ux, uy) {
                            claimed.set(ux, uy, true);
                            matched += 1;
                            break 'search;
                        }
                    }
                }
            }
        }
    }

    let precision = matched as f64 / n_pred as f64;
    let recall = matched as f64 / n_gt as f64;
    let f = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(FScore {
        precision,
        recall,
        f,
    })
}

/// Sweep `steps` thresholds over the gradient range and report the best
/// F-score against the ground truth (the fixed-detector analog of a
/// best-scale score).
pub fn best_threshold_fscore(
    rate_image: &Raster,
    gt: &Bitmap,
    tol: u32,
    steps: usize,
) -> Result<(f64, FScore), EdgeError> {
    let grad = sobel_magnitude(rate_image);
    let max = grad.max();
    let mut best_t = 0.0;
    let mut best = FScore {
        precision: 0.0,
        recall: 0.0,
        f: -1.0,
    };
    for i in 0..steps {
        let t = max * (i as f64 + 0.5) / steps as f64;
        let score = boundary_fscore(&threshold_edges(&grad, t), gt, tol)?;
        if score.f > best.f {
            best = score;
            best_t = t;
        }
    }
    Ok((best_t, best))
}
