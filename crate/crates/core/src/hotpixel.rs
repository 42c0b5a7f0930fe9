//! Hot-pixel replacement for binary frame streams.
//!
//! Flagged pixels take the value of their nearest non-flagged neighbor
//! (Chebyshev distance, ties broken by first hit in row-major scan order).
//! The substitution map is computed once per mask and applied per frame.

use crate::bitmap::Bitmap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum HotPixelError {
    #[error("hot-pixel mask flags every pixel; nothing to substitute from")]
    AllHot,
    #[error("mask dimensions {got_w}x{got_h} do not match frames {want_w}x{want_h}")]
    DimensionMismatch {
        got_w: usize,
        got_h: usize,
        want_w: usize,
        want_h: usize,
    },
}

/// Precomputed source pixel for every hot pixel.
#[derive(Debug, Clone)]
pub struct HotPixelFilter {
    width: usize,
    height: usize,
    /// (hot pixel index, replacement pixel index) pairs.
    substitutions: Vec<(usize, usize)>,
}

impl HotPixelFilter {
    pub fn new(hot: &Bitmap) -> Result<Self, HotPixelError> {
        let (w, h) = (hot.width(), hot.height());
        if hot.count_ones() as usize == w * h {
            return Err(HotPixelError::AllHot);
        }
        let max_r = (w.max(h)) as i64;
        let mut substitutions = Vec::new();
        for y in 0..h {
            for x in 0..w {
                if !hot.get(x, y) {
                    continue;
                }
                'found: for r in 1..=max_r {
                    for dy in -r..=r {
                        let yy = y as i64 + dy;
                        if yy < 0 || yy >= h as i64 {
                            continue;
                        }
                        for dx in -r..=r {
                            if dy.abs() != r && dx.abs() != r {
                                continue;
                            }
                            let xx = x as i64 + dx;
                            if xx < 0 || xx >= w as i64 {
                                continue;
                            }
                            if !hot.get(xx as usize, yy as usize) {
                                substitutions.push((y * w + x, yy as usize * w + xx as usize));
                                break 'found;
                            }
                        }
                    }
                }
            }
        }
        Ok(Self {
            width: w,
            height: h,
            substitutions,
        })
    }

    pub fn is_identity(&self) -> bool {
        self.substitutions.is_empty()
    }

    /// Replace hot pixels in one frame with their nearest neighbors.
    pub fn apply(&self, frame: &Bitmap) -> Result<Bitmap, HotPixelError> {
        if frame.width() != self.width || frame.height() != self.height {
            return Err(HotPixelError::DimensionMismatch {
                got_w: frame.width(),
                got_h: frame.height(),
                want_w: self.width,
                want_h: self.height,
            });
        }
        let mut out = frame.clone();
        for &(hot_idx, src_idx) in &self.substitutions {
            let v = frame.get(src_idx % self.width, src_idx / self.width);
            out.set(hot_idx % self.width, hot_idx / self.width, v);
        }
        Ok(out)
    }

    /// Same substitution on a row-major per-pixel count buffer (the arrival
    /// stream ahead of mask gating).
    pub fn apply_counts(&self, counts: &mut [u8]) {
        for &(hot_idx, src_idx) in &self.substitutions {
            counts[hot_idx] = counts[src_idx];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_mask_is_identity() {
        let filter = HotPixelFilter::new(&Bitmap::zeros(6, 6)).unwrap();
        assert!(filter.is_identity());
        let frame = Bitmap::from_fn(6, 6, |x, y| (x + y) % 2 == 0);
        assert_eq!(filter.apply(&frame).unwrap(), frame);
    }

    #[test]
    fn isolated_hot_pixel_takes_neighbor_value() {
        let mut hot = Bitmap::zeros(5, 5);
        hot.set(2, 2, true);
        let filter = HotPixelFilter::new(&hot).unwrap();

        // Surrounded by zeros: becomes 0.
        let mut frame = Bitmap::zeros(5, 5);
        frame.set(2, 2, true);
        assert_eq!(filter.apply(&frame).unwrap().count_ones(), 0);

        // Adjacent to an all-ones region: takes 1 from the nearest neighbor.
        let frame = Bitmap::from_fn(5, 5, |x, _| x <= 1);
        let mut expect_on = frame.clone();
        expect_on.set(2, 2, true);
        assert_eq!(filter.apply(&frame).unwrap(), expect_on);
    }

    #[test]
    fn all_hot_mask_is_rejected() {
        assert!(matches!(
            HotPixelFilter::new(&Bitmap::ones(3, 3)),
            Err(HotPixelError::AllHot)
        ));
    }

    #[test]
    fn row_major_tie_break() {
        // Hot pixel at (1, 1) in a 3x3 with all neighbors clean: nearest shell
        // r=1 scans (0,0) first in row-major order.
        let mut hot = Bitmap::zeros(3, 3);
        hot.set(1, 1, true);
        let filter = HotPixelFilter::new(&hot).unwrap();
        let mut frame = Bitmap::zeros(3, 3);
        frame.set(0, 0, true); // the tie-break source
        let out = filter.apply(&frame).unwrap();
        assert!(out.get(1, 1));
    }
}
