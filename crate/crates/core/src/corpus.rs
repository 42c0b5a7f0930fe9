//! Bundled synthetic test scenes.
//!
//! Deterministic closed-form images standing in for external photo corpora:
//! smooth gradients, hard steps, thin structures, and HDR composites spanning
//! several decades. Every scene is normalized to mean 1.0 so exposure levels
//! in photons per pixel scale it directly.

use crate::bitmap::Bitmap;
use crate::edges::{sobel_magnitude, threshold_edges};
use crate::raster::{FluxImage, Raster};

pub const SIZE: usize = 96;

pub const NAMES: [&str; 8] = [
    "ramp",
    "steps",
    "checker",
    "blobs",
    "rings",
    "hdr_tiles",
    "lines",
    "mottle",
];

/// The mid-contrast scene used for oracle-allocation comparisons.
pub const MID_CONTRAST: &str = "mottle";

fn normalize_mean(mut data: Vec<f64>) -> Vec<f64> {
    let mean = data.iter().sum::<f64>() / data.len() as f64;
    for v in &mut data {
        *v /= mean;
    }
    data
}

fn build(f: impl Fn(usize, usize) -> f64) -> FluxImage {
    let mut data = Vec::with_capacity(SIZE * SIZE);
    for y in 0..SIZE {
        for x in 0..SIZE {
            data.push(f(x, y).max(1e-4));
        }
    }
    let raster = Raster::new(SIZE, SIZE, normalize_mean(data)).expect("fixed size");
    FluxImage::new(raster).expect("positive values")
}

/// A named synthetic scene, mean-normalized relative flux.
pub fn synthetic(name: &str) -> Option<FluxImage> {
    let s = SIZE as f64;
    let img = match name {
        // Two-decade horizontal log ramp with gentle row modulation.
        "ramp" => build(|x, y| {
            let fx = x as f64 / (s - 1.0);
            let level = (0.1f64.ln() + (6.0f64.ln() - 0.1f64.ln()) * fx).exp();
            level * (1.0 + 0.3 * (y as f64 * std::f64::consts::TAU * 3.0 / s).sin())
        }),
        // Eight vertical bars at geometric brightness levels.
        "steps" => build(|x, _| 0.08 * 2.2f64.powi((x * 8 / SIZE) as i32)),
        // Checkerboard with a bright border frame.
        "checker" => build(|x, y| {
            if x < 4 || y < 4 || x >= SIZE - 4 || y >= SIZE - 4 {
                4.0
            } else if ((x / 8) + (y / 8)) % 2 == 0 {
                0.35
            } else {
                2.2
            }
        }),
        // Gaussian blobs of varied size and brightness on a dim background.
        "blobs" => build(|x, y| {
            let blobs: [(f64, f64, f64, f64); 6] = [
                (20.0, 24.0, 5.0, 6.0),
                (64.0, 18.0, 9.0, 3.0),
                (40.0, 56.0, 13.0, 1.8),
                (78.0, 70.0, 6.0, 8.0),
                (16.0, 78.0, 4.0, 2.5),
                (58.0, 42.0, 3.0, 4.5),
            ];
            let mut v: f64 = 0.3;
            for (cx, cy, sigma, amp) in blobs {
                let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
                v += amp * (-d2 / (2.0 * sigma * sigma)).exp();
            }
            v
        }),
        // Concentric sinusoidal rings with a hot center.
        "rings" => build(|x, y| {
            let dx = x as f64 - s / 2.0;
            let dy = y as f64 - s / 2.0;
            let r = (dx * dx + dy * dy).sqrt();
            0.25 * (1.0 + 0.9 * (std::f64::consts::TAU * r / 9.0).sin())
                + 5.0 * (-r * r / 40.0).exp()
        }),
        // 4x4 tiles log-spaced over three decades, deterministically shuffled.
        "hdr_tiles" => build(|x, y| {
            let tx = x * 4 / SIZE;
            let ty = y * 4 / SIZE;
            let order = [5, 12, 0, 9, 14, 3, 7, 10, 1, 8, 15, 4, 11, 6, 2, 13];
            let rank = order[ty * 4 + tx] as f64;
            0.03 * (1000.0f64).powf(rank / 15.0)
        }),
        // Dark line lattice over a bright background.
        "lines" => build(|x, y| {
            let near = |v: usize| (8..=10).contains(&(v % 16));
            let on_grid = near(x) || near(y);
            let on_diag = x.abs_diff(y) <= 1;
            if on_grid || on_diag {
                0.25
            } else {
                2.0
            }
        }),
        // Smooth multiplicative field, lognormal-like mid contrast.
        "mottle" => build(|x, y| {
            let fx = x as f64;
            let fy = y as f64;
            let t = std::f64::consts::TAU;
            let field = 0.6 * (t * fx / 17.0 + 1.0).sin()
                + 0.5 * (t * fy / 23.0 + 2.0).sin()
                + 0.4 * (t * (fx + fy) / 31.0 + 0.7).sin()
                + 0.3 * (t * (fx - 0.5 * fy) / 11.0 + 4.2).sin();
            (1.2 * field).exp()
        }),
        _ => return None,
    };
    Some(img)
}

/// Threshold used for ground-truth edge maps, as a fraction of the peak
/// gradient. Sits exactly on the default 32-step detector sweep (6.5/32) so
/// the clean reference reproduces its own ground truth bit-exactly.
pub const GT_EDGE_THRESHOLD: f64 = 6.5 / 32.0;

/// Ground-truth edge map for a scene: the fixed Sobel detector applied to the
/// clean reference rate image at 1 photon per pixel, thresholded at ~20% of
/// the peak gradient.
pub fn gt_edges(name: &str) -> Option<Bitmap> {
    let img = synthetic(name)?;
    let rate = img.rate_image(1.0);
    let grad = sobel_magnitude(&rate);
    Some(threshold_edges(&grad, GT_EDGE_THRESHOLD * grad.max()))
}
