//! Energy-aware sensor metrics and image-quality measures.

use crate::raster::Raster;
use crate::sensor::detection_probability;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("exposure must be positive (got {0})")]
    NonPositiveExposure(f64),
    #[error("rate must lie in [0, 1] (got {0})")]
    RateOutOfRange(f64),
    #[error("image dimensions differ: {a_w}x{a_h} vs {b_w}x{b_h}")]
    DimensionMismatch {
        a_w: usize,
        a_h: usize,
        b_w: usize,
        b_h: usize,
    },
    #[error("image {w}x{h} is smaller than the {win}x{win} SSIM window")]
    ImageSmallerThanWindow { w: usize, h: usize, win: usize },
    #[error("curve abscissa must be strictly increasing")]
    NonMonotoneAbscissa,
}

/// Exposure-referred SNR: H sqrt(W / (e^H - 1)). Zero measurements give zero
/// signal by convention.
pub fn snr_h(h: f64, w: f64) -> Result<f64, MetricsError> {
    if h.is_nan() || h <= 0.0 {
        return Err(MetricsError::NonPositiveExposure(h));
    }
    if w <= 0.0 {
        return Ok(0.0);
    }
    Ok(h * (w / h.exp_m1()).sqrt())
}

/// snr_h in decibels (20 log10).
pub fn snr_h_db(h: f64, w: f64) -> Result<f64, MetricsError> {
    Ok(20.0 * snr_h(h, w)?.log10())
}

/// Detection efficiency snr^2_{H/D} = H^2 e^{-H} / (1 - e^{-H})^2. At most 1,
/// approached as H -> 0.
pub fn detection_efficiency(h: f64) -> Result<f64, MetricsError> {
    if h.is_nan() || h <= 0.0 {
        return Err(MetricsError::NonPositiveExposure(h));
    }
    let y = detection_probability(h);
    Ok(h * h * (-h).exp() / (y * y))
}

/// Measurement efficiency snr^2_{H/W} = H^2 e^{-H} / (1 - e^{-H}).
pub fn measurement_efficiency(h: f64) -> Result<f64, MetricsError> {
    if h.is_nan() || h <= 0.0 {
        return Err(MetricsError::NonPositiveExposure(h));
    }
    Ok(h * h * (-h).exp() / detection_probability(h))
}

/// Exposure maximizing measurement efficiency; solves H = 2(1 - e^{-H}),
/// found by golden-section search (H* = 1.5936, Y* = 0.797).
pub fn measurement_efficiency_argmax() -> f64 {
    let f = |h: f64| measurement_efficiency(h).expect("positive domain");
    let (mut lo, mut hi) = (1.0, 2.5);
    let inv_phi = 0.618_033_988_749_894_9;
    let mut a = hi - inv_phi * (hi - lo);
    let mut b = lo + inv_phi * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    while hi - lo > 1e-12 {
        if fa > fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - inv_phi * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + inv_phi * (hi - lo);
            fb = f(b);
        }
    }
    0.5 * (lo + hi)
}

/// Binary entropy in bits, with 0 log 0 = 0. Peaks at 1 bit for Y = 0.5.
pub fn entropy_rate(y: f64) -> Result<f64, MetricsError> {
    if !(0.0..=1.0).contains(&y) {
        return Err(MetricsError::RateOutOfRange(y));
    }
    let term = |p: f64| if p > 0.0 { -p * p.log2() } else { 0.0 };
    Ok(term(y) + term(1.0 - y))
}

/// Entropy detection efficiency S(Y)^2 / Y (0 at Y = 0 by continuity).
pub fn entropy_detection_efficiency(y: f64) -> Result<f64, MetricsError> {
    let s = entropy_rate(y)?;
    if y <= 0.0 {
        return Ok(0.0);
    }
    Ok(s * s / y)
}

/// Mean squared error between two rate images.
pub fn mse(estimate: &Raster, reference: &Raster) -> Result<f64, MetricsError> {
    check_dims(estimate, reference)?;
    let n = estimate.len() as f64;
    Ok(estimate
        .data()
        .iter()
        .zip(reference.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n)
}

const SSIM_WINDOW: usize = 8;
const SSIM_C1: f64 = 0.01 * 0.01; // (K1 L)^2 with L = 1 for rate images
const SSIM_C2: f64 = 0.03 * 0.03;

/// Mean structural similarity over all 8x8 windows at stride 1, with
/// C1 = (0.01 L)^2, C2 = (0.03 L)^2 and dynamic range L = 1.
pub fn ssim(estimate: &Raster, reference: &Raster) -> Result<f64, MetricsError> {
    check_dims(estimate, reference)?;
    let (w, h) = (estimate.width(), estimate.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(MetricsError::ImageSmallerThanWindow {
            w,
            h,
            win: SSIM_WINDOW,
        });
    }

    // Summed-area tables over x, y, x^2, y^2, xy.
    let sw = w + 1;
    let sh = h + 1;
    let mut s = vec![[0.0f64; 5]; sw * sh];
    for yy in 0..h {
        for xx in 0..w {
            let a = estimate.get(xx, yy);
            let b = reference.get(xx, yy);
            let idx = (yy + 1) * sw + (xx + 1);
            let up = yy * sw + (xx + 1);
            let left = (yy + 1) * sw + xx;
            let diag = yy * sw + xx;
            let vals = [a, b, a * a, b * b, a * b];
            for k in 0..5 {
                s[idx][k] = vals[k] + s[up][k] + s[left][k] - s[diag][k];
            }
        }
    }
    let window_sum = |x0: usize, y0: usize, k: usize| -> f64 {
        let x1 = x0 + SSIM_WINDOW;
        let y1 = y0 + SSIM_WINDOW;
        s[y1 * sw + x1][k] - s[y0 * sw + x1][k] - s[y1 * sw + x0][k] + s[y0 * sw + x0][k]
    };

    let n = (SSIM_WINDOW * SSIM_WINDOW) as f64;
    let mut total = 0.0;
    let mut count = 0usize;
    for y0 in 0..=(h - SSIM_WINDOW) {
        for x0 in 0..=(w - SSIM_WINDOW) {
            let mu_a = window_sum(x0, y0, 0) / n;
            let mu_b = window_sum(x0, y0, 1) / n;
            let var_a = window_sum(x0, y0, 2) / n - mu_a * mu_a;
            let var_b = window_sum(x0, y0, 3) / n - mu_b * mu_b;
            let cov = window_sum(x0, y0, 4) / n - mu_a * mu_b;
            let num = (2.0 * mu_a * mu_b + SSIM_C1) * (2.0 * cov + SSIM_C2);
            let den = (mu_a * mu_a + mu_b * mu_b + SSIM_C1) * (var_a + var_b + SSIM_C2);
            total += num / den;
            count += 1;
        }
    }
    Ok(total / count as f64)
}

fn check_dims(a: &Raster, b: &Raster) -> Result<(), MetricsError> {
    if !a.same_dimensions(b) {
        return Err(MetricsError::DimensionMismatch {
            a_w: a.width(),
            a_h: a.height(),
            b_w: b.width(),
            b_h: b.height(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy)]
pub struct CurveRow {
    pub h: f64,
    pub y: f64,
    pub snr_h_db: f64,
    pub det_eff: f64,
    pub meas_eff: f64,
    pub entropy_eff: f64,
}

/// Metric curves over an exposure grid, as plotted against H (or against
/// detections per pixel after rescaling the abscissa).
#[derive(Debug, Clone)]
pub struct MetricCurve {
    pub w: f64,
    pub rows: Vec<CurveRow>,
}

/// Default evaluation domain for curve emission; avoids under/overflow.
pub const CURVE_H_MIN: f64 = 1e-6;
pub const CURVE_H_MAX: f64 = 50.0;

pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    assert!(points >= 2 && lo > 0.0 && hi > lo);
    let llo = lo.ln();
    let lhi = hi.ln();
    (0..points)
        .map(|i| (llo + (lhi - llo) * i as f64 / (points - 1) as f64).exp())
        .collect()
}

impl MetricCurve {
    pub fn evaluate(grid: &[f64], w: f64) -> Result<Self, MetricsError> {
        if grid.windows(2).any(|p| p[1] <= p[0]) {
            return Err(MetricsError::NonMonotoneAbscissa);
        }
        let rows = grid
            .iter()
            .map(|&h| {
                let y = detection_probability(h);
                Ok(CurveRow {
                    h,
                    y,
                    snr_h_db: snr_h_db(h, w)?,
                    det_eff: detection_efficiency(h)?,
                    meas_eff: measurement_efficiency(h)?,
                    entropy_eff: entropy_detection_efficiency(y)?,
                })
            })
            .collect::<Result<Vec<_>, MetricsError>>()?;
        Ok(Self { w, rows })
    }

    /// CSV with header `H,Y,snr_h_db,det_eff,meas_eff,entropy_eff`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("H,Y,snr_h_db,det_eff,meas_eff,entropy_eff\n");
        for r in &self.rows {
            writeln!(
                out,
                "{:.9e},{:.9e},{:.6},{:.9e},{:.9e},{:.9e}",
                r.h, r.y, r.snr_h_db, r.det_eff, r.meas_eff, r.entropy_eff
            )
            .expect("string write");
        }
        out
    }
}
