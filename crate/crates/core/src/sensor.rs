//! Bernoulli frame sampling, exposure schedules, and the basic rate and
//! exposure estimators.
//!
//! A pixel with flux phi exposed for T has exposure H = phi*T and detects with
//! probability Y = 1 - e^{-H}; the frame clock limits each pixel to at most
//! one detection per frame (clocked recharge).

use crate::bitmap::Bitmap;
use crate::cube::PhotonCube;
use crate::raster::{FluxImage, Raster};
use crate::rng::RngSpec;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SensorError {
    #[error("mask dimensions {got_w}x{got_h} do not match flux {want_w}x{want_h}")]
    DimensionMismatch {
        got_w: usize,
        got_h: usize,
        want_w: usize,
        want_h: usize,
    },
    #[error("exposure duration must be positive and finite (got {0})")]
    BadDuration(f64),
    #[error("schedule must contain at least one frame")]
    EmptySchedule,
}

/// Ordered per-frame exposure durations, in units where the shortest duration
/// of interest is 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ExposureSchedule {
    durations: Vec<f64>,
}

impl ExposureSchedule {
    pub fn from_durations(durations: Vec<f64>) -> Result<Self, SensorError> {
        if durations.is_empty() {
            return Err(SensorError::EmptySchedule);
        }
        for &d in &durations {
            if !(d.is_finite() && d > 0.0) {
                return Err(SensorError::BadDuration(d));
            }
        }
        Ok(Self { durations })
    }

    /// Constant-exposure schedule: `frames` frames of duration `t_exp`.
    pub fn uniform(t_exp: f64, frames: usize) -> Result<Self, SensorError> {
        if frames == 0 {
            return Err(SensorError::EmptySchedule);
        }
        Self::from_durations(vec![t_exp; frames])
    }

    pub fn len(&self) -> usize {
        self.durations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.durations.is_empty()
    }

    pub fn duration(&self, t: usize) -> f64 {
        self.durations[t]
    }

    pub fn durations(&self) -> &[f64] {
        &self.durations
    }

    pub fn unit(&self) -> f64 {
        self.durations.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn total_time(&self) -> f64 {
        self.durations.iter().sum()
    }
}

/// 1 - e^{-h}, computed without cancellation for small h.
#[inline]
pub fn detection_probability(h: f64) -> f64 {
    -(-h).exp_m1()
}

/// Expected detections over `w` measurements at exposure `h`: W(1 - e^{-H}).
pub fn expected_detections(h: f64, w: f64) -> f64 {
    debug_assert!(h >= 0.0 && w >= 0.0);
    w * detection_probability(h)
}

/// Expected photons lost per frame to clocked recharge (arrivals after the
/// first in a frame): sum_{k>=2} (k-1) P(K=k; H) = H - 1 + e^{-H}.
pub fn expected_inhibited_per_frame(h: f64) -> f64 {
    debug_assert!(h >= 0.0);
    h - detection_probability(h)
}

/// Per-pixel photon arrivals for one frame, either as Bernoulli detections or
/// full Poisson counts. Arrivals are keyed by (seed, x, y, t) only, never by
/// the mask, which is what makes shared-tape policy comparisons exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampling {
    /// One Bernoulli draw per pixel-frame: 0 or 1 arrivals.
    Bernoulli,
    /// Poisson photon counts; detections are count >= 1. Needed to account
    /// for multi-arrival losses within a frame.
    Poisson,
}

/// Photon arrivals at pixel (x, y) in frame t of duration `t_exp`.
/// Returns the arrival count (capped at 255).
#[inline]
pub fn arrivals_at(
    flux: &FluxImage,
    t_exp: f64,
    rng: &RngSpec,
    sampling: Sampling,
    x: usize,
    y: usize,
    t: u32,
) -> u8 {
    let h = flux.get(x, y) * t_exp;
    let mut stream = rng.stream(x as u32, y as u32, t);
    match sampling {
        Sampling::Bernoulli => u8::from(stream.bernoulli(detection_probability(h))),
        Sampling::Poisson => stream.poisson(h).min(255) as u8,
    }
}

/// Sample one binary frame: each enabled pixel detects independently with
/// probability 1 - e^{-phi T}; disabled pixels are 0.
pub fn sample_frame(
    flux: &FluxImage,
    t_exp: f64,
    mask: &Bitmap,
    rng: &RngSpec,
    t: u32,
) -> Result<Bitmap, SensorError> {
    if !(t_exp.is_finite() && t_exp > 0.0) {
        return Err(SensorError::BadDuration(t_exp));
    }
    if mask.width() != flux.width() || mask.height() != flux.height() {
        return Err(SensorError::DimensionMismatch {
            got_w: mask.width(),
            got_h: mask.height(),
            want_w: flux.width(),
            want_h: flux.height(),
        });
    }
    let mut frame = Bitmap::zeros(flux.width(), flux.height());
    for y in 0..flux.height() {
        for x in 0..flux.width() {
            if mask.get(x, y) && arrivals_at(flux, t_exp, rng, Sampling::Bernoulli, x, y, t) > 0 {
                frame.set(x, y, true);
            }
        }
    }
    Ok(frame)
}

/// How a rate estimate was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    MaskedRatio,
    HdrMerge,
    MleBracket,
}

pub const FLAG_UNOBSERVED: u8 = 1;
pub const FLAG_SATURATED: u8 = 2;

/// Per-pixel binary-rate and exposure reconstruction.
#[derive(Debug, Clone)]
pub struct RateEstimate {
    pub y: Raster,
    pub h: Raster,
    /// Active measurements per pixel (frames with this pixel enabled).
    pub measurements: Vec<f64>,
    /// Bitwise FLAG_UNOBSERVED / FLAG_SATURATED.
    pub flags: Vec<u8>,
    pub kind: EstimatorKind,
}

impl RateEstimate {
    pub fn unobserved(&self, x: usize, y: usize) -> bool {
        self.flags[y * self.y.width() + x] & FLAG_UNOBSERVED != 0
    }

    pub fn saturated(&self, x: usize, y: usize) -> bool {
        self.flags[y * self.y.width() + x] & FLAG_SATURATED != 0
    }
}

/// Saturation clamp: Y-hat is limited to 1 - 1/(2W) before inverting to an
/// exposure, so a fully saturated pixel gets a finite estimate (half-count
/// rule) and a saturation flag instead of a divergent H.
pub fn clamp_rate(d: f64, w: f64) -> (f64, bool) {
    debug_assert!(w > 0.0);
    let y = d / w;
    let cap = 1.0 - 1.0 / (2.0 * w);
    if y > cap {
        (cap, true)
    } else {
        (y, false)
    }
}

/// Exposure from a (possibly clamped) rate: H = -ln(1 - Y).
#[inline]
pub fn exposure_from_rate(y: f64) -> f64 {
    -(-y).ln_1p()
}

/// Masked-ratio estimator from per-pixel detection and measurement counts.
pub fn estimate_rate_from_counts(
    width: usize,
    height: usize,
    detections: &[f64],
    measurements: &[f64],
) -> RateEstimate {
    debug_assert_eq!(detections.len(), width * height);
    debug_assert_eq!(measurements.len(), width * height);
    let n = width * height;
    let mut y = vec![0.0; n];
    let mut h = vec![0.0; n];
    let mut flags = vec![0u8; n];
    for i in 0..n {
        let w = measurements[i];
        if w <= 0.0 {
            flags[i] |= FLAG_UNOBSERVED;
            continue;
        }
        let (yi, saturated) = clamp_rate(detections[i], w);
        if saturated {
            flags[i] |= FLAG_SATURATED;
        }
        y[i] = yi;
        h[i] = exposure_from_rate(yi);
    }
    RateEstimate {
        y: Raster::new(width, height, y).expect("dimensions validated upstream"),
        h: Raster::new(width, height, h).expect("dimensions validated upstream"),
        measurements: measurements.to_vec(),
        flags,
        kind: EstimatorKind::MaskedRatio,
    }
}

/// Ratio-of-detections-to-active-measurements estimator over a whole cube.
pub fn estimate_rate(cube: &PhotonCube) -> RateEstimate {
    let (w, h) = (cube.width(), cube.height());
    let mut d = vec![0.0; w * h];
    let mut m = vec![0.0; w * h];
    for t in 0..cube.num_frames() {
        let frame = cube.frame(t);
        let mask = cube.mask(t);
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                if mask.get(x, y) {
                    m[i] += 1.0;
                    if frame.get(x, y) {
                        d[i] += 1.0;
                    }
                }
            }
        }
    }
    estimate_rate_from_counts(w, h, &d, &m)
}
