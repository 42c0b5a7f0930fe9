//! Detection, measurement, and inhibition accounting plus the avalanche
//! energy model.
//!
//! Two inhibition notions are tracked separately:
//! - `i_mask`: photon arrival events gated off by the inhibition mask (binary,
//!   at most one per pixel-frame; numerator of the inhibited fraction I_F);
//! - `i_clock`: arrivals beyond the first within an enabled frame, lost to
//!   clocked recharge (populated when the run carries Poisson counts).
//!
//! W counts enabled frames (mask = 1). Sources that count disabled frames
//! instead are translated to this convention at ingestion.

use crate::bitmap::Bitmap;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TallyError {
    #[error("frame dimensions {got_w}x{got_h} do not match tally {want_w}x{want_h}")]
    DimensionMismatch {
        got_w: usize,
        got_h: usize,
        want_w: usize,
        want_h: usize,
    },
    #[error("arrival tape length {got} does not match pixel count {want}")]
    TapeLengthMismatch { got: usize, want: usize },
    #[error("avalanche energy must be positive for a break-even rate")]
    ZeroAvalancheEnergy,
}

/// Per-pixel counters accumulated over a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Tally {
    width: usize,
    height: usize,
    frames: u32,
    d: Vec<u32>,
    w: Vec<u32>,
    i_mask: Vec<u32>,
    i_clock: Vec<u64>,
    /// Binary arrival events (frames with at least one arrival).
    arrivals: Vec<u32>,
    /// Full arrival counts from the tape.
    arrivals_total: Vec<u64>,
    /// Full arrival counts at disabled pixel-frames.
    masked_arrivals_total: Vec<u64>,
}

/// Aggregate totals at one frame index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TallyTotals {
    pub frames: u32,
    pub detections: u64,
    pub measurements: u64,
    pub inhibited_mask: u64,
    pub inhibited_clock: u64,
    pub arrivals: u64,
    pub arrivals_total: u64,
    pub masked_arrivals_total: u64,
}

impl TallyTotals {
    /// Fraction of possible (arrived) photons inhibited by the mask.
    pub fn i_f(&self) -> f64 {
        if self.arrivals == 0 {
            0.0
        } else {
            self.inhibited_mask as f64 / self.arrivals as f64
        }
    }
}

impl Tally {
    pub fn new(width: usize, height: usize) -> Self {
        let n = width * height;
        Self {
            width,
            height,
            frames: 0,
            d: vec![0; n],
            w: vec![0; n],
            i_mask: vec![0; n],
            i_clock: vec![0; n],
            arrivals: vec![0; n],
            arrivals_total: vec![0; n],
            masked_arrivals_total: vec![0; n],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn frames(&self) -> u32 {
        self.frames
    }

    pub fn pixels(&self) -> usize {
        self.d.len()
    }

    pub fn detections(&self) -> &[u32] {
        &self.d
    }

    pub fn measurements(&self) -> &[u32] {
        &self.w
    }

    pub fn inhibited_mask(&self) -> &[u32] {
        &self.i_mask
    }

    pub fn inhibited_clock(&self) -> &[u64] {
        &self.i_clock
    }

    /// Accumulate one frame. `tape` carries the photon arrival counts for
    /// this frame (row-major, one entry per pixel); without it only D and W
    /// are updated.
    pub fn accumulate(
        &mut self,
        frame: &Bitmap,
        mask: &Bitmap,
        tape: Option<&[u8]>,
    ) -> Result<(), TallyError> {
        for b in [frame, mask] {
            if b.width() != self.width || b.height() != self.height {
                return Err(TallyError::DimensionMismatch {
                    got_w: b.width(),
                    got_h: b.height(),
                    want_w: self.width,
                    want_h: self.height,
                });
            }
        }
        if let Some(tape) = tape {
            if tape.len() != self.d.len() {
                return Err(TallyError::TapeLengthMismatch {
                    got: tape.len(),
                    want: self.d.len(),
                });
            }
        }
        for y in 0..self.height {
            for x in 0..self.width {
                let i = y * self.width + x;
                let enabled = mask.get(x, y);
                if enabled {
                    self.w[i] += 1;
                    if frame.get(x, y) {
                        self.d[i] += 1;
                    }
                }
                if let Some(tape) = tape {
                    let k = tape[i] as u32;
                    if k > 0 {
                        self.arrivals[i] += 1;
                        self.arrivals_total[i] += k as u64;
                        if enabled {
                            self.i_clock[i] += (k - 1) as u64;
                        } else {
                            self.i_mask[i] += 1;
                            self.masked_arrivals_total[i] += k as u64;
                        }
                    }
                }
            }
        }
        self.frames += 1;
        Ok(())
    }

    pub fn totals(&self) -> TallyTotals {
        TallyTotals {
            frames: self.frames,
            detections: self.d.iter().map(|&v| v as u64).sum(),
            measurements: self.w.iter().map(|&v| v as u64).sum(),
            inhibited_mask: self.i_mask.iter().map(|&v| v as u64).sum(),
            inhibited_clock: self.i_clock.iter().sum(),
            arrivals: self.arrivals.iter().map(|&v| v as u64).sum(),
            arrivals_total: self.arrivals_total.iter().sum(),
            masked_arrivals_total: self.masked_arrivals_total.iter().sum(),
        }
    }
}

/// Avalanche and always-on compute energy parameters. Defaults follow
/// published estimates (11.6 pJ per avalanche, 729 nW of per-pixel compute)
/// and are configuration-overridable estimates, not measured values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyModel {
    /// Joules per photon detection.
    pub e_avalanche_j: f64,
    /// Watts of always-on policy compute per pixel.
    pub p_compute_w_per_pixel: f64,
    pub pixels: usize,
}

impl EnergyModel {
    pub fn with_defaults(pixels: usize) -> Self {
        Self {
            e_avalanche_j: 11.6e-12,
            p_compute_w_per_pixel: 729e-9,
            pixels,
        }
    }
}

/// Avalanche power drawn at a given detection rate.
pub fn avalanche_power(detections_per_sec: f64, model: &EnergyModel) -> f64 {
    debug_assert!(detections_per_sec >= 0.0);
    detections_per_sec * model.e_avalanche_j
}

/// Detections per second (per pixel) at which inhibition compute pays for
/// itself: p_compute / e_avalanche.
pub fn break_even(model: &EnergyModel) -> Result<f64, TallyError> {
    if model.e_avalanche_j <= 0.0 {
        return Err(TallyError::ZeroAvalancheEnergy);
    }
    Ok(model.p_compute_w_per_pixel / model.e_avalanche_j)
}

/// One row of the run-report CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub run_id: String,
    pub policy: String,
    pub eta: Option<i32>,
    pub tau_h: Option<u32>,
    pub frames: u32,
    pub d_per_pix: f64,
    pub w_frac: f64,
    pub i_f: f64,
    pub avalanche_j: f64,
    pub compute_j: f64,
    pub ssim: Option<f64>,
    pub mse: Option<f64>,
    pub snr_h_db: Option<f64>,
}

pub const REPORT_HEADER: &str =
    "run_id,policy,eta,tau_h,frames,D_per_pix,W_frac,I_F,avalanche_J,compute_J,ssim,mse,snr_h_db";

impl ReportRow {
    /// Build the accounting part of a report row; quality metrics are
    /// attached by the caller when available.
    pub fn from_totals(
        run_id: &str,
        policy: &str,
        totals: &TallyTotals,
        pixels: usize,
        energy: &EnergyModel,
        frame_rate_hz: f64,
    ) -> Self {
        let possible = totals.frames as u64 * pixels as u64;
        let seconds = totals.frames as f64 / frame_rate_hz;
        ReportRow {
            run_id: run_id.to_string(),
            policy: policy.to_string(),
            eta: None,
            tau_h: None,
            frames: totals.frames,
            d_per_pix: totals.detections as f64 / pixels as f64,
            w_frac: if possible == 0 {
                0.0
            } else {
                totals.measurements as f64 / possible as f64
            },
            i_f: totals.i_f(),
            avalanche_j: totals.detections as f64 * energy.e_avalanche_j,
            compute_j: energy.p_compute_w_per_pixel * energy.pixels as f64 * seconds,
            ssim: None,
            mse: None,
            snr_h_db: None,
        }
    }

    pub fn to_csv_row(&self) -> String {
        let opt_i = |v: Option<i32>| v.map(|x| x.to_string()).unwrap_or_default();
        let opt_u = |v: Option<u32>| v.map(|x| x.to_string()).unwrap_or_default();
        let opt_f = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        let mut s = String::new();
        write!(
            s,
            "{},{},{},{},{},{:.6},{:.6},{:.6},{:.6e},{:.6e},{},{},{}",
            self.run_id,
            self.policy,
            opt_i(self.eta),
            opt_u(self.tau_h),
            self.frames,
            self.d_per_pix,
            self.w_frac,
            self.i_f,
            self.avalanche_j,
            self.compute_j,
            opt_f(self.ssim),
            opt_f(self.mse),
            opt_f(self.snr_h_db),
        )
        .expect("string write");
        s
    }
}
