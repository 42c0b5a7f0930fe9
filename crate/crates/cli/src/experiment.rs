//! Shared experiment machinery: scene loading, lockstep multi-level policy
//! runs, HDR merging across exposure levels, metric curves over cumulative
//! frame checkpoints, and equal-quality interpolation.

use crate::error::CliError;
use spadsim_core::bracket::{hdr_merge, MergeCycle};
use spadsim_core::corpus;
use spadsim_core::metrics::{mse, ssim};
use spadsim_core::pgm::read_pgm;
use spadsim_core::policy::{PolicyRunner, PolicySpec, RunOptions};
use spadsim_core::raster::{FluxImage, Raster};
use spadsim_core::rng::RngSpec;
use spadsim_core::sensor::{
    detection_probability, estimate_rate_from_counts, EstimatorKind, ExposureSchedule,
    RateEstimate, Sampling, FLAG_SATURATED, FLAG_UNOBSERVED,
};
use spadsim_core::tally::Tally;
use std::path::Path;

/// Resolve an image reference: a bundled corpus name or a PGM path. Loaded
/// images are normalized to mean 1 so exposure levels in photons per pixel
/// scale them directly.
pub fn load_scene(reference: &str, gamma_decompress: bool) -> Result<FluxImage, CliError> {
    if let Some(img) = corpus::synthetic(reference) {
        return Ok(img);
    }
    let path = Path::new(reference);
    if !path.exists() {
        return Err(CliError::config(format!(
            "image '{reference}' is neither a bundled scene ({}) nor an existing file",
            corpus::NAMES.join(", ")
        )));
    }
    let raster = read_pgm(path, gamma_decompress).map_err(|e| match e {
        spadsim_core::pgm::PgmError::Io(io) => CliError::io(path, io),
        other => CliError::config(format!("{}: {other}", path.display())),
    })?;
    let flux =
        FluxImage::new(raster).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    flux.scaled_to_mean(1.0)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

/// Load a hot-pixel mask (nonzero = hot) from a PGM and build the
/// nearest-neighbor substitution filter.
pub fn load_hot_mask(path: &Path) -> Result<spadsim_core::hotpixel::HotPixelFilter, CliError> {
    let raster = read_pgm(path, false).map_err(|e| match e {
        spadsim_core::pgm::PgmError::Io(io) => CliError::io(path, io),
        other => CliError::config(format!("{}: {other}", path.display())),
    })?;
    let mask = spadsim_core::bitmap::Bitmap::from_fn(raster.width(), raster.height(), |x, y| {
        raster.get(x, y) > 0.5
    });
    spadsim_core::hotpixel::HotPixelFilter::new(&mask)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

/// Metric checkpoints over an N-frame run: every frame early (where curves
/// move fastest), then progressively sparser, always including N.
pub fn checkpoints(n: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut t = 1usize;
    while t <= n {
        out.push(t);
        t += if t < 32 {
            1
        } else if t < 256 {
            8
        } else {
            32
        };
    }
    if *out.last().unwrap() != n {
        out.push(n);
    }
    out
}

/// One metric row of a cumulative curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StaticRow {
    pub frames: usize,
    pub d_per_pix: f64,
    pub w_frac: f64,
    pub i_f: f64,
    pub ssim: f64,
    pub mse: f64,
    /// Pixels whose estimate hit the saturation clamp at this checkpoint.
    pub saturated: u64,
    /// Pixels with no active measurement at this checkpoint.
    pub unobserved: u64,
}

/// Curve of one policy arm over an image, plus rate-image snapshots taken as
/// the cumulative detections cross the requested operating points.
#[derive(Debug)]
pub struct ArmCurve {
    pub policy_label: String,
    pub rows: Vec<StaticRow>,
    pub snapshots: Vec<Snapshot>,
    /// Pixels never observed by the end of the run.
    pub final_unobserved: u64,
    /// Per-pixel enabled-frame counts at the end of the run, summed over
    /// levels (the measurement-allocation scatter against pixel exposure).
    pub final_measurements: Vec<u64>,
}

#[derive(Debug)]
pub struct Snapshot {
    pub requested_d_per_pix: f64,
    pub frames: usize,
    pub rate: Raster,
}

/// A static-imaging experiment on one scene: one or more exposure levels,
/// each carrying `frames_per_level` frames, with estimates merged to the
/// center level for scoring.
pub struct StaticExperiment {
    pub flux_rel: FluxImage,
    pub levels_ppp: Vec<f64>,
    pub frames_per_level: usize,
    pub seed: RngSpec,
    pub hot_filter: Option<spadsim_core::hotpixel::HotPixelFilter>,
}

impl StaticExperiment {
    pub fn new(
        flux_rel: FluxImage,
        mut levels_ppp: Vec<f64>,
        frames_per_level: usize,
        seed: RngSpec,
    ) -> Result<Self, CliError> {
        if levels_ppp.is_empty() {
            return Err(CliError::config("at least one exposure level is required"));
        }
        if levels_ppp.iter().any(|&l| !(l.is_finite() && l > 0.0)) {
            return Err(CliError::config("exposure levels must be positive"));
        }
        if frames_per_level == 0 {
            return Err(CliError::config("frames_per_level must be at least 1"));
        }
        levels_ppp.sort_by(|a, b| a.partial_cmp(b).expect("finite levels"));
        Ok(Self {
            flux_rel,
            levels_ppp,
            frames_per_level,
            seed,
            hot_filter: None,
        })
    }

    pub fn center_index(&self) -> usize {
        self.levels_ppp.len() / 2
    }

    pub fn center_ppp(&self) -> f64 {
        self.levels_ppp[self.center_index()]
    }

    /// Ground-truth binary rate image at the center exposure level.
    pub fn reference_rate(&self) -> Raster {
        self.flux_rel.rate_image(self.center_ppp())
    }

    /// Per-level frame durations in units of the shortest level.
    fn level_durations(&self) -> Vec<f64> {
        let unit = self.levels_ppp[0];
        self.levels_ppp.iter().map(|&l| l / unit).collect()
    }

    /// Run one policy arm over every level in lockstep, evaluating the merged
    /// estimate against the reference at each checkpoint. Arms constructed
    /// from the same experiment share per-level seeds, so they see identical
    /// photon arrival tapes.
    pub fn run_arm(
        &self,
        policy: &PolicySpec,
        eval_at: &[usize],
        snapshot_at: &[f64],
    ) -> Result<ArmCurve, CliError> {
        let unit = self.levels_ppp[0];
        let flux_unit = self
            .flux_rel
            .scaled(unit)
            .map_err(|e| CliError::config(e.to_string()))?;
        let durations = self.level_durations();
        let reference = self.reference_rate();
        let pixels = flux_unit.pixels() as f64;

        let mut runners = Vec::with_capacity(durations.len());
        for (li, &t_exp) in durations.iter().enumerate() {
            let schedule = ExposureSchedule::uniform(t_exp, self.frames_per_level)
                .map_err(|e| CliError::config(e.to_string()))?;
            let options = RunOptions {
                sampling: Sampling::Bernoulli,
                record_cube: false,
                record_per_frame: false,
            };
            let mut runner = PolicyRunner::new(
                &flux_unit,
                &schedule,
                policy,
                self.seed.derive(li as u64),
                options,
            )?;
            if let Some(filter) = &self.hot_filter {
                runner.set_hot_pixel_filter(filter.clone());
            }
            runners.push(runner);
        }

        let mut rows = Vec::with_capacity(eval_at.len());
        let mut snapshots = Vec::new();
        let mut snap_idx = 0usize;
        let mut eval_iter = eval_at.iter().peekable();
        let mut final_unobserved = 0;
        for t in 1..=self.frames_per_level {
            for r in &mut runners {
                r.step_frame()?;
            }
            if eval_iter.peek() != Some(&&t) {
                continue;
            }
            eval_iter.next();

            let tallies: Vec<&Tally> = runners.iter().map(|r| r.tally()).collect();
            let merged = merge_to_center(&tallies, &durations, self.center_index());
            let ssim_v = ssim(&merged.y, &reference)?;
            let mse_v = mse(&merged.y, &reference)?;
            let mut d_total = 0u64;
            let mut w_total = 0u64;
            let mut i_mask = 0u64;
            let mut arr = 0u64;
            for tally in &tallies {
                let tot = tally.totals();
                d_total += tot.detections;
                w_total += tot.measurements;
                i_mask += tot.inhibited_mask;
                arr += tot.arrivals;
            }
            let d_per_pix = d_total as f64 / pixels;
            let unobserved = flag_count(&merged, FLAG_UNOBSERVED);
            rows.push(StaticRow {
                frames: t,
                d_per_pix,
                w_frac: w_total as f64 / (pixels * (t * durations.len()) as f64),
                i_f: if arr == 0 {
                    0.0
                } else {
                    i_mask as f64 / arr as f64
                },
                ssim: ssim_v,
                mse: mse_v,
                saturated: flag_count(&merged, FLAG_SATURATED),
                unobserved,
            });
            while snap_idx < snapshot_at.len() && d_per_pix >= snapshot_at[snap_idx] {
                snapshots.push(Snapshot {
                    requested_d_per_pix: snapshot_at[snap_idx],
                    frames: t,
                    rate: merged.y.clone(),
                });
                snap_idx += 1;
            }
            final_unobserved = unobserved;
        }
        let mut final_measurements = vec![0u64; flux_unit.pixels()];
        for runner in &runners {
            for (acc, &w) in final_measurements
                .iter_mut()
                .zip(runner.tally().measurements())
            {
                *acc += w as u64;
            }
        }
        Ok(ArmCurve {
            policy_label: policy.label(),
            rows,
            snapshots,
            final_unobserved,
            final_measurements,
        })
    }
}

/// Merge per-level cumulative tallies into a binary-rate estimate at the
/// center exposure level. Single-level runs reduce to the masked-ratio
/// estimate; multi-level runs SNR^2-weight per-level flux estimates and
/// convert back through the center exposure. Unobserved and clamped pixels
/// carry their flags through to the output.
pub fn merge_to_center(tallies: &[&Tally], durations: &[f64], center: usize) -> RateEstimate {
    let width = tallies[0].width();
    let height = tallies[0].height();
    let n = width * height;
    let t_center = durations[center];

    if tallies.len() == 1 {
        let tally = tallies[0];
        let d: Vec<f64> = tally.detections().iter().map(|&v| v as f64).collect();
        let w: Vec<f64> = tally.measurements().iter().map(|&v| v as f64).collect();
        return estimate_rate_from_counts(width, height, &d, &w);
    }

    let mut y = vec![0.0f64; n];
    let mut h = vec![0.0f64; n];
    let mut measurements = vec![0.0f64; n];
    let mut flags = vec![0u8; n];
    let mut cycles = vec![
        MergeCycle {
            y_hat: 0.0,
            exposure: 1.0,
            measurements: 0.0,
            enabled: false
        };
        tallies.len()
    ];
    for i in 0..n {
        for (li, tally) in tallies.iter().enumerate() {
            let w = tally.measurements()[i] as f64;
            cycles[li] = MergeCycle {
                y_hat: if w > 0.0 {
                    tally.detections()[i] as f64 / w
                } else {
                    0.0
                },
                exposure: durations[li],
                measurements: w,
                enabled: w > 0.0,
            };
            measurements[i] += w;
        }
        match hdr_merge(&cycles) {
            Ok(merged) => {
                if merged.saturated {
                    flags[i] |= FLAG_SATURATED;
                }
                h[i] = merged.flux * t_center;
                y[i] = detection_probability(h[i]);
            }
            Err(_) => flags[i] |= FLAG_UNOBSERVED,
        }
    }
    RateEstimate {
        y: Raster::new(width, height, y).expect("tally dimensions"),
        h: Raster::new(width, height, h).expect("tally dimensions"),
        measurements,
        flags,
        kind: EstimatorKind::HdrMerge,
    }
}

/// Count pixels carrying a given flag.
pub fn flag_count(est: &RateEstimate, flag: u8) -> u64 {
    est.flags.iter().filter(|&&f| f & flag != 0).count() as u64
}

/// Detections per pixel at which a curve first reaches the SSIM target
/// (piecewise-linear interpolation on the first upward crossing).
pub fn d_at_ssim(rows: &[StaticRow], target: f64) -> Option<f64> {
    if let Some(first) = rows.first() {
        if first.ssim >= target {
            return Some(first.d_per_pix);
        }
    }
    for pair in rows.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if a.ssim < target && b.ssim >= target {
            let f = (target - a.ssim) / (b.ssim - a.ssim);
            return Some(a.d_per_pix + f * (b.d_per_pix - a.d_per_pix));
        }
    }
    None
}

/// SSIM of a curve at a given detections-per-pixel operating point.
pub fn ssim_at_d(rows: &[StaticRow], d: f64) -> Option<f64> {
    if let Some(first) = rows.first() {
        if d <= first.d_per_pix {
            return Some(first.ssim);
        }
    }
    for pair in rows.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if a.d_per_pix <= d && d <= b.d_per_pix {
            if b.d_per_pix == a.d_per_pix {
                return Some(b.ssim);
            }
            let f = (d - a.d_per_pix) / (b.d_per_pix - a.d_per_pix);
            return Some(a.ssim + f * (b.ssim - a.ssim));
        }
    }
    None
}

/// Spearman rank correlation (average-rank ties).
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let rank = |v: &[f64]| -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).expect("finite values"));
        let mut ranks = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0;
            for &k in &idx[i..=j] {
                ranks[k] = avg;
            }
            i = j + 1;
        }
        ranks
    };
    let rx = rank(xs);
    let ry = rank(ys);
    let n = xs.len() as f64;
    let mean = (n - 1.0) / 2.0;
    let mut num = 0.0;
    let mut dx = 0.0;
    let mut dy = 0.0;
    for i in 0..xs.len() {
        let a = rx[i] - mean;
        let b = ry[i] - mean;
        num += a * b;
        dx += a * a;
        dy += b * b;
    }
    num / (dx.sqrt() * dy.sqrt())
}

/// Moving-average smoothing used when asserting curve monotonicity in the
/// presence of Monte Carlo dips.
pub fn smooth(values: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    (0..values.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(values.len());
            values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}
