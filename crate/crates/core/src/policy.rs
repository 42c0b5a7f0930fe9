//! Streaming inhibition policies: per-frame mask updates computed from the
//! photon history.
//!
//! The kernel-score policy filters a ternary encoding of each pixel's recent
//! results (+1 detection, -1 enabled without detection, 0 disabled) with a
//! separable spatio-temporal kernel; pixels whose score exceeds the threshold
//! eta are disabled for exactly tau_h subsequent frames. Scores are not
//! evaluated for disabled pixels and a running holdoff is never extended
//! mid-countdown. The temporal ring buffer starts zeroed, so scores ramp up
//! over the first T frames, and the spatial border is zero padded.

use crate::bitmap::Bitmap;
use crate::bracket::BracketSchedule;
use crate::cube::PhotonCube;
use crate::raster::FluxImage;
use crate::rng::RngSpec;
use crate::sensor::{arrivals_at, ExposureSchedule, Sampling};
use crate::tally::{Tally, TallyTotals};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PolicyError {
    #[error("kernel weight {0} is not zero or a signed power of two")]
    NonPowerOfTwoWeight(i32),
    #[error("spatial kernel must have odd dimensions (got {w}x{h})")]
    EvenKernel { w: usize, h: usize },
    #[error("kernel weights length {len} does not match {w}x{h}")]
    KernelShape { len: usize, w: usize, h: usize },
    #[error("temporal kernel must not be empty")]
    EmptyTemporalKernel,
    #[error("holdoff must be at least 1 frame")]
    ZeroHoldoff,
    #[error("subsample factor must be at least 1")]
    ZeroSubsample,
    #[error("edge-compound thresholds require eta1 < eta2 (got {eta1} >= {eta2})")]
    BadEdgeThresholds { eta1: i32, eta2: i32 },
    #[error("unknown policy preset '{0}'")]
    UnknownPreset(String),
    #[error(
        "saturation look-ahead runs through the bracket pipeline, not the frame-clocked stepper"
    )]
    LookaheadNotFrameClocked,
    #[error("frame dimensions {got_w}x{got_h} do not match policy state {want_w}x{want_h}")]
    DimensionMismatch {
        got_w: usize,
        got_h: usize,
        want_w: usize,
        want_h: usize,
    },
}

/// Separable spatio-temporal score kernel K = K_s (x) K_t. Every nonzero
/// weight is a signed power of two so hardware can multiply with bit shifts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoreKernel {
    spatial: Vec<i32>,
    spatial_w: usize,
    spatial_h: usize,
    temporal: Vec<i32>,
}

fn power_of_two_or_zero(v: i32) -> bool {
    v == 0 || v.unsigned_abs().is_power_of_two()
}

impl ScoreKernel {
    pub fn new(
        spatial: Vec<i32>,
        spatial_w: usize,
        spatial_h: usize,
        temporal: Vec<i32>,
    ) -> Result<Self, PolicyError> {
        if spatial_w.is_multiple_of(2) || spatial_h.is_multiple_of(2) {
            return Err(PolicyError::EvenKernel {
                w: spatial_w,
                h: spatial_h,
            });
        }
        if spatial.len() != spatial_w * spatial_h {
            return Err(PolicyError::KernelShape {
                len: spatial.len(),
                w: spatial_w,
                h: spatial_h,
            });
        }
        if temporal.is_empty() {
            return Err(PolicyError::EmptyTemporalKernel);
        }
        for &v in spatial.iter().chain(&temporal) {
            if !power_of_two_or_zero(v) {
                return Err(PolicyError::NonPowerOfTwoWeight(v));
            }
        }
        Ok(Self {
            spatial,
            spatial_w,
            spatial_h,
            temporal,
        })
    }

    fn square3(weights: [i32; 9]) -> Self {
        Self::new(weights.to_vec(), 3, 3, vec![1, 1, 1, 1]).expect("static kernel is valid")
    }

    /// 3x3 "center + ring": center x8, eight neighbors x1.
    pub fn center_ring() -> Self {
        Self::square3([1, 1, 1, 1, 8, 1, 1, 1, 1])
    }

    /// 3x3 Laplacian: ring of +1, center -8.
    pub fn laplacian() -> Self {
        Self::square3([1, 1, 1, 1, -8, 1, 1, 1, 1])
    }

    /// 3x3 all-ones average.
    pub fn average() -> Self {
        Self::square3([1, 1, 1, 1, 1, 1, 1, 1, 1])
    }

    /// Single-pixel kernel (temporal rate threshold only).
    pub fn single_pixel() -> Self {
        Self::square3([0, 0, 0, 0, 1, 0, 0, 0, 0])
    }

    pub fn temporal_len(&self) -> usize {
        self.temporal.len()
    }

    pub fn spatial(&self) -> (&[i32], usize, usize) {
        (&self.spatial, self.spatial_w, self.spatial_h)
    }

    pub fn temporal(&self) -> &[i32] {
        &self.temporal
    }
}

/// Policy selector with all tuning parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicySpec {
    /// No inhibition beyond the frame clock itself.
    None,
    /// Alias of `None` for accounting purposes: the baseline whose
    /// multi-arrival losses are attributed to clocked recharge.
    ClockedRecharge,
    /// Enable one frame in `n`, dropping the rest.
    Subsample { n: u32 },
    /// Disable a pixel for `tau_d` frames after each of its detections.
    DeadTime { tau_d: u32 },
    /// Kernel score against threshold eta with holdoff tau_h.
    Score {
        kernel: ScoreKernel,
        eta: i32,
        tau_h: u32,
    },
    /// Laplacian score S1 plus average score S2 combined as
    /// ((eta1 < S1 < eta2) and (S2 > eta3)) or (S2 > eta4).
    EdgeCompound {
        eta1: i32,
        eta2: i32,
        eta3: i32,
        eta4: i32,
        tau_h: u32,
    },
    /// Per-pixel exposure-bracket policy; executed by the bracket pipeline.
    SaturationLookahead { schedule: BracketSchedule },
}

impl PolicySpec {
    /// Named presets: P_cr, P_L, P_avg, P_s and the primed single-exposure
    /// variants (P_cr', ...), plus the edge-compound policy.
    pub fn preset(name: &str) -> Result<PolicySpec, PolicyError> {
        let score =
            |kernel: ScoreKernel, eta: i32, tau_h: u32| PolicySpec::Score { kernel, eta, tau_h };
        Ok(match name {
            "none" => PolicySpec::None,
            "clocked_recharge" => PolicySpec::ClockedRecharge,
            "P_cr" => score(ScoreKernel::center_ring(), 12, 32),
            "P_L" => score(ScoreKernel::laplacian(), 24, 4),
            "P_avg" => score(ScoreKernel::average(), 6, 32),
            "P_s" => score(ScoreKernel::single_pixel(), 2, 32),
            "P_cr'" => score(ScoreKernel::center_ring(), 12, 4),
            "P_L'" => score(ScoreKernel::laplacian(), 24, 4),
            "P_avg'" => score(ScoreKernel::average(), 12, 4),
            "P_s'" => score(ScoreKernel::single_pixel(), 2, 8),
            "edge" => PolicySpec::EdgeCompound {
                eta1: -12,
                eta2: 12,
                eta3: 4,
                eta4: 16,
                tau_h: 16,
            },
            other => return Err(PolicyError::UnknownPreset(other.to_string())),
        })
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        match self {
            PolicySpec::Subsample { n } if *n == 0 => Err(PolicyError::ZeroSubsample),
            PolicySpec::Score { tau_h, .. } if *tau_h == 0 => Err(PolicyError::ZeroHoldoff),
            PolicySpec::EdgeCompound {
                eta1, eta2, tau_h, ..
            } => {
                if eta1 >= eta2 {
                    return Err(PolicyError::BadEdgeThresholds {
                        eta1: *eta1,
                        eta2: *eta2,
                    });
                }
                if *tau_h == 0 {
                    return Err(PolicyError::ZeroHoldoff);
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Short identifier used in reports.
    pub fn label(&self) -> String {
        match self {
            PolicySpec::None => "none".into(),
            PolicySpec::ClockedRecharge => "clocked_recharge".into(),
            PolicySpec::Subsample { n } => format!("subsample_{n}"),
            PolicySpec::DeadTime { tau_d } => format!("deadtime_{tau_d}"),
            PolicySpec::Score { eta, tau_h, .. } => format!("score_eta{eta}_th{tau_h}"),
            PolicySpec::EdgeCompound { .. } => "edge_compound".into(),
            PolicySpec::SaturationLookahead { .. } => "saturation_lookahead".into(),
        }
    }

    pub fn eta(&self) -> Option<i32> {
        match self {
            PolicySpec::Score { eta, .. } => Some(*eta),
            _ => None,
        }
    }

    pub fn tau_h(&self) -> Option<u32> {
        match self {
            PolicySpec::Score { tau_h, .. } | PolicySpec::EdgeCompound { tau_h, .. } => {
                Some(*tau_h)
            }
            _ => None,
        }
    }
}

/// Ring buffer of recent ternary frames.
#[derive(Debug, Clone)]
struct TernaryHistory {
    depth: usize,
    frames: Vec<Vec<i8>>,
    /// Index of the most recent frame in `frames`, valid after the first push.
    head: usize,
    pushed: usize,
}

impl TernaryHistory {
    fn new(depth: usize, pixels: usize) -> Self {
        Self {
            depth,
            frames: vec![vec![0i8; pixels]; depth],
            head: 0,
            pushed: 0,
        }
    }

    fn push(&mut self, frame: &Bitmap, mask: &Bitmap) {
        self.head = (self.head + 1) % self.depth;
        let slot = &mut self.frames[self.head];
        let w = frame.width();
        for y in 0..frame.height() {
            for x in 0..w {
                slot[y * w + x] = if mask.get(x, y) {
                    if frame.get(x, y) {
                        1
                    } else {
                        -1
                    }
                } else {
                    0
                };
            }
        }
        self.pushed += 1;
    }

    /// Frame `dt` steps back from the most recent push (dt = 0 is newest).
    /// Frames older than history are zero (warm-up).
    fn back(&self, dt: usize) -> Option<&[i8]> {
        if dt >= self.depth || dt >= self.pushed {
            return None;
        }
        let idx = (self.head + self.depth - dt) % self.depth;
        Some(&self.frames[idx])
    }
}

/// Per-pixel streaming state for one policy run.
#[derive(Debug, Clone)]
pub struct PolicyState {
    width: usize,
    height: usize,
    history: Option<TernaryHistory>,
    /// Frames remaining disabled; a pixel is enabled iff its countdown is 0.
    holdoff: Vec<u32>,
    /// Index of the next frame to be issued.
    t_next: u32,
}

impl PolicyState {
    fn new(spec: &PolicySpec, width: usize, height: usize) -> Result<Self, PolicyError> {
        spec.validate()?;
        let history = match spec {
            PolicySpec::Score { kernel, .. } => {
                Some(TernaryHistory::new(kernel.temporal_len(), width * height))
            }
            // Both edge-compound kernels share the averaging temporal window.
            PolicySpec::EdgeCompound { .. } => Some(TernaryHistory::new(4, width * height)),
            PolicySpec::SaturationLookahead { .. } => {
                return Err(PolicyError::LookaheadNotFrameClocked)
            }
            _ => None,
        };
        Ok(Self {
            width,
            height,
            history,
            holdoff: vec![0; width * height],
            t_next: 0,
        })
    }
}

/// Spatio-temporal inhibition score, Eq.-style correlation of the kernel with
/// the ternary history: S(x, y) = sum over (dx, dy, dt) of
/// K_s(dx, dy) K_t(dt) ternary(x+dx, y+dy, t-dt), zero padded in space and in
/// the pre-history.
fn score_from_history(
    history: &TernaryHistory,
    kernel: &ScoreKernel,
    width: usize,
    height: usize,
) -> Vec<i32> {
    let (ks, kw, kh) = kernel.spatial();
    let kt = kernel.temporal();
    // Temporal pass first: U(x, y) = sum_dt K_t[dt] * ternary[t - dt].
    let mut temporal = vec![0i32; width * height];
    for (dt, &wt) in kt.iter().enumerate() {
        if wt == 0 {
            continue;
        }
        if let Some(frame) = history.back(dt) {
            for (u, &v) in temporal.iter_mut().zip(frame) {
                *u += wt * v as i32;
            }
        }
    }
    // Spatial correlation with zero padding.
    let rx = (kw / 2) as i64;
    let ry = (kh / 2) as i64;
    let mut score = vec![0i32; width * height];
    for y in 0..height as i64 {
        for x in 0..width as i64 {
            let mut s = 0i32;
            for dy in -ry..=ry {
                let yy = y + dy;
                if yy < 0 || yy >= height as i64 {
                    continue;
                }
                for dx in -rx..=rx {
                    let xx = x + dx;
                    if xx < 0 || xx >= width as i64 {
                        continue;
                    }
                    let kv = ks[((dy + ry) as usize) * kw + (dx + rx) as usize];
                    if kv != 0 {
                        s += kv * temporal[yy as usize * width + xx as usize] as i32;
                    }
                }
            }
            score[y as usize * width + x as usize] = s;
        }
    }
    score
}

/// Standalone score evaluation (used by tests and diagnostics): pushes the
/// given (frame, mask) sequence through a fresh history and returns the score
/// after the last frame.
pub fn inhibition_score(
    frames: &[(Bitmap, Bitmap)],
    kernel: &ScoreKernel,
) -> Result<Vec<i32>, PolicyError> {
    let (w, h) = match frames.first() {
        Some((f, _)) => (f.width(), f.height()),
        None => return Ok(Vec::new()),
    };
    let mut history = TernaryHistory::new(kernel.temporal_len(), w * h);
    for (frame, mask) in frames {
        if frame.width() != w || frame.height() != h {
            return Err(PolicyError::DimensionMismatch {
                got_w: frame.width(),
                got_h: frame.height(),
                want_w: w,
                want_h: h,
            });
        }
        history.push(frame, mask);
    }
    Ok(score_from_history(&history, kernel, w, h))
}

/// Edge-compound inhibition decision from the Laplacian score S1 and the
/// average score S2: ((eta1 < S1 < eta2) and (S2 > eta3)) or (S2 > eta4).
pub fn edge_compound_decision(
    s1: i32,
    s2: i32,
    eta1: i32,
    eta2: i32,
    eta3: i32,
    eta4: i32,
) -> bool {
    ((eta1 < s1 && s1 < eta2) && s2 > eta3) || s2 > eta4
}

/// Streaming policy executor: owns the mask evolution for one run. All
/// pixels start enabled; mask transitions are frame synchronous.
#[derive(Debug, Clone)]
pub struct PolicyRuntime {
    spec: PolicySpec,
    state: PolicyState,
}

impl PolicyRuntime {
    pub fn new(spec: &PolicySpec, width: usize, height: usize) -> Result<Self, PolicyError> {
        Ok(Self {
            spec: spec.clone(),
            state: PolicyState::new(spec, width, height)?,
        })
    }

    pub fn width(&self) -> usize {
        self.state.width
    }

    pub fn height(&self) -> usize {
        self.state.height
    }

    /// Mask for the next frame to be sampled.
    pub fn next_mask(&self) -> Bitmap {
        let (w, h) = (self.state.width, self.state.height);
        let t = self.state.t_next;
        match &self.spec {
            PolicySpec::Subsample { n } => {
                if t.is_multiple_of(*n) {
                    Bitmap::ones(w, h)
                } else {
                    Bitmap::zeros(w, h)
                }
            }
            _ => Bitmap::from_fn(w, h, |x, y| self.state.holdoff[y * w + x] == 0),
        }
    }

    /// Consume frame t's results and advance the per-pixel state so
    /// `next_mask` yields the mask for frame t+1.
    pub fn step(&mut self, frame: &Bitmap, mask: &Bitmap) -> Result<(), PolicyError> {
        let (w, h) = (self.state.width, self.state.height);
        for b in [frame, mask] {
            if b.width() != w || b.height() != h {
                return Err(PolicyError::DimensionMismatch {
                    got_w: b.width(),
                    got_h: b.height(),
                    want_w: w,
                    want_h: h,
                });
            }
        }

        // Expire running holdoffs first: a pixel disabled through frame t
        // with countdown 1 becomes enabled at t+1.
        for c in &mut self.state.holdoff {
            *c = c.saturating_sub(1);
        }

        match &self.spec {
            PolicySpec::None | PolicySpec::ClockedRecharge | PolicySpec::Subsample { .. } => {}
            PolicySpec::DeadTime { tau_d } => {
                if *tau_d > 0 {
                    for y in 0..h {
                        for x in 0..w {
                            if frame.get(x, y) {
                                self.state.holdoff[y * w + x] = *tau_d;
                            }
                        }
                    }
                }
            }
            PolicySpec::Score { kernel, eta, tau_h } => {
                let history = self
                    .state
                    .history
                    .as_mut()
                    .expect("score policy has history");
                history.push(frame, mask);
                let score = score_from_history(history, kernel, w, h);
                for i in 0..w * h {
                    // Disabled pixels are not scored; holdoffs never extend.
                    if mask.get(i % w, i / w) && score[i] > *eta {
                        self.state.holdoff[i] = *tau_h;
                    }
                }
            }
            PolicySpec::EdgeCompound {
                eta1,
                eta2,
                eta3,
                eta4,
                tau_h,
            } => {
                let history = self
                    .state
                    .history
                    .as_mut()
                    .expect("edge policy has history");
                history.push(frame, mask);
                let s1 = score_from_history(history, &ScoreKernel::laplacian(), w, h);
                let s2 = score_from_history(history, &ScoreKernel::average(), w, h);
                for i in 0..w * h {
                    if mask.get(i % w, i / w)
                        && edge_compound_decision(s1[i], s2[i], *eta1, *eta2, *eta3, *eta4)
                    {
                        self.state.holdoff[i] = *tau_h;
                    }
                }
            }
            PolicySpec::SaturationLookahead { .. } => unreachable!("rejected at construction"),
        }
        self.state.t_next += 1;
        Ok(())
    }
}

/// Cumulative totals snapshot recorded after every frame.
pub type FrameTotals = TallyTotals;

/// Result of streaming a policy over a schedule.
#[derive(Debug)]
pub struct PolicyRun {
    pub cube: Option<PhotonCube>,
    /// Cumulative totals after frames 1..=N.
    pub per_frame: Vec<FrameTotals>,
    pub tally: Tally,
}

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub sampling: Sampling,
    pub record_cube: bool,
    /// Record cumulative totals after every frame.
    pub record_per_frame: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            sampling: Sampling::Bernoulli,
            record_cube: true,
            record_per_frame: true,
        }
    }
}

/// Incremental runner: samples arrivals, gates them by the policy mask,
/// accumulates tallies, and steps the policy, one frame per call.
pub struct PolicyRunner {
    flux: FluxImage,
    schedule: ExposureSchedule,
    rng: RngSpec,
    options: RunOptions,
    runtime: PolicyRuntime,
    tally: Tally,
    cube: Option<PhotonCube>,
    per_frame: Vec<FrameTotals>,
    tape_scratch: Vec<u8>,
    hot_filter: Option<crate::hotpixel::HotPixelFilter>,
    t: u32,
}

impl PolicyRunner {
    pub fn new(
        flux: &FluxImage,
        schedule: &ExposureSchedule,
        policy: &PolicySpec,
        rng: RngSpec,
        options: RunOptions,
    ) -> Result<Self, PolicyError> {
        let (w, h) = (flux.width(), flux.height());
        Ok(Self {
            flux: flux.clone(),
            schedule: schedule.clone(),
            rng,
            options,
            runtime: PolicyRuntime::new(policy, w, h)?,
            tally: Tally::new(w, h),
            cube: options.record_cube.then(|| PhotonCube::new(w, h)),
            per_frame: Vec::new(),
            tape_scratch: vec![0u8; w * h],
            hot_filter: None,
            t: 0,
        })
    }

    /// Enable hot-pixel preprocessing: flagged pixels take their nearest
    /// clean neighbor's arrivals before mask gating.
    pub fn set_hot_pixel_filter(&mut self, filter: crate::hotpixel::HotPixelFilter) {
        self.hot_filter = Some(filter);
    }

    pub fn frames_done(&self) -> u32 {
        self.t
    }

    pub fn finished(&self) -> bool {
        self.t as usize >= self.schedule.len()
    }

    pub fn tally(&self) -> &Tally {
        &self.tally
    }

    /// Advance one frame; returns false when the schedule is exhausted.
    pub fn step_frame(&mut self) -> Result<bool, PolicyError> {
        if self.finished() {
            return Ok(false);
        }
        let (w, h) = (self.flux.width(), self.flux.height());
        let t_exp = self.schedule.duration(self.t as usize);
        let mask = self.runtime.next_mask();

        for y in 0..h {
            for x in 0..w {
                self.tape_scratch[y * w + x] = arrivals_at(
                    &self.flux,
                    t_exp,
                    &self.rng,
                    self.options.sampling,
                    x,
                    y,
                    self.t,
                );
            }
        }
        if let Some(filter) = &self.hot_filter {
            filter.apply_counts(&mut self.tape_scratch);
        }
        let mut frame = Bitmap::zeros(w, h);
        for y in 0..h {
            for x in 0..w {
                if self.tape_scratch[y * w + x] > 0 && mask.get(x, y) {
                    frame.set(x, y, true);
                }
            }
        }

        self.tally
            .accumulate(&frame, &mask, Some(&self.tape_scratch))
            .expect("runner dimensions are consistent");
        if self.options.record_per_frame {
            self.per_frame.push(self.tally.totals());
        }
        self.runtime.step(&frame, &mask)?;
        if let Some(cube) = &mut self.cube {
            cube.push(frame, mask).expect("frame gated by mask");
        }
        self.t += 1;
        Ok(true)
    }

    pub fn finish(mut self) -> Result<PolicyRun, PolicyError> {
        while self.step_frame()? {}
        Ok(PolicyRun {
            cube: self.cube,
            per_frame: self.per_frame,
            tally: self.tally,
        })
    }
}

/// Stream a policy over the whole schedule.
pub fn run_policy(
    flux: &FluxImage,
    schedule: &ExposureSchedule,
    policy: &PolicySpec,
    rng: RngSpec,
) -> Result<PolicyRun, PolicyError> {
    PolicyRunner::new(flux, schedule, policy, rng, RunOptions::default())?.finish()
}

pub fn run_policy_with(
    flux: &FluxImage,
    schedule: &ExposureSchedule,
    policy: &PolicySpec,
    rng: RngSpec,
    options: RunOptions,
) -> Result<PolicyRun, PolicyError> {
    PolicyRunner::new(flux, schedule, policy, rng, options)?.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensor::detection_probability;

    fn all_detect_frame(w: usize, h: usize) -> (Bitmap, Bitmap) {
        (Bitmap::ones(w, h), Bitmap::ones(w, h))
    }

    #[test]
    fn kernel_validation_rejects_non_powers_of_two() {
        assert!(matches!(
            ScoreKernel::new(vec![3, 0, 0, 0, 1, 0, 0, 0, 0], 3, 3, vec![1]),
            Err(PolicyError::NonPowerOfTwoWeight(3))
        ));
        assert!(ScoreKernel::new(vec![0; 9], 3, 3, vec![]).is_err());
        assert!(ScoreKernel::new(vec![0; 6], 3, 2, vec![1]).is_err());
        // Negative powers of two are allowed.
        assert!(ScoreKernel::new(vec![-8, 0, 0, 0, 4, 0, 0, 0, 2], 3, 3, vec![1, 1]).is_ok());
    }

    #[test]
    fn score_of_all_disabled_history_is_zero() {
        let frames = vec![(Bitmap::zeros(5, 5), Bitmap::zeros(5, 5)); 4];
        let score = inhibition_score(&frames, &ScoreKernel::center_ring()).unwrap();
        assert!(score.iter().all(|&s| s == 0));
    }

    #[test]
    fn score_saturates_at_plus_minus_64_for_center_ring() {
        // Four all-detection frames: interior score (8 + 8) * 4 = 64.
        let frames = vec![all_detect_frame(7, 7); 4];
        let score = inhibition_score(&frames, &ScoreKernel::center_ring()).unwrap();
        assert_eq!(score[3 * 7 + 3], 64);
        // All enabled, no detections: sign flips.
        let frames = vec![(Bitmap::zeros(7, 7), Bitmap::ones(7, 7)); 4];
        let score = inhibition_score(&frames, &ScoreKernel::center_ring()).unwrap();
        assert_eq!(score[3 * 7 + 3], -64);
    }

    #[test]
    fn single_detection_footprint() {
        // One detection at the center of disabled surroundings, single frame:
        // S(center) = 8, S at 4-neighbors = 1.
        let mut frame = Bitmap::zeros(5, 5);
        frame.set(2, 2, true);
        let mut mask = Bitmap::zeros(5, 5);
        mask.set(2, 2, true);
        let score = inhibition_score(&[(frame, mask)], &ScoreKernel::center_ring()).unwrap();
        assert_eq!(score[2 * 5 + 2], 8);
        assert_eq!(score[2 * 5 + 1], 1);
        assert_eq!(score[2 * 5 + 3], 1);
        assert_eq!(score[1 * 5 + 2], 1);
        assert_eq!(score[3 * 5 + 2], 1);
        assert_eq!(score[0], 0); // outside the 3x3 footprint
    }

    #[test]
    fn policy_none_keeps_every_pixel_enabled() {
        let mut rt = PolicyRuntime::new(&PolicySpec::None, 4, 4).unwrap();
        for _ in 0..10 {
            let mask = rt.next_mask();
            assert_eq!(mask.count_ones(), 16);
            let frame = Bitmap::ones(4, 4);
            rt.step(&frame, &mask).unwrap();
        }
    }

    #[test]
    fn subsample_enables_exactly_one_in_n() {
        let mut rt = PolicyRuntime::new(&PolicySpec::Subsample { n: 10 }, 2, 2).unwrap();
        let mut enabled_frames = 0;
        for t in 0..1000u32 {
            let mask = rt.next_mask();
            let on = mask.count_ones() == 4;
            assert_eq!(on, t % 10 == 0);
            if on {
                enabled_frames += 1;
            }
            rt.step(&Bitmap::zeros(2, 2), &mask).unwrap();
        }
        assert_eq!(enabled_frames, 100);
    }

    #[test]
    fn score_trigger_disables_for_exactly_tau_h_frames() {
        // P_cr with eta = 12: an interior pixel of an all-detection frame
        // scores 16 > 12 immediately and disables for the next 32 frames.
        // Corners score only 8 + 3 = 11 and stay enabled at first.
        let spec = PolicySpec::preset("P_cr").unwrap();
        let mut rt = PolicyRuntime::new(&spec, 5, 5).unwrap();
        let mask0 = rt.next_mask();
        assert_eq!(mask0.count_ones(), 25);
        rt.step(&Bitmap::ones(5, 5), &mask0).unwrap();
        assert!(rt.next_mask().get(0, 0));
        // Frames 1..=32 disabled for the interior pixel, frame 33 enabled.
        for _ in 1..=32 {
            let mask = rt.next_mask();
            assert!(!mask.get(2, 2));
            rt.step(&Bitmap::zeros(5, 5), &mask).unwrap();
        }
        assert!(rt.next_mask().get(2, 2));
    }

    #[test]
    fn four_frame_accumulation_reaches_64() {
        // The documented example: all-enabled all-detection history of 4
        // frames scores 64 at the interior with P_cr. Use eta = 63 so only
        // the fully accumulated score triggers.
        let spec = PolicySpec::Score {
            kernel: ScoreKernel::center_ring(),
            eta: 63,
            tau_h: 32,
        };
        let mut rt = PolicyRuntime::new(&spec, 7, 7).unwrap();
        for _ in 0..3 {
            let mask = rt.next_mask();
            assert!(mask.get(3, 3), "interior must stay enabled before 4 frames");
            rt.step(&Bitmap::ones(7, 7), &mask).unwrap();
        }
        let mask = rt.next_mask();
        assert!(mask.get(3, 3));
        rt.step(&Bitmap::ones(7, 7), &mask).unwrap();
        // Score hits 64 > 63 at the 4th frame; interior disables.
        assert!(!rt.next_mask().get(3, 3));
    }

    #[test]
    fn deadtime_zero_equals_clocked_recharge() {
        let flux = FluxImage::uniform(16, 16, 1.3).unwrap();
        let schedule = ExposureSchedule::uniform(1.0, 64).unwrap();
        let rng = RngSpec::new(31);
        let a = run_policy(&flux, &schedule, &PolicySpec::DeadTime { tau_d: 0 }, rng).unwrap();
        let b = run_policy(&flux, &schedule, &PolicySpec::ClockedRecharge, rng).unwrap();
        assert_eq!(a.cube.unwrap(), b.cube.unwrap());
    }

    #[test]
    fn zero_kernel_score_policy_degenerates_to_none() {
        let kernel = ScoreKernel::new(vec![0; 9], 3, 3, vec![1, 1, 1, 1]).unwrap();
        let spec = PolicySpec::Score {
            kernel,
            eta: 12,
            tau_h: 8,
        };
        let flux = FluxImage::uniform(12, 12, 2.0).unwrap();
        let schedule = ExposureSchedule::uniform(1.0, 50).unwrap();
        let rng = RngSpec::new(32);
        let a = run_policy(&flux, &schedule, &spec, rng).unwrap();
        let b = run_policy(&flux, &schedule, &PolicySpec::None, rng).unwrap();
        assert_eq!(a.cube.unwrap(), b.cube.unwrap());
    }

    #[test]
    fn detections_never_escape_the_mask() {
        let flux = FluxImage::uniform(16, 16, 5.0).unwrap();
        let schedule = ExposureSchedule::uniform(1.0, 100).unwrap();
        let run = run_policy(
            &flux,
            &schedule,
            &PolicySpec::preset("P_avg").unwrap(),
            RngSpec::new(33),
        )
        .unwrap();
        let cube = run.cube.unwrap();
        for t in 0..cube.num_frames() {
            assert!(cube.frame(t).subset_of(cube.mask(t)));
        }
    }

    #[test]
    fn edge_compound_decision_table() {
        // Preset thresholds: eta1=-12, eta2=12, eta3=4, eta4=16.
        let d = |s1, s2| edge_compound_decision(s1, s2, -12, 12, 4, 16);
        assert!(!d(0, 3)); // flat but dim: no inhibition
        assert!(d(0, 5)); // flat and bright enough
        assert!(d(-20, 20)); // excessive average inhibits regardless of S1
        assert!(!d(30, 10)); // strong edge is preserved
    }

    #[test]
    fn mean_detections_match_rate_none_policy() {
        // H = 1, 1000 frames, 100x100 pixels: cumulative D/pixel within the
        // 3-sigma band around 632.1.
        let flux = FluxImage::uniform(100, 100, 1.0).unwrap();
        let schedule = ExposureSchedule::uniform(1.0, 1000).unwrap();
        let run = run_policy_with(
            &flux,
            &schedule,
            &PolicySpec::None,
            RngSpec::new(34),
            RunOptions {
                record_cube: false,
                ..Default::default()
            },
        )
        .unwrap();
        let d_per_pix = run.tally.totals().detections as f64 / 1e4;
        assert!((d_per_pix - 632.12).abs() < 1.5, "d_per_pix={d_per_pix}");
        // Measurements are exhaustive for the none policy.
        assert_eq!(run.tally.totals().measurements, 1000 * 10_000);
    }

    #[test]
    fn subsample_scaling_of_detections() {
        let flux = FluxImage::uniform(100, 100, 1.0).unwrap();
        let schedule = ExposureSchedule::uniform(1.0, 1000).unwrap();
        let run = run_policy_with(
            &flux,
            &schedule,
            &PolicySpec::Subsample { n: 10 },
            RngSpec::new(35),
            RunOptions {
                record_cube: false,
                ..Default::default()
            },
        )
        .unwrap();
        let totals = run.tally.totals();
        assert_eq!(totals.measurements, 100 * 10_000); // W/pixel = 100 exactly
        let d_per_pix = totals.detections as f64 / 1e4;
        assert!((d_per_pix - 63.2).abs() < 1.0, "d_per_pix={d_per_pix}");
        let y = detection_probability(1.0);
        let i_f = totals.i_f();
        // 9 of 10 arrival frames are dropped.
        assert!((i_f - 0.9).abs() < 0.01, "i_f={i_f}");
        assert!(y > 0.0);
    }

    #[test]
    fn bright_uniform_scene_duty_cycle_collapses_under_p_cr() {
        let flux = FluxImage::uniform(32, 32, 10.0).unwrap();
        let schedule = ExposureSchedule::uniform(1.0, 300).unwrap();
        let run = run_policy_with(
            &flux,
            &schedule,
            &PolicySpec::preset("P_cr").unwrap(),
            RngSpec::new(36),
            RunOptions {
                record_cube: false,
                ..Default::default()
            },
        )
        .unwrap();
        let totals = run.tally.totals();
        let w_frac = totals.measurements as f64 / (300.0 * 1024.0);
        assert!(w_frac < 0.2, "w_frac={w_frac}");
    }

    #[test]
    fn causality_masks_depend_only_on_the_past() {
        let flux = FluxImage::uniform(12, 12, 1.5).unwrap();
        let schedule = ExposureSchedule::uniform(1.0, 40).unwrap();
        let spec = PolicySpec::preset("P_avg").unwrap();
        let rng = RngSpec::new(37);
        let full = run_policy(&flux, &schedule, &spec, rng).unwrap();
        let full_cube = full.cube.unwrap();
        // Replaying any prefix reproduces the same masks.
        for cut in [1usize, 7, 23] {
            let prefix_schedule = ExposureSchedule::uniform(1.0, cut).unwrap();
            let partial = run_policy(&flux, &prefix_schedule, &spec, rng).unwrap();
            let partial_cube = partial.cube.unwrap();
            for t in 0..cut {
                assert_eq!(partial_cube.mask(t), full_cube.mask(t));
                assert_eq!(partial_cube.frame(t), full_cube.frame(t));
            }
        }
    }

    #[test]
    fn runs_are_bit_identical_for_equal_seeds() {
        let flux = FluxImage::from_fn(24, 24, |x, y| 0.02 + 0.1 * ((x + y) % 5) as f64).unwrap();
        let schedule = ExposureSchedule::uniform(1.0, 80).unwrap();
        let spec = PolicySpec::preset("P_cr").unwrap();
        let a = run_policy(&flux, &schedule, &spec, RngSpec::new(38)).unwrap();
        let b = run_policy(&flux, &schedule, &spec, RngSpec::new(38)).unwrap();
        assert_eq!(a.cube.unwrap(), b.cube.unwrap());
        assert_eq!(a.per_frame, b.per_frame);
    }

    #[test]
    fn monotone_aggressiveness_in_eta_and_tau_h() {
        // Shared arrival tape: the same seed drives every arm, so arrivals
        // are identical and only the masks differ.
        let flux = FluxImage::from_fn(32, 32, |x, y| {
            0.2 + 3.0 * ((x as f64 / 31.0) * (y as f64 / 31.0))
        })
        .unwrap();
        let schedule = ExposureSchedule::uniform(1.0, 200).unwrap();
        let rng = RngSpec::new(39);
        let opts = RunOptions {
            record_cube: false,
            ..Default::default()
        };

        let mut last_inhibited = 0u64;
        for eta in [24, 12, 6, 2] {
            let spec = PolicySpec::Score {
                kernel: ScoreKernel::center_ring(),
                eta,
                tau_h: 16,
            };
            let run = run_policy_with(&flux, &schedule, &spec, rng, opts).unwrap();
            let inhibited = run.tally.totals().inhibited_mask;
            assert!(
                inhibited >= last_inhibited,
                "eta={eta}: inhibited {inhibited} < previous {last_inhibited}"
            );
            last_inhibited = inhibited;
        }

        let mut last_inhibited = 0u64;
        for tau_h in [4, 8, 16, 32] {
            let spec = PolicySpec::Score {
                kernel: ScoreKernel::center_ring(),
                eta: 12,
                tau_h,
            };
            let run = run_policy_with(&flux, &schedule, &spec, rng, opts).unwrap();
            let inhibited = run.tally.totals().inhibited_mask;
            assert!(
                inhibited >= last_inhibited,
                "tau_h={tau_h}: inhibited {inhibited} < previous {last_inhibited}"
            );
            last_inhibited = inhibited;
        }
    }

    #[test]
    fn lookahead_spec_is_rejected_by_the_frame_stepper() {
        let spec = PolicySpec::SaturationLookahead {
            schedule: crate::bracket::BracketSchedule::fibonacci_lookahead(),
        };
        assert!(matches!(
            PolicyRuntime::new(&spec, 4, 4),
            Err(PolicyError::LookaheadNotFrameClocked)
        ));
    }

    #[test]
    fn unknown_preset_is_an_error() {
        assert!(matches!(
            PolicySpec::preset("P_zz"),
            Err(PolicyError::UnknownPreset(_))
        ));
    }
}
