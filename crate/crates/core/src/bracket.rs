//! Exposure-bracket schedules, saturation look-ahead inhibition, SNR^2
//! weighted HDR merging, and the bracket MLE with its feasible-sequence LUT.

use crate::metrics::snr_h;
use crate::rng::DrawStream;
use crate::sensor::{clamp_rate, detection_probability, exposure_from_rate};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum BracketError {
    #[error("cycle exposure times must be strictly increasing")]
    NonIncreasingTimes,
    #[error("cycle repeats must be at least 1")]
    ZeroRepeats,
    #[error("threshold {d} out of range for cycle with {w} repeats (need 0 < d <= W)")]
    BadThreshold { d: u32, w: u32 },
    #[error("expected {want} thresholds for {cycles} cycles, got {got}")]
    ThresholdCountMismatch {
        want: usize,
        got: usize,
        cycles: usize,
    },
    #[error("at least one cycle must be enabled")]
    AllInhibited,
    #[error("LUT enumeration supports at most 16 cycles (got {0})")]
    TooManyCycles(usize),
    #[error("observation shape does not match the schedule")]
    ObservationMismatch,
}

/// One bracket cycle: `repeats` frames of identical exposure time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BracketCycle {
    /// Exposure time in units of the unit frame.
    pub exposure: f64,
    pub repeats: u32,
}

/// A bracket pass: cycles with strictly increasing exposure times, plus
/// per-cycle saturation thresholds. When cycle i detects at least d_i
/// photons, every remaining cycle of the pass is inhibited; the inhibition
/// status resets at the pass boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct BracketSchedule {
    cycles: Vec<BracketCycle>,
    thresholds: Vec<u32>,
}

impl BracketSchedule {
    pub fn new(cycles: Vec<BracketCycle>, thresholds: Vec<u32>) -> Result<Self, BracketError> {
        if cycles.is_empty() {
            return Err(BracketError::AllInhibited);
        }
        for pair in cycles.windows(2) {
            if pair[1].exposure <= pair[0].exposure {
                return Err(BracketError::NonIncreasingTimes);
            }
        }
        if cycles.iter().any(|c| c.repeats == 0) {
            return Err(BracketError::ZeroRepeats);
        }
        if thresholds.len() != cycles.len() - 1 {
            return Err(BracketError::ThresholdCountMismatch {
                want: cycles.len() - 1,
                got: thresholds.len(),
                cycles: cycles.len(),
            });
        }
        for (i, &d) in thresholds.iter().enumerate() {
            let w = cycles[i].repeats;
            if d == 0 || d > w {
                return Err(BracketError::BadThreshold { d, w });
            }
        }
        Ok(Self { cycles, thresholds })
    }

    /// Geometric bracket: `count` cycles with exposures growing by `ratio`,
    /// `repeats` frames each, and one common threshold between cycles.
    pub fn geometric(
        t1: f64,
        ratio: f64,
        count: usize,
        repeats: u32,
        threshold: u32,
    ) -> Result<Self, BracketError> {
        let cycles = (0..count)
            .map(|i| BracketCycle {
                exposure: t1 * ratio.powi(i as i32),
                repeats,
            })
            .collect();
        Self::new(cycles, vec![threshold; count.saturating_sub(1)])
    }

    /// Fibonacci exposure sequence {1,1,2,3,5,8,13,21} with the length-6
    /// inhibit thresholds [2,1,1,1,1,1]: the two unit exposures merge into
    /// one 2-repeat cycle (7 unique times, 6 inter-time decisions).
    pub fn fibonacci_lookahead() -> Self {
        let mut cycles = vec![BracketCycle {
            exposure: 1.0,
            repeats: 2,
        }];
        for t in [2.0, 3.0, 5.0, 8.0, 13.0, 21.0] {
            cycles.push(BracketCycle {
                exposure: t,
                repeats: 1,
            });
        }
        Self::new(cycles, vec![2, 1, 1, 1, 1, 1]).expect("static schedule is valid")
    }

    pub fn cycles(&self) -> &[BracketCycle] {
        &self.cycles
    }

    pub fn thresholds(&self) -> &[u32] {
        &self.thresholds
    }

    pub fn num_cycles(&self) -> usize {
        self.cycles.len()
    }

    /// Threshold applied after cycle `i`, if any.
    pub fn threshold_after(&self, i: usize) -> Option<u32> {
        self.thresholds.get(i).copied()
    }

    pub fn total_frames(&self) -> u32 {
        self.cycles.iter().map(|c| c.repeats).sum()
    }
}

/// Per-cycle detection counts and enabled flags for one pass at one pixel.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BracketObservation {
    pub counts: Vec<u32>,
    pub enabled: Vec<bool>,
}

impl BracketObservation {
    /// Compact code, one token per cycle: the detection count, or `x` for an
    /// inhibited cycle.
    pub fn code(&self) -> String {
        self.counts
            .iter()
            .zip(&self.enabled)
            .map(|(&b, &m)| if m { b.to_string() } else { "x".to_string() })
            .collect::<Vec<_>>()
            .join("-")
    }
}

/// Execute one saturation look-ahead pass for a single pixel of flux
/// `flux_px` (photons per unit frame). Cycles run in order; when a cycle's
/// detections reach its threshold all subsequent cycles are inhibited.
pub fn run_lookahead(
    flux_px: f64,
    schedule: &BracketSchedule,
    stream: &mut DrawStream,
) -> BracketObservation {
    let k = schedule.num_cycles();
    let mut counts = vec![0u32; k];
    let mut enabled = vec![false; k];
    let mut inhibited = false;
    for (i, cycle) in schedule.cycles().iter().enumerate() {
        if inhibited {
            break;
        }
        enabled[i] = true;
        let y = detection_probability(flux_px * cycle.exposure);
        for _ in 0..cycle.repeats {
            if stream.bernoulli(y) {
                counts[i] += 1;
            }
        }
        if let Some(d) = schedule.threshold_after(i) {
            if counts[i] >= d {
                inhibited = true;
            }
        }
    }
    BracketObservation { counts, enabled }
}

/// P(Binomial(w, p) >= d).
fn binomial_tail_ge(w: u32, d: u32, p: f64) -> f64 {
    if d == 0 {
        return 1.0;
    }
    if d > w || p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let q = 1.0 - p;
    let ratio = p / q;
    let mut pmf = q.powi(w as i32); // P(X = 0)
    let mut cdf_below = 0.0;
    for k in 0..d {
        cdf_below += pmf;
        // advance to P(X = k+1)
        pmf *= (w - k) as f64 / (k + 1) as f64 * ratio;
    }
    (1.0 - cdf_below).clamp(0.0, 1.0)
}

/// Analytic per-cycle expected detections under look-ahead: cycle i runs with
/// probability prod_{j<i} P(b_j < d_j) and then detects W_i Y_i in
/// expectation. Degenerate p = 1 is handled by the exact trigger probability.
pub fn lookahead_expected_detections_per_cycle(
    flux_px: f64,
    schedule: &BracketSchedule,
) -> Vec<f64> {
    let mut reach = 1.0;
    let mut out = Vec::with_capacity(schedule.num_cycles());
    for (i, cycle) in schedule.cycles().iter().enumerate() {
        let y = detection_probability(flux_px * cycle.exposure);
        out.push(reach * cycle.repeats as f64 * y);
        if let Some(d) = schedule.threshold_after(i) {
            reach *= 1.0 - binomial_tail_ge(cycle.repeats, d, y);
        }
    }
    out
}

/// Total expected detections per pass under look-ahead.
pub fn lookahead_expected_detections(flux_px: f64, schedule: &BracketSchedule) -> f64 {
    lookahead_expected_detections_per_cycle(flux_px, schedule)
        .iter()
        .sum()
}

/// Expected detections per pass for plain bracketing (no thresholds).
pub fn bracket_expected_detections(flux_px: f64, schedule: &BracketSchedule) -> f64 {
    schedule
        .cycles()
        .iter()
        .map(|c| c.repeats as f64 * detection_probability(flux_px * c.exposure))
        .sum()
}

/// One cycle's rate estimate entering an HDR merge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MergeCycle {
    /// Detections / active measurements for this cycle, in [0, 1].
    pub y_hat: f64,
    /// Exposure time in unit frames.
    pub exposure: f64,
    /// Active measurements behind `y_hat`.
    pub measurements: f64,
    pub enabled: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MergedEstimate {
    /// Flux in photons per unit frame.
    pub flux: f64,
    /// Normalized SNR^2 weights per cycle (zeros for disabled cycles).
    pub weights: Vec<f64>,
    /// True when any contributing cycle hit the saturation clamp.
    pub saturated: bool,
}

/// Merge per-cycle rate estimates into one flux estimate, each cycle
/// weighted by its squared exposure-referred SNR evaluated at its own
/// estimated exposure. Cycles at the saturation clamp contribute with the
/// clamped estimate and weight.
pub fn hdr_merge(cycles: &[MergeCycle]) -> Result<MergedEstimate, BracketError> {
    let mut weights = vec![0.0; cycles.len()];
    let mut saturated = false;
    let mut num = 0.0;
    let mut den = 0.0;
    let mut any_enabled = false;
    for (i, c) in cycles.iter().enumerate() {
        if !c.enabled || c.measurements <= 0.0 {
            continue;
        }
        any_enabled = true;
        let (y, clamped) = clamp_rate(c.y_hat * c.measurements, c.measurements);
        saturated |= clamped;
        let h = exposure_from_rate(y);
        if h <= 0.0 {
            continue; // zero detections carry no SNR weight
        }
        let w = snr_h(h, c.measurements).expect("h > 0").powi(2);
        weights[i] = w;
        num += w * (h / c.exposure);
        den += w;
    }
    if !any_enabled {
        return Err(BracketError::AllInhibited);
    }
    let flux = if den > 0.0 { num / den } else { 0.0 };
    if den > 0.0 {
        for w in &mut weights {
            *w /= den;
        }
    }
    Ok(MergedEstimate {
        flux,
        weights,
        saturated,
    })
}

/// Uniform MLE search grid over [0, max_flux] photons per unit frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleGrid {
    pub max_flux: f64,
    pub points: usize,
}

impl Default for MleGrid {
    fn default() -> Self {
        Self {
            max_flux: 10.0,
            points: 2000,
        }
    }
}

impl MleGrid {
    pub fn value(&self, k: usize) -> f64 {
        self.max_flux * k as f64 / (self.points - 1) as f64
    }

    pub fn step(&self) -> f64 {
        self.max_flux / (self.points - 1) as f64
    }
}

/// Log-likelihood of flux `phi` for one observation; inhibited cycles
/// contribute factor 1.
fn log_likelihood(phi: f64, obs: &BracketObservation, schedule: &BracketSchedule) -> f64 {
    let mut ll = 0.0;
    for (i, cycle) in schedule.cycles().iter().enumerate() {
        if !obs.enabled[i] {
            continue;
        }
        let b = obs.counts[i] as f64;
        let w = cycle.repeats as f64;
        let h = phi * cycle.exposure;
        // ln p with p = 1 - e^{-h}; ln(1-p) = -h exactly.
        if b > 0.0 {
            let p = detection_probability(h);
            if p <= 0.0 {
                return f64::NEG_INFINITY;
            }
            ll += b * p.ln();
        }
        ll += (w - b) * (-h);
    }
    ll
}

/// Maximum-likelihood flux by exhaustive search over the uniform grid, ties
/// broken toward the smaller flux.
pub fn mle_flux(
    obs: &BracketObservation,
    schedule: &BracketSchedule,
    grid: &MleGrid,
) -> Result<f64, BracketError> {
    if obs.counts.len() != schedule.num_cycles() || obs.enabled.len() != schedule.num_cycles() {
        return Err(BracketError::ObservationMismatch);
    }
    if !obs.enabled.iter().any(|&m| m) {
        return Err(BracketError::AllInhibited);
    }
    let mut best_phi = 0.0;
    let mut best_ll = f64::NEG_INFINITY;
    for k in 0..grid.points {
        let phi = grid.value(k);
        let ll = log_likelihood(phi, obs, schedule);
        if ll > best_ll {
            best_ll = ll;
            best_phi = phi;
        }
    }
    Ok(best_phi)
}

/// LUT mapping every policy-reachable observation to its MLE flux.
#[derive(Debug, Clone)]
pub struct BracketLut {
    entries: Vec<(BracketObservation, f64)>,
}

impl BracketLut {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(BracketObservation, f64)] {
        &self.entries
    }

    pub fn lookup(&self, obs: &BracketObservation) -> Option<f64> {
        self.entries
            .iter()
            .find(|(o, _)| o == obs)
            .map(|&(_, phi)| phi)
    }

    /// CSV export; the header comments document the observation encoding.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("# observation_code: per-cycle detection counts joined by '-',\n");
        out.push_str("# with 'x' for a cycle inhibited by the look-ahead policy.\n");
        out.push_str("observation_code,flux_estimate\n");
        for (obs, phi) in &self.entries {
            writeln!(out, "{},{:.9}", obs.code(), phi).expect("string write");
        }
        out
    }
}

/// Enumerate all observations reachable under the schedule's thresholds by
/// walking the decision tree (not brute force over arrival patterns), and
/// compute the MLE for each.
pub fn build_lut(schedule: &BracketSchedule, grid: &MleGrid) -> Result<BracketLut, BracketError> {
    if schedule.num_cycles() > 16 {
        return Err(BracketError::TooManyCycles(schedule.num_cycles()));
    }
    let k = schedule.num_cycles();
    let mut entries = Vec::new();
    let mut counts = vec![0u32; k];
    let mut enabled = vec![false; k];

    fn visit(
        i: usize,
        schedule: &BracketSchedule,
        counts: &mut Vec<u32>,
        enabled: &mut Vec<bool>,
        out: &mut Vec<BracketObservation>,
    ) {
        if i == schedule.num_cycles() {
            out.push(BracketObservation {
                counts: counts.clone(),
                enabled: enabled.clone(),
            });
            return;
        }
        enabled[i] = true;
        let w = schedule.cycles()[i].repeats;
        for b in 0..=w {
            counts[i] = b;
            let triggered = schedule.threshold_after(i).is_some_and(|d| b >= d);
            if triggered {
                // Remaining cycles inhibited; terminal observation.
                out.push(BracketObservation {
                    counts: counts.clone(),
                    enabled: enabled.clone(),
                });
            } else {
                visit(i + 1, schedule, counts, enabled, out);
            }
        }
        counts[i] = 0;
        enabled[i] = false;
    }

    let mut observations = Vec::new();
    visit(0, schedule, &mut counts, &mut enabled, &mut observations);
    for obs in observations {
        let phi = mle_flux(&obs, schedule, grid)?;
        entries.push((obs, phi));
    }
    Ok(BracketLut { entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngSpec;
    use approx::assert_relative_eq;
    use std::collections::HashSet;

    fn hdr5_schedule() -> BracketSchedule {
        // 5 cycles spaced x5, 10 measurements each, thresholds 6.
        BracketSchedule::geometric(1.0, 5.0, 5, 10, 6).unwrap()
    }

    #[test]
    fn schedule_validation() {
        assert!(BracketSchedule::new(
            vec![
                BracketCycle {
                    exposure: 1.0,
                    repeats: 1
                },
                BracketCycle {
                    exposure: 1.0,
                    repeats: 1
                }
            ],
            vec![1],
        )
        .is_err());
        assert!(matches!(
            BracketSchedule::new(
                vec![
                    BracketCycle {
                        exposure: 1.0,
                        repeats: 2
                    },
                    BracketCycle {
                        exposure: 2.0,
                        repeats: 2
                    }
                ],
                vec![3],
            ),
            Err(BracketError::BadThreshold { .. })
        ));
        assert!(matches!(
            BracketSchedule::new(
                vec![BracketCycle {
                    exposure: 1.0,
                    repeats: 1
                }],
                vec![1]
            ),
            Err(BracketError::ThresholdCountMismatch { .. })
        ));
    }

    #[test]
    fn lookahead_dark_pixel_enables_everything() {
        let schedule = hdr5_schedule();
        let mut stream = RngSpec::new(1).stream(0, 0, 0);
        let obs = run_lookahead(0.0, &schedule, &mut stream);
        assert!(obs.enabled.iter().all(|&m| m));
        assert!(obs.counts.iter().all(|&b| b == 0));
    }

    #[test]
    fn threshold_trips_inhibit_the_rest_of_the_pass() {
        // [d1, d2] = [3, 3]: 3 detections in cycle 1 inhibit cycle 2 onward.
        let schedule = BracketSchedule::new(
            vec![
                BracketCycle {
                    exposure: 1.0,
                    repeats: 5,
                },
                BracketCycle {
                    exposure: 2.0,
                    repeats: 5,
                },
                BracketCycle {
                    exposure: 4.0,
                    repeats: 5,
                },
            ],
            vec![3, 3],
        )
        .unwrap();
        // Bright pixel: saturating flux always trips the first threshold.
        let mut stream = RngSpec::new(2).stream(0, 0, 0);
        let obs = run_lookahead(50.0, &schedule, &mut stream);
        assert!(obs.counts[0] >= 3);
        assert!(obs.enabled[0]);
        assert!(!obs.enabled[1] && !obs.enabled[2]);
        assert_eq!(obs.counts[1], 0);
    }

    #[test]
    fn threshold_rate_from_saturation_target() {
        // Y1 = 1 - e^{0.2 ln(0.01)} = 0.602 = 6/10 for x5 spacing and
        // next-cycle saturation at Y2 = 0.99.
        let y1 = 1.0 - (0.2f64 * (0.01f64).ln()).exp();
        assert_relative_eq!(y1, 0.602, epsilon = 1e-3);
        assert_relative_eq!(y1, 6.0 / 10.0, epsilon = 5e-3);
    }

    #[test]
    fn lookahead_never_detects_more_than_plain_bracketing_on_shared_tape() {
        let schedule = hdr5_schedule();
        for flux in [0.01, 0.1, 1.0, 5.0] {
            for seed in 0..50u64 {
                let mut s1 = RngSpec::new(seed).stream(0, 0, 0);
                let obs = run_lookahead(flux, &schedule, &mut s1);
                // Replay the identical arrival tape without any thresholds.
                let mut s2 = RngSpec::new(seed).stream(0, 0, 0);
                let mut full = 0u32;
                let mut gated = 0u32;
                for (i, c) in schedule.cycles().iter().enumerate() {
                    let y = detection_probability(flux * c.exposure);
                    for _ in 0..c.repeats {
                        let hit = s2.bernoulli(y);
                        full += u32::from(hit);
                        if obs.enabled[i] {
                            gated += u32::from(hit);
                        }
                    }
                }
                let detected: u32 = obs.counts.iter().sum();
                assert_eq!(detected, gated);
                assert!(detected <= full);
            }
        }
    }

    #[test]
    fn analytic_expected_detections_matches_monte_carlo() {
        let schedule = hdr5_schedule();
        let rng = RngSpec::new(3);
        for &flux in &[0.02, 0.2, 1.5] {
            let runs = 20_000u32;
            let mut total = 0u64;
            for r in 0..runs {
                let mut stream = rng.stream(r, 0, 0);
                let obs = run_lookahead(flux, &schedule, &mut stream);
                total += obs.counts.iter().map(|&b| b as u64).sum::<u64>();
            }
            let mc = total as f64 / runs as f64;
            let analytic = lookahead_expected_detections(flux, &schedule);
            assert!(
                (mc - analytic).abs() < 0.05 * analytic.max(1.0),
                "flux={flux} mc={mc} analytic={analytic}"
            );
        }
    }

    #[test]
    fn merge_single_cycle_is_identity() {
        let cycles = [MergeCycle {
            y_hat: 0.4,
            exposure: 2.0,
            measurements: 50.0,
            enabled: true,
        }];
        let merged = hdr_merge(&cycles).unwrap();
        let expect = exposure_from_rate(0.4) / 2.0;
        assert_relative_eq!(merged.flux, expect, epsilon = 1e-12);
        assert_relative_eq!(merged.weights[0], 1.0, epsilon = 1e-12);
        assert!(!merged.saturated);
    }

    #[test]
    fn merge_is_exact_on_noiseless_inputs() {
        let phi = 0.31;
        let cycles: Vec<MergeCycle> = [1.0, 3.0, 9.0]
            .iter()
            .map(|&t| MergeCycle {
                y_hat: detection_probability(phi * t),
                exposure: t,
                measurements: 1e6,
                enabled: true,
            })
            .collect();
        let merged = hdr_merge(&cycles).unwrap();
        assert_relative_eq!(merged.flux, phi, max_relative = 1e-9);
    }

    #[test]
    fn merge_weights_match_bracket_accounting_row() {
        // phi = 0.10 phi2 observed at T = {0.1, 1, 10}/phi2 with W = 10:
        // normalized snr^2 weights {0.0145, 0.1384, 0.8471}; the longest
        // exposure dominates.
        let phi = 0.10;
        let cycles: Vec<MergeCycle> = [0.1, 1.0, 10.0]
            .iter()
            .map(|&t| MergeCycle {
                y_hat: detection_probability(phi * t),
                exposure: t,
                measurements: 10.0,
                enabled: true,
            })
            .collect();
        let merged = hdr_merge(&cycles).unwrap();
        assert_relative_eq!(merged.weights[0], 0.014_483, epsilon = 1e-4);
        assert_relative_eq!(merged.weights[1], 0.138_398, epsilon = 1e-4);
        assert_relative_eq!(merged.weights[2], 0.847_119, epsilon = 1e-4);
        assert!(merged.weights[2] > merged.weights[1] && merged.weights[1] > merged.weights[0]);
        // Combined SNR of the row: sqrt(sum snr^2) = 2.62.
        let total: f64 = cycles
            .iter()
            .map(|c| snr_h(phi * c.exposure, 10.0).unwrap().powi(2))
            .sum();
        assert_relative_eq!(total.sqrt(), 2.62, epsilon = 5e-3);
    }

    #[test]
    fn merge_consistency_two_cycles_monte_carlo() {
        // Two cycles, same true flux, W = 1e4: bias below 2% at phi*T2 = 1.
        let phi = 0.5;
        let times = [1.0, 2.0];
        let w = 10_000u32;
        let rng = RngSpec::new(4);
        let reps = 300;
        let mut sum = 0.0;
        for rep in 0..reps {
            let cycles: Vec<MergeCycle> = times
                .iter()
                .enumerate()
                .map(|(i, &t)| {
                    let y = detection_probability(phi * t);
                    let mut stream = rng.stream(rep, i as u32, 0);
                    let mut d = 0u32;
                    for _ in 0..w {
                        d += u32::from(stream.bernoulli(y));
                    }
                    MergeCycle {
                        y_hat: d as f64 / w as f64,
                        exposure: t,
                        measurements: w as f64,
                        enabled: true,
                    }
                })
                .collect();
            sum += hdr_merge(&cycles).unwrap().flux;
        }
        let mean = sum / reps as f64;
        assert!((mean - phi).abs() / phi < 0.02, "mean={mean}");
    }

    #[test]
    fn merge_with_all_cycles_inhibited_is_an_error() {
        let cycles = [MergeCycle {
            y_hat: 0.5,
            exposure: 1.0,
            measurements: 10.0,
            enabled: false,
        }];
        assert!(matches!(
            hdr_merge(&cycles),
            Err(BracketError::AllInhibited)
        ));
    }

    #[test]
    fn mle_all_zero_observation_sits_at_grid_origin() {
        let schedule = hdr5_schedule();
        let obs = BracketObservation {
            counts: vec![0; 5],
            enabled: vec![true; 5],
        };
        let grid = MleGrid::default();
        assert_eq!(mle_flux(&obs, &schedule, &grid).unwrap(), 0.0);
    }

    #[test]
    fn mle_single_exposure_matches_closed_form() {
        // Single cycle of W repeats at T = 1: MLE = -ln(1 - D/W).
        let grid = MleGrid::default();
        for w in 1..=20u32 {
            let schedule = BracketSchedule::new(
                vec![BracketCycle {
                    exposure: 1.0,
                    repeats: w,
                }],
                vec![],
            )
            .unwrap();
            for d in 0..w {
                let obs = BracketObservation {
                    counts: vec![d],
                    enabled: vec![true],
                };
                let phi = mle_flux(&obs, &schedule, &grid).unwrap();
                let analytic = exposure_from_rate(d as f64 / w as f64);
                assert!(
                    (phi - analytic).abs() <= grid.step() + 1e-12,
                    "w={w} d={d} phi={phi} analytic={analytic}"
                );
            }
            // Saturated observation pins to the top of the grid.
            let obs = BracketObservation {
                counts: vec![w],
                enabled: vec![true],
            };
            assert_eq!(mle_flux(&obs, &schedule, &grid).unwrap(), grid.max_flux);
        }
    }

    #[test]
    fn mle_rejects_all_inhibited() {
        let schedule = hdr5_schedule();
        let obs = BracketObservation {
            counts: vec![0; 5],
            enabled: vec![false; 5],
        };
        assert!(matches!(
            mle_flux(&obs, &schedule, &MleGrid::default()),
            Err(BracketError::AllInhibited)
        ));
    }

    #[test]
    fn lut_single_cycle_has_two_entries() {
        let schedule = BracketSchedule::new(
            vec![BracketCycle {
                exposure: 1.0,
                repeats: 1,
            }],
            vec![],
        )
        .unwrap();
        let lut = build_lut(&schedule, &MleGrid::default()).unwrap();
        assert_eq!(lut.len(), 2);
    }

    #[test]
    fn fibonacci_lut_has_fifteen_entries() {
        let schedule = BracketSchedule::fibonacci_lookahead();
        let grid = MleGrid::default();
        let lut = build_lut(&schedule, &grid).unwrap();
        assert_eq!(lut.len(), 15);
        // Every entry agrees exactly with a direct MLE evaluation.
        for (obs, phi) in lut.entries() {
            assert_eq!(mle_flux(obs, &schedule, &grid).unwrap(), *phi);
        }
        let csv = lut.to_csv();
        assert!(csv.contains("observation_code,flux_estimate"));
        assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 16);
    }

    #[test]
    fn lut_matches_brute_force_enumeration_of_arrival_patterns() {
        // Two cycles, threshold after cycle 1; enumerate every arrival
        // pattern, gate it through the policy, and collect distinct
        // observations.
        let schedule = BracketSchedule::new(
            vec![
                BracketCycle {
                    exposure: 1.0,
                    repeats: 2,
                },
                BracketCycle {
                    exposure: 3.0,
                    repeats: 2,
                },
            ],
            vec![2],
        )
        .unwrap();
        let lut = build_lut(&schedule, &MleGrid::default()).unwrap();

        let mut seen: HashSet<BracketObservation> = HashSet::new();
        let total_frames = 4;
        for pattern in 0..(1u32 << total_frames) {
            let arrival = |idx: u32| pattern >> idx & 1 == 1;
            let mut counts = vec![0u32; 2];
            let mut enabled = vec![false; 2];
            let mut idx = 0;
            let mut inhibited = false;
            for (i, c) in schedule.cycles().iter().enumerate() {
                if inhibited {
                    break;
                }
                enabled[i] = true;
                for _ in 0..c.repeats {
                    counts[i] += u32::from(arrival(idx));
                    idx += 1;
                }
                if schedule.threshold_after(i).is_some_and(|d| counts[i] >= d) {
                    inhibited = true;
                }
            }
            seen.insert(BracketObservation { counts, enabled });
        }
        assert_eq!(lut.len(), seen.len());
        for (obs, _) in lut.entries() {
            assert!(seen.contains(obs));
        }
    }
}
