//! Closed-form oracle measurement allocations under a detection budget, the
//! generalized per-pixel loss family, and a brute-force validator.
//!
//! For a loss sum_i E_i / W_i constrained by sum_i Y_i W_i = D_T, Lagrange
//! multipliers give W_i = D_T sqrt(E_i / Y_i) / sum_j Y_j sqrt(E_j / Y_j).
//! With E_i = Y_i (1 - Y_i) this is the sqrt(1 - Y) rule for binomial MSE.

use crate::rng::RngSpec;
use crate::sensor::exposure_from_rate;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AllocationError {
    #[error("allocation problem needs at least one pixel")]
    Empty,
    #[error("detection budget must be positive (got {0})")]
    BadBudget(f64),
    #[error("rate {0} is not finite")]
    BadRate(f64),
    #[error("snr tracker exponent must be 1 or 2 (got {0})")]
    BadTrackerExponent(u8),
    #[error("brute force supports at most {max} pixels (got {got})")]
    TooManyPixels { max: usize, got: usize },
    #[error("grid step {step} too coarse: even one step per pixel exceeds the budget {budget}")]
    GridTooCoarse { step: f64, budget: f64 },
    #[error("allocation length {got} does not match rates {want}")]
    LengthMismatch { got: usize, want: usize },
}

/// Image-space loss selector; E_i is the per-pixel normalized loss driven
/// down by averaging W_i measurements.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    /// E = Y(1-Y): binary-rate MSE; allocates toward dim pixels.
    BinomialMse,
    /// E = Y/(1-Y): exposure-referred MSE; allocates toward bright pixels.
    ExposureMse,
    /// E = Y/((1-Y) H^2): relative exposure-referred MSE (maximizes snr_H).
    RelativeExposureMse,
    /// E = snr_{H/W}^{2k} / Y with k in {1, 2}.
    SnrTracker { k: u8 },
}

impl LossKind {
    pub fn label(&self) -> String {
        match self {
            LossKind::BinomialMse => "binomial_mse".into(),
            LossKind::ExposureMse => "exposure_mse".into(),
            LossKind::RelativeExposureMse => "relative_exposure_mse".into(),
            LossKind::SnrTracker { k } => format!("snr_tracker_{k}"),
        }
    }

    /// Per-pixel loss E_i at rate y.
    pub fn e(&self, y: f64) -> f64 {
        match self {
            LossKind::BinomialMse => y * (1.0 - y),
            LossKind::ExposureMse => y / (1.0 - y),
            LossKind::RelativeExposureMse => {
                let h = exposure_from_rate(y);
                y / ((1.0 - y) * h * h)
            }
            LossKind::SnrTracker { k } => {
                // snr_{H/W}^2 = H^2 (1-Y) / Y.
                let h = exposure_from_rate(y);
                let snr2 = h * h * (1.0 - y) / y;
                snr2.powi(*k as i32) / y
            }
        }
    }

    /// Fill value for pixels rounded to zero measurements: zero for the
    /// binary-rate loss, the maximum scene rate for exposure-referred losses.
    fn zero_measurement_fill(&self, max_rate: f64) -> f64 {
        match self {
            LossKind::BinomialMse => 0.0,
            _ => max_rate,
        }
    }
}

pub const RATE_CLAMP_MIN: f64 = 0.01;
pub const RATE_CLAMP_MAX: f64 = 0.99;

/// A detection-budgeted allocation instance. Rates are clamped to
/// [0.01, 0.99] at construction to regularize the diverging allocations.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationProblem {
    rates: Vec<f64>,
    budget: f64,
    loss: LossKind,
}

impl AllocationProblem {
    pub fn new(rates: &[f64], budget: f64, loss: LossKind) -> Result<Self, AllocationError> {
        if rates.is_empty() {
            return Err(AllocationError::Empty);
        }
        if !(budget.is_finite() && budget > 0.0) {
            return Err(AllocationError::BadBudget(budget));
        }
        if let LossKind::SnrTracker { k } = loss {
            if !(1..=2).contains(&k) {
                return Err(AllocationError::BadTrackerExponent(k));
            }
        }
        let mut clamped = Vec::with_capacity(rates.len());
        for &y in rates {
            if !y.is_finite() {
                return Err(AllocationError::BadRate(y));
            }
            clamped.push(y.clamp(RATE_CLAMP_MIN, RATE_CLAMP_MAX));
        }
        Ok(Self {
            rates: clamped,
            budget,
            loss,
        })
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn loss(&self) -> LossKind {
        self.loss
    }

    /// Loss value sum_i E_i / W_i of an allocation.
    pub fn loss_value(&self, w: &[f64]) -> Result<f64, AllocationError> {
        if w.len() != self.rates.len() {
            return Err(AllocationError::LengthMismatch {
                got: w.len(),
                want: self.rates.len(),
            });
        }
        Ok(self
            .rates
            .iter()
            .zip(w)
            .map(|(&y, &wi)| self.loss.e(y) / wi)
            .sum())
    }

    /// Image MSE of an allocation evaluated as the mean of the per-pixel
    /// binary-rate variances Y(1-Y)/W, independent of the loss being
    /// optimized. This is the deterministic evaluation the noise-image
    /// simulation fluctuates around.
    pub fn analytic_rate_mse(&self, w: &[f64]) -> Result<f64, AllocationError> {
        if w.len() != self.rates.len() {
            return Err(AllocationError::LengthMismatch {
                got: w.len(),
                want: self.rates.len(),
            });
        }
        Ok(self
            .rates
            .iter()
            .zip(w)
            .map(|(&y, &wi)| y * (1.0 - y) / wi)
            .sum::<f64>()
            / self.rates.len() as f64)
    }

    /// Uniform allocation spending the same detection budget.
    pub fn uniform_allocation(&self) -> Vec<f64> {
        let w = self.budget / self.rates.iter().sum::<f64>();
        vec![w; self.rates.len()]
    }
}

/// Closed-form optimal measurements per pixel, normalized so that
/// sum_i Y_i W_i equals the detection budget exactly.
pub fn optimal_allocation(problem: &AllocationProblem) -> Result<Vec<f64>, AllocationError> {
    let shape: Vec<f64> = problem
        .rates
        .iter()
        .map(|&y| (problem.loss.e(y) / y).sqrt())
        .collect();
    let denom: f64 = problem.rates.iter().zip(&shape).map(|(&y, &s)| y * s).sum();
    if !(denom.is_finite() && denom > 0.0) {
        return Err(AllocationError::BadRate(denom));
    }
    Ok(shape.iter().map(|&s| problem.budget * s / denom).collect())
}

/// Exhaustive integer-grid minimizer of the loss under the budget, for tiny
/// instances. The independent check on the closed form: enumerate every
/// W = (k_1 g, ..., k_n g) with sum Y_i W_i <= D_T and keep the loss minimum
/// (first in lexicographic order on ties).
pub fn brute_force_allocation(
    problem: &AllocationProblem,
    grid_step: f64,
) -> Result<Vec<f64>, AllocationError> {
    const MAX_PIXELS: usize = 5;
    let n = problem.rates.len();
    if n > MAX_PIXELS {
        return Err(AllocationError::TooManyPixels {
            max: MAX_PIXELS,
            got: n,
        });
    }
    let min_cost: f64 = problem.rates.iter().map(|&y| y * grid_step).sum();
    if min_cost > problem.budget {
        return Err(AllocationError::GridTooCoarse {
            step: grid_step,
            budget: problem.budget,
        });
    }

    let e: Vec<f64> = problem.rates.iter().map(|&y| problem.loss.e(y)).collect();
    let mut best = vec![grid_step; n];
    let mut best_loss = f64::INFINITY;
    let mut current = vec![0.0; n];

    fn recurse(
        i: usize,
        spent: f64,
        partial_loss: f64,
        problem: &AllocationProblem,
        e: &[f64],
        grid_step: f64,
        current: &mut Vec<f64>,
        best: &mut Vec<f64>,
        best_loss: &mut f64,
    ) {
        let n = problem.rates.len();
        if i == n {
            if partial_loss < *best_loss {
                *best_loss = partial_loss;
                best.clone_from(current);
            }
            return;
        }
        // Budget still needed by the remaining pixels at one step each.
        let reserve: f64 = problem.rates[i + 1..].iter().map(|&y| y * grid_step).sum();
        let y = problem.rates[i];
        let max_steps = ((problem.budget - spent - reserve) / (y * grid_step)).floor() as i64;
        for k in 1..=max_steps.max(0) {
            let w = k as f64 * grid_step;
            current[i] = w;
            recurse(
                i + 1,
                spent + y * w,
                partial_loss + e[i] / w,
                problem,
                e,
                grid_step,
                current,
                best,
                best_loss,
            );
        }
        current[i] = 0.0;
    }

    recurse(
        0,
        0.0,
        0.0,
        problem,
        &e,
        grid_step,
        &mut current,
        &mut best,
        &mut best_loss,
    );
    Ok(best)
}

/// Result of simulating an allocation: the noise-corrupted estimate image a
/// sensor with that measurement distribution would produce.
#[derive(Debug, Clone)]
pub struct OracleImage {
    pub estimate: Vec<f64>,
    /// Allocations rounded half-up for simulation.
    pub rounded_measurements: Vec<u32>,
    /// Budget actually consumed by the rounded allocation.
    pub detections_used: f64,
}

/// Simulate the estimate image an allocation would produce: per-pixel
/// Gaussian noise with variance Y(1-Y)/W added to the reference rate and
/// clipped to [0, 1]. Allocations are rounded half-up; pixels rounded to
/// zero take the loss-specific fill value.
pub fn oracle_noise_image(
    reference_rates: &[f64],
    allocation: &[f64],
    loss: LossKind,
    rng: &RngSpec,
) -> Result<OracleImage, AllocationError> {
    if allocation.len() != reference_rates.len() {
        return Err(AllocationError::LengthMismatch {
            got: allocation.len(),
            want: reference_rates.len(),
        });
    }
    let max_rate = reference_rates.iter().copied().fold(0.0f64, f64::max);
    let mut estimate = Vec::with_capacity(reference_rates.len());
    let mut rounded = Vec::with_capacity(reference_rates.len());
    let mut used = 0.0;
    for (i, (&y, &w)) in reference_rates.iter().zip(allocation).enumerate() {
        let wi = (w + 0.5).floor().max(0.0) as u32;
        rounded.push(wi);
        if wi == 0 {
            estimate.push(loss.zero_measurement_fill(max_rate));
            continue;
        }
        used += y * wi as f64;
        let sigma = (y * (1.0 - y) / wi as f64).sqrt();
        let z = rng.stream(i as u32, 0, 0).normal();
        estimate.push((y + sigma * z).clamp(0.0, 1.0));
    }
    Ok(OracleImage {
        estimate,
        rounded_measurements: rounded,
        detections_used: used,
    })
}

/// CSV export of an allocation map: `pixel,rate,measurements`.
pub fn allocation_csv(rates: &[f64], allocation: &[f64]) -> String {
    let mut out = String::from("pixel,rate,measurements\n");
    for (i, (&y, &w)) in rates.iter().zip(allocation).enumerate() {
        writeln!(out, "{i},{y:.6},{w:.6}").expect("string write");
    }
    out
}
