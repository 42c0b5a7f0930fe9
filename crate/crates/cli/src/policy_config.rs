//! PolicySpec construction from `[policy]` config sections.

use crate::config::Section;
use crate::error::CliError;
use spadsim_core::bracket::{BracketCycle, BracketSchedule};
use spadsim_core::policy::{PolicySpec, ScoreKernel};

fn kernel_by_name(name: &str) -> Result<ScoreKernel, CliError> {
    Ok(match name {
        "center_ring" => ScoreKernel::center_ring(),
        "laplacian" => ScoreKernel::laplacian(),
        "average" => ScoreKernel::average(),
        "single_pixel" => ScoreKernel::single_pixel(),
        other => {
            return Err(CliError::config(format!(
                "unknown kernel '{other}' (expected center_ring, laplacian, average, single_pixel)"
            )))
        }
    })
}

/// Bracket schedule from a `[bracket]`-style section:
/// either `preset = fibonacci`, or `times`/`repeats`/`thresholds` lists.
pub fn bracket_from_section(section: &Section) -> Result<BracketSchedule, CliError> {
    if let Some(preset) = section.get("preset") {
        return match preset {
            "fibonacci" => Ok(BracketSchedule::fibonacci_lookahead()),
            "hdr5" => Ok(BracketSchedule::geometric(1.0, 5.0, 5, 10, 6)?),
            other => Err(CliError::config(format!(
                "unknown bracket preset '{other}' (expected fibonacci, hdr5)"
            ))),
        };
    }
    let times = section
        .list_f64("times")?
        .ok_or_else(|| CliError::config("[bracket] needs 'times' or 'preset'"))?;
    let repeats = section
        .list_u32("repeats")?
        .unwrap_or_else(|| vec![1; times.len()]);
    if repeats.len() != times.len() {
        return Err(CliError::config("[bracket] repeats must match times"));
    }
    let thresholds = section.list_u32("thresholds")?.unwrap_or_default();
    let cycles = times
        .iter()
        .zip(&repeats)
        .map(|(&exposure, &repeats)| BracketCycle { exposure, repeats })
        .collect();
    Ok(BracketSchedule::new(cycles, thresholds)?)
}

/// Build one policy arm from a `[policy]` section. A `preset` key selects a
/// named policy; `eta` and `tau_h` keys override the preset's tuning. A
/// `kind` key builds a policy from parts.
pub fn policy_from_section(section: &Section) -> Result<PolicySpec, CliError> {
    let mut spec = if let Some(preset) = section.get("preset") {
        PolicySpec::preset(preset)?
    } else {
        match section.get("kind") {
            None => return Err(CliError::config("[policy] needs 'preset' or 'kind'")),
            Some("none") => PolicySpec::None,
            Some("clocked_recharge") => PolicySpec::ClockedRecharge,
            Some("subsample") => PolicySpec::Subsample {
                n: section.u32_or("n", 10)?,
            },
            Some("deadtime") => PolicySpec::DeadTime {
                tau_d: section.u32_or("tau_d", 1)?,
            },
            Some("score") => {
                let kernel = kernel_by_name(section.get("kernel").unwrap_or("center_ring"))?;
                PolicySpec::Score {
                    kernel,
                    eta: section.i32_or("eta", 12)?,
                    tau_h: section.u32_or("tau_h", 32)?,
                }
            }
            Some("edge") => PolicySpec::EdgeCompound {
                eta1: section.i32_or("eta1", -12)?,
                eta2: section.i32_or("eta2", 12)?,
                eta3: section.i32_or("eta3", 4)?,
                eta4: section.i32_or("eta4", 16)?,
                tau_h: section.u32_or("tau_h", 16)?,
            },
            Some("saturation_lookahead") => PolicySpec::SaturationLookahead {
                schedule: bracket_from_section(section)?,
            },
            Some(other) => return Err(CliError::config(format!("unknown policy kind '{other}'"))),
        }
    };
    // Tuning overrides on top of a preset.
    if let PolicySpec::Score { eta, tau_h, .. } = &mut spec {
        if let Some(v) = section.f64("eta")? {
            *eta = v as i32;
        }
        if let Some(v) = section.u64("tau_h")? {
            *tau_h = v as u32;
        }
    }
    spec.validate()?;
    Ok(spec)
}
