//! `bracket`: saturation look-ahead analysis. Emits the per-flux detection
//! curves (look-ahead vs plain bracketing, with the efficiency the policy is
//! meant to track), a Monte Carlo A/B on a wide-dynamic-range scene, and the
//! feasible-observation LUT.

use crate::config::Config;
use crate::error::CliError;
use crate::experiment::spearman;
use crate::policy_config::bracket_from_section;
use crate::provenance::{write_text, Provenance};
use spadsim_core::bracket::{
    bracket_expected_detections, build_lut, lookahead_expected_detections,
    lookahead_expected_detections_per_cycle, run_lookahead, BracketSchedule, MleGrid,
};
use spadsim_core::metrics::measurement_efficiency;
use spadsim_core::rng::RngSpec;
use spadsim_core::sensor::detection_probability;
use std::fmt::Write as _;
use std::path::Path;

pub struct BracketAnalysis {
    pub reduction_pct: f64,
    pub rank_correlation: f64,
    pub mc_reduction_pct: f64,
}

/// Core analysis, reused by the acceptance suite.
pub fn analyze(
    schedule: &BracketSchedule,
    flux_lo: f64,
    flux_hi: f64,
    grid_points: usize,
    mc_pixels: usize,
    rng: RngSpec,
) -> (BracketAnalysis, String) {
    // Log-spaced flux grid spanning the configured decades.
    let grid: Vec<f64> = (0..grid_points)
        .map(|i| {
            (flux_lo.ln() + (flux_hi.ln() - flux_lo.ln()) * i as f64 / (grid_points - 1) as f64)
                .exp()
        })
        .collect();

    let mut csv = String::from("flux,e_d_lookahead,e_d_bracket");
    for i in 0..schedule.num_cycles() {
        write!(csv, ",e_d_cycle_{i},meas_eff_cycle_{i}").expect("string write");
    }
    csv.push('\n');

    // Pooled (cycle, flux) points: normalized per-cycle expected detections
    // against the measurement efficiency at that cycle's exposure.
    let mut pooled_d = Vec::new();
    let mut pooled_eff = Vec::new();
    let mut analytic_la = 0.0;
    let mut analytic_full = 0.0;
    for &flux in &grid {
        let per_cycle = lookahead_expected_detections_per_cycle(flux, schedule);
        let e_la = lookahead_expected_detections(flux, schedule);
        let e_full = bracket_expected_detections(flux, schedule);
        analytic_la += e_la;
        analytic_full += e_full;
        write!(csv, "{flux:.6e},{e_la:.6},{e_full:.6}").expect("string write");
        for (i, cycle) in schedule.cycles().iter().enumerate() {
            let eff = measurement_efficiency(flux * cycle.exposure).expect("positive exposure");
            pooled_d.push(per_cycle[i] / cycle.repeats as f64);
            pooled_eff.push(eff);
            write!(csv, ",{:.6},{eff:.6e}", per_cycle[i]).expect("string write");
        }
        csv.push('\n');
    }
    let rank_correlation = spearman(&pooled_d, &pooled_eff);
    let reduction_pct = 100.0 * (1.0 - analytic_la / analytic_full);

    // Monte Carlo A/B on a synthetic scene spanning the same flux range:
    // one pixel per grid column repeated to mc_pixels, shared arrival tape.
    let mut d_lookahead = 0u64;
    let mut d_full = 0u64;
    for px in 0..mc_pixels {
        let flux = grid[px % grid.len()];
        let mut s1 = rng.stream(px as u32, 0, 0);
        let obs = run_lookahead(flux, schedule, &mut s1);
        d_lookahead += obs.counts.iter().map(|&b| b as u64).sum::<u64>();
        // Replay the identical draw tape without thresholds.
        let mut s2 = rng.stream(px as u32, 0, 0);
        for c in schedule.cycles() {
            let y = detection_probability(flux * c.exposure);
            for _ in 0..c.repeats {
                d_full += u64::from(s2.bernoulli(y));
            }
        }
    }
    let mc_reduction_pct = 100.0 * (1.0 - d_lookahead as f64 / d_full as f64);

    (
        BracketAnalysis {
            reduction_pct,
            rank_correlation,
            mc_reduction_pct,
        },
        csv,
    )
}

pub fn run(config: &Config, seed: u64, out_dir: &Path) -> Result<(), CliError> {
    let section = config.section_or_empty("bracket");
    let schedule = if section.entries().is_empty() {
        BracketSchedule::geometric(1.0, 5.0, 5, 10, 6)?
    } else {
        bracket_from_section(&section)?
    };
    let flux_lo = section.f64_or("flux_lo", 1e-4)?;
    let flux_hi = section.f64_or("flux_hi", 1.0)?;
    let grid_points = section.usize_or("grid_points", 41)?;
    let mc_pixels = section.usize_or("mc_pixels", 20_000)?;
    if !(flux_lo > 0.0 && flux_hi > flux_lo) || grid_points < 2 {
        return Err(CliError::config(
            "bracket flux grid needs 0 < flux_lo < flux_hi",
        ));
    }

    let (analysis, csv) = analyze(
        &schedule,
        flux_lo,
        flux_hi,
        grid_points,
        mc_pixels,
        RngSpec::new(seed),
    );

    let mut prov = Provenance::new("bracket", seed, config);
    write_text(&mut prov, out_dir, "lookahead_curve.csv", &csv)?;

    // Feasible-observation LUT for the MLE path.
    let lut_schedule = match section.get("lut") {
        None | Some("fibonacci") => Some(BracketSchedule::fibonacci_lookahead()),
        Some("none") => None,
        Some("self") => Some(schedule.clone()),
        Some(other) => {
            return Err(CliError::config(format!(
                "unknown lut selector '{other}' (expected fibonacci, self, none)"
            )))
        }
    };
    if let Some(lut_schedule) = lut_schedule {
        let grid = MleGrid {
            max_flux: section.f64_or("mle_max_flux", 10.0)?,
            points: section.usize_or("mle_points", 2000)?,
        };
        let lut = build_lut(&lut_schedule, &grid)?;
        prov.add_summary("lut_entries", lut.len() as u64);
        write_text(&mut prov, out_dir, "lut.csv", &lut.to_csv())?;
    }

    prov.add_summary("analytic_reduction_pct", analysis.reduction_pct);
    prov.add_summary("mc_reduction_pct", analysis.mc_reduction_pct);
    prov.add_summary("rank_correlation", analysis.rank_correlation);
    prov.write(out_dir)
}
