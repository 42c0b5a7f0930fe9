//! `sweep`: tuning-parameter grid over eta and tau_h, reported in the
//! long-format run-report schema with one row per (policy, eta, tau_h,
//! frame checkpoint). Every cell of the grid shares the per-image arrival
//! tape, so inhibited fractions are directly comparable.

use crate::config::Config;
use crate::error::CliError;
use crate::experiment::{checkpoints, load_scene, StaticExperiment};
use crate::provenance::{write_text, Provenance};
use rayon::prelude::*;
use spadsim_core::metrics::snr_h_db;
use spadsim_core::policy::{PolicySpec, ScoreKernel};
use spadsim_core::rng::RngSpec;
use spadsim_core::tally::{EnergyModel, ReportRow, TallyTotals, REPORT_HEADER};
use std::fmt::Write as _;
use std::path::Path;

pub struct SweepSettings {
    pub images: Vec<String>,
    pub gamma_decompress: bool,
    pub levels_ppp: Vec<f64>,
    pub frames_per_level: usize,
    pub kernel: ScoreKernel,
    pub etas: Vec<i32>,
    pub tau_hs: Vec<u32>,
    pub frame_rate_hz: f64,
    pub e_avalanche_j: f64,
    pub p_compute_w: f64,
}

impl SweepSettings {
    pub fn from_config(config: &Config) -> Result<Self, CliError> {
        let run = config.section_or_empty("run");
        let sweep = config.section_or_empty("sweep");
        let kernel = match sweep.get("kernel").unwrap_or("center_ring") {
            "center_ring" => ScoreKernel::center_ring(),
            "laplacian" => ScoreKernel::laplacian(),
            "average" => ScoreKernel::average(),
            "single_pixel" => ScoreKernel::single_pixel(),
            other => return Err(CliError::config(format!("unknown kernel '{other}'"))),
        };
        let etas: Vec<i32> = sweep
            .list_f64("etas")?
            .unwrap_or_else(|| vec![24.0, 12.0, 6.0, 2.0])
            .into_iter()
            .map(|v| v as i32)
            .collect();
        let tau_hs = sweep
            .list_u32("tau_hs")?
            .unwrap_or_else(|| vec![4, 8, 16, 32]);
        if etas.is_empty() || tau_hs.is_empty() {
            return Err(CliError::config("sweep grids must be nonempty"));
        }
        let energy = config.section_or_empty("energy");
        Ok(Self {
            images: run
                .list_str("images")
                .unwrap_or_else(|| vec!["mottle".to_string()]),
            gamma_decompress: run.bool_or("gamma_decompress", false)?,
            levels_ppp: run.list_f64("levels_ppp")?.unwrap_or_else(|| vec![1.0]),
            frames_per_level: run.usize_or("frames_per_level", 400)?,
            kernel,
            etas,
            tau_hs,
            frame_rate_hz: energy.f64_or("frame_rate_hz", 97_700.0)?,
            e_avalanche_j: energy.f64_or("e_avalanche_j", 11.6e-12)?,
            p_compute_w: energy.f64_or("p_compute_w_per_pixel", 729e-9)?,
        })
    }
}

pub fn run_sweep(settings: &SweepSettings, seed: u64) -> Result<Vec<SweepCell>, CliError> {
    let scenes = settings
        .images
        .iter()
        .map(|name| Ok((name.clone(), load_scene(name, settings.gamma_decompress)?)))
        .collect::<Result<Vec<_>, CliError>>()?;

    let mut cells: Vec<(usize, i32, u32)> = Vec::new();
    for (idx, _) in scenes.iter().enumerate() {
        for &eta in &settings.etas {
            for &tau_h in &settings.tau_hs {
                cells.push((idx, eta, tau_h));
            }
        }
    }

    let cp = checkpoints(settings.frames_per_level);
    let nested: Vec<SweepCell> = cells
        .par_iter()
        .map(|&(idx, eta, tau_h)| -> Result<SweepCell, CliError> {
            let (image, flux) = &scenes[idx];
            let experiment = StaticExperiment::new(
                flux.clone(),
                settings.levels_ppp.clone(),
                settings.frames_per_level,
                RngSpec::new(seed).derive(idx as u64),
            )?;
            let spec = PolicySpec::Score {
                kernel: settings.kernel.clone(),
                eta,
                tau_h,
            };
            let arm = experiment.run_arm(&spec, &cp, &[])?;
            let pixels = flux.pixels();
            let energy = EnergyModel {
                e_avalanche_j: settings.e_avalanche_j,
                p_compute_w_per_pixel: settings.p_compute_w,
                pixels,
            };
            let levels = settings.levels_ppp.len() as u64;
            let rows = arm
                .rows
                .iter()
                .map(|row| {
                    let totals = TallyTotals {
                        frames: (row.frames as u64 * levels) as u32,
                        detections: (row.d_per_pix * pixels as f64).round() as u64,
                        measurements: (row.w_frac
                            * (pixels as u64 * row.frames as u64 * levels) as f64)
                            .round() as u64,
                        ..Default::default()
                    };
                    let mut report = ReportRow::from_totals(
                        &format!("{image}_eta{eta}_th{tau_h}"),
                        "score",
                        &totals,
                        pixels,
                        &energy,
                        settings.frame_rate_hz,
                    );
                    report.eta = Some(eta);
                    report.tau_h = Some(tau_h);
                    report.i_f = row.i_f;
                    report.ssim = Some(row.ssim);
                    report.mse = Some(row.mse);
                    report.snr_h_db =
                        snr_h_db(experiment.center_ppp(), row.w_frac * row.frames as f64).ok();
                    report
                })
                .collect();
            // Measurement-allocation scatter: per-pixel enabled fraction
            // against pixel exposure at the center level.
            let total_frames = (settings.frames_per_level * settings.levels_ppp.len()) as f64;
            let center = experiment.center_ppp();
            let mut scatter: Vec<(f64, f64)> = experiment
                .flux_rel
                .raster()
                .data()
                .iter()
                .zip(&arm.final_measurements)
                .map(|(&rel, &w)| (rel * center, w as f64 / total_frames))
                .collect();
            scatter.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite exposures"));
            Ok(SweepCell {
                run_id: format!("{image}_eta{eta}_th{tau_h}"),
                rows,
                scatter,
            })
        })
        .collect::<Result<_, CliError>>()?;
    Ok(nested)
}

pub struct SweepCell {
    pub run_id: String,
    pub rows: Vec<ReportRow>,
    /// (pixel exposure at the center level, measurement fraction), sorted by
    /// exposure.
    pub scatter: Vec<(f64, f64)>,
}

/// Raw per-pixel scatter plus a moving-average smooth over a fifth of the
/// exposure-sorted pixels. The smoothing stands in for the original locally
/// weighted fit; curve shapes are indicative, not reference.
pub fn scatter_csv(cell: &SweepCell) -> String {
    let n = cell.scatter.len();
    let fractions: Vec<f64> = cell.scatter.iter().map(|&(_, f)| f).collect();
    let smoothed = crate::experiment::smooth(&fractions, (n / 5).max(1));
    let mut out = String::from("h,measurement_fraction,smoothed\n");
    for (i, &(h, f)) in cell.scatter.iter().enumerate() {
        writeln!(out, "{h:.6e},{f:.6},{:.6}", smoothed[i]).expect("string write");
    }
    out
}

pub fn sweep_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(out, "{}", r.to_csv_row()).expect("string write");
    }
    out
}

pub fn run(config: &Config, seed: u64, out_dir: &Path) -> Result<(), CliError> {
    let settings = SweepSettings::from_config(config)?;
    let emit_scatter = config.section_or_empty("sweep").bool_or("scatter", false)?;
    let cells = run_sweep(&settings, seed)?;
    let rows: Vec<ReportRow> = cells.iter().flat_map(|c| c.rows.clone()).collect();
    let mut prov = Provenance::new("sweep", seed, config);
    write_text(&mut prov, out_dir, "sweep.csv", &sweep_csv(&rows))?;
    if emit_scatter {
        for cell in &cells {
            write_text(
                &mut prov,
                out_dir,
                &format!("scatter_{}.csv", cell.run_id),
                &scatter_csv(cell),
            )?;
        }
    }
    prov.add_summary("rows", rows.len() as u64);
    prov.add_summary(
        "grid_cells",
        (settings.etas.len() * settings.tau_hs.len()) as u64,
    );
    prov.write(out_dir)
}
