//! `curves`: emit the energy-aware metric curves over an exposure grid.

use crate::config::Config;
use crate::error::CliError;
use crate::provenance::{write_text, Provenance};
use spadsim_core::metrics::{log_grid, MetricCurve, CURVE_H_MAX, CURVE_H_MIN};
use std::path::Path;

pub fn run(config: &Config, seed: u64, out_dir: &Path) -> Result<(), CliError> {
    let section = config.section_or_empty("curves");
    let h_min = section.f64_or("h_min", CURVE_H_MIN)?;
    let h_max = section.f64_or("h_max", CURVE_H_MAX)?;
    let points = section.usize_or("points", 600)?;
    let w = section.f64_or("w", 100.0)?;
    if !(h_min > 0.0 && h_max > h_min) || points < 2 {
        return Err(CliError::config(
            "curves grid needs 0 < h_min < h_max and points >= 2",
        ));
    }

    let grid = log_grid(h_min, h_max, points);
    let curve = MetricCurve::evaluate(&grid, w)?;

    let mut prov = Provenance::new("curves", seed, config);
    let argmax_row = curve
        .rows
        .iter()
        .max_by(|a, b| a.meas_eff.partial_cmp(&b.meas_eff).expect("finite"))
        .expect("non-empty grid");
    prov.add_summary("meas_eff_argmax_h", argmax_row.h);
    prov.add_summary("det_eff_at_h_min", curve.rows[0].det_eff);
    write_text(&mut prov, out_dir, "curves.csv", &curve.to_csv())?;
    prov.write(out_dir)
}
