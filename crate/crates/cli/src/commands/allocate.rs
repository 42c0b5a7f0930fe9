//! `allocate`: closed-form oracle measurement allocations for an image,
//! heatmap exports, and the oracle-vs-uniform noise-image comparison.

use crate::config::Config;
use crate::error::CliError;
use crate::experiment::load_scene;
use crate::provenance::{write_text, Provenance};
use spadsim_core::allocation::{
    allocation_csv, optimal_allocation, oracle_noise_image, AllocationProblem, LossKind,
};
use spadsim_core::metrics::{mse, ssim};
use spadsim_core::pgm::write_pgm16;
use spadsim_core::raster::Raster;
use spadsim_core::rng::RngSpec;
use std::fmt::Write as _;
use std::path::Path;

fn loss_by_name(name: &str) -> Result<LossKind, CliError> {
    Ok(match name {
        "binomial_mse" => LossKind::BinomialMse,
        "exposure_mse" => LossKind::ExposureMse,
        "relative_exposure_mse" => LossKind::RelativeExposureMse,
        "snr_tracker_1" => LossKind::SnrTracker { k: 1 },
        "snr_tracker_2" => LossKind::SnrTracker { k: 2 },
        other => return Err(CliError::config(format!("unknown loss '{other}'"))),
    })
}

pub fn run(config: &Config, seed: u64, out_dir: &Path) -> Result<(), CliError> {
    let section = config.section_or_empty("allocate");
    let image_ref = section.get("image").unwrap_or("mottle").to_string();
    let gamma = section.bool_or("gamma_decompress", false)?;
    let level_ppp = section.f64_or("level_ppp", 1.0)?;
    let d_per_pix = section.f64_or("d_per_pix", 5.0)?;
    let log_heatmap = section.bool_or("log_heatmap", true)?;
    let losses: Vec<LossKind> = match section.list_str("losses") {
        Some(names) => names
            .iter()
            .map(|n| loss_by_name(n))
            .collect::<Result<_, _>>()?,
        None => vec![
            LossKind::BinomialMse,
            LossKind::ExposureMse,
            LossKind::RelativeExposureMse,
            LossKind::SnrTracker { k: 2 },
        ],
    };

    let scene = load_scene(&image_ref, gamma)?;
    let rates: Vec<f64> = scene.rate_image(level_ppp).data().to_vec();
    let (w, h) = (scene.width(), scene.height());
    let budget = d_per_pix * rates.len() as f64;
    let rng = RngSpec::new(seed);

    let mut prov = Provenance::new("allocate", seed, config);
    let mut summary = String::from(
        "loss,mse_uniform,mse_optimal,mse_reduction_pct,sim_mse_uniform,sim_mse_optimal,ssim_uniform,ssim_optimal,detections_used_uniform,detections_used_optimal\n",
    );

    for loss in &losses {
        let problem = AllocationProblem::new(&rates, budget, *loss)?;
        let alloc = optimal_allocation(&problem)?;
        let label = loss.label();

        write_text(
            &mut prov,
            out_dir,
            &format!("allocation_{label}.csv"),
            &allocation_csv(problem.rates(), &alloc),
        )?;

        // Heatmap of the per-pixel measurement allocation.
        let max_w = alloc.iter().copied().fold(f64::MIN, f64::max);
        let heat = Raster::new(
            w,
            h,
            alloc
                .iter()
                .map(|&v| {
                    if log_heatmap {
                        ((1.0 + v).ln() / (1.0 + max_w).ln()).clamp(0.0, 1.0)
                    } else {
                        (v / max_w).clamp(0.0, 1.0)
                    }
                })
                .collect(),
        )
        .expect("scene dimensions");
        let heat_name = format!("allocation_{label}.pgm");
        let heat_path = out_dir.join(&heat_name);
        write_pgm16(&heat_path, &heat).map_err(|e| match e {
            spadsim_core::pgm::PgmError::Io(io) => CliError::io(&heat_path, io),
            other => CliError::config(other.to_string()),
        })?;
        prov.add_output(&heat_name);

        // Oracle-vs-uniform comparison at matched budget. The primary MSE is
        // the deterministic mean of the per-pixel variances; the simulated
        // noise images supply SSIM and a Monte Carlo cross-check.
        let uniform = problem.uniform_allocation();
        let mse_u = problem.analytic_rate_mse(&uniform)?;
        let mse_o = problem.analytic_rate_mse(&alloc)?;
        let img_uniform = oracle_noise_image(problem.rates(), &uniform, *loss, &rng.derive(1))?;
        let img_optimal = oracle_noise_image(problem.rates(), &alloc, *loss, &rng.derive(2))?;
        let reference = Raster::new(w, h, problem.rates().to_vec()).expect("dims");
        let rast_uniform = Raster::new(w, h, img_uniform.estimate.clone()).expect("dims");
        let rast_optimal = Raster::new(w, h, img_optimal.estimate.clone()).expect("dims");
        let sim_mse_u = mse(&rast_uniform, &reference)?;
        let sim_mse_o = mse(&rast_optimal, &reference)?;
        let ssim_u = ssim(&rast_uniform, &reference)?;
        let ssim_o = ssim(&rast_optimal, &reference)?;
        writeln!(
            summary,
            "{label},{mse_u:.6e},{mse_o:.6e},{:.2},{sim_mse_u:.6e},{sim_mse_o:.6e},{ssim_u:.4},{ssim_o:.4},{:.1},{:.1}",
            100.0 * (1.0 - mse_o / mse_u),
            img_uniform.detections_used,
            img_optimal.detections_used,
        )
        .expect("string write");
        if *loss == LossKind::BinomialMse {
            prov.add_summary("binomial_mse_reduction_pct", 100.0 * (1.0 - mse_o / mse_u));
        }
    }

    write_text(&mut prov, out_dir, "allocate_summary.csv", &summary)?;
    prov.add_summary("image", image_ref);
    prov.add_summary("budget_d_per_pix", d_per_pix);
    prov.write(out_dir)
}
