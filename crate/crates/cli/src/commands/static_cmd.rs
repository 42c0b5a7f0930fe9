//! `static`: static-imaging policy experiment. Every policy arm (plus the
//! no-inhibition baseline sharing its photon arrival tape) is streamed over
//! the exposure levels; cumulative image quality versus detections per pixel
//! is reported per frame checkpoint, and equal-quality detection deltas are
//! interpolated against the baseline curve.

use crate::config::Config;
use crate::error::CliError;
use crate::experiment::{
    checkpoints, d_at_ssim, load_scene, ssim_at_d, ArmCurve, StaticExperiment,
};
use crate::policy_config::policy_from_section;
use crate::provenance::{write_text, Provenance};
use rayon::prelude::*;
use spadsim_core::pgm::write_pgm8;
use spadsim_core::policy::PolicySpec;
use spadsim_core::rng::RngSpec;
use std::fmt::Write as _;
use std::path::Path;

pub struct StaticSettings {
    pub images: Vec<String>,
    pub gamma_decompress: bool,
    pub levels_ppp: Vec<f64>,
    pub frames_per_level: usize,
    pub policies: Vec<PolicySpec>,
    pub ssim_targets: Vec<f64>,
    pub save_images_at: Vec<f64>,
    pub hot_pixels: Option<std::path::PathBuf>,
    pub save_cubes: bool,
}

impl StaticSettings {
    pub fn from_config(config: &Config) -> Result<Self, CliError> {
        let run = config.section_or_empty("run");
        let images = run.list_str("images").unwrap_or_else(|| {
            spadsim_core::corpus::NAMES
                .iter()
                .map(|s| s.to_string())
                .collect()
        });
        let mut policies = Vec::new();
        for section in config.sections_named("policy") {
            policies.push(policy_from_section(section)?);
        }
        if policies.is_empty() {
            policies.push(PolicySpec::preset("P_cr")?);
        }
        let mut save_images_at = run.list_f64("save_images_at")?.unwrap_or_default();
        save_images_at.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        Ok(Self {
            images,
            gamma_decompress: run.bool_or("gamma_decompress", false)?,
            levels_ppp: run
                .list_f64("levels_ppp")?
                .unwrap_or_else(|| vec![0.1, 1.0, 10.0]),
            frames_per_level: run.usize_or("frames_per_level", 1000)?,
            policies,
            ssim_targets: run
                .list_f64("ssim_targets")?
                .unwrap_or_else(|| vec![0.7, 0.8]),
            save_images_at,
            hot_pixels: run.get("hot_pixels").map(std::path::PathBuf::from),
            save_cubes: run.bool_or("save_cubes", false)?,
        })
    }
}

pub struct ImageResult {
    pub image: String,
    pub arms: Vec<ArmCurve>,
}

/// Run every arm over every image. Results come back in input order, one
/// baseline plus the configured policies per image.
pub fn run_experiment(settings: &StaticSettings, seed: u64) -> Result<Vec<ImageResult>, CliError> {
    let scenes = settings
        .images
        .iter()
        .map(|name| Ok((name.clone(), load_scene(name, settings.gamma_decompress)?)))
        .collect::<Result<Vec<_>, CliError>>()?;

    let hot_filter = settings
        .hot_pixels
        .as_ref()
        .map(|p| crate::experiment::load_hot_mask(p))
        .transpose()?;
    let cp = checkpoints(settings.frames_per_level);
    scenes
        .into_par_iter()
        .enumerate()
        .map(|(idx, (image, flux))| {
            let mut experiment = StaticExperiment::new(
                flux,
                settings.levels_ppp.clone(),
                settings.frames_per_level,
                RngSpec::new(seed).derive(idx as u64),
            )?;
            experiment.hot_filter = hot_filter.clone();
            let mut arms = Vec::with_capacity(settings.policies.len() + 1);
            arms.push(experiment.run_arm(&PolicySpec::None, &cp, &settings.save_images_at)?);
            for policy in &settings.policies {
                arms.push(experiment.run_arm(policy, &cp, &settings.save_images_at)?);
            }
            Ok(ImageResult { image, arms })
        })
        .collect()
}

pub const CURVE_HEADER: &str =
    "image,policy,frames,D_per_pix,W_frac,I_F,ssim,mse,saturated_px,unobserved_px";
pub const SUMMARY_HEADER: &str = "image,policy,ssim_target,d_baseline,d_policy,delta_d_pct,ssim_at_equal_d_baseline,ssim_at_equal_d_policy,delta_ssim";

pub fn curves_csv(results: &[ImageResult]) -> String {
    let mut out = String::from(CURVE_HEADER);
    out.push('\n');
    for r in results {
        for arm in &r.arms {
            for row in &arm.rows {
                writeln!(
                    out,
                    "{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6e},{},{}",
                    r.image,
                    arm.policy_label,
                    row.frames,
                    row.d_per_pix,
                    row.w_frac,
                    row.i_f,
                    row.ssim,
                    row.mse,
                    row.saturated,
                    row.unobserved
                )
                .expect("string write");
            }
        }
    }
    out
}

pub struct QualityDelta {
    pub image: String,
    pub policy: String,
    pub ssim_target: f64,
    pub d_baseline: f64,
    pub d_policy: f64,
    /// Negative when the policy needs fewer detections at equal quality.
    pub delta_d_pct: f64,
    pub ssim_at_equal_d_baseline: f64,
    pub ssim_at_equal_d_policy: f64,
    pub delta_ssim: f64,
}

/// Equal-quality comparison of each policy arm against the baseline (arm 0),
/// in both directions: detections at equal SSIM and SSIM at equal detections.
pub fn quality_deltas(results: &[ImageResult], targets: &[f64]) -> Vec<QualityDelta> {
    let mut out = Vec::new();
    for r in results {
        let baseline = &r.arms[0];
        for arm in &r.arms[1..] {
            for &target in targets {
                let (Some(d_base), Some(d_pol)) = (
                    d_at_ssim(&baseline.rows, target),
                    d_at_ssim(&arm.rows, target),
                ) else {
                    continue;
                };
                // Equal-detections comparison at a point both curves cover;
                // an aggressive policy may never accumulate the baseline's
                // detection count.
                let d_star = d_base
                    .min(arm.rows.last().map_or(d_base, |r| r.d_per_pix))
                    .min(baseline.rows.last().map_or(d_base, |r| r.d_per_pix));
                let (Some(s_base), Some(s_pol)) = (
                    ssim_at_d(&baseline.rows, d_star),
                    ssim_at_d(&arm.rows, d_star),
                ) else {
                    continue;
                };
                out.push(QualityDelta {
                    image: r.image.clone(),
                    policy: arm.policy_label.clone(),
                    ssim_target: target,
                    d_baseline: d_base,
                    d_policy: d_pol,
                    delta_d_pct: 100.0 * (d_pol - d_base) / d_base,
                    ssim_at_equal_d_baseline: s_base,
                    ssim_at_equal_d_policy: s_pol,
                    delta_ssim: s_pol - s_base,
                });
            }
        }
    }
    out
}

pub fn summary_csv(deltas: &[QualityDelta]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for d in deltas {
        writeln!(
            out,
            "{},{},{:.2},{:.4},{:.4},{:.2},{:.6},{:.6},{:.6}",
            d.image,
            d.policy,
            d.ssim_target,
            d.d_baseline,
            d.d_policy,
            d.delta_d_pct,
            d.ssim_at_equal_d_baseline,
            d.ssim_at_equal_d_policy,
            d.delta_ssim
        )
        .expect("string write");
    }
    out
}

pub fn run(config: &Config, seed: u64, out_dir: &Path) -> Result<(), CliError> {
    let settings = StaticSettings::from_config(config)?;
    let results = run_experiment(&settings, seed)?;
    let deltas = quality_deltas(&results, &settings.ssim_targets);

    let mut prov = Provenance::new("static", seed, config);
    write_text(&mut prov, out_dir, "curves.csv", &curves_csv(&results))?;
    write_text(&mut prov, out_dir, "summary.csv", &summary_csv(&deltas))?;

    // Reconstructions at the requested operating points, displayed with the
    // figure-style gamma compression.
    for r in &results {
        for arm in &r.arms {
            for snap in &arm.snapshots {
                let name = format!(
                    "{}_{}_d{:03}.pgm",
                    r.image,
                    arm.policy_label,
                    snap.requested_d_per_pix.round() as u64
                );
                let path = out_dir.join(&name);
                let display = snap.rate.map(|v| v.clamp(0.0, 1.0).powf(0.4));
                write_pgm8(&path, &display).map_err(|e| match e {
                    spadsim_core::pgm::PgmError::Io(io) => CliError::io(&path, io),
                    other => CliError::config(other.to_string()),
                })?;
                prov.add_output(&name);
            }
        }
    }

    // Optional raw photon-cube export: replay each image's baseline arm per
    // level on the experiment's own seeds and persist the PCUB streams.
    if settings.save_cubes {
        for (idx, image) in settings.images.iter().enumerate() {
            let flux = crate::experiment::load_scene(image, settings.gamma_decompress)?;
            let mut levels = settings.levels_ppp.clone();
            levels.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
            let unit = levels[0];
            let flux_unit = flux
                .scaled(unit)
                .map_err(|e| CliError::config(e.to_string()))?;
            for (li, &level) in levels.iter().enumerate() {
                let schedule = spadsim_core::sensor::ExposureSchedule::uniform(
                    level / unit,
                    settings.frames_per_level,
                )
                .map_err(|e| CliError::config(e.to_string()))?;
                let run = spadsim_core::policy::run_policy(
                    &flux_unit,
                    &schedule,
                    &PolicySpec::None,
                    RngSpec::new(seed).derive(idx as u64).derive(li as u64),
                )?;
                let name = format!("{image}_level{li}");
                let base = out_dir.join(&name);
                run.cube
                    .expect("cube recording enabled")
                    .save(&base)
                    .map_err(|e| CliError::config(e.to_string()))?;
                prov.add_output(&format!("{name}.pcub"));
                prov.add_output(&format!("{name}.mask.pcub"));
            }
        }
    }

    if !deltas.is_empty() {
        let mean_delta = deltas.iter().map(|d| d.delta_d_pct).sum::<f64>() / deltas.len() as f64;
        prov.add_summary("mean_delta_d_pct", mean_delta);
    }
    prov.add_summary("images", settings.images.len() as u64);
    prov.write(out_dir)
}
