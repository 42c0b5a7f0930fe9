//! `edge`: edge-detection policy experiment. Runs the edge-enhancing
//! compound policy against the no-inhibition baseline and the Laplacian-only
//! policy at a single exposure level, scoring best-threshold boundary F
//! against ground-truth edge maps at matched detections per pixel.

use crate::config::Config;
use crate::error::CliError;
use crate::experiment::{checkpoints, load_scene};
use crate::policy_config::policy_from_section;
use crate::provenance::{write_text, Provenance};
use rayon::prelude::*;
use spadsim_core::bitmap::Bitmap;
use spadsim_core::corpus;
use spadsim_core::edges::best_threshold_fscore;
use spadsim_core::pgm::read_pgm;
use spadsim_core::policy::{PolicyRunner, PolicySpec, RunOptions};
use spadsim_core::raster::Raster;
use spadsim_core::rng::RngSpec;
use spadsim_core::sensor::{clamp_rate, ExposureSchedule, Sampling};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub struct EdgeSettings {
    pub images: Vec<String>,
    pub gt_paths: Vec<Option<PathBuf>>,
    pub gamma_decompress: bool,
    pub level_ppp: f64,
    pub frames: usize,
    pub tolerance: u32,
    pub threshold_steps: usize,
    pub policies: Vec<PolicySpec>,
}

impl EdgeSettings {
    pub fn from_config(config: &Config) -> Result<Self, CliError> {
        let run = config.section_or_empty("run");
        let images = run.list_str("images").unwrap_or_else(|| {
            ["steps", "checker", "lines", "rings"]
                .iter()
                .map(|s| s.to_string())
                .collect()
        });
        let gt_paths: Vec<Option<PathBuf>> = match run.list_str("gt_edges") {
            Some(paths) => {
                if paths.len() != images.len() {
                    return Err(CliError::config("gt_edges must list one path per image"));
                }
                paths.into_iter().map(|p| Some(PathBuf::from(p))).collect()
            }
            None => vec![None; images.len()],
        };
        let mut policies = Vec::new();
        for section in config.sections_named("policy") {
            policies.push(policy_from_section(section)?);
        }
        if policies.is_empty() {
            policies.push(PolicySpec::preset("edge")?);
            policies.push(PolicySpec::preset("P_L")?);
        }
        Ok(Self {
            images,
            gt_paths,
            gamma_decompress: run.bool_or("gamma_decompress", false)?,
            level_ppp: run.f64_or("level_ppp", 1.0)?,
            frames: run.usize_or("frames", 1000)?,
            tolerance: run.u32_or("tolerance", 2)?,
            threshold_steps: run.usize_or("threshold_steps", 32)?,
            policies,
        })
    }
}

fn load_gt(image: &str, path: &Option<PathBuf>, tol_err: &str) -> Result<Bitmap, CliError> {
    if let Some(path) = path {
        let raster = read_pgm(path, false).map_err(|e| match e {
            spadsim_core::pgm::PgmError::Io(io) => CliError::io(path, io),
            other => CliError::config(other.to_string()),
        })?;
        return Ok(Bitmap::from_fn(raster.width(), raster.height(), |x, y| {
            raster.get(x, y) > 0.5
        }));
    }
    corpus::gt_edges(image)
        .ok_or_else(|| CliError::config(format!("{tol_err}: no ground truth for '{image}'")))
}

pub struct EdgeRow {
    pub image: String,
    pub policy: String,
    pub frames: usize,
    pub d_per_pix: f64,
    pub best_threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
}

pub fn run_experiment(settings: &EdgeSettings, seed: u64) -> Result<Vec<EdgeRow>, CliError> {
    let scenes = settings
        .images
        .iter()
        .zip(&settings.gt_paths)
        .map(|(name, gt)| {
            Ok((
                name.clone(),
                load_scene(name, settings.gamma_decompress)?,
                load_gt(name, gt, "edge experiment")?,
            ))
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let cp = checkpoints(settings.frames);
    let mut arms: Vec<PolicySpec> = vec![PolicySpec::None];
    arms.extend(settings.policies.iter().cloned());

    let nested: Vec<Vec<EdgeRow>> = scenes
        .par_iter()
        .enumerate()
        .map(
            |(idx, (image, flux, gt))| -> Result<Vec<EdgeRow>, CliError> {
                let mut rows = Vec::new();
                let flux_level = flux
                    .scaled(settings.level_ppp)
                    .map_err(|e| CliError::config(e.to_string()))?;
                let schedule = ExposureSchedule::uniform(1.0, settings.frames)
                    .map_err(|e| CliError::config(e.to_string()))?;
                for policy in &arms {
                    let mut runner = PolicyRunner::new(
                        &flux_level,
                        &schedule,
                        policy,
                        RngSpec::new(seed).derive(idx as u64),
                        RunOptions {
                            sampling: Sampling::Bernoulli,
                            record_cube: false,
                            record_per_frame: false,
                        },
                    )?;
                    let mut cp_iter = cp.iter().peekable();
                    for t in 1..=settings.frames {
                        runner.step_frame()?;
                        if cp_iter.peek() != Some(&&t) {
                            continue;
                        }
                        cp_iter.next();
                        let tally = runner.tally();
                        let n = flux_level.pixels();
                        let mut rate = vec![0.0f64; n];
                        for i in 0..n {
                            let w = tally.measurements()[i] as f64;
                            if w > 0.0 {
                                rate[i] = clamp_rate(tally.detections()[i] as f64, w).0;
                            }
                        }
                        let rate = Raster::new(flux_level.width(), flux_level.height(), rate)
                            .expect("dims");
                        let (threshold, score) = best_threshold_fscore(
                            &rate,
                            gt,
                            settings.tolerance,
                            settings.threshold_steps,
                        )
                        .map_err(|e| CliError::config(e.to_string()))?;
                        rows.push(EdgeRow {
                            image: image.clone(),
                            policy: policy.label(),
                            frames: t,
                            d_per_pix: tally.totals().detections as f64 / n as f64,
                            best_threshold: threshold,
                            precision: score.precision,
                            recall: score.recall,
                            f: score.f,
                        });
                    }
                }
                // Consistency anchor: the detector on the clean reference image
                // reproduces its own ground truth.
                let reference = flux.rate_image(settings.level_ppp);
                let (_, clean) = best_threshold_fscore(
                    &reference,
                    gt,
                    settings.tolerance,
                    settings.threshold_steps,
                )
                .map_err(|e| CliError::config(e.to_string()))?;
                rows.push(EdgeRow {
                    image: image.clone(),
                    policy: "clean_reference".into(),
                    frames: 0,
                    d_per_pix: 0.0,
                    best_threshold: 0.0,
                    precision: clean.precision,
                    recall: clean.recall,
                    f: clean.f,
                });
                Ok(rows)
            },
        )
        .collect::<Result<_, CliError>>()?;
    Ok(nested.into_iter().flatten().collect())
}

pub const EDGE_HEADER: &str = "image,policy,frames,D_per_pix,best_threshold,precision,recall,F";

pub fn edge_csv(rows: &[EdgeRow]) -> String {
    let mut out = String::from(EDGE_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{:.6},{:.6},{:.4},{:.4},{:.4}",
            r.image, r.policy, r.frames, r.d_per_pix, r.best_threshold, r.precision, r.recall, r.f
        )
        .expect("string write");
    }
    out
}

pub fn run(config: &Config, seed: u64, out_dir: &Path) -> Result<(), CliError> {
    let settings = EdgeSettings::from_config(config)?;
    let rows = run_experiment(&settings, seed)?;
    let mut prov = Provenance::new("edge", seed, config);
    write_text(&mut prov, out_dir, "edge_fscore.csv", &edge_csv(&rows))?;
    let clean_mean = {
        let clean: Vec<f64> = rows
            .iter()
            .filter(|r| r.policy == "clean_reference")
            .map(|r| r.f)
            .collect();
        clean.iter().sum::<f64>() / clean.len().max(1) as f64
    };
    prov.add_summary("clean_reference_mean_f", clean_mean);
    prov.write(out_dir)
}
