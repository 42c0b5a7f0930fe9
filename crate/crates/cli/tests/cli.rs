//! End-to-end checks of the command-line surface: exit codes, output
//! schemas, cross-command consistency, and curve invariants.

use spadsim_cli::commands::edge_cmd::{run_experiment as run_edge, EdgeSettings};
use spadsim_cli::commands::static_cmd::{run_experiment, StaticSettings};
use spadsim_cli::commands::sweep_cmd::{run_sweep, SweepSettings};
use spadsim_cli::config::Config;
use spadsim_cli::experiment::{smooth, StaticExperiment};
use spadsim_cli::run_command;
use spadsim_core::bitmap::Bitmap;
use spadsim_core::hotpixel::HotPixelFilter;
use spadsim_core::policy::{PolicySpec, ScoreKernel};
use spadsim_core::raster::FluxImage;
use spadsim_core::rng::RngSpec;
use std::path::PathBuf;
use std::process::Command;

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("spadsim_cli_{tag}_{}", std::process::id()));
    if dir.exists() {
        std::fs::remove_dir_all(&dir).unwrap();
    }
    dir
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spadsim"))
}

#[test]
fn exit_code_zero_on_success() {
    let out = temp_dir("ok");
    let status = bin()
        .args(["curves", "--out"])
        .arg(&out)
        .status()
        .expect("binary runs");
    assert_eq!(status.code(), Some(0));
    assert!(out.join("curves.csv").exists());
    assert!(out.join("run.json").exists());
    std::fs::remove_dir_all(out).ok();
}

#[test]
fn exit_code_two_on_config_error() {
    let out = temp_dir("cfgerr");
    let cfg = out.join("bad.cfg");
    std::fs::create_dir_all(&out).unwrap();
    std::fs::write(&cfg, "[policy]\npreset = P_wat\n\n[run]\nimages = mottle\n").unwrap();
    let status = bin()
        .args(["static", "--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(out.join("run"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));

    // Malformed config text is also a config error.
    std::fs::write(&cfg, "orphan line without section\n").unwrap();
    let status = bin()
        .args(["curves", "--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(out.join("run2"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    std::fs::remove_dir_all(out).ok();
}

#[test]
fn exit_code_three_on_io_error() {
    let out = temp_dir("ioerr");
    let status = bin()
        .args(["curves", "--config", "/nonexistent/path/run.cfg", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));
    std::fs::remove_dir_all(out).ok();
}

#[test]
fn corpus_command_writes_scenes_and_edge_maps() {
    let out = temp_dir("corpus");
    let status = bin().args(["corpus", "--out"]).arg(&out).status().unwrap();
    assert_eq!(status.code(), Some(0));
    for name in spadsim_core::corpus::NAMES {
        assert!(out.join(format!("{name}.pgm")).exists());
        assert!(out.join(format!("{name}_edges.pgm")).exists());
    }
    std::fs::remove_dir_all(out).ok();
}

#[test]
fn baseline_ssim_is_nondecreasing_after_smoothing() {
    // More photons never hurt the cumulative baseline estimate: smoothed
    // SSIM may dip below a previous value by at most 0.01.
    let settings = StaticSettings {
        images: vec!["blobs".into()],
        gamma_decompress: false,
        levels_ppp: vec![1.0],
        frames_per_level: 400,
        policies: vec![PolicySpec::None],
        ssim_targets: vec![],
        save_images_at: vec![],
        hot_pixels: None,
        save_cubes: false,
    };
    let results = run_experiment(&settings, 21).unwrap();
    let ssims: Vec<f64> = results[0].arms[0].rows.iter().map(|r| r.ssim).collect();
    let smoothed = smooth(&ssims, 5);
    let mut peak = f64::MIN;
    for (i, &s) in smoothed.iter().enumerate() {
        assert!(
            s >= peak - 0.01,
            "smoothed SSIM dipped at checkpoint {i}: {s} < {peak}"
        );
        peak = peak.max(s);
    }
}

#[test]
fn singleton_sweep_matches_static_run() {
    // A 1x1 sweep grid reproduces the static experiment's curve for the same
    // policy, seed, and scene.
    let sweep = SweepSettings {
        images: vec!["checker".into()],
        gamma_decompress: false,
        levels_ppp: vec![1.0],
        frames_per_level: 100,
        kernel: ScoreKernel::center_ring(),
        etas: vec![12],
        tau_hs: vec![32],
        frame_rate_hz: 97_700.0,
        e_avalanche_j: 11.6e-12,
        p_compute_w: 729e-9,
    };
    let cells = run_sweep(&sweep, 33).unwrap();
    let sweep_rows: Vec<_> = cells.into_iter().flat_map(|c| c.rows).collect();

    let static_settings = StaticSettings {
        images: vec!["checker".into()],
        gamma_decompress: false,
        levels_ppp: vec![1.0],
        frames_per_level: 100,
        policies: vec![PolicySpec::Score {
            kernel: ScoreKernel::center_ring(),
            eta: 12,
            tau_h: 32,
        }],
        ssim_targets: vec![],
        save_images_at: vec![],
        hot_pixels: None,
        save_cubes: false,
    };
    let static_results = run_experiment(&static_settings, 33).unwrap();
    let static_rows = &static_results[0].arms[1].rows;

    assert_eq!(sweep_rows.len(), static_rows.len());
    for (s, t) in sweep_rows.iter().zip(static_rows) {
        assert_eq!(s.frames, t.frames as u32);
        assert!((s.d_per_pix - t.d_per_pix).abs() < 1e-9);
        assert!((s.i_f - t.i_f).abs() < 1e-9);
        assert!((s.ssim.unwrap() - t.ssim).abs() < 1e-9);
        assert_eq!(s.eta, Some(12));
        assert_eq!(s.tau_h, Some(32));
    }
}

#[test]
fn sweep_i_f_is_monotone_in_eta_end_to_end() {
    let sweep = SweepSettings {
        images: vec!["mottle".into()],
        gamma_decompress: false,
        levels_ppp: vec![1.0],
        frames_per_level: 150,
        kernel: ScoreKernel::center_ring(),
        etas: vec![24, 12, 6, 2],
        tau_hs: vec![16],
        frame_rate_hz: 97_700.0,
        e_avalanche_j: 11.6e-12,
        p_compute_w: 729e-9,
    };
    let cells = run_sweep(&sweep, 5).unwrap();
    let rows: Vec<_> = cells.into_iter().flat_map(|c| c.rows).collect();
    // Final checkpoint per eta, in grid order.
    let finals: Vec<f64> = sweep
        .etas
        .iter()
        .map(|&eta| {
            rows.iter()
                .rfind(|r| r.eta == Some(eta))
                .expect("rows for eta")
                .i_f
        })
        .collect();
    for pair in finals.windows(2) {
        assert!(
            pair[1] >= pair[0],
            "I_F decreased along eta sweep: {finals:?}"
        );
    }
}

#[test]
fn edge_experiment_clean_arm_and_growth() {
    let settings = EdgeSettings {
        images: vec!["steps".into(), "rings".into()],
        gt_paths: vec![None, None],
        gamma_decompress: false,
        level_ppp: 1.0,
        frames: 300,
        tolerance: 2,
        threshold_steps: 32,
        policies: vec![PolicySpec::preset("edge").unwrap()],
    };
    let rows = run_edge(&settings, 13).unwrap();
    for image in ["steps", "rings"] {
        // Sanity arm: the detector on the clean image reproduces its own gt.
        let clean = rows
            .iter()
            .find(|r| r.image == image && r.policy == "clean_reference")
            .unwrap();
        assert_eq!(clean.f, 1.0, "{image} clean-reference F = {}", clean.f);

        // F grows with detections per pixel and plateaus: compare smoothed
        // start, middle, end of the baseline curve.
        let f_curve: Vec<f64> = rows
            .iter()
            .filter(|r| r.image == image && r.policy == "none")
            .map(|r| r.f)
            .collect();
        let sm = smooth(&f_curve, 5);
        let early = sm[1];
        let mid = sm[sm.len() / 2];
        let late = *sm.last().unwrap();
        assert!(mid > early, "{image}: F did not grow ({early} -> {mid})");
        assert!(
            late >= mid - 0.02,
            "{image}: F collapsed late ({mid} -> {late})"
        );
        // Plateau: the last quarter moves less than the first quarter.
        let q = sm.len() / 4;
        let head_gain = sm[q] - sm[0];
        let tail_gain = sm[sm.len() - 1] - sm[sm.len() - 1 - q];
        assert!(
            tail_gain < head_gain,
            "{image}: no plateau (head {head_gain}, tail {tail_gain})"
        );
    }
}

#[test]
fn hot_pixel_filter_replaces_hot_pixel_end_to_end() {
    // A pixel with pathological flux is flagged hot; with the filter active
    // its reconstruction follows the neighborhood instead of saturating.
    let flux =
        FluxImage::from_fn(16, 16, |x, y| if (x, y) == (8, 8) { 400.0 } else { 0.5 }).unwrap();
    let mut hot = Bitmap::zeros(16, 16);
    hot.set(8, 8, true);

    let mut experiment =
        StaticExperiment::new(flux.clone(), vec![1.0], 400, RngSpec::new(77)).unwrap();
    experiment.hot_filter = Some(HotPixelFilter::new(&hot).unwrap());
    let filtered = experiment
        .run_arm(&PolicySpec::None, &[400], &[0.0])
        .unwrap();
    let rate = &filtered.snapshots[0].rate;
    let y_expected = 1.0 - (-0.5f64).exp();
    assert!(
        (rate.get(8, 8) - y_expected).abs() < 0.1,
        "hot pixel rate {} should follow neighbors (~{y_expected:.3})",
        rate.get(8, 8)
    );

    let mut unfiltered = StaticExperiment::new(flux, vec![1.0], 400, RngSpec::new(77)).unwrap();
    unfiltered.hot_filter = None;
    let raw = unfiltered
        .run_arm(&PolicySpec::None, &[400], &[0.0])
        .unwrap();
    assert!(raw.snapshots[0].rate.get(8, 8) > 0.95);
}

#[test]
fn run_json_embeds_resolved_config_and_is_stable() {
    let out_a = temp_dir("prov_a");
    let out_b = temp_dir("prov_b");
    let config = Config::parse("[curves]\npoints = 32\nw = 50\n").unwrap();
    run_command("curves", &config, 3, &out_a).unwrap();
    run_command("curves", &config, 3, &out_b).unwrap();
    let a = std::fs::read_to_string(out_a.join("run.json")).unwrap();
    let b = std::fs::read_to_string(out_b.join("run.json")).unwrap();
    assert_eq!(a, b);
    let parsed: serde_json::Value = serde_json::from_str(&a).unwrap();
    assert_eq!(parsed["command"], "curves");
    assert_eq!(parsed["seed"], 3);
    assert_eq!(parsed["config"][0]["entries"]["points"], "32");
    assert!(parsed["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .any(|v| v == "curves.csv"));
    std::fs::remove_dir_all(out_a).ok();
    std::fs::remove_dir_all(out_b).ok();
}

#[test]
fn static_save_cubes_round_trips_through_the_container() {
    let out = temp_dir("cubes");
    let config = Config::parse(
        "[run]\nimages = checker\nlevels_ppp = 1.0\nframes_per_level = 40\nssim_targets =\nsave_cubes = true\n\n[policy]\npreset = P_s\n",
    )
    .unwrap();
    run_command("static", &config, 55, &out).unwrap();
    let base = out.join("checker_level0");
    assert!(base.with_extension("pcub").exists());
    let cube = spadsim_core::cube::PhotonCube::load(&base).unwrap();
    assert_eq!(cube.num_frames(), 40);
    assert_eq!(cube.width(), spadsim_core::corpus::SIZE);
    // Baseline cube: every pixel measured every frame.
    assert_eq!(
        cube.total_measurements(),
        40 * (spadsim_core::corpus::SIZE * spadsim_core::corpus::SIZE) as u64
    );
    std::fs::remove_dir_all(out).ok();
}

#[test]
fn report_rows_match_golden_csv_byte_for_byte() {
    // Frozen from the first verified run of this configuration; any change
    // to sampling, accounting, or formatting must be deliberate.
    let settings = SweepSettings {
        images: vec!["checker".into()],
        gamma_decompress: false,
        levels_ppp: vec![0.1, 1.0, 10.0],
        frames_per_level: 60,
        kernel: ScoreKernel::center_ring(),
        etas: vec![12],
        tau_hs: vec![32],
        frame_rate_hz: 97_700.0,
        e_avalanche_j: 11.6e-12,
        p_compute_w: 729e-9,
    };
    let cells = run_sweep(&settings, 4242).unwrap();
    let rows: Vec<_> = cells.into_iter().flat_map(|c| c.rows).collect();
    let produced = spadsim_cli::commands::sweep_cmd::sweep_csv(&rows);
    let golden = include_str!("golden/report_pcr_checker.csv");
    assert_eq!(
        produced, golden,
        "report CSV deviates from the golden fixture"
    );
}

#[test]
fn curves_csv_peak_row_sits_at_the_efficiency_maximum() {
    let out = temp_dir("curves_peak");
    run_command("curves", &Config::empty(), 0, &out).unwrap();
    let csv = std::fs::read_to_string(out.join("curves.csv")).unwrap();
    let mut best = (0.0f64, f64::MIN);
    for line in csv.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        let h: f64 = cols[0].parse().unwrap();
        let meas: f64 = cols[4].parse().unwrap();
        if meas > best.1 {
            best = (h, meas);
        }
    }
    assert!(
        (best.0 - 1.5936).abs() / 1.5936 < 0.05,
        "curve peak at H = {} is not near 1.59",
        best.0
    );
    std::fs::remove_dir_all(out).ok();
}

#[test]
fn baseline_compared_with_itself_gives_zero_delta() {
    let settings = StaticSettings {
        images: vec!["checker".into()],
        gamma_decompress: false,
        levels_ppp: vec![1.0],
        frames_per_level: 150,
        policies: vec![PolicySpec::None],
        ssim_targets: vec![0.7],
        save_images_at: vec![],
        hot_pixels: None,
        save_cubes: false,
    };
    let results = run_experiment(&settings, 61).unwrap();
    let deltas = spadsim_cli::commands::static_cmd::quality_deltas(&results, &[0.7]);
    assert_eq!(deltas.len(), 1);
    assert_eq!(deltas[0].delta_d_pct, 0.0);
    assert_eq!(deltas[0].delta_ssim, 0.0);
}

#[test]
fn equal_quality_deltas_agree_in_sign_across_directions() {
    let settings = StaticSettings {
        images: vec!["ramp".into(), "blobs".into()],
        gamma_decompress: false,
        levels_ppp: vec![0.1, 1.0, 10.0],
        frames_per_level: 300,
        policies: vec![PolicySpec::preset("P_cr").unwrap()],
        ssim_targets: vec![0.7],
        save_images_at: vec![],
        hot_pixels: None,
        save_cubes: false,
    };
    let results = run_experiment(&settings, 62).unwrap();
    let deltas = spadsim_cli::commands::static_cmd::quality_deltas(&results, &[0.7]);
    assert_eq!(deltas.len(), 2);
    for d in &deltas {
        // Fewer detections at the SSIM target implies better SSIM at the
        // matched detection count, and vice versa.
        assert!(
            d.delta_d_pct.signum() == -d.delta_ssim.signum(),
            "{}: delta_d {:.2}% vs delta_ssim {:.4} disagree in sign",
            d.image,
            d.delta_d_pct,
            d.delta_ssim
        );
    }
}

#[test]
fn sweep_scatter_emits_sorted_allocation_curve() {
    let out = temp_dir("scatter");
    let config = Config::parse(
        "[run]\nimages = ramp\nlevels_ppp = 1.0\nframes_per_level = 120\n[sweep]\netas = 12\ntau_hs = 16\nscatter = true\n",
    )
    .unwrap();
    run_command("sweep", &config, 19, &out).unwrap();
    let scatter = std::fs::read_to_string(out.join("scatter_ramp_eta12_th16.csv")).unwrap();
    let mut rows = scatter.lines().skip(1);
    let mut last_h = f64::MIN;
    let mut dim_frac = Vec::new();
    let mut bright_frac = Vec::new();
    let mut count = 0usize;
    for line in rows.by_ref() {
        let cols: Vec<&str> = line.split(',').collect();
        let h: f64 = cols[0].parse().unwrap();
        let f: f64 = cols[1].parse().unwrap();
        assert!(h >= last_h, "scatter is not exposure-sorted");
        last_h = h;
        assert!((0.0..=1.0).contains(&f));
        if count < 500 {
            dim_frac.push(f);
        }
        bright_frac.push(f);
        count += 1;
    }
    assert_eq!(
        count,
        spadsim_core::corpus::SIZE * spadsim_core::corpus::SIZE
    );
    // Bright pixels get inhibited more than dim ones under the score policy.
    let bright: Vec<f64> = bright_frac[bright_frac.len() - 500..].to_vec();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!(
        mean(&dim_frac) > mean(&bright) + 0.1,
        "dim {} vs bright {}",
        mean(&dim_frac),
        mean(&bright)
    );
    std::fs::remove_dir_all(out).ok();
}
