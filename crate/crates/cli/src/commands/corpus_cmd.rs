//! `corpus`: materialize the bundled synthetic scenes as 16-bit PGMs plus
//! their ground-truth edge maps.

use crate::config::Config;
use crate::error::CliError;
use crate::provenance::Provenance;
use spadsim_core::corpus;
use spadsim_core::pgm::{write_pgm16, write_pgm8};
use spadsim_core::raster::Raster;
use std::path::Path;

pub fn run(config: &Config, seed: u64, out_dir: &Path) -> Result<(), CliError> {
    let mut prov = Provenance::new("corpus", seed, config);
    for name in corpus::NAMES {
        let img = corpus::synthetic(name).expect("bundled scene");
        // Scenes are mean 1 with long bright tails; store linearly against
        // the scene maximum so the 16-bit file is exact to quantization.
        let max = img.raster().max();
        let scaled = img.raster().map(|v| v / max);
        let img_path = out_dir.join(format!("{name}.pgm"));
        write_pgm16(&img_path, &scaled).map_err(|e| pgm_to_cli(&img_path, e))?;
        prov.add_output(&format!("{name}.pgm"));

        let gt = corpus::gt_edges(name).expect("bundled scene");
        let gt_raster = Raster::from_fn(gt.width(), gt.height(), |x, y| {
            if gt.get(x, y) {
                1.0
            } else {
                0.0
            }
        });
        let gt_path = out_dir.join(format!("{name}_edges.pgm"));
        write_pgm8(&gt_path, &gt_raster).map_err(|e| pgm_to_cli(&gt_path, e))?;
        prov.add_output(&format!("{name}_edges.pgm"));
    }
    prov.write(out_dir)
}

fn pgm_to_cli(path: &Path, e: spadsim_core::pgm::PgmError) -> CliError {
    match e {
        spadsim_core::pgm::PgmError::Io(io) => CliError::io(path, io),
        other => CliError::config(other.to_string()),
    }
}
