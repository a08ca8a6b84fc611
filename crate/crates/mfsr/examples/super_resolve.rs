//! The full multi-frame pipeline on the shipped eight-frame configuration:
//! simulate, reconstruct by TV-regularized MM, and compare against the
//! interpolation+fusion baseline.
//!
//! ```text
//! cargo run --example super_resolve
//! ```

use mfsr::config::parse_config_file;
use mfsr::forward::{observation_operators, simulate_observations};
use mfsr::harness::fusion_baseline;
use mfsr::metrics::mse_metric;
use mfsr::pgm::{write_pgm_file, PgmMode};
use mfsr::solver::mm_deconvolve;

fn main() -> mfsr::Result<()> {
    // works from the workspace root and from the crate directory
    let path = ["configs/appendixB.cfg", "../../configs/appendixB.cfg"]
        .iter()
        .map(std::path::Path::new)
        .find(|p| p.exists())
        .expect("configs/appendixB.cfg not found");
    let cfg = parse_config_file(path)?;
    let scene = cfg.scene.load()?;
    let obs = simulate_observations(&scene, &cfg.frame_specs())?;
    let ops = observation_operators(&obs)?;
    println!(
        "{} frames of {}x{} from a {}x{} scene",
        obs.len(),
        obs.frames[0].image.height(),
        obs.frames[0].image.width(),
        scene.height(),
        scene.width(),
    );

    let started = std::time::Instant::now();
    let result = mm_deconvolve(&obs, &ops, &cfg.solver)?;
    println!(
        "MM: {} outer iterations, {} total CG iterations, {:.2}s",
        result.trace.len() - 1,
        result.cg_iterations.iter().sum::<usize>(),
        started.elapsed().as_secs_f64(),
    );
    println!(
        "objective {:.0} -> {:.0}",
        result.trace[0],
        result.trace.last().unwrap()
    );

    let (fused, interpolated) = fusion_baseline(&obs, cfg.baseline.sweeps, cfg.baseline.radius)?;
    let best_interp = interpolated
        .iter()
        .map(|img| mse_metric(&scene, img).unwrap())
        .fold(f64::INFINITY, f64::min);

    println!("mse vs ground truth:");
    println!("  best zero-fill frame:  {best_interp:>8.2}");
    println!("  fusion baseline:       {:>8.2}", mse_metric(&scene, &fused)?);
    println!("  MM-TV reconstruction:  {:>8.2}", mse_metric(&scene, &result.x_hat)?);

    let dir = std::path::Path::new("example_out/super_resolve");
    std::fs::create_dir_all(dir)?;
    write_pgm_file(dir.join("scene.pgm"), &scene, PgmMode::Binary)?;
    write_pgm_file(dir.join("fused.pgm"), &fused, PgmMode::Binary)?;
    write_pgm_file(dir.join("x_hat.pgm"), &result.x_hat, PgmMode::Binary)?;
    println!("wrote {}", dir.display());
    Ok(())
}
