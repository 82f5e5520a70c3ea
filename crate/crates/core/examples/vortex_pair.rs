//! Vortex-pair parametric study: offline training at seeded Latin-hypercube
//! points, then online queries over a grid.
//!
//! Usage: `cargo run --release --example vortex_pair -- [grid] [out_dir]`

use std::path::PathBuf;
use std::time::Instant;

use ptrom::harness::queries::grid_averages;
use ptrom::harness::{run_online_queries, run_training, ExperimentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let grid = args.first().map_or(Ok(2), |s| s.parse())?;
    let out = args.get(1).map_or_else(
        || std::env::temp_dir().join("ptrom_vortex_pair"),
        PathBuf::from,
    );
    let cfg = ExperimentConfig::vortex_pair().desk_scale(grid);

    let t = Instant::now();
    let training = run_training(&cfg)?;
    let meta = &training.bundle.metadata;
    println!("training points: {:?}", meta.training_points);
    println!(
        "trained in {:.1} s: M = {}, M_r = {}, n̆ = {}, N_c = {:?}, residual snapshots = {}",
        t.elapsed().as_secs_f64(),
        training.bundle.basis.m(),
        training.bundle.residual.m_r(),
        training.bundle.gnat.n_samples(),
        meta.n_unique_sources(),
        meta.residual_snapshots
    );
    training.bundle.save(&out.join("train"))?;

    let (records, _) = run_online_queries(&training.bundle, &cfg, &out.join("queries"))?;
    for r in &records {
        match (&r.errors, &r.failure) {
            (Some(e), _) => println!(
                "μ = {:?}: MAE_D = {:.3e} %, AE_H = {:.3e} %, SF = {:.2}",
                r.mu.unwrap_or_default(),
                100.0 * e.mean_mae_d,
                100.0 * e.mean_ae_h,
                r.speedup().unwrap_or(f64::NAN)
            ),
            (None, Some(f)) => println!("μ = {:?}: failed: {f}", r.mu.unwrap_or_default()),
            _ => {}
        }
    }
    if let Some((mae, aeh, sf)) = grid_averages(&records) {
        println!(
            "grid averages: MAE_D = {:.4} %, AE_H = {:.3e} %, SF = {:.2}",
            100.0 * mae,
            100.0 * aeh,
            sf
        );
    }
    println!("reports written to {}", out.display());
    Ok(())
}
