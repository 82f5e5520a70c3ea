//! Reproductive single-vortex PTROM run at one sweep size.
//!
//! Usage: `cargo run --release --example reproductive_case -- [N] [case] [max_steps]`

use ptrom::harness::reproduce::{cap_steps, run_reproductive_case};
use ptrom::harness::{ExperimentConfig, Width};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let n = args.first().map_or(Ok(100), |s| s.parse())?;
    let case = args.get(1).map_or(Ok(1), |s| s.parse())?;
    let max_steps = args.get(2).map(|s| s.parse()).transpose()?;
    let cfg = cap_steps(
        ExperimentConfig::single_vortex(n, Width::Narrow, case)?,
        max_steps,
    );
    let out = run_reproductive_case(&cfg)?;
    let e = out.record.errors.as_ref().expect("scored run");
    println!(
        "N = {n}, M = {}, steps = {}",
        cfg.rom.m,
        out.trajectory.iterations.len()
    );
    let meta = &out.training.bundle.metadata;
    println!(
        "unique sources N_c = {:?} ({:?} clusters, {:?} near-field)",
        meta.n_unique_sources(),
        meta.n_clusters,
        meta.n_direct_sources
    );
    println!(
        "mean MAE_D = {:.3e} %, mean AE_H = {:.3e} %",
        100.0 * e.mean_mae_d,
        100.0 * e.mean_ae_h
    );
    println!(
        "FOM {:.3} s, PTROM {:.3} s, SF = {:.2}",
        out.reference().wall_time,
        out.trajectory.wall_time,
        out.record.speedup().unwrap_or(f64::NAN)
    );
    println!(
        "Gauss-Newton iterations {} ({} failed steps), kernel evaluations per pass {}",
        out.trajectory.iterations.iter().sum::<usize>(),
        out.trajectory.failed_steps().len(),
        out.trajectory.kernel_evaluations_per_pass()
    );
    Ok(())
}
