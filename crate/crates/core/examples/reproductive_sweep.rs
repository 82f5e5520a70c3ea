//! Desk-scale reproductive sweep over `N`, reporting error, speed-up and
//! kernel evaluations per velocity pass.
//!
//! Usage: `reproductive_sweep [max_steps] [out_dir]`.

use std::path::PathBuf;

use ptrom::harness::{run_reproductive_suite, SweepSpec};

fn main() -> ptrom::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let spec = SweepSpec {
        max_steps: args
            .get(1)
            .map(|s| s.parse().expect("max_steps must be an integer")),
        ..SweepSpec::desk()
    };
    let out = args.get(2).map_or_else(
        || std::env::temp_dir().join("ptrom_reproductive_sweep"),
        PathBuf::from,
    );
    let (records, _) = run_reproductive_suite(&spec, &out)?;
    for r in &records {
        match &r.errors {
            Some(e) => println!(
                "N = {:5}: MAE_D = {:.3e} %, AE_H = {:.3e} %, SF = {:.2}, kernel evaluations per pass = {}",
                r.n,
                100.0 * e.mean_mae_d,
                100.0 * e.mean_ae_h,
                r.speedup().unwrap_or(f64::NAN),
                r.facts.get("kernel_evaluations_per_pass").copied().unwrap_or(f64::NAN)
            ),
            None => println!("N = {:5}: failed: {}", r.n, r.failure.as_deref().unwrap_or("?")),
        }
    }
    println!("reports written to {}", out.display());
    Ok(())
}
