//! Snapshot POD of a single-vortex run: singular value decay, captured
//! energy and reconstruction error as the basis grows.

use nalgebra::DVector;
use ptrom::harness::{generate_initial_conditions, ExperimentConfig, Width};
use ptrom::integrators::fom_simulate;
use ptrom::kernel::Pairwise;
use ptrom::reduction::{build_pod, Centering};

fn main() -> ptrom::Result<()> {
    let mut cfg = ExperimentConfig::single_vortex(100, Width::Narrow, 1)?;
    cfg.t_span[1] = 5.0;
    let (x0, sys) = generate_initial_conditions(&cfg, None)?;
    let run = fom_simulate(&x0, &mut Pairwise::new(&sys), cfg.time_grid()?, cfg.newton)?;
    let snapshots = run.snapshots.to_matrix();
    println!(
        "{} snapshots of {} dofs",
        snapshots.ncols(),
        snapshots.nrows()
    );

    for m in [2, 5, 10, 13, 20, 40] {
        let basis = build_pod(&snapshots, m, &x0, Centering::Reference)?;
        let mut worst: f64 = 0.0;
        for col in run.snapshots.columns() {
            let back = basis.reconstruct(&basis.project(col)?);
            let e = DVector::from_column_slice(col) - DVector::from_vec(back);
            worst = worst.max(e.norm() / DVector::from_column_slice(col).norm());
        }
        println!(
            "M = {m:2}: σ_M = {:.3e}, energy {:.8}, worst relative projection error {worst:.2e}",
            basis.singular_values[m - 1],
            basis.energy_fraction()
        );
    }
    Ok(())
}
