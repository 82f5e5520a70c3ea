//! Residual snapshots from an LSPG run, the residual POD basis, greedy
//! particle sampling and the gappy operator `A = [PΦ_r]⁺`.

use nalgebra::DMatrix;
use ptrom::harness::{generate_initial_conditions, ExperimentConfig, Width};
use ptrom::integrators::fom_simulate;
use ptrom::kernel::Pairwise;
use ptrom::reduction::{build_pod, build_residual_basis, gnat_operator, greedy_sample, Centering};
use ptrom::rom_solvers::{lspg_simulate, HyperPair};

fn main() -> ptrom::Result<()> {
    let mut cfg = ExperimentConfig::single_vortex(100, Width::Narrow, 1)?;
    cfg.t_span[1] = 5.0;
    let (x0, sys) = generate_initial_conditions(&cfg, None)?;
    let grid = cfg.time_grid()?;
    let fom = fom_simulate(&x0, &mut Pairwise::new(&sys), grid, cfg.newton)?;
    let basis = build_pod(
        &fom.snapshots.to_matrix(),
        cfg.rom.m,
        &x0,
        Centering::Reference,
    )?;

    let lspg = lspg_simulate(
        &mut HyperPair::full(&sys, &basis)?,
        &basis,
        &x0,
        grid,
        &cfg.rom.solver,
    )?;
    let residuals = lspg.residual_matrix(2 * cfg.n);
    println!(
        "{} residual snapshots from {} Gauss–Newton iterations",
        residuals.ncols(),
        lspg.trajectory.iterations.iter().sum::<usize>()
    );

    let rb = build_residual_basis(&residuals, cfg.rom.m_r)?;
    let ids = greedy_sample(&rb.phi_r, cfg.rom.n_samples, &[])?;
    println!(
        "M_r = {}, sampled particles ({}): {ids:?}",
        rb.m_r(),
        ids.len()
    );

    let gnat = gnat_operator(&rb.phi_r, &ids)?;
    let p_phi = DMatrix::from_fn(2 * ids.len(), rb.m_r(), |r, c| {
        let dof = if r < ids.len() {
            ids[r]
        } else {
            ids[r - ids.len()] + cfg.n
        };
        rb.phi_r[(dof, c)]
    });
    let identity_err = (&gnat.a * p_phi - DMatrix::identity(rb.m_r(), rb.m_r()))
        .abs()
        .max();
    println!("max |A·PΦ_r − I| = {identity_err:.2e}");

    let coverage = (rb.phi_r.transpose() * &basis.phi)
        .svd(false, false)
        .singular_values;
    println!(
        "principal cosines between span(Φ_r) and span(Φ): min {:.3}, max {:.3}",
        coverage.min(),
        coverage.max()
    );
    Ok(())
}
