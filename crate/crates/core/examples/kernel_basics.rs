//! Pairwise Biot–Savart velocities, self-block Jacobians and the Hamiltonian
//! for a three-vortex system, then an implicit run showing energy conservation.

use ptrom::integrators::{fom_simulate, NewtonConfig, TimeGrid};
use ptrom::kernel::{hamiltonian, inexact_kernel_jacobian, pairwise_velocity, Pairwise};
use ptrom::{ParticleSystem, StateVector};

fn main() -> ptrom::Result<()> {
    let sys = ParticleSystem::new(vec![1.0, 1.0, -0.5], 0.01)?;
    let x0 = StateVector::from_positions(&[[-1.0, 0.0], [1.0, 0.0], [0.0, 1.5]])?.into_inner();

    let v = pairwise_velocity(&x0, &sys)?;
    let jac = inexact_kernel_jacobian(&x0, &sys)?;
    for i in 0..sys.n() {
        println!(
            "particle {i}: velocity ({:+.5}, {:+.5}), self-block {:?}",
            v[i],
            v[i + sys.n()],
            jac.block(i)
        );
    }

    let h0 = hamiltonian(&x0, &sys)?;
    let run = fom_simulate(
        &x0,
        &mut Pairwise::new(&sys),
        TimeGrid::new(0.01, 1000, 0.0)?,
        NewtonConfig::default(),
    )?;
    let h1 = hamiltonian(run.snapshots.column(run.snapshots.n_columns() - 1), &sys)?;
    println!(
        "H(t=0) = {h0:.10}, H(t=10) = {h1:.10}, relative drift {:.2e}",
        ((h1 - h0) / h0).abs()
    );
    println!(
        "Newton iterations: {} over {} steps",
        run.total_iterations(),
        run.snapshots.n_columns()
    );
    Ok(())
}
