//! A posteriori state error bound for the N = 100 reproductive PTROM run,
//! using an empirical Lipschitz estimate, against the measured error.
//!
//! Usage: `error_bounds [max_steps]`.

use ptrom::harness::reproduce::cap_steps;
use ptrom::harness::{run_reproductive_case, ExperimentConfig, Width};
use ptrom::integrators::MultistepScheme;
use ptrom::metrics::{empirical_kappa, state_error_bound, trajectory_residual_norms, EtaForm};
use ptrom::rom_solvers::reconstruct_full;

fn main() -> ptrom::Result<()> {
    let max_steps = std::env::args()
        .nth(1)
        .map(|s| s.parse().expect("max_steps must be an integer"));
    let cfg = cap_steps(
        ExperimentConfig::single_vortex(100, Width::Narrow, 1)?,
        max_steps,
    );
    let case = run_reproductive_case(&cfg)?;
    let (x0, sys) = ptrom::harness::generate_initial_conditions(&cfg, None)?;
    let rom = reconstruct_full(&case.trajectory.x_hat_history, &case.training.bundle.basis)?;
    let fom = &case.reference().snapshots;

    let kappa = empirical_kappa(fom.columns(), rom.iter().map(Vec::as_slice), &sys)?;
    let res = trajectory_residual_norms(&x0, rom.iter().map(Vec::as_slice), &sys, cfg.dt)?;
    let err: Vec<f64> = fom
        .columns()
        .zip(&rom)
        .map(|(a, b)| {
            a.iter()
                .zip(b)
                .map(|(p, q)| (p - q).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    let delta0 = case
        .training
        .bundle
        .basis
        .reconstruct(&case.training.bundle.basis.project(&x0)?);
    let d0 = delta0
        .iter()
        .zip(&x0)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    println!(
        "κ ≈ {kappa:.3}, {} steps, initial error {d0:.2e}",
        err.len()
    );

    for form in [EtaForm::Triangle, EtaForm::Published] {
        let bound = state_error_bound(
            &res,
            kappa,
            cfg.dt,
            &MultistepScheme::trapezoidal(),
            &[d0],
            form,
        )?;
        let violations = bound.iter().zip(&err).filter(|(b, e)| b < e).count();
        let ratio = bound
            .iter()
            .zip(&err)
            .filter(|(_, e)| **e > 0.0)
            .map(|(b, e)| b / e)
            .fold(f64::INFINITY, f64::min);
        println!(
            "{form:?}: final bound {:.3e} vs error {:.3e}; min bound/error {ratio:.2}; {violations} violating steps",
            bound.last().copied().unwrap_or(0.0),
            err.last().copied().unwrap_or(0.0)
        );
    }
    Ok(())
}
