mod common;

use common::small_problem;
use proptest::prelude::*;
use ptrom::integrators::MultistepScheme;
use ptrom::metrics::{
    ae_hamiltonian, characteristic_length, empirical_kappa, mae_trajectory, qoi_error_bound,
    speedup_factor, state_error_bound, trajectory_residual_norms, ErrorReport, EtaForm,
};
use ptrom::reduction::{build_pod, Centering};
use ptrom::rom_solvers::{lspg_simulate, reconstruct_full, HyperPair, RomConfig};
use ptrom::ParticleSystem;

#[test]
fn scalar_metric_examples() {
    assert_eq!(ae_hamiltonian(2.0, 2.0).unwrap(), 0.0);
    assert_eq!(ae_hamiltonian(2.0, 1.0).unwrap(), 0.5);
    assert_eq!(ae_hamiltonian(-4.0, -3.0).unwrap(), 0.25);
    assert!(ae_hamiltonian(0.0, 1.0).is_err());
    assert_eq!(speedup_factor(10.0, 5.0).unwrap(), 2.0);
    assert!(speedup_factor(1.0, 0.0).is_err());
    assert_eq!(characteristic_length(&[0.0, 3.0, 0.0, 4.0]).unwrap(), 5.0);
    assert!(characteristic_length(&[1.0, 1.0]).is_err());
}

#[test]
fn uniform_shift_gives_mae_of_shift_over_length() {
    let fom = [0.0, 1.0, 2.0, 0.0, 0.0, 0.0];
    let rom = [0.3, 1.3, 2.3, 0.4, 0.4, 0.4];
    assert!((mae_trajectory(&fom, &rom, 2.0).unwrap() - 0.25).abs() < 1e-15);
    assert!(mae_trajectory(&fom, &rom[..4], 1.0).is_err());
    assert!(mae_trajectory(&fom, &rom, 0.0).is_err());
}

/// Closed form of the trapezoidal recursion with constant residual `ρ` and `δ⁰ = 0`.
fn constant_residual_bound(rho: f64, kappa: f64, dt: f64, n: usize) -> f64 {
    let h = 1.0 - 0.5 * kappa * dt;
    let eta = (1.0 + 0.5 * kappa * dt) / h;
    if (eta - 1.0).abs() < 1e-15 {
        return n as f64 * rho / h;
    }
    rho / h * (eta.powi(n as i32) - 1.0) / (eta - 1.0)
}

#[test]
fn bound_matches_closed_form_for_constant_residuals() {
    let scheme = MultistepScheme::trapezoidal();
    for (kappa, dt) in [(0.0, 0.1), (3.0, 0.01), (10.0, 0.05)] {
        let got =
            state_error_bound(&[0.2; 40], kappa, dt, &scheme, &[0.0], EtaForm::Triangle).unwrap();
        for (n, &b) in got.iter().enumerate() {
            let want = constant_residual_bound(0.2, kappa, dt, n + 1);
            assert!(
                (b - want).abs() <= 1e-12 * want,
                "κ={kappa} step {}: {b} vs {want}",
                n + 1
            );
        }
    }
    // With κ = 0 both forms reduce to summing residuals.
    let published = state_error_bound(
        &[1.0, 2.0, 3.0],
        0.0,
        0.1,
        &scheme,
        &[0.5],
        EtaForm::Published,
    )
    .unwrap();
    assert_eq!(published, vec![1.5, 3.5, 6.5]);
}

#[test]
fn published_weights_are_smaller_than_triangle_weights() {
    let scheme = MultistepScheme::trapezoidal();
    let r = [1e-3; 10];
    let p = state_error_bound(&r, 5.0, 0.02, &scheme, &[0.0], EtaForm::Published).unwrap();
    let t = state_error_bound(&r, 5.0, 0.02, &scheme, &[0.0], EtaForm::Triangle).unwrap();
    assert_eq!(p[0], t[0]);
    assert!(p.iter().zip(&t).skip(1).all(|(a, b)| a < b));
}

#[test]
fn bound_rejects_bad_inputs() {
    let s = MultistepScheme::trapezoidal();
    // h = 1 − 0.5 κ Δt must stay positive.
    assert!(state_error_bound(&[1.0], 100.0, 0.02, &s, &[0.0], EtaForm::Triangle).is_err());
    assert!(state_error_bound(&[1.0], 1.0, 0.0, &s, &[0.0], EtaForm::Triangle).is_err());
    assert!(state_error_bound(&[1.0], -1.0, 0.1, &s, &[0.0], EtaForm::Triangle).is_err());
    assert!(state_error_bound(&[1.0], 1.0, 0.1, &s, &[], EtaForm::Triangle).is_err());
    assert!(qoi_error_bound(&[1.0], -1.0).is_err());
}

#[test]
fn qoi_bound_scales_state_bound() {
    let b = [0.5, 1.0, 2.0];
    assert_eq!(qoi_error_bound(&b, 0.0).unwrap(), vec![0.0; 3]);
    assert_eq!(qoi_error_bound(&b, 1.0).unwrap(), b.to_vec());
    assert_eq!(qoi_error_bound(&b, 2.0).unwrap(), vec![1.0, 2.0, 4.0]);
}

#[test]
fn fom_trajectory_has_tiny_residuals() {
    let p = small_problem(11, 10, 20);
    let m = p.fom.snapshots.to_matrix();
    let states: Vec<&[f64]> = (0..m.ncols()).map(|c| p.fom.snapshots.column(c)).collect();
    let r = trajectory_residual_norms(&p.x0, states, &p.sys, p.grid.dt).unwrap();
    assert_eq!(r.len(), m.ncols());
    assert!(r.iter().all(|&v| v < 1e-10), "{r:?}");
}

#[test]
fn triangle_bound_holds_on_a_reduced_trajectory() {
    let p = small_problem(12, 16, 40);
    let basis = build_pod(&p.fom.snapshots.to_matrix(), 3, &p.x0, Centering::Reference).unwrap();
    let mut field = HyperPair::full(&p.sys, &basis).unwrap();
    let run = lspg_simulate(&mut field, &basis, &p.x0, p.grid, &RomConfig::default()).unwrap();
    let rom = reconstruct_full(&run.trajectory.x_hat_history, &basis).unwrap();
    let fom: Vec<&[f64]> = (0..p.grid.n_steps)
        .map(|c| p.fom.snapshots.column(c))
        .collect();
    let res =
        trajectory_residual_norms(&p.x0, rom.iter().map(Vec::as_slice), &p.sys, p.grid.dt).unwrap();
    // A generous multiple of the sampled Lipschitz ratio keeps the estimate conservative.
    let kappa =
        2.0 * empirical_kappa(fom.iter().copied(), rom.iter().map(Vec::as_slice), &p.sys).unwrap();
    let d0 = common::dist(&basis.reconstruct(&basis.project(&p.x0).unwrap()), &p.x0);
    let bound = state_error_bound(
        &res,
        kappa,
        p.grid.dt,
        &MultistepScheme::trapezoidal(),
        &[d0],
        EtaForm::Triangle,
    )
    .unwrap();
    for (n, (a, b)) in fom.iter().zip(&rom).enumerate() {
        let err = common::dist(a, b);
        assert!(
            bound[n] >= err,
            "step {}: bound {} < error {err}",
            n + 1,
            bound[n]
        );
    }
}

#[test]
fn error_report_series_and_serialization() {
    let sys = ParticleSystem::new(vec![1.0, 1.0], 0.0).unwrap();
    // H vanishes at unit separation, so keep the pair further apart.
    let fom = [vec![0.0, 2.0, 0.0, 0.0], vec![0.0, 3.0, 0.0, 0.0]];
    let rom = [vec![0.0, 2.0, 0.0, 0.0], vec![0.1, 3.1, 0.0, 0.0]];
    let rep = ErrorReport::compute(
        fom.iter().map(Vec::as_slice),
        rom.iter().map(Vec::as_slice),
        &sys,
        1.0,
    )
    .unwrap()
    .with_speedup(3.0);
    assert_eq!(rep.ae_h.len(), 2);
    assert_eq!(rep.ae_h[0], 0.0);
    assert!((rep.mae_d[1] - 0.1).abs() < 1e-15);
    assert!((rep.mean_mae_d - 0.05).abs() < 1e-15);
    assert_eq!(rep.sf, Some(3.0));
    let csv = rep.to_csv();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.starts_with("step,ae_h,mae_d\n1,"));
    let js = rep.summary_json();
    assert_eq!(js["steps"], 2);
    assert!(js.get("sf").is_none());
}

fn state(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0..5.0f64, 2 * n)
}

proptest! {
    #[test]
    fn mae_is_nonnegative_and_zero_on_identical_input(a in state(6), b in state(6), l in 0.1..10.0f64) {
        prop_assert!(mae_trajectory(&a, &b, l).unwrap() >= 0.0);
        prop_assert_eq!(mae_trajectory(&a, &a, l).unwrap(), 0.0);
    }

    #[test]
    fn mae_is_translation_invariant(a in state(5), b in state(5), s in [-3.0..3.0f64, -3.0..3.0f64]) {
        let shift = |v: &[f64]| -> Vec<f64> { (0..10).map(|k| v[k] + s[k / 5]).collect() };
        let (m0, m1) = (mae_trajectory(&a, &b, 1.0).unwrap(), mae_trajectory(&shift(&a), &shift(&b), 1.0).unwrap());
        prop_assert!((m0 - m1).abs() <= 1e-12 * m0.max(1.0));
    }

    #[test]
    fn ae_h_is_nonnegative(h in prop_oneof![-10.0..-0.1f64, 0.1..10.0f64], g in -10.0..10.0f64) {
        prop_assert!(ae_hamiltonian(h, g).unwrap() >= 0.0);
        prop_assert_eq!(ae_hamiltonian(h, h).unwrap(), 0.0);
    }

    #[test]
    fn bound_is_nondecreasing_for_constant_residuals(rho in 0.0..1.0f64, kappa in 0.0..10.0f64, d0 in 0.0..1.0f64) {
        for form in [EtaForm::Triangle, EtaForm::Published] {
            let b = state_error_bound(&[rho; 30], kappa, 0.01, &MultistepScheme::trapezoidal(), &[d0], form).unwrap();
            prop_assert!(b.iter().all(|&v| v >= 0.0));
            if form == EtaForm::Triangle {
                prop_assert!(b[0] >= d0);
                prop_assert!(b.windows(2).all(|w| w[1] >= w[0]));
            }
        }
    }
}
