mod common;

use std::f64::consts::{E, PI};

use common::{interaction_matrix, max_abs_diff, oracle_velocity, separated_state};
use nalgebra::DVector;
use proptest::prelude::*;
use ptrom::kernel::{
    hamiltonian, inexact_kernel_jacobian, kernel_pair, pairwise_velocity, velocity_field_grid,
    Desingularization, FieldNormalization, Lattice,
};
use ptrom::{Error, ParticleSystem};

fn point() -> impl Strategy<Value = [f64; 2]> {
    [-10.0..10.0f64, -10.0..10.0f64]
}

#[test]
fn unit_pair_examples() {
    let v = kernel_pair([0.0, 0.0], [1.0, 0.0], 2.0 * PI, 0.0).unwrap();
    assert!((v[0]).abs() < 1e-15 && (v[1] + 1.0).abs() < 1e-15, "{v:?}");
    let v = kernel_pair([0.0, 0.0], [1.0, 0.0], 2.0 * PI, 1.0).unwrap();
    assert!((v[0]).abs() < 1e-15 && (v[1] + 0.5).abs() < 1e-15, "{v:?}");
}

#[test]
fn coincident_points_without_smoothing_are_singular() {
    assert!(matches!(
        kernel_pair([1.0, 2.0], [1.0, 2.0], 1.0, 0.0),
        Err(Error::Singularity { .. })
    ));
    // With δ > 0 the self-term is finite and zero.
    assert_eq!(
        kernel_pair([1.0, 2.0], [1.0, 2.0], 1.0, 0.1).unwrap(),
        [0.0, 0.0]
    );
    assert!(kernel_pair([0.0, 0.0], [1.0, 0.0], 1.0, -1.0).is_err());
}

#[test]
fn hamiltonian_of_two_unit_vortices_at_distance_e() {
    let sys = ParticleSystem::new(vec![1.0, 1.0], 0.0).unwrap();
    let h = hamiltonian(&[0.0, E, 0.0, 0.0], &sys).unwrap();
    assert!((h - 1.0 / (2.0 * PI)).abs() < 1e-15);
}

#[test]
fn scaled_form_matches_standard_with_rescaled_delta() {
    let mut rng = common::rng(3);
    let x = common::random_state(&mut rng, 12);
    let g = common::random_circulation(&mut rng, 12);
    let scaled = ParticleSystem::new(g.clone(), 0.3)
        .unwrap()
        .with_form(Desingularization::Scaled);
    let standard = ParticleSystem::new(g, 0.3 / (2.0 * PI)).unwrap();
    let a = pairwise_velocity(&x, &scaled).unwrap();
    let b = pairwise_velocity(&x, &standard).unwrap();
    assert!(max_abs_diff(&a, &b) < 1e-14);
}

#[test]
fn inflow_is_added_per_particle() {
    let mut rng = common::rng(5);
    let (x, sys) = common::random_system(&mut rng, 6, 0.05);
    let inflow: Vec<f64> = (0..12).map(|k| k as f64 * 0.1).collect();
    let with = sys.clone().with_inflow(inflow.clone()).unwrap();
    let a = pairwise_velocity(&x, &sys).unwrap();
    let b = pairwise_velocity(&x, &with).unwrap();
    let shifted: Vec<f64> = a.iter().zip(&inflow).map(|(p, q)| p + q).collect();
    assert!(max_abs_diff(&b, &shifted) < 1e-15);
}

#[test]
fn field_grid_vertex_matches_direct_sum() {
    let mut rng = common::rng(9);
    let (x, sys) = common::random_system(&mut rng, 8, 0.01);
    let lattice = Lattice {
        x_min: -1.5,
        x_max: 1.5,
        y_min: -1.0,
        y_max: 1.0,
        nx: 7,
        ny: 5,
    };
    let norm = FieldNormalization {
        length_scale: 2.0,
        c_g: 1.25,
        gamma_bar: 3.0,
    };
    let grid = velocity_field_grid(&x, &sys, lattice, norm).unwrap();
    assert_eq!(grid.values.len(), 35);
    for (ix, iy) in [(0, 0), (3, 2), (6, 4)] {
        let t = lattice.vertex(ix, iy);
        let mut v = [0.0; 2];
        for j in 0..8 {
            let p = kernel_pair(t, [x[j], x[j + 8]], sys.circulation()[j], sys.delta_k()).unwrap();
            v[0] += p[0];
            v[1] += p[1];
        }
        let expected = v[0].hypot(v[1]) * 1.25 * 2.0 / 3.0;
        assert!((grid.at(ix, iy) - expected).abs() <= 1e-13 * expected.max(1.0));
    }
}

proptest! {
    #[test]
    fn kernel_is_antisymmetric(a in point(), b in point(), g in -5.0..5.0f64, delta in 0.0..2.0f64) {
        prop_assume!(a != b);
        let ab = kernel_pair(a, b, g, delta).unwrap();
        let ba = kernel_pair(b, a, g, delta).unwrap();
        prop_assert!((ab[0] + ba[0]).abs() <= 1e-15 * ab[0].abs().max(1.0));
        prop_assert!((ab[1] + ba[1]).abs() <= 1e-15 * ab[1].abs().max(1.0));
    }

    #[test]
    fn unsmoothed_kernel_is_perpendicular_to_separation(a in point(), b in point(), g in -5.0..5.0f64) {
        let r = [a[0] - b[0], a[1] - b[1]];
        prop_assume!(r[0].hypot(r[1]) > 1e-6);
        let v = kernel_pair(a, b, g, 0.0).unwrap();
        let dot = v[0] * r[0] + v[1] * r[1];
        prop_assert!(dot.abs() <= 1e-14 * v[0].hypot(v[1]) * r[0].hypot(r[1]));
    }

    #[test]
    fn pairwise_velocity_equals_assembled_matrix(seed in any::<u64>(), n in 2usize..50, delta in prop_oneof![Just(0.0), 1e-3..1.0f64]) {
        let mut rng = common::rng(seed);
        let x = separated_state(&mut rng, n);
        let sys = ParticleSystem::new(common::random_circulation(&mut rng, n), delta).unwrap();
        let f = pairwise_velocity(&x, &sys).unwrap();
        let reference = oracle_velocity(&x, &sys);
        prop_assert!(common::dist(&f, &reference) <= 1e-13 * common::norm(&reference));
    }

    #[test]
    fn self_block_jacobian_matches_central_differences(seed in any::<u64>(), n in 2usize..20, delta in 0.01..1.0f64) {
        let mut rng = common::rng(seed);
        let (x, sys) = common::random_system(&mut rng, n, delta);
        let jac = inexact_kernel_jacobian(&x, &sys).unwrap();
        let h = 1e-6;
        for i in 0..n {
            for (col, dof) in [(0, i), (1, i + n)] {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[dof] += h;
                xm[dof] -= h;
                let (fp, fm) = (pairwise_velocity(&xp, &sys).unwrap(), pairwise_velocity(&xm, &sys).unwrap());
                let block = jac.block(i);
                for (row, out) in [(0, i), (1, i + n)] {
                    let fd = (fp[out] - fm[out]) / (2.0 * h);
                    let exact = block[row][col];
                    prop_assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1.0), "particle {i}: fd {fd} vs {exact}");
                }
            }
        }
    }

    #[test]
    fn hamiltonian_is_translation_invariant(seed in any::<u64>(), n in 2usize..30, shift in point()) {
        let mut rng = common::rng(seed);
        let x = separated_state(&mut rng, n);
        let sys = ParticleSystem::new(common::random_circulation(&mut rng, n), 0.0).unwrap();
        let moved: Vec<f64> = (0..2 * n).map(|k| x[k] + shift[k / n]).collect();
        let (h0, h1) = (hamiltonian(&x, &sys).unwrap(), hamiltonian(&moved, &sys).unwrap());
        let scale: f64 = sys.circulation().iter().map(|g| g.abs()).sum::<f64>().powi(2);
        prop_assert!((h0 - h1).abs() <= 1e-12 * scale);
    }

    #[test]
    fn velocity_is_linear_in_circulation(seed in any::<u64>(), n in 2usize..20, a in -3.0..3.0f64) {
        let mut rng = common::rng(seed);
        let (x, sys) = common::random_system(&mut rng, n, 0.05);
        let scaled = sys.with_circulation(sys.circulation().iter().map(|g| a * g).collect()).unwrap();
        let f = DVector::from_vec(pairwise_velocity(&x, &sys).unwrap());
        let fa = DVector::from_vec(pairwise_velocity(&x, &scaled).unwrap());
        prop_assert!((fa - f.clone() * a).amax() <= 1e-13 * f.amax().max(1.0) * a.abs().max(1.0));
    }
}

#[test]
fn assembled_matrix_has_zero_diagonal_blocks() {
    let mut rng = common::rng(1);
    let x = separated_state(&mut rng, 5);
    let k = interaction_matrix(&x, 0.0);
    for i in 0..5 {
        assert_eq!((k[(i, i)], k[(i + 5, i)]), (0.0, 0.0));
    }
}
