mod common;

use common::random_orthonormal;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use proptest::prelude::*;
use ptrom::linalg::orthonormality_error;
use ptrom::quadtree::Criterion;
use ptrom::reduction::{
    build_pod, build_residual_basis, cluster_pod, gnat_operator, greedy_sample, weighted_pod_space,
    Centering, PodBasis, SurrogateSourceBasis,
};
use ptrom::Error;
use rand::Rng;

/// Singular values of `s` from the eigenvalues of `sᵀs`, descending.
fn gram_singular_values(s: &DMatrix<f64>) -> Vec<f64> {
    let eig = SymmetricEigen::new(s.transpose() * s);
    let mut v: Vec<f64> = eig.eigenvalues.iter().map(|l| l.max(0.0).sqrt()).collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

fn random_matrix(seed: u64, rows: usize, cols: usize) -> DMatrix<f64> {
    let mut rng = common::rng(seed);
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

fn check_against_gram_oracle(s: &DMatrix<f64>, m: usize) {
    let b = build_pod(s, m, &vec![0.0; s.nrows()], Centering::Raw).unwrap();
    let sv = gram_singular_values(s);
    let k = s.nrows().min(s.ncols());
    for i in 0..m {
        assert!(
            (b.singular_values[i] - sv[i]).abs() <= 1e-10 * sv[0],
            "σ_{i}: {} vs {}",
            b.singular_values[i],
            sv[i]
        );
    }
    assert!(b
        .singular_values
        .windows(2)
        .all(|w| w[0] >= w[1] && w[1] >= 0.0));
    assert!(orthonormality_error(&b.phi) <= 1e-10);
    // Residual energy of the projection equals the discarded spectrum.
    let resid = s - &b.phi * (b.phi.transpose() * s);
    let tail: f64 = sv[m..k].iter().map(|x| x * x).sum();
    assert!((resid.norm_squared() - tail).abs() <= 1e-8 * s.norm_squared());
    let total: f64 = sv[..k].iter().map(|x| x * x).sum();
    let kept: f64 = sv[..m].iter().map(|x| x * x).sum();
    assert!((b.energy_fraction() - kept / total).abs() < 1e-10);
    // Sign convention: the largest-magnitude entry of every column is positive.
    for col in b.phi.column_iter() {
        let big = col
            .iter()
            .copied()
            .max_by(|a, b| a.abs().total_cmp(&b.abs()))
            .unwrap();
        assert!(big > 0.0);
    }
}

#[test]
fn pod_of_tall_matrix_matches_gram_oracle() {
    check_against_gram_oracle(&random_matrix(1, 20, 10), 6);
}

#[test]
fn pod_of_wide_matrix_matches_gram_oracle() {
    check_against_gram_oracle(&random_matrix(2, 30, 80), 12);
}

#[test]
fn pod_of_large_square_matrix_matches_gram_oracle() {
    check_against_gram_oracle(&random_matrix(3, 300, 290), 20);
}

#[test]
fn pod_rejects_rank_beyond_the_data() {
    let c = random_matrix(4, 12, 1);
    let s = DMatrix::from_fn(12, 3, |r, _| c[(r, 0)]);
    assert!(matches!(
        build_pod(&s, 2, &[0.0; 12], Centering::Raw),
        Err(Error::RankExceeded {
            numerical_rank: 1,
            ..
        })
    ));
    assert!(build_pod(&s, 0, &[0.0; 12], Centering::Raw).is_err());
}

#[test]
fn reference_centering_represents_every_snapshot() {
    let mut rng = common::rng(5);
    let x_ref: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
    let dirs = random_orthonormal(&mut rng, 16, 3);
    let coeffs = random_matrix(6, 3, 9);
    let s = DMatrix::from_fn(16, 9, |r, c| x_ref[r] + (dirs.row(r) * coeffs.column(c))[0]);
    let b = build_pod(&s, 3, &x_ref, Centering::Reference).unwrap();
    for col in s.column_iter() {
        let x: Vec<f64> = col.iter().copied().collect();
        let back = b.reconstruct(&b.project(&x).unwrap());
        assert!(common::max_abs_diff(&back, &x) < 1e-12);
    }
    // The reference state itself maps to zero coordinates.
    assert!(b.project(&x_ref).unwrap().amax() < 1e-14);
}

#[test]
fn weighted_space_examples() {
    let phi = DMatrix::from_column_slice(4, 1, &[0.5, 0.5, 0.5, 0.5]);
    let b = PodBasis {
        phi,
        singular_values: vec![2.0],
        spectrum: vec![2.0],
        x_ref: vec![0.0; 4],
    };
    assert_eq!(weighted_pod_space(&b), vec![1.0; 4]);
    let phi = DMatrix::from_column_slice(4, 2, &[0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
    let b = PodBasis {
        phi,
        singular_values: vec![3.0, 7.0],
        spectrum: vec![3.0, 7.0],
        x_ref: vec![0.0; 4],
    };
    assert_eq!(weighted_pod_space(&b), vec![0.0, 3.0, 0.0, 7.0]);
}

/// Straight-line greedy selection: iteration `it` fits the next group of
/// working columns on the dofs chosen so far (SVD least squares) and adds the
/// particles with the largest remaining two-dof energy, lowest index on ties.
fn greedy_oracle(phi_r: &DMatrix<f64>, n_target: usize, preseed: &[usize]) -> Vec<usize> {
    let n = phi_r.nrows() / 2;
    let m_r = phi_r.ncols();
    let mut chosen: Vec<usize> = Vec::new();
    for &p in preseed {
        if !chosen.contains(&p) {
            chosen.push(p);
        }
    }
    let n_a = n_target - chosen.len();
    if n_a > 0 {
        let n_c = m_r.min(2 * n_target);
        let n_it = n_c.min(n_a);
        let mut done = 0;
        for it in 0..n_it {
            let n_ci = n_c / n_it + usize::from(it < n_c % n_it);
            let n_ai = n_a / n_it + usize::from(it < n_a % n_it);
            let mut work = phi_r.columns(done, n_ci).into_owned();
            if done > 0 && !chosen.is_empty() {
                let rows: Vec<usize> = chosen.iter().flat_map(|&l| [l, l + n]).collect();
                let lhs = DMatrix::from_fn(rows.len(), done, |r, c| phi_r[(rows[r], c)]);
                let svd = lhs.svd(true, true);
                for q in 0..n_ci {
                    let rhs = DVector::from_fn(rows.len(), |r, _| phi_r[(rows[r], done + q)]);
                    let coef = svd.solve(&rhs, 1e-12).unwrap();
                    let fit = phi_r.columns(0, done) * coef;
                    for r in 0..2 * n {
                        work[(r, q)] -= fit[r];
                    }
                }
            }
            for _ in 0..n_ai {
                let score = |l: usize| {
                    (0..n_ci)
                        .map(|q| work[(l, q)].powi(2) + work[(l + n, q)].powi(2))
                        .sum::<f64>()
                };
                let mut best = None::<(usize, f64)>;
                for l in (0..n).filter(|l| !chosen.contains(l)) {
                    let s = score(l);
                    if best.is_none_or(|(_, b)| s > b) {
                        best = Some((l, s));
                    }
                }
                chosen.push(best.unwrap().0);
            }
            done += n_ci;
        }
    }
    chosen.sort_unstable();
    chosen
}

#[test]
fn greedy_examples() {
    let mut phi = DMatrix::zeros(12, 1);
    phi[(3, 0)] = 0.6;
    phi[(9, 0)] = 0.8;
    assert_eq!(greedy_sample(&phi, 1, &[]).unwrap(), vec![3]);
    let phi = random_matrix(8, 12, 2);
    assert_eq!(greedy_sample(&phi, 1, &[1]).unwrap(), vec![1]);
    assert!(greedy_sample(&phi, 7, &[]).is_err());
}

proptest! {
    #[test]
    fn greedy_matches_straight_line_oracle(seed in any::<u64>(), n in 6usize..25, m_r in 1usize..10, n_target in 1usize..6, with_seed in any::<bool>()) {
        prop_assume!(n_target <= n);
        let mut rng = common::rng(seed);
        let phi_r = random_orthonormal(&mut rng, 2 * n, m_r.min(2 * n));
        let preseed: Vec<usize> = if with_seed { vec![n - 1] } else { vec![] };
        let got = greedy_sample(&phi_r, n_target, &preseed).unwrap();
        prop_assert_eq!(got.len(), n_target);
        prop_assert_eq!(got, greedy_oracle(&phi_r, n_target, &preseed));
    }

    #[test]
    fn gappy_operator_inverts_the_sampled_basis(seed in any::<u64>(), n in 4usize..40, m_r in 1usize..12) {
        let mut rng = common::rng(seed);
        let m_r = m_r.min(2 * n);
        let phi_r = random_orthonormal(&mut rng, 2 * n, m_r);
        let mut ids: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.5)).collect();
        prop_assume!(2 * ids.len() >= m_r && !ids.is_empty());
        ids.sort_unstable();
        let dofs: Vec<usize> = ids.iter().copied().chain(ids.iter().map(|&i| i + n)).collect();
        let p_phi = DMatrix::from_fn(dofs.len(), m_r, |r, c| phi_r[(dofs[r], c)]);
        let sv = p_phi.singular_values();
        // Square random samples can be arbitrarily close to singular; the identity
        // is only meaningful to 1e-10 when the sampled basis is well conditioned.
        prop_assume!(sv.max() / sv.min() < 1e4);
        let op = gnat_operator(&phi_r, &ids).unwrap();
        prop_assert_eq!(&op.sampled_dofs, &dofs);
        let eye = &op.a * p_phi;
        prop_assert!((eye - DMatrix::identity(m_r, m_r)).amax() <= 1e-10);
    }
}

#[test]
fn gappy_operator_examples() {
    let mut rng = common::rng(9);
    let phi_r = random_orthonormal(&mut rng, 10, 4);
    let op = gnat_operator(&phi_r, &[0, 1, 2, 3, 4]).unwrap();
    assert_eq!(op.sampled_dofs, (0..10).collect::<Vec<_>>());
    assert!((&op.a - phi_r.transpose()).amax() < 1e-12);

    let col = DMatrix::from_column_slice(4, 1, &[0.6, 0.0, 0.8, 0.0]);
    let op = gnat_operator(&col, &[0]).unwrap();
    assert!((op.a[(0, 0)] - 0.6).abs() < 1e-15 && (op.a[(0, 1)] - 0.8).abs() < 1e-15);

    // Two columns that coincide on the sampled rows cannot be told apart.
    let phi = DMatrix::from_column_slice(4, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
    assert!(matches!(
        gnat_operator(&phi, &[0]),
        Err(Error::RankDeficient { .. })
    ));
    assert!(gnat_operator(&random_orthonormal(&mut rng, 10, 4), &[2]).is_err());
}

#[test]
fn residual_basis_is_orthonormal() {
    let r = build_residual_basis(&random_matrix(10, 40, 25), 7).unwrap();
    assert_eq!(r.m_r(), 7);
    assert!(orthonormality_error(&r.phi_r) < 1e-10);
}

struct Setup {
    basis: PodBasis,
    gamma: Vec<f64>,
    x0: Vec<f64>,
    targets: Vec<usize>,
}

fn setup(seed: u64, n: usize, m: usize) -> Setup {
    let mut rng = common::rng(seed);
    let phi = random_orthonormal(&mut rng, 2 * n, m);
    let sv: Vec<f64> = (0..m).map(|k| 10.0 / (k + 1) as f64).collect();
    let x0 = common::random_state(&mut rng, n);
    let basis = PodBasis {
        phi,
        spectrum: sv.clone(),
        singular_values: sv,
        x_ref: x0.clone(),
    };
    let gamma: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..2.0)).collect();
    let targets: Vec<usize> = (0..n).filter(|k| k % 3 == 1).collect();
    Setup {
        basis,
        gamma,
        x0,
        targets,
    }
}

fn surrogate(s: &Setup, c: Criterion) -> SurrogateSourceBasis {
    cluster_pod(&s.basis, &s.gamma, &s.x0, &s.targets, c, 1).unwrap()
}

fn criteria() -> [Criterion; 3] {
    [
        Criterion::Neighbor { p_c: 0.0 },
        Criterion::Neighbor { p_c: 1.0 },
        Criterion::BarnesHut { theta: 0.8 },
    ]
}

#[test]
fn surrogate_lists_partition_the_other_particles() {
    let s = setup(20, 60, 4);
    for c in criteria() {
        let sur = surrogate(&s, c);
        for (k, &t) in sur.target_ids.iter().enumerate() {
            let mut seen = vec![0; 60];
            for &c in &sur.per_target_clusters[k] {
                for &j in &sur.cluster_membership[c] {
                    seen[j] += 1;
                }
            }
            for &d in &sur.per_target_direct[k] {
                seen[sur.direct_ids[d]] += 1;
            }
            for (j, &v) in seen.iter().enumerate() {
                assert_eq!(v, usize::from(j != t), "{c:?}: target {t}, particle {j}");
            }
        }
        assert!(sur.n_clusters() > 0 || matches!(c, Criterion::BarnesHut { .. }));
    }
}

#[test]
fn cluster_rows_are_circulation_weighted_means() {
    let s = setup(21, 60, 4);
    let n = 60;
    for c in criteria() {
        let sur = surrogate(&s, c);
        let nc = sur.n_clusters();
        for (k, members) in sur.cluster_membership.iter().enumerate() {
            let gs: f64 = members.iter().map(|&j| s.gamma[j]).sum();
            assert!((sur.gamma_tilde[k] - gs).abs() < 1e-13);
            for col in 0..4 {
                let chi: f64 = members
                    .iter()
                    .map(|&j| s.gamma[j] * s.basis.phi[(j, col)])
                    .sum::<f64>()
                    / gs;
                let psi: f64 = members
                    .iter()
                    .map(|&j| s.gamma[j] * s.basis.phi[(j + n, col)])
                    .sum::<f64>()
                    / gs;
                assert!((sur.phi_tilde[(k, col)] - chi).abs() < 1e-13);
                assert!((sur.phi_tilde[(k + nc, col)] - psi).abs() < 1e-13);
            }
            let x: f64 = members.iter().map(|&j| s.gamma[j] * s.x0[j]).sum::<f64>() / gs;
            assert!((sur.x0_tilde[k] - x).abs() < 1e-13);
        }
        let nd = sur.n_direct();
        for (k, &j) in sur.direct_ids.iter().enumerate() {
            for col in 0..4 {
                assert!((sur.direct_phi[(k, col)] - s.basis.phi[(j, col)]).abs() < 1e-15);
                assert!((sur.direct_phi[(k + nd, col)] - s.basis.phi[(j + n, col)]).abs() < 1e-15);
            }
        }
    }
}

#[test]
fn equal_circulations_give_arithmetic_means() {
    let mut s = setup(22, 40, 3);
    s.gamma = vec![0.7; 40];
    let sur = surrogate(&s, Criterion::Neighbor { p_c: 0.0 });
    let pair = sur
        .cluster_membership
        .iter()
        .position(|m| m.len() >= 2)
        .expect("some multi-member cluster");
    let members = &sur.cluster_membership[pair];
    let k = members.len() as f64;
    for col in 0..3 {
        let mean = members.iter().map(|&j| s.basis.phi[(j, col)]).sum::<f64>() / k;
        assert!((sur.phi_tilde[(pair, col)] - mean).abs() < 1e-14);
    }
}

#[test]
fn huge_neighborhood_leaves_only_direct_sources() {
    let s = setup(23, 30, 3);
    let sur = surrogate(&s, Criterion::Neighbor { p_c: 1e6 });
    assert_eq!(sur.n_clusters(), 0);
    assert!(sur.per_target_clusters.iter().all(Vec::is_empty));
    assert!(sur.per_target_direct.iter().all(|d| d.len() == 29));
}

#[test]
fn cluster_rows_are_linear_in_the_basis() {
    let s = setup(24, 50, 4);
    for a in [2.0, 0.5] {
        let scaled = Setup {
            basis: PodBasis {
                phi: &s.basis.phi * a,
                ..s.basis.clone()
            },
            ..setup(24, 50, 4)
        };
        for c in criteria() {
            let (base, sc) = (surrogate(&s, c), surrogate(&scaled, c));
            assert_eq!(base.cluster_membership, sc.cluster_membership);
            assert!((&base.phi_tilde * a - &sc.phi_tilde).amax() < 1e-13);
        }
    }
}

#[test]
fn circulation_reassignment() {
    let s = setup(25, 50, 4);
    let sur = surrogate(&s, Criterion::Neighbor { p_c: 1.0 });
    let same = sur
        .reassign_cluster_circulation(&s.basis, &s.x0, &s.gamma)
        .unwrap();
    assert_eq!(same, sur);
    let doubled: Vec<f64> = s.gamma.iter().map(|g| 2.0 * g).collect();
    let d = sur
        .reassign_cluster_circulation(&s.basis, &s.x0, &doubled)
        .unwrap();
    assert_eq!(d.cluster_membership, sur.cluster_membership);
    for (a, b) in d.gamma_tilde.iter().zip(&sur.gamma_tilde) {
        assert!((a - 2.0 * b).abs() < 1e-13);
    }
    assert!((&d.phi_tilde - &sur.phi_tilde).amax() < 1e-14);
    assert!(sur
        .reassign_cluster_circulation(&s.basis, &s.x0, &s.gamma[1..])
        .is_err());
}

#[test]
fn clustering_is_deterministic() {
    let s = setup(26, 80, 5);
    for c in criteria() {
        assert_eq!(surrogate(&s, c), surrogate(&s, c));
    }
}

#[test]
fn empty_target_set_is_rejected() {
    let s = setup(27, 20, 3);
    assert!(cluster_pod(
        &s.basis,
        &s.gamma,
        &s.x0,
        &[],
        Criterion::Neighbor { p_c: 0.0 },
        1
    )
    .is_err());
}
