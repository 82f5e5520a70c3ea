//! Helpers shared by the integration tests: seeded random systems and
//! independent re-implementations used as oracles.
#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use ptrom::ParticleSystem;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Positions uniform in `[-1, 1]²`, laid out as `[χ.. | ψ..]`.
pub fn random_state(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..2 * n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Circulations uniform in `[-2, 2]`.
pub fn random_circulation(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()
}

pub fn random_system(rng: &mut ChaCha8Rng, n: usize, delta_k: f64) -> (Vec<f64>, ParticleSystem) {
    let x = random_state(rng, n);
    let sys = ParticleSystem::new(random_circulation(rng, n), delta_k).unwrap();
    (x, sys)
}

/// Jittered lattice: every pair at least `0.5 / side` apart, where `side = ⌈√n⌉`.
pub fn separated_state(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let side = (n as f64).sqrt().ceil() as usize;
    let h = 2.0 / side as f64;
    let mut x = vec![0.0; 2 * n];
    for i in 0..n {
        let (a, b) = (i % side, i / side);
        x[i] = -1.0 + h * (a as f64 + 0.5 + rng.random_range(-0.25..0.25));
        x[i + n] = -1.0 + h * (b as f64 + 0.5 + rng.random_range(-0.25..0.25));
    }
    x
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q).abs())
        .fold(0.0, f64::max)
}

/// The `2N × N` interaction matrix `K` with `f = K γ`, assembled entry by entry.
pub fn interaction_matrix(x: &[f64], delta: f64) -> DMatrix<f64> {
    let n = x.len() / 2;
    DMatrix::from_fn(2 * n, n, |r, j| {
        let i = r % n;
        if i == j {
            return 0.0;
        }
        let (dx, dy) = (x[i] - x[j], x[i + n] - x[j + n]);
        let w = 1.0 / (2.0 * PI * (dx * dx + dy * dy + delta));
        if r < n {
            -dy * w
        } else {
            dx * w
        }
    })
}

pub fn oracle_velocity(x: &[f64], sys: &ParticleSystem) -> Vec<f64> {
    let k = interaction_matrix(x, sys.effective_delta());
    (k * DVector::from_column_slice(sys.circulation()))
        .as_slice()
        .to_vec()
}

/// Random `rows × cols` matrix with orthonormal columns (QR of a Gaussian-ish draw).
pub fn random_orthonormal(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0));
    a.qr().q().columns(0, cols).into_owned()
}

/// A small random system with its implicit full-order trajectory.
pub struct SmallProblem {
    pub sys: ParticleSystem,
    pub x0: Vec<f64>,
    pub grid: ptrom::integrators::TimeGrid,
    pub fom: ptrom::integrators::FomRun,
}

pub fn small_problem(seed: u64, n: usize, steps: usize) -> SmallProblem {
    use ptrom::integrators::{fom_simulate, NewtonConfig, TimeGrid};
    let mut rng = rng(seed);
    let x0 = separated_state(&mut rng, n);
    let sys = ParticleSystem::new(random_circulation(&mut rng, n), 0.05).unwrap();
    let grid = TimeGrid::new(2e-3, steps, 0.0).unwrap();
    let newton = NewtonConfig {
        tol: 1e-12,
        ..NewtonConfig::default()
    };
    let fom = fom_simulate(&x0, &mut ptrom::kernel::Pairwise::new(&sys), grid, newton).unwrap();
    SmallProblem { sys, x0, grid, fom }
}

/// `N_d × N_d` identity basis around `x_ref`.
pub fn identity_basis(x_ref: &[f64]) -> ptrom::reduction::PodBasis {
    let nd = x_ref.len();
    ptrom::reduction::PodBasis {
        phi: DMatrix::identity(nd, nd),
        singular_values: vec![1.0; nd],
        spectrum: vec![1.0; nd],
        x_ref: x_ref.to_vec(),
    }
}
