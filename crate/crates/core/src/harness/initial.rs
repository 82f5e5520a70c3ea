//! Initial states, circulation vectors and parametric sample points.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{
    CirculationLayout, ExperimentConfig, InflowProfile, LinearLayout, ParametricSpace,
};
use crate::error::{Error, Result};
use crate::kernel::ParticleSystem;

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    // Endpoints are exact; interior points interpolate from both ends.
    (0..n)
        .map(|k| {
            let s = k as f64 / (n - 1) as f64;
            if k == n - 1 {
                b
            } else {
                a + (b - a) * s
            }
        })
        .collect()
}

/// State vector `[χ₁..χ_N, ψ₁..ψ_N]` for particles spread uniformly along `layout`.
pub fn linear_positions(layout: &LinearLayout, n: usize) -> Vec<f64> {
    let mut x = linspace(layout.start[0], layout.end[0], n);
    x.extend(linspace(layout.start[1], layout.end[1], n));
    x
}

/// Index of the center particle in the single-vortex layout.
pub fn center_index(n: usize) -> usize {
    (n - 1) / 2
}

/// Circulations for parametric point `mu` (ignored by non-parametric layouts).
pub fn circulation_for(cfg: &ExperimentConfig, mu: Option<[f64; 2]>) -> Result<Vec<f64>> {
    let n = cfg.n;
    match &cfg.circulation {
        CirculationLayout::EndParticles { background } => {
            let mu = mu.ok_or_else(|| {
                Error::Config("end-particle circulation needs a parametric point".into())
            })?;
            let mut g = vec![*background; n];
            g[0] = mu[0];
            g[n - 1] = mu[1];
            Ok(g)
        }
        CirculationLayout::Center {
            gamma_center,
            background,
        } => {
            let mut g = vec![*background; n];
            g[center_index(n)] = *gamma_center;
            Ok(g)
        }
        CirculationLayout::Explicit { gamma } => Ok(gamma.clone()),
    }
}

/// Per-particle inflow velocity in state layout.
pub fn inflow_velocity(profile: &InflowProfile, n: usize) -> Result<Vec<f64>> {
    let chi = linspace(profile.span[0], profile.span[1], n);
    let mut v = vec![0.0; 2 * n];
    for (i, c) in chi.iter().enumerate() {
        let arg = profile.radius * profile.radius - c * c;
        if arg < 0.0 {
            return Err(Error::Config(format!(
                "inflow span {:?} exceeds radius {}",
                profile.span, profile.radius
            )));
        }
        v[n + i] = profile.amplitude * arg.sqrt() + profile.offset;
    }
    Ok(v)
}

/// Initial state and particle system for parametric point `mu`.
pub fn generate_initial_conditions(
    cfg: &ExperimentConfig,
    mu: Option<[f64; 2]>,
) -> Result<(Vec<f64>, ParticleSystem)> {
    cfg.validate()?;
    let x0 = linear_positions(&cfg.positions, cfg.n);
    let mut sys = ParticleSystem::new(circulation_for(cfg, mu)?, cfg.delta_k)?;
    if let Some(profile) = &cfg.inflow {
        sys = sys.with_inflow(inflow_velocity(profile, cfg.n)?)?;
    }
    Ok((x0, sys))
}

/// Seeded Latin-hypercube sample of `count` points in the box.
pub fn latin_hypercube(space: &ParametricSpace, count: usize, seed: u64) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut strata: [Vec<usize>; 2] = [(0..count).collect(), (0..count).collect()];
    for s in &mut strata {
        s.shuffle(&mut rng);
    }
    (0..count)
        .map(|k| {
            let mut p = [0.0; 2];
            for d in 0..2 {
                let u: f64 = rng.random();
                let frac = (strata[d][k] as f64 + u) / count as f64;
                p[d] = space.lower[d] + frac * (space.upper[d] - space.lower[d]);
            }
            p
        })
        .collect()
}

/// Training points: explicit ones when given, the seeded LHS draw otherwise.
pub fn training_points(space: &ParametricSpace, seed: u64) -> Vec<[f64; 2]> {
    space
        .training_points
        .clone()
        .unwrap_or_else(|| latin_hypercube(space, space.n_training, seed))
}

/// Query grid vertices, `μ₂` varying slowest.
pub fn query_points(space: &ParametricSpace) -> Vec<[f64; 2]> {
    let a = linspace(space.lower[0], space.upper[0], space.query_grid[0]);
    let b = linspace(space.lower[1], space.upper[1], space.query_grid[1]);
    b.iter()
        .flat_map(|&y| a.iter().map(move |&x| [x, y]))
        .collect()
}
