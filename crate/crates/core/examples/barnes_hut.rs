//! Barnes–Hut and neighbor-criterion treecodes against direct summation:
//! accuracy versus kernel evaluations on a random 1000-particle system.

use ptrom::kernel::{pairwise_velocity, VelocityModel};
use ptrom::quadtree::{BarnesHutField, Criterion};
use ptrom::ParticleSystem;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> ptrom::Result<()> {
    let n = 1000;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let x: Vec<f64> = (0..2 * n).map(|_| rng.random_range(-10.0..10.0)).collect();
    let gamma: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    let sys = ParticleSystem::new(gamma, 0.01)?;
    let exact = pairwise_velocity(&x, &sys)?;
    let norm = exact.iter().map(|v| v * v).sum::<f64>().sqrt();
    println!("direct summation: {} kernel evaluations", n * (n - 1));

    let criteria = [
        Criterion::BarnesHut { theta: 0.0 },
        Criterion::BarnesHut { theta: 0.5 },
        Criterion::BarnesHut { theta: 1.0 },
        Criterion::BarnesHut { theta: 2.0 },
        Criterion::Neighbor { p_c: 0.0 },
        Criterion::Neighbor { p_c: 1.0 },
    ];
    for c in criteria {
        for cap in [1, 8] {
            let mut field = BarnesHutField::new(&sys, c, cap)?;
            let v = field.velocity(&x)?;
            let err = v
                .iter()
                .zip(&exact)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt()
                / norm;
            println!(
                "{c:?}, leaf capacity {cap}: relative error {err:.2e}, {} kernel evaluations",
                field.kernel_evaluations
            );
        }
    }
    Ok(())
}
