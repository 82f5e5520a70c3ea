//! Non-dimensional velocity magnitude of the vortex pair on a lattice,
//! written as CSV for external plotting.
//!
//! Usage: `velocity_field [out.csv]`.

use std::fmt::Write as _;
use std::path::PathBuf;

use ptrom::harness::{generate_initial_conditions, ExperimentConfig};
use ptrom::kernel::{velocity_field_grid, FieldNormalization, Lattice};
use ptrom::metrics::characteristic_length;

fn main() -> ptrom::Result<()> {
    let out = std::env::args().nth(1).map_or_else(
        || std::env::temp_dir().join("ptrom_velocity_field.csv"),
        PathBuf::from,
    );
    let cfg = ExperimentConfig::vortex_pair();
    let mu = [255.0, 255.0];
    let (x0, sys) = generate_initial_conditions(&cfg, Some(mu))?;
    let l = characteristic_length(&x0)?;
    let lattice = Lattice {
        x_min: -60.0,
        x_max: 60.0,
        y_min: -60.0,
        y_max: 60.0,
        nx: 121,
        ny: 121,
    };
    let norm = FieldNormalization {
        length_scale: l,
        c_g: 1.25,
        gamma_bar: mu[0],
    };
    let field = velocity_field_grid(&x0, &sys, lattice, norm)?;

    let mut csv = String::from("x,y,f_g\n");
    for iy in 0..lattice.ny {
        for ix in 0..lattice.nx {
            let [x, y] = lattice.vertex(ix, iy);
            let _ = writeln!(csv, "{x},{y},{:e}", field.at(ix, iy));
        }
    }
    ptrom::io::write_text(&out, &csv)?;
    let max = field.values.iter().copied().fold(0.0, f64::max);
    println!(
        "l = {l:.3}, l_g = {:.3}; max f_g = {max:.3e}; wrote {}",
        1.25 * l,
        out.display()
    );
    Ok(())
}
