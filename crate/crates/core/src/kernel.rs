//! Two-dimensional Biot–Savart point-vortex kernel.
//!
//! Positions live in a flat `2N` vector laid out as `[χ₁..χ_N, ψ₁..ψ_N]`:
//! particle `i` owns entries `i` (χ) and `i + N` (ψ). Velocities use the same
//! layout. Every pairwise sum in this module runs over sources in ascending
//! index order so results are bit-reproducible.

use std::f64::consts::PI;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Where the de-singularization constant enters the kernel denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Desingularization {
    /// `Γ/(2π) · (ê₃ × r) / (‖r‖² + δ)`.
    #[default]
    Standard,
    /// `Γ · (ê₃ × r) / (2π‖r‖² + δ)`, equivalent to the standard form with `δ/2π`.
    Scaled,
}

/// Circulations, de-singularization and optional inflow of an `N`-particle system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleSystem {
    circulation: Vec<f64>,
    delta_k: f64,
    #[serde(default)]
    inflow: Option<Vec<f64>>,
    #[serde(default)]
    form: Desingularization,
}

impl ParticleSystem {
    pub fn new(circulation: Vec<f64>, delta_k: f64) -> Result<Self> {
        if circulation.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "a particle system needs at least 2 particles, got {}",
                circulation.len()
            )));
        }
        if !(delta_k >= 0.0) || !delta_k.is_finite() {
            return Err(Error::InvalidInput(format!(
                "delta_k must be finite and >= 0, got {delta_k}"
            )));
        }
        if circulation.iter().any(|g| !g.is_finite()) {
            return Err(Error::InvalidInput("non-finite circulation".into()));
        }
        Ok(Self {
            circulation,
            delta_k,
            inflow: None,
            form: Desingularization::Standard,
        })
    }

    /// Adds a constant per-particle velocity (length `2N`, state layout).
    pub fn with_inflow(mut self, inflow: Vec<f64>) -> Result<Self> {
        check_len("inflow", 2 * self.n(), inflow.len())?;
        if inflow.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite inflow".into()));
        }
        self.inflow = Some(inflow);
        Ok(self)
    }

    pub fn with_form(mut self, form: Desingularization) -> Self {
        self.form = form;
        self
    }

    pub fn n(&self) -> usize {
        self.circulation.len()
    }

    pub fn circulation(&self) -> &[f64] {
        &self.circulation
    }

    pub fn delta_k(&self) -> f64 {
        self.delta_k
    }

    pub fn inflow(&self) -> Option<&[f64]> {
        self.inflow.as_deref()
    }

    pub fn form(&self) -> Desingularization {
        self.form
    }

    /// Same system with a different circulation vector.
    pub fn with_circulation(&self, circulation: Vec<f64>) -> Result<Self> {
        check_len("circulation", self.n(), circulation.len())?;
        let mut out = self.clone();
        if circulation.iter().any(|g| !g.is_finite()) {
            return Err(Error::InvalidInput("non-finite circulation".into()));
        }
        out.circulation = circulation;
        Ok(out)
    }

    /// δ as it enters `‖r‖² + δ` for the configured form.
    pub fn effective_delta(&self) -> f64 {
        match self.form {
            Desingularization::Standard => self.delta_k,
            Desingularization::Scaled => self.delta_k / (2.0 * PI),
        }
    }
}

/// Particle positions in `[χ₁..χ_N, ψ₁..ψ_N]` layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector(Vec<f64>);

impl StateVector {
    pub fn new(x: Vec<f64>) -> Result<Self> {
        if !x.len().is_multiple_of(2) || x.is_empty() {
            return Err(Error::InvalidInput(format!(
                "state length must be a positive even number, got {}",
                x.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite state entry".into()));
        }
        Ok(Self(x))
    }

    pub fn from_positions(points: &[[f64; 2]]) -> Result<Self> {
        let n = points.len();
        let mut x = vec![0.0; 2 * n];
        for (i, p) in points.iter().enumerate() {
            x[i] = p[0];
            x[i + n] = p[1];
        }
        Self::new(x)
    }

    pub fn n(&self) -> usize {
        self.0.len() / 2
    }

    pub fn position(&self, i: usize) -> [f64; 2] {
        position(&self.0, i)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for StateVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

#[inline]
pub(crate) fn position(x: &[f64], i: usize) -> [f64; 2] {
    let n = x.len() / 2;
    [x[i], x[i + n]]
}

/// Diagonals of the four `N×N` quadrant blocks of `∂f/∂x`.
///
/// Entry `i` of each vector is one element of particle `i`'s 2×2 self-block:
/// `[[xx, xy], [yx, yy]] = ∂(f_i, f_{i+N}) / ∂(x_i, x_{i+N})`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDiagonalJacobian {
    pub xx: Vec<f64>,
    pub xy: Vec<f64>,
    pub yx: Vec<f64>,
    pub yy: Vec<f64>,
}

impl BlockDiagonalJacobian {
    pub fn zeros(n: usize) -> Self {
        Self {
            xx: vec![0.0; n],
            xy: vec![0.0; n],
            yx: vec![0.0; n],
            yy: vec![0.0; n],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            xx: vec![1.0; n],
            xy: vec![0.0; n],
            yx: vec![0.0; n],
            yy: vec![1.0; n],
        }
    }

    pub fn n(&self) -> usize {
        self.xx.len()
    }

    pub fn block(&self, i: usize) -> [[f64; 2]; 2] {
        [[self.xx[i], self.xy[i]], [self.yx[i], self.yy[i]]]
    }

    /// `y = J v` for a vector in state layout.
    pub fn apply(&self, v: &[f64], y: &mut [f64]) {
        let n = self.n();
        for i in 0..n {
            let (a, b) = (v[i], v[i + n]);
            y[i] = self.xx[i] * a + self.xy[i] * b;
            y[i + n] = self.yx[i] * a + self.yy[i] * b;
        }
    }

    /// `y = Jᵀ v` for a vector in state layout.
    pub fn apply_transpose(&self, v: &[f64], y: &mut [f64]) {
        let n = self.n();
        for i in 0..n {
            let (a, b) = (v[i], v[i + n]);
            y[i] = self.xx[i] * a + self.yx[i] * b;
            y[i + n] = self.xy[i] * a + self.yy[i] * b;
        }
    }
}

/// Velocity induced at `target` by a single vortex at `source`.
///
/// Returns the in-plane part of `(Γ/2π) · ê₃ × (target − source) / (‖target − source‖² + δ)`.
pub fn kernel_pair(
    target: [f64; 2],
    source: [f64; 2],
    gamma: f64,
    delta_k: f64,
) -> Result<[f64; 2]> {
    if !(delta_k >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "delta_k must be >= 0, got {delta_k}"
        )));
    }
    if target
        .iter()
        .chain(&source)
        .chain([&gamma, &delta_k])
        .any(|v| !v.is_finite())
    {
        return Err(Error::InvalidInput("non-finite kernel input".into()));
    }
    let mut acc = [0.0; 2];
    accumulate_pair(target, source, gamma / (2.0 * PI), delta_k, &mut acc)?;
    Ok(acc)
}

/// Adds one source contribution to `acc`; `c` is `Γ/2π`.
#[inline(always)]
pub(crate) fn accumulate_pair(
    target: [f64; 2],
    source: [f64; 2],
    c: f64,
    delta: f64,
    acc: &mut [f64; 2],
) -> Result<()> {
    let dx = target[0] - source[0];
    let dy = target[1] - source[1];
    let den = dx * dx + dy * dy + delta;
    if den == 0.0 {
        return Err(Error::Singularity {
            target,
            source_pos: source,
        });
    }
    let s = c / den;
    acc[0] -= s * dy;
    acc[1] += s * dx;
    Ok(())
}

/// Adds one source contribution to the target's 2×2 self-block `[xx, xy, yx, yy]`.
#[inline(always)]
pub(crate) fn accumulate_pair_jacobian(
    target: [f64; 2],
    source: [f64; 2],
    c: f64,
    delta: f64,
    acc: &mut [f64; 4],
) -> Result<()> {
    let dx = target[0] - source[0];
    let dy = target[1] - source[1];
    let den = dx * dx + dy * dy + delta;
    if den == 0.0 {
        return Err(Error::Singularity {
            target,
            source_pos: source,
        });
    }
    let s = c / (den * den);
    let cross = 2.0 * dx * dy * s;
    acc[0] += cross;
    acc[1] += (2.0 * dy * dy - den) * s;
    acc[2] += (den - 2.0 * dx * dx) * s;
    acc[3] -= cross;
    Ok(())
}

fn check_state(state: &[f64], sys: &ParticleSystem) -> Result<()> {
    check_len("state", 2 * sys.n(), state.len())?;
    if state.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite state entry".into()));
    }
    Ok(())
}

/// Exact `O(N²)` velocity of every particle, plus inflow when configured.
pub fn pairwise_velocity(state: &[f64], sys: &ParticleSystem) -> Result<Vec<f64>> {
    let mut out = vec![0.0; state.len()];
    pairwise_velocity_into(state, sys, &mut out)?;
    Ok(out)
}

#[allow(clippy::needless_range_loop)]
pub fn pairwise_velocity_into(state: &[f64], sys: &ParticleSystem, out: &mut [f64]) -> Result<()> {
    check_state(state, sys)?;
    check_len("velocity output", state.len(), out.len())?;
    let n = sys.n();
    let delta = sys.effective_delta();
    let inv2pi = 1.0 / (2.0 * PI);
    let gamma = sys.circulation();
    for i in 0..n {
        let t = position(state, i);
        let mut acc = [0.0; 2];
        for j in 0..n {
            if j == i {
                continue;
            }
            accumulate_pair(t, position(state, j), gamma[j] * inv2pi, delta, &mut acc)?;
        }
        out[i] = acc[0];
        out[i + n] = acc[1];
    }
    if let Some(inflow) = sys.inflow() {
        for (o, v) in out.iter_mut().zip(inflow) {
            *o += v;
        }
    }
    Ok(())
}

/// Self-block Jacobian of [`pairwise_velocity`]: each target differentiated
/// with respect to its own coordinates while all sources stay fixed.
#[allow(clippy::needless_range_loop)]
pub fn inexact_kernel_jacobian(
    state: &[f64],
    sys: &ParticleSystem,
) -> Result<BlockDiagonalJacobian> {
    check_state(state, sys)?;
    let n = sys.n();
    let delta = sys.effective_delta();
    let inv2pi = 1.0 / (2.0 * PI);
    let gamma = sys.circulation();
    let mut jac = BlockDiagonalJacobian::zeros(n);
    for i in 0..n {
        let t = position(state, i);
        let mut acc = [0.0; 4];
        for j in 0..n {
            if j == i {
                continue;
            }
            accumulate_pair_jacobian(t, position(state, j), gamma[j] * inv2pi, delta, &mut acc)?;
        }
        jac.xx[i] = acc[0];
        jac.xy[i] = acc[1];
        jac.yx[i] = acc[2];
        jac.yy[i] = acc[3];
    }
    Ok(jac)
}

/// `H = (1/4π) Σ_j Σ_{i≠j} Γ_j Γ_i log ‖χ_i − χ_j‖` (each unordered pair counted twice).
#[allow(clippy::needless_range_loop)]
pub fn hamiltonian(state: &[f64], sys: &ParticleSystem) -> Result<f64> {
    check_state(state, sys)?;
    let n = sys.n();
    let gamma = sys.circulation();
    let mut h = 0.0;
    for j in 0..n {
        let pj = position(state, j);
        let mut row = 0.0;
        for i in (j + 1)..n {
            let pi = position(state, i);
            let d2 = (pi[0] - pj[0]).powi(2) + (pi[1] - pj[1]).powi(2);
            if d2 == 0.0 {
                return Err(Error::Singularity {
                    target: pi,
                    source_pos: pj,
                });
            }
            row += gamma[i] * 0.5 * d2.ln();
        }
        h += gamma[j] * row;
    }
    Ok(h / (2.0 * PI))
}

/// Rectangular lattice of evaluation points, `nx × ny` vertices including the bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Lattice {
    pub fn vertex(&self, ix: usize, iy: usize) -> [f64; 2] {
        let lin = |lo: f64, hi: f64, k: usize, m: usize| {
            if m <= 1 {
                lo
            } else {
                lo + (hi - lo) * k as f64 / (m - 1) as f64
            }
        };
        [
            lin(self.x_min, self.x_max, ix, self.nx),
            lin(self.y_min, self.y_max, iy, self.ny),
        ]
    }
}

/// Scaling of the visualized velocity magnitude: `f_g = ‖f‖ · c_g · l / Γ̄`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldNormalization {
    pub length_scale: f64,
    pub c_g: f64,
    pub gamma_bar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldGrid {
    pub lattice: Lattice,
    /// Row-major values, index `iy * nx + ix`.
    pub values: Vec<f64>,
}

impl FieldGrid {
    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.lattice.nx + ix]
    }
}

/// Non-dimensional velocity magnitude on a lattice; vertices are targets, particles are sources.
/// Inflow is a per-particle quantity and is not applied at lattice vertices.
pub fn velocity_field_grid(
    state: &[f64],
    sys: &ParticleSystem,
    lattice: Lattice,
    norm: FieldNormalization,
) -> Result<FieldGrid> {
    check_state(state, sys)?;
    if !(norm.gamma_bar > 0.0) || !(norm.c_g > 0.0) || !(norm.length_scale > 0.0) {
        return Err(Error::InvalidInput(
            "field normalization requires gamma_bar, c_g and length_scale > 0".into(),
        ));
    }
    let n = sys.n();
    let delta = sys.effective_delta();
    let inv2pi = 1.0 / (2.0 * PI);
    let scale = norm.c_g * norm.length_scale / norm.gamma_bar;
    let mut values = Vec::with_capacity(lattice.nx * lattice.ny);
    for iy in 0..lattice.ny {
        for ix in 0..lattice.nx {
            let t = lattice.vertex(ix, iy);
            let mut acc = [0.0; 2];
            for j in 0..n {
                accumulate_pair(
                    t,
                    position(state, j),
                    sys.circulation()[j] * inv2pi,
                    delta,
                    &mut acc,
                )?;
            }
            values.push(acc[0].hypot(acc[1]) * scale);
        }
    }
    Ok(FieldGrid { lattice, values })
}

/// A velocity evaluator the integrators can drive: exact pairwise, Barnes–Hut, ...
pub trait VelocityModel {
    fn n(&self) -> usize;

    fn velocity_into(&mut self, x: &[f64], out: &mut [f64]) -> Result<()>;

    fn self_jacobian(&mut self, x: &[f64]) -> Result<BlockDiagonalJacobian>;

    fn velocity(&mut self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; x.len()];
        self.velocity_into(x, &mut out)?;
        Ok(out)
    }
}

/// Direct `O(N²)` summation.
#[derive(Debug, Clone, Copy)]
pub struct Pairwise<'a> {
    pub sys: &'a ParticleSystem,
}

impl<'a> Pairwise<'a> {
    pub fn new(sys: &'a ParticleSystem) -> Self {
        Self { sys }
    }
}

impl VelocityModel for Pairwise<'_> {
    fn n(&self) -> usize {
        self.sys.n()
    }

    fn velocity_into(&mut self, x: &[f64], out: &mut [f64]) -> Result<()> {
        pairwise_velocity_into(x, self.sys, out)
    }

    fn self_jacobian(&mut self, x: &[f64]) -> Result<BlockDiagonalJacobian> {
        inexact_kernel_jacobian(x, self.sys)
    }
}
