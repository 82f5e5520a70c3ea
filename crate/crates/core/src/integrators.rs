//! Full-order time integration over any [`VelocityModel`].
//!
//! The implicit solver is the trapezoidal rule closed with an inexact Newton
//! iteration that keeps only the per-particle 2×2 self-blocks of the
//! Jacobian. The explicit solver is Heun's modified Euler method.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::kernel::{BlockDiagonalJacobian, VelocityModel};

/// Uniform time grid `t0, t0 + dt, ..., t0 + n_steps·dt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub dt: f64,
    pub n_steps: usize,
    pub t0: f64,
}

impl TimeGrid {
    pub fn new(dt: f64, n_steps: usize, t0: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() || !t0.is_finite() {
            return Err(Error::InvalidInput(format!(
                "time grid needs dt > 0 and finite t0 (dt = {dt})"
            )));
        }
        Ok(Self { dt, n_steps, t0 })
    }

    /// Grid over `[t0, tf]`; the span must be an integer multiple of `dt` up to rounding.
    pub fn spanning(t0: f64, tf: f64, dt: f64) -> Result<Self> {
        let steps = (tf - t0) / dt;
        let n = steps.round();
        if !(n >= 1.0) || (steps - n).abs() > 1e-6 * n.max(1.0) {
            return Err(Error::InvalidInput(format!(
                "time span [{t0}, {tf}] is not a positive multiple of dt = {dt}"
            )));
        }
        Self::new(dt, n as usize, t0)
    }

    pub fn t_final(&self) -> f64 {
        self.t0 + self.dt * self.n_steps as f64
    }

    pub fn time(&self, step: usize) -> f64 {
        self.t0 + self.dt * step as f64
    }
}

/// Inexact Newton settings for the implicit full-order step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonConfig {
    /// Relative residual tolerance `‖r‖ / ‖r₀‖`.
    pub tol: f64,
    pub max_iters: usize,
    /// The block Jacobian is rebuilt on the first iteration of every `p_it`-th step.
    pub jacobian_refresh_period: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iters: 100,
            jacobian_refresh_period: 1,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_iters == 0 || self.jacobian_refresh_period == 0 {
            return Err(Error::InvalidInput(format!(
                "invalid Newton config {self:?}"
            )));
        }
        Ok(())
    }
}

/// Coefficients of a linear multistep scheme `Σ_j α_j x^{n-j} = Δt Σ_j β_j f(x^{n-j})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultistepScheme {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl MultistepScheme {
    pub fn trapezoidal() -> Self {
        Self {
            alpha: vec![1.0, -1.0],
            beta: vec![0.5, 0.5],
        }
    }

    pub fn backward_euler() -> Self {
        Self {
            alpha: vec![1.0, -1.0],
            beta: vec![1.0, 0.0],
        }
    }

    pub fn steps(&self) -> usize {
        self.alpha.len() - 1
    }
}

/// Time-ordered state columns `x¹ .. x^{N_t}` (the initial state is not stored).
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotMatrix {
    n_dofs: usize,
    pub dt: f64,
    pub t0: f64,
    data: Vec<f64>,
}

impl SnapshotMatrix {
    pub fn new(n_dofs: usize, dt: f64, t0: f64) -> Self {
        Self {
            n_dofs,
            dt,
            t0,
            data: Vec::new(),
        }
    }

    pub fn from_columns(n_dofs: usize, dt: f64, t0: f64, data: Vec<f64>) -> Result<Self> {
        if n_dofs == 0 || !data.len().is_multiple_of(n_dofs) {
            return Err(Error::InvalidInput(format!(
                "{} values do not form columns of height {n_dofs}",
                data.len()
            )));
        }
        Ok(Self {
            n_dofs,
            dt,
            t0,
            data,
        })
    }

    pub fn push(&mut self, column: &[f64]) -> Result<()> {
        check_len("snapshot column", self.n_dofs, column.len())?;
        self.data.extend_from_slice(column);
        Ok(())
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn n_columns(&self) -> usize {
        self.data.len() / self.n_dofs
    }

    pub fn column(&self, k: usize) -> &[f64] {
        &self.data[k * self.n_dofs..(k + 1) * self.n_dofs]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n_dofs)
    }

    /// Column-major raw storage.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_matrix(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_column_slice(self.n_dofs, self.n_columns(), &self.data)
    }
}

/// `r = ξ − x_prev − (Δt/2)(f(ξ) + f_prev)`.
pub fn trapezoidal_residual(
    xi: &[f64],
    x_prev: &[f64],
    f_prev: &[f64],
    f_xi: &[f64],
    dt: f64,
) -> Result<Vec<f64>> {
    let mut r = vec![0.0; xi.len()];
    trapezoidal_residual_into(xi, x_prev, f_prev, f_xi, dt, &mut r)?;
    Ok(r)
}

pub(crate) fn trapezoidal_residual_into(
    xi: &[f64],
    x_prev: &[f64],
    f_prev: &[f64],
    f_xi: &[f64],
    dt: f64,
    r: &mut [f64],
) -> Result<()> {
    let n = xi.len();
    check_len("x_prev", n, x_prev.len())?;
    check_len("f_prev", n, f_prev.len())?;
    check_len("f(xi)", n, f_xi.len())?;
    check_len("residual", n, r.len())?;
    let h = 0.5 * dt;
    for k in 0..n {
        r[k] = xi[k] - x_prev[k] - h * (f_xi[k] + f_prev[k]);
    }
    Ok(())
}

/// `I − (Δt/2) J_vel` in block-diagonal form.
pub fn trapezoidal_residual_jacobian(
    jvel: &BlockDiagonalJacobian,
    dt: f64,
) -> BlockDiagonalJacobian {
    let h = 0.5 * dt;
    let scale = |v: &[f64], diag: f64| v.iter().map(|a| diag - h * a).collect::<Vec<_>>();
    BlockDiagonalJacobian {
        xx: scale(&jvel.xx, 1.0),
        xy: scale(&jvel.xy, 0.0),
        yx: scale(&jvel.yx, 0.0),
        yy: scale(&jvel.yy, 1.0),
    }
}

/// Solves `J Δ = rhs` block by block, overwriting `rhs` with `Δ`.
pub fn solve_block_diagonal(jac: &BlockDiagonalJacobian, rhs: &mut [f64]) -> Result<()> {
    let n = jac.n();
    check_len("block rhs", 2 * n, rhs.len())?;
    for i in 0..n {
        let (a, b, c, d) = (jac.xx[i], jac.xy[i], jac.yx[i], jac.yy[i]);
        let det = a * d - b * c;
        let scale = a.abs().max(b.abs()).max(c.abs()).max(d.abs());
        if !det.is_finite() || det.abs() <= 1e-14 * scale * scale {
            return Err(Error::SingularBlock { particle: i, det });
        }
        let (u, v) = (rhs[i], rhs[i + n]);
        rhs[i] = (d * u - b * v) / det;
        rhs[i + n] = (a * v - c * u) / det;
    }
    Ok(())
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Outcome of one implicit step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub x: Vec<f64>,
    /// `f(x)` at the accepted iterate, reused as `f_prev` by the next step.
    pub f: Vec<f64>,
    pub stats: StepStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    /// Number of Newton updates applied.
    pub iterations: usize,
    pub converged: bool,
    /// Final `‖r‖ / ‖r₀‖` (0 when the first residual already vanished).
    pub residual_ratio: f64,
    /// False if any iteration increased the residual norm.
    pub monotone: bool,
}

/// Stateful implicit trapezoidal stepper; owns the cached block Jacobian.
pub struct TrapezoidalStepper<'m, M: VelocityModel + ?Sized> {
    model: &'m mut M,
    dt: f64,
    cfg: NewtonConfig,
    jac: Option<BlockDiagonalJacobian>,
    step_index: usize,
}

impl<'m, M: VelocityModel + ?Sized> TrapezoidalStepper<'m, M> {
    pub fn new(model: &'m mut M, dt: f64, cfg: NewtonConfig) -> Result<Self> {
        cfg.validate()?;
        if !(dt > 0.0) {
            return Err(Error::InvalidInput(format!("dt must be > 0, got {dt}")));
        }
        Ok(Self {
            model,
            dt,
            cfg,
            jac: None,
            step_index: 0,
        })
    }

    pub fn model(&mut self) -> &mut M {
        self.model
    }

    pub fn step(&mut self, x_prev: &[f64], f_prev: &[f64]) -> Result<StepOutcome> {
        let nd = x_prev.len();
        check_len("state", 2 * self.model.n(), nd)?;
        check_len("f_prev", nd, f_prev.len())?;
        if self.jac.is_none()
            || self
                .step_index
                .is_multiple_of(self.cfg.jacobian_refresh_period)
        {
            let jvel = self.model.self_jacobian(x_prev)?;
            self.jac = Some(trapezoidal_residual_jacobian(&jvel, self.dt));
        }
        self.step_index += 1;
        let jac = self.jac.as_ref().expect("jacobian set above");

        // With ξ⁰ = x_prev the first residual is −Δt f_prev; no extra evaluation needed.
        let mut xi = x_prev.to_vec();
        let mut f_xi = f_prev.to_vec();
        let mut r = vec![0.0; nd];
        trapezoidal_residual_into(&xi, x_prev, f_prev, &f_xi, self.dt, &mut r)?;
        let r0 = norm2(&r);
        let mut stats = StepStats {
            iterations: 0,
            converged: r0 == 0.0,
            residual_ratio: 0.0,
            monotone: true,
        };
        let mut prev = r0;
        while !stats.converged && stats.iterations < self.cfg.max_iters {
            let mut delta: Vec<f64> = r.iter().map(|v| -v).collect();
            solve_block_diagonal(jac, &mut delta)?;
            for (a, d) in xi.iter_mut().zip(&delta) {
                *a += d;
            }
            self.model.velocity_into(&xi, &mut f_xi)?;
            trapezoidal_residual_into(&xi, x_prev, f_prev, &f_xi, self.dt, &mut r)?;
            stats.iterations += 1;
            let rn = norm2(&r);
            if !rn.is_finite() {
                return Err(Error::Structural(format!(
                    "Newton residual became non-finite at iteration {}",
                    stats.iterations
                )));
            }
            stats.monotone &= rn <= prev;
            prev = rn;
            stats.residual_ratio = rn / r0;
            let floor = 64.0 * f64::EPSILON * norm2(&xi);
            stats.converged = stats.residual_ratio <= self.cfg.tol || rn <= floor;
        }
        Ok(StepOutcome {
            x: xi,
            f: f_xi,
            stats,
        })
    }
}

/// One implicit trapezoidal step from `x_prev`, refreshing the Jacobian.
pub fn fom_step<M: VelocityModel + ?Sized>(
    x_prev: &[f64],
    model: &mut M,
    dt: f64,
    cfg: NewtonConfig,
) -> Result<StepOutcome> {
    let f_prev = model.velocity(x_prev)?;
    TrapezoidalStepper::new(model, dt, cfg)?.step(x_prev, &f_prev)
}

/// Snapshots plus the wall time of the stepping loop.
#[derive(Debug, Clone)]
pub struct FomRun {
    pub snapshots: SnapshotMatrix,
    /// Seconds spent in the velocity/Newton loop only.
    pub wall_time: f64,
    pub steps: Vec<StepStats>,
}

impl FomRun {
    pub fn failed_steps(&self) -> Vec<usize> {
        self.steps
            .iter()
            .enumerate()
            .filter(|(_, s)| !s.converged)
            .map(|(k, _)| k + 1)
            .collect()
    }

    pub fn total_iterations(&self) -> usize {
        self.steps.iter().map(|s| s.iterations).sum()
    }
}

/// Implicit trapezoidal trajectory over `grid`.
pub fn fom_simulate<M: VelocityModel + ?Sized>(
    x0: &[f64],
    model: &mut M,
    grid: TimeGrid,
    cfg: NewtonConfig,
) -> Result<FomRun> {
    check_len("initial state", 2 * model.n(), x0.len())?;
    let mut snapshots = SnapshotMatrix::new(x0.len(), grid.dt, grid.t0);
    let mut steps = Vec::with_capacity(grid.n_steps);
    let start = Instant::now();
    let mut f = model.velocity(x0)?;
    let mut x = x0.to_vec();
    let mut stepper = TrapezoidalStepper::new(model, grid.dt, cfg)?;
    for _ in 0..grid.n_steps {
        let out = stepper.step(&x, &f)?;
        x = out.x;
        f = out.f;
        steps.push(out.stats);
        snapshots.push(&x)?;
    }
    let wall_time = start.elapsed().as_secs_f64();
    Ok(FomRun {
        snapshots,
        wall_time,
        steps,
    })
}

/// Heun predictor–corrector step.
pub fn heun_step<M: VelocityModel + ?Sized>(
    x_prev: &[f64],
    model: &mut M,
    dt: f64,
) -> Result<Vec<f64>> {
    let f0 = model.velocity(x_prev)?;
    let mut scratch = vec![0.0; x_prev.len()];
    heun_step_with(x_prev, &f0, model, dt, &mut scratch)
}

fn heun_step_with<M: VelocityModel + ?Sized>(
    x_prev: &[f64],
    f0: &[f64],
    model: &mut M,
    dt: f64,
    f1: &mut [f64],
) -> Result<Vec<f64>> {
    let pred: Vec<f64> = x_prev.iter().zip(f0).map(|(x, f)| x + dt * f).collect();
    model.velocity_into(&pred, f1)?;
    Ok(x_prev
        .iter()
        .zip(f0)
        .zip(f1.iter())
        .map(|((x, a), b)| x + 0.5 * dt * (a + b))
        .collect())
}

/// Explicit Heun trajectory over `grid`.
pub fn heun_simulate<M: VelocityModel + ?Sized>(
    x0: &[f64],
    model: &mut M,
    grid: TimeGrid,
) -> Result<FomRun> {
    check_len("initial state", 2 * model.n(), x0.len())?;
    let mut snapshots = SnapshotMatrix::new(x0.len(), grid.dt, grid.t0);
    let start = Instant::now();
    let mut x = x0.to_vec();
    let mut f0 = vec![0.0; x.len()];
    let mut f1 = vec![0.0; x.len()];
    for _ in 0..grid.n_steps {
        model.velocity_into(&x, &mut f0)?;
        x = heun_step_with(&x, &f0, model, grid.dt, &mut f1)?;
        snapshots.push(&x)?;
    }
    let wall_time = start.elapsed().as_secs_f64();
    let steps = vec![
        StepStats {
            iterations: 0,
            converged: true,
            residual_ratio: 0.0,
            monotone: true
        };
        grid.n_steps
    ];
    Ok(FomRun {
        snapshots,
        wall_time,
        steps,
    })
}

/// Which full-order integrator to run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    Trapezoidal,
    Heun,
}

pub fn simulate<M: VelocityModel + ?Sized>(
    x0: &[f64],
    model: &mut M,
    grid: TimeGrid,
    integrator: Integrator,
    cfg: NewtonConfig,
) -> Result<FomRun> {
    match integrator {
        Integrator::Trapezoidal => fom_simulate(x0, model, grid, cfg),
        Integrator::Heun => heun_simulate(x0, model, grid),
    }
}
