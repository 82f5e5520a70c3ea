//! Online reduced solvers.
//!
//! Both the LSPG (Tier II) and the hyper-reduced (Tier III) solvers minimize
//! the trapezoidal residual over `x = x_ref + Φ x̂` with Gauss–Newton. They
//! differ only in which targets are evaluated, where the sources come from,
//! and whether the residual is weighted by the gappy operator `A`.

use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::integrators::TimeGrid;
use crate::kernel::{
    accumulate_pair, accumulate_pair_jacobian, BlockDiagonalJacobian, ParticleSystem,
};
use crate::linalg::lstsq;
use crate::reduction::{GnatOperator, PodBasis, SurrogateSourceBasis};

/// How the Gauss–Newton stopping ratio `ε` is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvergenceMeasure {
    /// `‖Φ̄ᵀ J̄ᵀ r̄‖`, the unweighted projected residual.
    ProjectedResidual,
    /// `‖(AC)ᵀ A D‖`, the gradient of the objective actually minimized.
    /// Identical to `ProjectedResidual` when no gappy weighting is applied.
    #[default]
    WeightedGradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RomConfig {
    pub tol: f64,
    pub max_iters: usize,
    pub alpha: f64,
    #[serde(default)]
    pub convergence: ConvergenceMeasure,
}

impl Default for RomConfig {
    fn default() -> Self {
        Self {
            tol: 1e-4,
            max_iters: 100,
            alpha: 1.0,
            convergence: ConvergenceMeasure::default(),
        }
    }
}

impl RomConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_iters == 0 || !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidInput(format!("invalid ROM config {self:?}")));
        }
        Ok(())
    }
}

/// Where source positions and strengths come from during online evaluation.
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum SourceModel {
    /// Every particle, reconstructed from the full basis.
    Exact,
    /// Clusters and near-field sources of a surrogate whose targets match the evaluated targets.
    Clustered(SurrogateSourceBasis),
}

/// Rows of `basis` at the dofs of `ids` (`[χ rows | ψ rows]`) and matching reference entries.
pub fn basis_rows(basis: &PodBasis, ids: &[usize]) -> (DMatrix<f64>, Vec<f64>) {
    let n = basis.n_dofs() / 2;
    let k = ids.len();
    let rows = DMatrix::from_fn(2 * k, basis.m(), |r, c| {
        let dof = if r < k { ids[r] } else { ids[r - k] + n };
        basis.phi[(dof, c)]
    });
    let x0 = (0..2 * k)
        .map(|r| {
            if r < k {
                basis.x_ref[ids[r]]
            } else {
                basis.x_ref[ids[r - k] + n]
            }
        })
        .collect();
    (rows, x0)
}

fn affine(rows: &DMatrix<f64>, offset: &[f64], x_hat: &DVector<f64>) -> Vec<f64> {
    let mut y = rows * x_hat;
    for (a, b) in y.iter_mut().zip(offset) {
        *a += b;
    }
    y.as_slice().to_vec()
}

/// Target velocities and self-blocks evaluated at a reduced state.
#[derive(Debug, Clone)]
pub struct PairEvaluation {
    /// Target positions `x̄⁰ + Φ̄ x̂`.
    pub x_bar: Vec<f64>,
    pub f_bar: Vec<f64>,
    pub jacobian: Option<BlockDiagonalJacobian>,
}

/// Reduced pairwise interaction: velocities at a set of targets from the
/// configured sources, as a function of the generalized coordinates.
#[derive(Debug, Clone)]
pub struct HyperPair<'a> {
    sys: &'a ParticleSystem,
    basis: &'a PodBasis,
    targets: Vec<usize>,
    target_phi: DMatrix<f64>,
    target_x0: Vec<f64>,
    sources: SourceModel,
    /// Pairwise kernel evaluations performed so far (velocity passes only).
    pub kernel_evaluations: u64,
    /// Number of velocity passes.
    pub evaluations: u64,
}

impl<'a> HyperPair<'a> {
    pub fn new(
        sys: &'a ParticleSystem,
        basis: &'a PodBasis,
        targets: &[usize],
        sources: SourceModel,
    ) -> Result<Self> {
        let n = sys.n();
        check_len("basis rows", 2 * n, basis.n_dofs())?;
        if targets.is_empty()
            || !targets.windows(2).all(|w| w[0] < w[1])
            || targets[targets.len() - 1] >= n
        {
            return Err(Error::InvalidInput(
                "targets must be non-empty, strictly increasing and < N".into(),
            ));
        }
        if let SourceModel::Clustered(s) = &sources {
            if s.target_ids != targets {
                return Err(Error::InvalidInput(
                    "surrogate targets do not match the evaluated targets".into(),
                ));
            }
            if s.m != basis.m() || s.n != n {
                return Err(Error::DimensionMismatch {
                    context: "surrogate basis size",
                    expected: basis.m(),
                    found: s.m,
                });
            }
        }
        let (target_phi, target_x0) = basis_rows(basis, targets);
        Ok(Self {
            sys,
            basis,
            targets: targets.to_vec(),
            target_phi,
            target_x0,
            sources,
            kernel_evaluations: 0,
            evaluations: 0,
        })
    }

    /// Evaluates every particle with exact sources.
    pub fn full(sys: &'a ParticleSystem, basis: &'a PodBasis) -> Result<Self> {
        let all: Vec<usize> = (0..sys.n()).collect();
        Self::new(sys, basis, &all, SourceModel::Exact)
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn target_rows(&self) -> &DMatrix<f64> {
        &self.target_phi
    }

    pub fn sources(&self) -> &SourceModel {
        &self.sources
    }

    pub fn target_positions(&self, x_hat: &DVector<f64>) -> Vec<f64> {
        affine(&self.target_phi, &self.target_x0, x_hat)
    }

    pub fn evaluate(
        &mut self,
        x_hat: &DVector<f64>,
        with_jacobian: bool,
    ) -> Result<PairEvaluation> {
        check_len("generalized coordinates", self.basis.m(), x_hat.len())?;
        let nt = self.targets.len();
        let n = self.sys.n();
        let delta = self.sys.effective_delta();
        let inv2pi = 1.0 / (2.0 * PI);
        let x_bar = self.target_positions(x_hat);
        let mut f_bar = vec![0.0; 2 * nt];
        let mut jac = with_jacobian.then(|| BlockDiagonalJacobian::zeros(nt));
        let mut evals = 0u64;

        let add = |t: [f64; 2],
                   s: [f64; 2],
                   c: f64,
                   vel: &mut [f64; 2],
                   blk: &mut [f64; 4]|
         -> Result<()> {
            accumulate_pair(t, s, c, delta, vel)?;
            if with_jacobian {
                accumulate_pair_jacobian(t, s, c, delta, blk)?;
            }
            Ok(())
        };

        match &self.sources {
            SourceModel::Exact => {
                let all = affine(&self.basis.phi, &self.basis.x_ref, x_hat);
                let gamma = self.sys.circulation();
                for (k, &i) in self.targets.iter().enumerate() {
                    let t = [x_bar[k], x_bar[k + nt]];
                    let (mut vel, mut blk) = ([0.0; 2], [0.0; 4]);
                    for j in 0..n {
                        if j != i {
                            add(
                                t,
                                [all[j], all[j + n]],
                                gamma[j] * inv2pi,
                                &mut vel,
                                &mut blk,
                            )?;
                        }
                    }
                    evals += (n - 1) as u64;
                    store(k, nt, vel, blk, &mut f_bar, jac.as_mut());
                }
            }
            SourceModel::Clustered(s) => {
                let cp = s.cluster_positions(x_hat);
                let dp = s.direct_positions(x_hat);
                let (nc, nd) = (s.n_clusters(), s.n_direct());
                for k in 0..nt {
                    let t = [x_bar[k], x_bar[k + nt]];
                    let (mut vel, mut blk) = ([0.0; 2], [0.0; 4]);
                    for &c in &s.per_target_clusters[k] {
                        let src = [cp[c], cp[c + nc]];
                        // A Γ-weighted centroid can land exactly on a target (e.g. two
                        // equal neighbors placed symmetrically about it). The symmetric
                        // limit of such a pair induces no velocity, so the term is dropped
                        // rather than treated as a singular self-interaction.
                        if src == t {
                            continue;
                        }
                        add(t, src, s.gamma_tilde[c] * inv2pi, &mut vel, &mut blk)?;
                    }
                    for &d in &s.per_target_direct[k] {
                        add(
                            t,
                            [dp[d], dp[d + nd]],
                            s.direct_gamma[d] * inv2pi,
                            &mut vel,
                            &mut blk,
                        )?;
                    }
                    evals += (s.per_target_clusters[k].len() + s.per_target_direct[k].len()) as u64;
                    store(k, nt, vel, blk, &mut f_bar, jac.as_mut());
                }
            }
        }
        if let Some(inflow) = self.sys.inflow() {
            for (k, &i) in self.targets.iter().enumerate() {
                f_bar[k] += inflow[i];
                f_bar[k + nt] += inflow[i + n];
            }
        }
        self.kernel_evaluations += evals;
        self.evaluations += 1;
        Ok(PairEvaluation {
            x_bar,
            f_bar,
            jacobian: jac,
        })
    }
}

fn store(
    k: usize,
    nt: usize,
    vel: [f64; 2],
    blk: [f64; 4],
    f: &mut [f64],
    jac: Option<&mut BlockDiagonalJacobian>,
) {
    f[k] = vel[0];
    f[k + nt] = vel[1];
    if let Some(j) = jac {
        j.xx[k] = blk[0];
        j.xy[k] = blk[1];
        j.yx[k] = blk[2];
        j.yy[k] = blk[3];
    }
}

/// One Gauss–Newton step result.
#[derive(Debug, Clone)]
pub struct RomStep {
    pub x_hat: DVector<f64>,
    pub x_bar: Vec<f64>,
    pub f_bar: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Final `ε`.
    pub epsilon: f64,
}

/// `C = (I − Δt/2 J_vel) Φ̄` for block-diagonal `J_vel`.
fn residual_jacobian_times_basis(
    jvel: &BlockDiagonalJacobian,
    phi_bar: &DMatrix<f64>,
    dt: f64,
) -> DMatrix<f64> {
    let nt = jvel.n();
    let h = 0.5 * dt;
    let mut c = DMatrix::zeros(2 * nt, phi_bar.ncols());
    for col in 0..phi_bar.ncols() {
        for k in 0..nt {
            let (u, v) = (phi_bar[(k, col)], phi_bar[(k + nt, col)]);
            c[(k, col)] = u - h * (jvel.xx[k] * u + jvel.xy[k] * v);
            c[(k + nt, col)] = v - h * (jvel.yx[k] * u + jvel.yy[k] * v);
        }
    }
    c
}

/// Optional observer of residual vectors.
type ResidualHook<'a> = Option<&'a mut dyn FnMut(&[f64])>;

/// Gauss–Newton minimization of the (optionally gappy-weighted) trapezoidal residual.
///
/// `on_residual` sees the residual at every evaluated iterate.
#[allow(clippy::too_many_arguments)]
fn gauss_newton_step(
    field: &mut HyperPair,
    weight: Option<&DMatrix<f64>>,
    x_hat_prev: &DVector<f64>,
    x_bar_prev: &[f64],
    f_bar_prev: &[f64],
    dt: f64,
    cfg: &RomConfig,
    mut on_residual: ResidualHook,
) -> Result<RomStep> {
    let mut x_hat = x_hat_prev.clone();
    let mut iterations = 0;
    let mut eps0 = None;
    loop {
        let ev = field.evaluate(&x_hat, true)?;
        let h = 0.5 * dt;
        let r: Vec<f64> = (0..ev.x_bar.len())
            .map(|k| ev.x_bar[k] - x_bar_prev[k] - h * (ev.f_bar[k] + f_bar_prev[k]))
            .collect();
        if let Some(cb) = on_residual.as_mut() {
            cb(&r);
        }
        let jvel = ev.jacobian.as_ref().expect("jacobian requested");
        let c = residual_jacobian_times_basis(jvel, field.target_rows(), dt);
        let d = DVector::from_vec(r);
        let (lhs, rhs) = match weight {
            Some(a) => (a * &c, a * &d),
            None => (c.clone(), d.clone()),
        };
        let grad = match (cfg.convergence, weight) {
            (ConvergenceMeasure::ProjectedResidual, Some(_)) => c.tr_mul(&d).norm(),
            _ => lhs.tr_mul(&rhs).norm(),
        };
        if !grad.is_finite() {
            return Err(Error::Structural(format!(
                "reduced residual became non-finite at iteration {iterations}"
            )));
        }
        let g0 = *eps0.get_or_insert(grad);
        let epsilon = if g0 == 0.0 { 0.0 } else { grad / g0 };
        let converged = epsilon <= cfg.tol;
        if converged || iterations >= cfg.max_iters {
            return Ok(RomStep {
                x_hat,
                x_bar: ev.x_bar,
                f_bar: ev.f_bar,
                iterations,
                converged,
                epsilon,
            });
        }
        let step = lstsq(&lhs, &(-rhs))?;
        x_hat.axpy(cfg.alpha, &step.x, 1.0);
        iterations += 1;
    }
}

/// One LSPG step over all `N` particles; residual snapshots go to `on_residual`.
pub fn lspg_step(
    field: &mut HyperPair,
    x_hat_prev: &DVector<f64>,
    x_prev: &[f64],
    f_prev: &[f64],
    dt: f64,
    cfg: &RomConfig,
    on_residual: ResidualHook,
) -> Result<RomStep> {
    if field.targets().len() != field.sys.n() {
        return Err(Error::InvalidInput("LSPG evaluates every particle".into()));
    }
    gauss_newton_step(
        field,
        None,
        x_hat_prev,
        x_prev,
        f_prev,
        dt,
        cfg,
        on_residual,
    )
}

/// One hyper-reduced step: minimizes `‖A(C ν + D)‖` on the sampled dofs.
pub fn gnat_step(
    field: &mut HyperPair,
    gnat: &GnatOperator,
    x_hat_prev: &DVector<f64>,
    x_bar_prev: &[f64],
    f_bar_prev: &[f64],
    dt: f64,
    cfg: &RomConfig,
) -> Result<RomStep> {
    if field.targets() != gnat.sample_ids.as_slice() {
        return Err(Error::InvalidInput(
            "hyper-reduced targets must equal the sample set".into(),
        ));
    }
    gauss_newton_step(
        field,
        Some(&gnat.a),
        x_hat_prev,
        x_bar_prev,
        f_bar_prev,
        dt,
        cfg,
        None,
    )
}

/// Reduced trajectory and solver statistics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RomTrajectory {
    /// `x̂ⁿ` for `n = 1..N_t`.
    pub x_hat_history: Vec<Vec<f64>>,
    /// Target positions at each step (all particles for LSPG, sampled ones otherwise).
    pub sampled_state_history: Vec<Vec<f64>>,
    pub iterations: Vec<usize>,
    pub converged: Vec<bool>,
    /// Seconds spent in the minimization loop.
    pub wall_time: f64,
    pub kernel_evaluations: u64,
    pub velocity_passes: u64,
}

impl RomTrajectory {
    pub fn failed_steps(&self) -> Vec<usize> {
        self.converged
            .iter()
            .enumerate()
            .filter(|(_, c)| !**c)
            .map(|(k, _)| k + 1)
            .collect()
    }

    /// Mean kernel evaluations per velocity pass.
    pub fn kernel_evaluations_per_pass(&self) -> f64 {
        if self.velocity_passes == 0 {
            0.0
        } else {
            self.kernel_evaluations as f64 / self.velocity_passes as f64
        }
    }
}

/// LSPG run plus every residual it evaluated (columns of height `2N`).
#[derive(Debug, Clone)]
pub struct LspgRun {
    pub trajectory: RomTrajectory,
    pub residuals: Vec<f64>,
}

impl LspgRun {
    pub fn residual_matrix(&self, n_dofs: usize) -> DMatrix<f64> {
        DMatrix::from_column_slice(n_dofs, self.residuals.len() / n_dofs, &self.residuals)
    }
}

fn run_steps<F>(
    field: &mut HyperPair,
    basis: &PodBasis,
    x0: &[f64],
    grid: TimeGrid,
    mut step: F,
) -> Result<RomTrajectory>
where
    F: FnMut(&mut HyperPair, &DVector<f64>, &[f64], &[f64]) -> Result<RomStep>,
{
    let mut x_hat = basis.project(x0)?;
    let mut traj = RomTrajectory {
        x_hat_history: Vec::with_capacity(grid.n_steps),
        sampled_state_history: Vec::with_capacity(grid.n_steps),
        iterations: Vec::with_capacity(grid.n_steps),
        converged: Vec::with_capacity(grid.n_steps),
        wall_time: 0.0,
        kernel_evaluations: 0,
        velocity_passes: 0,
    };
    let (k0, p0) = (field.kernel_evaluations, field.evaluations);
    let start = Instant::now();
    let first = field.evaluate(&x_hat, false)?;
    let (mut x_bar, mut f_bar) = (first.x_bar, first.f_bar);
    for _ in 0..grid.n_steps {
        let out = step(field, &x_hat, &x_bar, &f_bar)?;
        x_hat = out.x_hat;
        x_bar = out.x_bar;
        f_bar = out.f_bar;
        traj.x_hat_history.push(x_hat.as_slice().to_vec());
        traj.sampled_state_history.push(x_bar.clone());
        traj.iterations.push(out.iterations);
        traj.converged.push(out.converged);
    }
    traj.wall_time = start.elapsed().as_secs_f64();
    traj.kernel_evaluations = field.kernel_evaluations - k0;
    traj.velocity_passes = field.evaluations - p0;
    Ok(traj)
}

/// Tier II LSPG trajectory from `x0`, collecting residual snapshots at every iterate.
pub fn lspg_simulate(
    field: &mut HyperPair,
    basis: &PodBasis,
    x0: &[f64],
    grid: TimeGrid,
    cfg: &RomConfig,
) -> Result<LspgRun> {
    cfg.validate()?;
    let mut residuals = Vec::new();
    let trajectory = run_steps(field, basis, x0, grid, |f, xh, xb, fb| {
        let mut sink = |r: &[f64]| residuals.extend_from_slice(r);
        lspg_step(f, xh, xb, fb, grid.dt, cfg, Some(&mut sink))
    })?;
    Ok(LspgRun {
        trajectory,
        residuals,
    })
}

/// Offline products needed online.
#[derive(Debug, Clone, Copy)]
pub struct OnlineOperators<'a> {
    pub basis: &'a PodBasis,
    pub gnat: &'a GnatOperator,
    /// Sampled-target surrogate; `None` runs plain GNAT with all `N` sources.
    pub surrogate: Option<&'a SurrogateSourceBasis>,
}

/// Hyper-reduced trajectory for circulation `sys.circulation()`.
///
/// The surrogate's cluster circulations and weighted rows are reassigned to
/// the query circulation before stepping; that work is not timed.
pub fn ptrom_simulate(
    ops: OnlineOperators,
    sys: &ParticleSystem,
    x0: &[f64],
    grid: TimeGrid,
    cfg: &RomConfig,
) -> Result<RomTrajectory> {
    cfg.validate()?;
    let sources = match ops.surrogate {
        None => SourceModel::Exact,
        Some(s) => SourceModel::Clustered(s.reassign_cluster_circulation(
            ops.basis,
            &ops.basis.x_ref,
            sys.circulation(),
        )?),
    };
    let mut field = HyperPair::new(sys, ops.basis, &ops.gnat.sample_ids, sources)?;
    run_steps(&mut field, ops.basis, x0, grid, |f, xh, xb, fb| {
        gnat_step(f, ops.gnat, xh, xb, fb, grid.dt, cfg)
    })
}

/// `x_ref(dofs) + Φ(dofs, :) x̂` for every step.
pub fn reconstruct_output(
    x_hat_history: &[Vec<f64>],
    basis: &PodBasis,
    particle_ids: &[usize],
) -> Result<Vec<Vec<f64>>> {
    let n = basis.n_dofs() / 2;
    if let Some(&bad) = particle_ids.iter().find(|&&i| i >= n) {
        return Err(Error::InvalidInput(format!(
            "particle {bad} out of range (N = {n})"
        )));
    }
    let (rows, x0) = basis_rows(basis, particle_ids);
    x_hat_history
        .iter()
        .map(|xh| {
            check_len("generalized coordinates", basis.m(), xh.len())?;
            Ok(affine(&rows, &x0, &DVector::from_column_slice(xh)))
        })
        .collect()
}

/// Full states `x_ref + Φ x̂` for every step.
pub fn reconstruct_full(x_hat_history: &[Vec<f64>], basis: &PodBasis) -> Result<Vec<Vec<f64>>> {
    let all: Vec<usize> = (0..basis.n_dofs() / 2).collect();
    reconstruct_output(x_hat_history, basis, &all)
}

/// Rearranges `[χ(ids) | ψ(ids)]` vectors into global dof indices.
pub fn sampled_dof_indices(ids: &[usize], n: usize) -> Vec<usize> {
    ids.iter()
        .copied()
        .chain(ids.iter().map(|&i| i + n))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reduction::pod::PodBasis;

    fn identity_basis(nd: usize, x_ref: Vec<f64>) -> PodBasis {
        PodBasis {
            phi: DMatrix::identity(nd, nd),
            singular_values: vec![1.0; nd],
            spectrum: vec![1.0; nd],
            x_ref,
        }
    }

    #[test]
    fn single_cluster_matches_kernel_pair() {
        let sys = ParticleSystem::new(vec![1.0, 1.0], 0.0).unwrap();
        let b = identity_basis(4, vec![0.0, 3.0, 0.0, 4.0]);
        let mut hp = HyperPair::new(&sys, &b, &[0], SourceModel::Exact).unwrap();
        let ev = hp.evaluate(&DVector::zeros(4), false).unwrap();
        let k = crate::kernel::kernel_pair([0.0, 0.0], [3.0, 4.0], 1.0, 0.0).unwrap();
        assert_eq!(ev.f_bar, vec![k[0], k[1]]);
        assert_eq!(hp.kernel_evaluations, 1);
    }

    #[test]
    fn zero_circulation_needs_no_update() {
        let sys = ParticleSystem::new(vec![0.0; 3], 0.0).unwrap();
        let x0 = vec![0.0, 1.0, 2.0, 0.0, 0.5, 1.0];
        let b = identity_basis(6, x0.clone());
        let mut field = HyperPair::full(&sys, &b).unwrap();
        let run = lspg_simulate(
            &mut field,
            &b,
            &x0,
            TimeGrid::new(0.1, 3, 0.0).unwrap(),
            &RomConfig::default(),
        )
        .unwrap();
        assert!(run.trajectory.iterations.iter().all(|&k| k == 0));
        assert!(run
            .trajectory
            .x_hat_history
            .iter()
            .all(|x| x.iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn reconstruct_identity_unit_bump() {
        let b = identity_basis(4, vec![1.0, 2.0, 3.0, 4.0]);
        let out = reconstruct_output(&[vec![1.0, 0.0, 0.0, 0.0]], &b, &[0, 1]).unwrap();
        assert_eq!(out[0], vec![2.0, 2.0, 3.0, 4.0]);
        assert!(reconstruct_output(&[vec![0.0; 4]], &b, &[2]).is_err());
    }
}
