//! Reproductive sweep (training and query at the same point) and baselines.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{case_hyperparameters, width_name, ExperimentConfig, LeafCapacity, Width};
use super::initial::generate_initial_conditions;
use super::pipeline::{train_from_snapshots, training_snapshots, Training};
use super::queries::score_ptrom;
use super::report::{emit_reports, write_config, Manifest, RunRecord};
use crate::error::{Error, Result};
use crate::integrators::{heun_simulate, simulate, FomRun, Integrator};
use crate::kernel::{Pairwise, ParticleSystem};
use crate::metrics::{characteristic_length, ErrorReport};
use crate::quadtree::{BarnesHutField, Criterion};
use crate::rom_solvers::RomTrajectory;

/// Which part of the reproductive study to run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub ns: Vec<usize>,
    pub widths: Vec<Width>,
    pub cases: Vec<usize>,
    pub baselines: bool,
    /// Caps the number of time steps (desk-scale runs); `None` keeps the full span.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
}

impl SweepSpec {
    /// Desk-scale default: `N ∈ {100, 500, 1000}`, narrow Bases Case 1, no baselines.
    pub fn desk() -> Self {
        Self {
            ns: vec![100, 500, 1000],
            widths: vec![Width::Narrow],
            cases: vec![1],
            baselines: false,
            max_steps: None,
        }
    }
}

/// Shortens the time span to at most `max_steps` steps.
pub fn cap_steps(mut cfg: ExperimentConfig, max_steps: Option<usize>) -> ExperimentConfig {
    if let Some(k) = max_steps {
        let span = cfg.t_span[1] - cfg.t_span[0];
        if span / cfg.dt > k as f64 + 0.5 {
            cfg.t_span[1] = cfg.t_span[0] + k as f64 * cfg.dt;
        }
    }
    cfg
}

/// PTROM result of one reproductive case with its training products.
#[derive(Debug, Clone)]
pub struct ReproductiveCase {
    pub config: ExperimentConfig,
    pub training: Training,
    pub record: RunRecord,
    pub trajectory: RomTrajectory,
}

impl ReproductiveCase {
    /// The implicit FOM trajectory used for both training and reference.
    pub fn reference(&self) -> &FomRun {
        &self.training.fom_runs[0]
    }
}

/// Trains on the single reproductive point and scores the reduced model there.
///
/// The training FOM run doubles as the reference and supplies the FOM wall time.
pub fn run_reproductive_case(cfg: &ExperimentConfig) -> Result<ReproductiveCase> {
    if cfg.parametric.is_some() {
        return Err(Error::Config(
            "reproductive runs take no parametric space".into(),
        ));
    }
    let runs = training_snapshots(cfg)?;
    reproductive_from_snapshots(cfg, runs)
}

fn reproductive_from_snapshots(
    cfg: &ExperimentConfig,
    runs: Vec<FomRun>,
) -> Result<ReproductiveCase> {
    let training = train_from_snapshots(cfg, runs)?;
    let (x0, sys) = generate_initial_conditions(cfg, None)?;
    let (record, trajectory) = score_ptrom(
        &training.bundle,
        &sys,
        &x0,
        &training.fom_runs[0],
        cfg.name.clone(),
        None,
    )?;
    Ok(ReproductiveCase {
        config: cfg.clone(),
        training,
        record,
        trajectory,
    })
}

#[allow(clippy::too_many_arguments)]
fn baseline_record(
    label: String,
    method: &str,
    cfg: &ExperimentConfig,
    sys: &ParticleSystem,
    x0: &[f64],
    run: &FomRun,
    reference: &FomRun,
    facts: BTreeMap<String, f64>,
) -> Result<RunRecord> {
    let errors = ErrorReport::compute(
        reference.snapshots.columns(),
        run.snapshots.columns(),
        sys,
        characteristic_length(x0)?,
    )?;
    Ok(RunRecord {
        label,
        method: method.into(),
        n: cfg.n,
        mu: None,
        errors: Some(errors),
        wall_time: Some(run.wall_time),
        reference_wall_time: Some(reference.wall_time),
        facts,
        ..RunRecord::default()
    })
}

fn failure(label: String, method: &str, n: usize, e: &Error) -> RunRecord {
    RunRecord {
        label,
        method: method.into(),
        n,
        failure: Some(e.to_string()),
        ..RunRecord::default()
    }
}

/// Treecode variants in baseline order: `θ` values, then `p_c` values.
fn treecode_variants(cfg: &ExperimentConfig) -> Vec<(String, Criterion)> {
    let b = &cfg.baseline;
    b.thetas
        .iter()
        .map(|&theta| (format!("theta{theta}"), Criterion::BarnesHut { theta }))
        .chain(
            b.p_cs
                .iter()
                .map(|&p_c| (format!("pc{p_c}"), Criterion::Neighbor { p_c })),
        )
        .collect()
}

fn bh_run(
    sys: &ParticleSystem,
    x0: &[f64],
    cfg: &ExperimentConfig,
    c: Criterion,
    cap: usize,
    integ: Integrator,
) -> Result<(FomRun, u64)> {
    let mut field = BarnesHutField::new(sys, c, cap)?;
    let run = simulate(x0, &mut field, cfg.time_grid()?, integ, cfg.newton)?;
    Ok((run, field.kernel_evaluations))
}

/// Heun, Barnes–Hut (implicit and explicit) and GNAT baselines against `reference`.
///
/// When a leaf-capacity sweep list is configured, each treecode variant runs
/// once per capacity and every run is reported; otherwise the selected
/// capacity is used.
pub fn run_baselines(
    cfg: &ExperimentConfig,
    reference: &FomRun,
    training_runs: Option<Vec<FomRun>>,
) -> Result<Vec<RunRecord>> {
    let (x0, sys) = generate_initial_conditions(cfg, None)?;
    let grid = cfg.time_grid()?;
    let mut out = Vec::new();
    let tag = &cfg.name;
    if cfg.baseline.integrators.contains(&Integrator::Heun) {
        let label = format!("{tag}_heun");
        match heun_simulate(&x0, &mut Pairwise::new(&sys), grid) {
            Ok(run) => out.push(baseline_record(
                label,
                "heun",
                cfg,
                &sys,
                &x0,
                &run,
                reference,
                BTreeMap::new(),
            )?),
            Err(e) => out.push(failure(label, "heun", cfg.n, &e)),
        }
    }
    for (k, (name, criterion)) in treecode_variants(cfg).into_iter().enumerate() {
        let selected = cfg
            .baseline
            .selected
            .get(k)
            .copied()
            .unwrap_or(LeafCapacity {
                implicit: 1,
                explicit: 1,
            });
        for &integ in &cfg.baseline.integrators {
            let (method, chosen) = match integ {
                Integrator::Trapezoidal => ("bh_implicit", selected.implicit),
                Integrator::Heun => ("bh_explicit", selected.explicit),
            };
            let caps = if cfg.baseline.leaf_capacity_sweep.is_empty() {
                vec![chosen]
            } else {
                cfg.baseline.leaf_capacity_sweep.clone()
            };
            for cap in caps {
                let label = format!("{tag}_{method}_{name}_leaf{cap}");
                match bh_run(&sys, &x0, cfg, criterion, cap.min(cfg.n), integ) {
                    Ok((run, evals)) => {
                        let mut facts = BTreeMap::new();
                        facts.insert("leaf_capacity".into(), cap as f64);
                        facts.insert("kernel_evaluations".into(), evals as f64);
                        out.push(baseline_record(
                            label, method, cfg, &sys, &x0, &run, reference, facts,
                        )?);
                    }
                    Err(e) => out.push(failure(label, method, cfg.n, &e)),
                }
            }
        }
    }
    if cfg.baseline.gnat {
        let mut g = cfg.clone();
        g.rom.criterion = None;
        if let Some(m) = g.baseline.gnat_m {
            g.rom.m = m;
            g.rom.m_r = 2 * m;
            g.rom.n_samples = (2 * m).min(g.n);
        }
        g.name = format!("{tag}_gnat");
        let runs = training_runs.unwrap_or_else(|| vec![reference.clone()]);
        match reproductive_from_snapshots(&g, runs) {
            Ok(case) => out.push(case.record),
            Err(e) => out.push(failure(g.name.clone(), "gnat", cfg.n, &e)),
        }
    }
    Ok(out)
}

/// Runs every `(N, width, case)` of `spec`, writing reports to `dir`.
pub fn run_reproductive_suite(spec: &SweepSpec, dir: &Path) -> Result<(Vec<RunRecord>, Manifest)> {
    let mut records = Vec::new();
    let mut configs = Manifest::default();
    for &n in &spec.ns {
        let mut shared: Option<Vec<FomRun>> = None;
        for &width in &spec.widths {
            for &case in &spec.cases {
                let mut cfg = cap_steps(
                    ExperimentConfig::single_vortex(n, width, case)?,
                    spec.max_steps,
                );
                if width == Width::Unclustered {
                    cfg.baseline.gnat = false;
                }
                let runs = match &shared {
                    Some(r) => r.clone(),
                    None => {
                        let r = training_snapshots(&cfg)?;
                        shared = Some(r.clone());
                        r
                    }
                };
                configs.extend(write_config(
                    dir,
                    &format!("configs/{}.json", cfg.name),
                    &cfg,
                )?);
                match reproductive_from_snapshots(&cfg, runs) {
                    Ok(case) => records.push(case.record),
                    Err(e) if e.is_numerical() => {
                        records.push(failure(cfg.name.clone(), width_name(width), n, &e))
                    }
                    Err(e) => return Err(e),
                }
            }
        }
        if spec.baselines {
            let case = spec.cases.first().copied().unwrap_or(1);
            let mut cfg = cap_steps(
                ExperimentConfig::single_vortex(n, Width::Narrow, case)?,
                spec.max_steps,
            );
            cfg.name = format!("single_vortex_n{n}_case{case}");
            cfg.baseline.gnat_m = Some(case_hyperparameters(Width::Unclustered, case, n)?.0);
            let runs = match shared.take() {
                Some(r) => r,
                None => training_snapshots(&cfg)?,
            };
            configs.extend(write_config(
                dir,
                &format!("configs/{}.json", cfg.name),
                &cfg,
            )?);
            let reference = runs[0].clone();
            records.extend(run_baselines(&cfg, &reference, Some(runs))?);
        }
    }
    let mut manifest = emit_reports(dir, &records)?;
    manifest.extend(configs);
    Ok((records, manifest.write(dir)?))
}
