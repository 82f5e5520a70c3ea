//! Online parametric queries against a trained bundle.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::config::ExperimentConfig;
use super::initial::{generate_initial_conditions, query_points};
use super::pipeline::OfflineBundle;
use super::report::{emit_reports, sample_frames, write_config, ArtifactKind, Manifest, RunRecord};
use crate::error::{Error, Result};
use crate::integrators::{fom_simulate, FomRun};
use crate::io::write_text;
use crate::kernel::{Pairwise, ParticleSystem};
use crate::metrics::{characteristic_length, ErrorReport};
use crate::rom_solvers::{ptrom_simulate, reconstruct_full, OnlineOperators, RomTrajectory};

/// One PTROM run compared against a fresh FOM reference.
#[derive(Debug, Clone)]
pub struct QueryOutcome {
    pub record: RunRecord,
    pub trajectory: Option<RomTrajectory>,
    pub reference: Option<FomRun>,
}

/// Number of frames kept for plotting per run.
const FRAMES: usize = 50;

/// PTROM (or GNAT when the bundle is unclustered) run at `sys`, scored against `reference`.
pub fn score_ptrom(
    bundle: &OfflineBundle,
    sys: &ParticleSystem,
    x0: &[f64],
    reference: &FomRun,
    label: String,
    mu: Option<[f64; 2]>,
) -> Result<(RunRecord, RomTrajectory)> {
    let cfg = bundle.config();
    let grid = cfg.time_grid()?;
    let ops = OnlineOperators {
        basis: &bundle.basis,
        gnat: &bundle.gnat,
        surrogate: bundle.surrogate.as_ref(),
    };
    let traj = ptrom_simulate(ops, sys, x0, grid, &cfg.rom.solver)?;
    let states = reconstruct_full(&traj.x_hat_history, &bundle.basis)?;
    let l = characteristic_length(x0)?;
    let errors = ErrorReport::compute(
        reference.snapshots.columns(),
        states.iter().map(Vec::as_slice),
        sys,
        l,
    )?;
    let mut facts = BTreeMap::new();
    facts.insert("m".into(), bundle.basis.m() as f64);
    facts.insert("m_r".into(), bundle.residual.m_r() as f64);
    facts.insert("n_samples".into(), bundle.gnat.n_samples() as f64);
    if let Some(s) = &bundle.surrogate {
        facts.insert("n_clusters".into(), s.n_clusters() as f64);
        facts.insert("n_unique_sources".into(), s.n_unique_sources() as f64);
    }
    facts.insert(
        "gauss_newton_iterations".into(),
        traj.iterations.iter().sum::<usize>() as f64,
    );
    facts.insert("failed_steps".into(), traj.failed_steps().len() as f64);
    facts.insert(
        "kernel_evaluations_per_pass".into(),
        traj.kernel_evaluations_per_pass(),
    );
    let stride = (grid.n_steps / FRAMES).max(1);
    let record = RunRecord {
        label,
        method: if bundle.surrogate.is_some() {
            "ptrom"
        } else {
            "gnat"
        }
        .into(),
        n: cfg.n,
        mu,
        errors: Some(errors),
        wall_time: Some(traj.wall_time),
        reference_wall_time: Some(reference.wall_time),
        facts,
        frames: sample_frames(states.iter().map(Vec::as_slice), stride),
        failure: None,
    };
    Ok((record, traj))
}

fn failed(label: String, n: usize, mu: Option<[f64; 2]>, e: &Error) -> RunRecord {
    RunRecord {
        label,
        method: "ptrom".into(),
        n,
        mu,
        failure: Some(e.to_string()),
        ..RunRecord::default()
    }
}

fn query_one(
    bundle: &OfflineBundle,
    cfg: &ExperimentConfig,
    mu: [f64; 2],
    label: String,
) -> Result<QueryOutcome> {
    let (x0, sys) = generate_initial_conditions(cfg, Some(mu))?;
    let reference = fom_simulate(&x0, &mut Pairwise::new(&sys), cfg.time_grid()?, cfg.newton)?;
    let (mut record, traj) = score_ptrom(bundle, &sys, &x0, &reference, label, Some(mu))?;
    let is_training = bundle.metadata.training_points.contains(&Some(mu));
    record
        .facts
        .insert("training_point".into(), if is_training { 1.0 } else { 0.0 });
    Ok(QueryOutcome {
        record,
        trajectory: Some(traj),
        reference: Some(reference),
    })
}

/// Runs every query-grid point, writes reports under `dir`, and returns the records.
///
/// Each query gets its own FOM reference run; a failing query is recorded
/// and the remaining points still run.
pub fn run_online_queries(
    bundle: &OfflineBundle,
    cfg: &ExperimentConfig,
    dir: &Path,
) -> Result<(Vec<RunRecord>, Manifest)> {
    let space = cfg
        .parametric
        .as_ref()
        .ok_or_else(|| Error::Config("online queries need a parametric space".into()))?;
    bundle.check_consistency(dir)?;
    let mut records = Vec::new();
    for (k, mu) in query_points(space).into_iter().enumerate() {
        let label = format!("query_{k:03}");
        match query_one(bundle, cfg, mu, label.clone()) {
            Ok(out) => records.push(out.record),
            Err(e) => records.push(failed(label, cfg.n, Some(mu), &e)),
        }
    }
    let mut manifest = emit_reports(dir, &records)?;
    manifest.extend(write_surfaces(dir, &records)?);
    manifest.extend(write_config(dir, "config.json", cfg)?);
    let manifest = manifest.write(dir)?;
    Ok((records, manifest))
}

/// `error_surface.csv` (deterministic) and `speedup_surface.csv` (timing).
fn write_surfaces(dir: &Path, records: &[RunRecord]) -> Result<Manifest> {
    let mut err = String::from("mu1,mu2,mean_mae_d,mean_ae_h\n");
    let mut sf = String::from("mu1,mu2,fom_wall_time,rom_wall_time,speedup\n");
    for r in records {
        let (Some(mu), Some(e)) = (r.mu, &r.errors) else {
            continue;
        };
        let _ = writeln!(
            err,
            "{:e},{:e},{:e},{:e}",
            mu[0], mu[1], e.mean_mae_d, e.mean_ae_h
        );
        let f = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:e}"));
        let _ = writeln!(
            sf,
            "{:e},{:e},{},{},{}",
            mu[0],
            mu[1],
            f(r.reference_wall_time),
            f(r.wall_time),
            f(r.speedup())
        );
    }
    write_text(&dir.join("error_surface.csv"), &err)?;
    write_text(&dir.join("speedup_surface.csv"), &sf)?;
    let mut m = Manifest::default();
    m.add("error_surface.csv", ArtifactKind::Data);
    m.add("speedup_surface.csv", ArtifactKind::Timing);
    Ok(m)
}

/// Grid averages over successful queries: `(mean MAE_D, mean AE_H, mean SF)`.
pub fn grid_averages(records: &[RunRecord]) -> Option<(f64, f64, f64)> {
    let ok: Vec<&RunRecord> = records.iter().filter(|r| r.errors.is_some()).collect();
    if ok.is_empty() {
        return None;
    }
    let n = ok.len() as f64;
    let mae = ok
        .iter()
        .map(|r| r.errors.as_ref().map_or(0.0, |e| e.mean_mae_d))
        .sum::<f64>()
        / n;
    let aeh = ok
        .iter()
        .map(|r| r.errors.as_ref().map_or(0.0, |e| e.mean_ae_h))
        .sum::<f64>()
        / n;
    let sf = ok.iter().filter_map(|r| r.speedup()).sum::<f64>() / n;
    Some((mae, aeh, sf))
}
