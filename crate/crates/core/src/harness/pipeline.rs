//! Four-stage offline training: FOM snapshots, state POD and source
//! clustering, Tier II LSPG residual snapshots, then sampling and the gappy
//! operator.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, TrainingSources};
use super::initial::{generate_initial_conditions, training_points};
use crate::error::{Error, Result};
use crate::integrators::{fom_simulate, FomRun};
use crate::io::{read_matrix, write_json, write_matrix, write_snapshots, MatrixHeader};
use crate::kernel::Pairwise;
use crate::reduction::{
    build_pod, build_residual_basis, gnat_operator, greedy_sample, Centering, GnatOperator,
    PodBasis, PodSpaceTree, ResidualBasis, SurrogateSourceBasis,
};
use crate::rom_solvers::{lspg_simulate, HyperPair, SourceModel};

/// Non-timing facts about a training run, persisted alongside the bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub config: ExperimentConfig,
    /// `None` entries mark the single reproductive training point.
    pub training_points: Vec<Option<[f64; 2]>>,
    pub state_snapshots: usize,
    pub residual_snapshots: usize,
    pub pod_energy_fraction: f64,
    pub state_numerical_rank: usize,
    pub n_clusters: Option<usize>,
    pub n_direct_sources: Option<usize>,
    pub max_interactions: Option<usize>,
    pub fom_failed_steps: Vec<Vec<usize>>,
    pub tier2_failed_steps: Vec<Vec<usize>>,
    pub tier2_iterations: Vec<usize>,
    /// Snapshot files written by [`OfflineBundle::save`], relative to the bundle directory.
    pub snapshot_files: Vec<String>,
}

impl TrainingMetadata {
    /// Agglomerated clusters plus near-field particles: the count of distinct
    /// source points the sampled targets interact with.
    pub fn n_unique_sources(&self) -> Option<usize> {
        Some(self.n_clusters? + self.n_direct_sources?)
    }
}

/// Seconds spent in each offline stage.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StageTimings {
    pub fom: Vec<f64>,
    pub state_pod: f64,
    pub clustering: f64,
    pub tier2: Vec<f64>,
    pub residual_pod: f64,
    pub sampling: f64,
}

/// Everything the online solver needs, plus provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct OfflineBundle {
    pub basis: PodBasis,
    pub residual: ResidualBasis,
    pub gnat: GnatOperator,
    /// Sampled-target surrogate; `None` for unclustered (GNAT) bundles.
    pub surrogate: Option<SurrogateSourceBasis>,
    pub metadata: TrainingMetadata,
    pub timings: StageTimings,
}

/// A bundle together with the full-order training trajectories that produced it.
#[derive(Debug, Clone)]
pub struct Training {
    pub bundle: OfflineBundle,
    pub fom_runs: Vec<FomRun>,
}

fn hstack(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut data = Vec::with_capacity(rows * cols);
    for b in blocks {
        data.extend_from_slice(b.as_slice());
    }
    DMatrix::from_vec(rows, cols, data)
}

fn mean_circulation(gammas: &[Vec<f64>]) -> Vec<f64> {
    let n = gammas[0].len();
    (0..n)
        .map(|i| gammas.iter().map(|g| g[i]).sum::<f64>() / gammas.len() as f64)
        .collect()
}

/// Parametric points used for training, `None` for the reproductive point.
pub fn training_mus(cfg: &ExperimentConfig) -> Vec<Option<[f64; 2]>> {
    match &cfg.parametric {
        Some(space) => training_points(space, cfg.seed)
            .into_iter()
            .map(Some)
            .collect(),
        None => vec![None],
    }
}

/// Stage 1 alone: implicit FOM runs at every training point.
pub fn training_snapshots(cfg: &ExperimentConfig) -> Result<Vec<FomRun>> {
    cfg.validate()?;
    let grid = cfg.time_grid()?;
    training_mus(cfg)
        .into_iter()
        .map(|mu| {
            let (x, sys) = generate_initial_conditions(cfg, mu)?;
            fom_simulate(&x, &mut Pairwise::new(&sys), grid, cfg.newton)
                .map_err(Error::in_stage("stage 1 (FOM snapshots)"))
        })
        .collect()
}

/// Runs all four stages and keeps the training FOM trajectories.
pub fn run_training(cfg: &ExperimentConfig) -> Result<Training> {
    let runs = training_snapshots(cfg)?;
    train_from_snapshots(cfg, runs)
}

/// Stages 2–4 on existing Stage 1 trajectories (one per training point, in order).
pub fn train_from_snapshots(cfg: &ExperimentConfig, fom_runs: Vec<FomRun>) -> Result<Training> {
    cfg.validate()?;
    let grid = cfg.time_grid()?;
    let mus = training_mus(cfg);
    if fom_runs.len() != mus.len()
        || fom_runs
            .iter()
            .any(|r| r.snapshots.n_columns() != grid.n_steps)
    {
        return Err(Error::Config(
            "training trajectories do not match the configured training points".into(),
        ));
    }
    let mut timings = StageTimings {
        fom: fom_runs.iter().map(|r| r.wall_time).collect(),
        ..StageTimings::default()
    };
    let mut systems = Vec::with_capacity(mus.len());
    let mut x0 = Vec::new();
    for &mu in &mus {
        let (x, sys) = generate_initial_conditions(cfg, mu)?;
        systems.push(sys);
        x0 = x;
    }
    let snapshots = hstack(
        &fom_runs
            .iter()
            .map(|r| r.snapshots.to_matrix())
            .collect::<Vec<_>>(),
    );

    // Stage 2: state POD and the POD-space tree (built once).
    let t = Instant::now();
    let basis = build_pod(&snapshots, cfg.rom.m, &x0, cfg.rom.centering)
        .map_err(Error::in_stage("stage 2 (state POD)"))?;
    timings.state_pod = t.elapsed().as_secs_f64();
    let state_numerical_rank =
        numerical_rank(&basis.spectrum, snapshots.nrows(), snapshots.ncols());

    let gammas: Vec<Vec<f64>> = systems.iter().map(|s| s.circulation().to_vec()).collect();
    let gamma_ref = mean_circulation(&gammas);
    let t = Instant::now();
    let tree = match cfg.rom.criterion {
        Some(_) => {
            // The tree needs the raw factorization: once the reference state is
            // removed, slowly moving particles far apart in physical space
            // collapse onto the origin of the weighted POD space.
            let raw;
            let tree_basis = match cfg.rom.centering {
                Centering::Raw => &basis,
                Centering::Reference => {
                    raw = build_pod(&snapshots, cfg.rom.m, &x0, Centering::Raw)
                        .map_err(Error::in_stage("stage 2 (POD-space tree)"))?;
                    &raw
                }
            };
            Some(
                PodSpaceTree::build(tree_basis, &gamma_ref, cfg.rom.leaf_capacity)
                    .map_err(Error::in_stage("stage 2 (POD-space tree)"))?,
            )
        }
        None => None,
    };
    drop(snapshots);
    let all: Vec<usize> = (0..cfg.n).collect();
    let all_target = match (&tree, cfg.rom.criterion) {
        (Some(tree), Some(c)) if cfg.rom.training_sources == TrainingSources::Clustered => Some(
            SurrogateSourceBasis::from_tree(tree, &basis, &gamma_ref, &x0, &all, c)
                .map_err(Error::in_stage("stage 2 (source clustering)"))?,
        ),
        _ => None,
    };
    timings.clustering = t.elapsed().as_secs_f64();

    // Stage 3: Tier II LSPG residual snapshots at every Gauss–Newton iterate.
    let mut residual_blocks = Vec::with_capacity(mus.len());
    let mut tier2_failed_steps = Vec::new();
    let mut tier2_iterations = Vec::new();
    for sys in &systems {
        let sources = match &all_target {
            Some(s) => SourceModel::Clustered(
                s.reassign_cluster_circulation(&basis, &x0, sys.circulation())
                    .map_err(Error::in_stage("stage 3 (Tier II LSPG)"))?,
            ),
            None => SourceModel::Exact,
        };
        let mut field = HyperPair::new(sys, &basis, &all, sources)?;
        let t = Instant::now();
        let run = lspg_simulate(&mut field, &basis, &x0, grid, &cfg.rom.solver)
            .map_err(Error::in_stage("stage 3 (Tier II LSPG)"))?;
        timings.tier2.push(t.elapsed().as_secs_f64());
        tier2_failed_steps.push(run.trajectory.failed_steps());
        tier2_iterations.push(run.trajectory.iterations.iter().sum());
        residual_blocks.push(run.residual_matrix(2 * cfg.n));
    }
    let residuals = hstack(&residual_blocks);
    drop(residual_blocks);
    let t = Instant::now();
    let residual = build_residual_basis(&residuals, cfg.rom.m_r)
        .map_err(Error::in_stage("stage 3 (residual POD)"))?;
    timings.residual_pod = t.elapsed().as_secs_f64();

    // Stage 4: sampling, gappy operator, sampled-target surrogate.
    let t = Instant::now();
    let ids = greedy_sample(&residual.phi_r, cfg.rom.n_samples, &cfg.rom.preseed)
        .map_err(Error::in_stage("stage 4 (greedy sampling)"))?;
    let gnat = gnat_operator(&residual.phi_r, &ids)
        .map_err(Error::in_stage("stage 4 (gappy operator)"))?;
    let surrogate = match (&tree, cfg.rom.criterion) {
        (Some(tree), Some(c)) => Some(
            SurrogateSourceBasis::from_tree(tree, &basis, &gamma_ref, &x0, &ids, c)
                .map_err(Error::in_stage("stage 4 (sampled surrogate)"))?,
        ),
        _ => None,
    };
    timings.sampling = t.elapsed().as_secs_f64();

    let metadata = TrainingMetadata {
        config: cfg.clone(),
        training_points: mus,
        state_snapshots: fom_runs.iter().map(|r| r.snapshots.n_columns()).sum(),
        residual_snapshots: residuals.ncols(),
        pod_energy_fraction: basis.energy_fraction(),
        state_numerical_rank,
        n_clusters: surrogate.as_ref().map(SurrogateSourceBasis::n_clusters),
        n_direct_sources: surrogate.as_ref().map(SurrogateSourceBasis::n_direct),
        max_interactions: surrogate
            .as_ref()
            .map(SurrogateSourceBasis::max_interactions),
        fom_failed_steps: fom_runs.iter().map(FomRun::failed_steps).collect(),
        tier2_failed_steps,
        tier2_iterations,
        snapshot_files: (0..fom_runs.len()).map(snapshot_file).collect(),
    };
    Ok(Training {
        bundle: OfflineBundle {
            basis,
            residual,
            gnat,
            surrogate,
            metadata,
            timings,
        },
        fom_runs,
    })
}

/// Runs the pipeline and returns only the offline bundle.
pub fn run_training_pipeline(cfg: &ExperimentConfig) -> Result<OfflineBundle> {
    run_training(cfg).map(|t| t.bundle)
}

fn numerical_rank(spectrum: &[f64], rows: usize, cols: usize) -> usize {
    let smax = spectrum.first().copied().unwrap_or(0.0);
    let tol = smax * rows.max(cols) as f64 * f64::EPSILON;
    spectrum.iter().filter(|&&s| s > tol).count()
}

fn snapshot_file(k: usize) -> String {
    format!("snapshots/state_{k:02}.bin")
}

#[derive(Serialize, Deserialize)]
struct BasisIndex {
    singular_values: Vec<f64>,
    spectrum: Vec<f64>,
    x_ref: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ResidualIndex {
    singular_values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct GnatIndex {
    sample_ids: Vec<usize>,
    sampled_dofs: Vec<usize>,
}

impl OfflineBundle {
    /// Writes the bundle into `dir`; returns the files written (relative paths, sorted).
    ///
    /// Everything except `timings.json` is a deterministic function of the config.
    pub fn save(&self, dir: &Path) -> Result<Vec<String>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut files = BTreeMap::new();
        let mut put = |name: &str| {
            files.insert(name.to_string(), ());
            dir.join(name)
        };
        let none = MatrixHeader::default();
        write_matrix(&put("basis.bin"), &self.basis.phi, none)?;
        write_json(
            &put("basis.json"),
            &BasisIndex {
                singular_values: self.basis.singular_values.clone(),
                spectrum: self.basis.spectrum.clone(),
                x_ref: self.basis.x_ref.clone(),
            },
        )?;
        write_matrix(&put("residual_basis.bin"), &self.residual.phi_r, none)?;
        write_json(
            &put("residual_basis.json"),
            &ResidualIndex {
                singular_values: self.residual.singular_values.clone(),
            },
        )?;
        write_matrix(&put("gnat_operator.bin"), &self.gnat.a, none)?;
        write_json(
            &put("gnat_operator.json"),
            &GnatIndex {
                sample_ids: self.gnat.sample_ids.clone(),
                sampled_dofs: self.gnat.sampled_dofs.clone(),
            },
        )?;
        if let Some(s) = &self.surrogate {
            write_json(&put("surrogate.json"), s)?;
        }
        write_json(&put("training.json"), &self.metadata)?;
        write_json(&put("timings.json"), &self.timings)?;
        Ok(files.into_keys().collect())
    }

    /// Writes the training snapshots next to a saved bundle.
    pub fn save_snapshots(&self, dir: &Path, runs: &[FomRun]) -> Result<Vec<String>> {
        std::fs::create_dir_all(dir.join("snapshots")).map_err(|e| Error::io(dir, e))?;
        for (name, run) in self.metadata.snapshot_files.iter().zip(runs) {
            write_snapshots(&dir.join(name), &run.snapshots)?;
        }
        Ok(self.metadata.snapshot_files.clone())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let json = |name: &str| -> Result<serde_json::Value> {
            let path = dir.join(name);
            let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            serde_json::from_str(&text).map_err(|e| Error::Format {
                path: path.clone(),
                reason: e.to_string(),
            })
        };
        let (phi, _) = read_matrix(&dir.join("basis.bin"))?;
        let bi: BasisIndex = serde_json::from_value(json("basis.json")?)?;
        let (phi_r, _) = read_matrix(&dir.join("residual_basis.bin"))?;
        let ri: ResidualIndex = serde_json::from_value(json("residual_basis.json")?)?;
        let (a, _) = read_matrix(&dir.join("gnat_operator.bin"))?;
        let gi: GnatIndex = serde_json::from_value(json("gnat_operator.json")?)?;
        let surrogate = if dir.join("surrogate.json").exists() {
            Some(serde_json::from_value(json("surrogate.json")?)?)
        } else {
            None
        };
        let metadata: TrainingMetadata = serde_json::from_value(json("training.json")?)?;
        let timings = if dir.join("timings.json").exists() {
            serde_json::from_value(json("timings.json")?)?
        } else {
            StageTimings::default()
        };
        let bundle = Self {
            basis: PodBasis {
                phi,
                singular_values: bi.singular_values,
                spectrum: bi.spectrum,
                x_ref: bi.x_ref,
            },
            residual: ResidualBasis {
                phi_r,
                singular_values: ri.singular_values,
            },
            gnat: GnatOperator {
                sample_ids: gi.sample_ids,
                sampled_dofs: gi.sampled_dofs,
                a,
            },
            surrogate,
            metadata,
            timings,
        };
        bundle.check_consistency(dir)?;
        Ok(bundle)
    }

    /// Dimensions `M`, `M_r`, `n̆`, `N` agree across all parts.
    pub fn check_consistency(&self, origin: &Path) -> Result<()> {
        let bad = |reason: String| {
            Err(Error::Format {
                path: origin.to_path_buf(),
                reason,
            })
        };
        let nd = self.basis.n_dofs();
        if self.basis.x_ref.len() != nd || self.residual.n_dofs() != nd {
            return bad(format!(
                "basis rows disagree ({nd} vs {})",
                self.residual.n_dofs()
            ));
        }
        if self.gnat.a.nrows() != self.residual.m_r()
            || self.gnat.a.ncols() != 2 * self.gnat.n_samples()
        {
            return bad("gappy operator shape does not match residual basis and sample".into());
        }
        if let Some(s) = &self.surrogate {
            if s.m != self.basis.m() || 2 * s.n != nd || s.target_ids != self.gnat.sample_ids {
                return bad("surrogate does not match basis or sample".into());
            }
        }
        Ok(())
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.metadata.config
    }
}

/// Default bundle directory under an output root.
pub fn bundle_dir(root: &Path, cfg: &ExperimentConfig) -> PathBuf {
    root.join(&cfg.output_dir).join("train")
}
