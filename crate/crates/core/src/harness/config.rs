//! Experiment configuration and the published presets.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrators::{Integrator, NewtonConfig, TimeGrid};
use crate::quadtree::Criterion;
use crate::reduction::pod::Centering;
use crate::rom_solvers::RomConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    VortexPair,
    Mushroom,
    SingleVortex,
    Custom,
}

/// Particles placed uniformly on the segment from `start` to `end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearLayout {
    pub start: [f64; 2],
    pub end: [f64; 2],
}

/// How circulations are assigned; `μ` always denotes a point of the 2D parametric space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum CirculationLayout {
    /// `Γ₁ = μ₁`, `Γ_N = μ₂`, every other particle gets `background`.
    EndParticles { background: f64 },
    /// Particle `(N − 1) / 2` gets `gamma_center`, the rest `background`.
    Center { gamma_center: f64, background: f64 },
    /// Fixed per-particle circulations.
    Explicit { gamma: Vec<f64> },
}

/// Semicircular inflow `p_ψ = amplitude·√(radius² − χ∞²) + offset`, `p_χ = 0`,
/// with `χ∞` spaced uniformly over `span` and assigned in particle order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InflowProfile {
    pub amplitude: f64,
    pub radius: f64,
    pub offset: f64,
    pub span: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParametricSpace {
    pub lower: [f64; 2],
    pub upper: [f64; 2],
    /// Number of seeded Latin-hypercube training points.
    pub n_training: usize,
    /// Explicit training points; when present they replace the LHS draw.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training_points: Option<Vec<[f64; 2]>>,
    /// Query grid resolution `[n₁, n₂]` (vertices, bounds included).
    pub query_grid: [usize; 2],
}

/// Which sources the Tier II LSPG runs use while collecting residual snapshots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainingSources {
    /// All-target clustered surrogate from the same POD-space tree.
    #[default]
    Clustered,
    /// Every particle as an exact source.
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RomSettings {
    pub m: usize,
    pub m_r: usize,
    /// Number of sampled particles `n̆`.
    pub n_samples: usize,
    /// Source clustering criterion; `None` evaluates all sources exactly (GNAT).
    pub criterion: Option<Criterion>,
    pub leaf_capacity: usize,
    pub solver: RomConfig,
    #[serde(default)]
    pub centering: Centering,
    #[serde(default)]
    pub training_sources: TrainingSources,
    /// Particles forced into the sample set before the greedy search.
    #[serde(default)]
    pub preseed: Vec<usize>,
}

/// Leaf capacities to use for one baseline variant, implicit and explicit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeafCapacity {
    pub implicit: usize,
    pub explicit: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSettings {
    pub integrators: Vec<Integrator>,
    pub thetas: Vec<f64>,
    pub p_cs: Vec<f64>,
    /// Candidate capacities for the sweep; empty uses `selected` only.
    pub leaf_capacity_sweep: Vec<usize>,
    /// Per-variant capacity, aligned with `thetas` then `p_cs`.
    pub selected: Vec<LeafCapacity>,
    pub gnat: bool,
    /// Basis size for the GNAT baseline; `None` reuses the PTROM size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gnat_m: Option<usize>,
}

impl Default for BaselineSettings {
    fn default() -> Self {
        Self {
            integrators: vec![Integrator::Trapezoidal, Integrator::Heun],
            thetas: vec![2.0, 1.0, 0.5],
            p_cs: vec![0.0, 1.0, 2.0],
            leaf_capacity_sweep: Vec::new(),
            selected: vec![
                LeafCapacity {
                    implicit: 1,
                    explicit: 1
                };
                6
            ],
            gnat: true,
            gnat_m: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub kind: ExperimentKind,
    pub n: usize,
    pub dt: f64,
    pub t_span: [f64; 2],
    pub delta_k: f64,
    pub positions: LinearLayout,
    pub circulation: CirculationLayout,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inflow: Option<InflowProfile>,
    /// `None` for reproductive runs (training and query coincide).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parametric: Option<ParametricSpace>,
    pub rom: RomSettings,
    pub newton: NewtonConfig,
    #[serde(default)]
    pub baseline: BaselineSettings,
    pub output_dir: PathBuf,
    pub seed: u64,
}

/// Step size, center circulation and time span for the reproductive single-vortex sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReproductiveConditions {
    pub n: usize,
    pub dt: f64,
    pub gamma_center: f64,
    pub t_span: [f64; 2],
}

pub const REPRODUCTIVE_CONDITIONS: [ReproductiveConditions; 7] = [
    ReproductiveConditions {
        n: 100,
        dt: 0.01,
        gamma_center: 500.0,
        t_span: [0.0, 20.0],
    },
    ReproductiveConditions {
        n: 500,
        dt: 2.5e-3,
        gamma_center: 1e4,
        t_span: [0.0, 5.0],
    },
    ReproductiveConditions {
        n: 1000,
        dt: 2.5e-4,
        gamma_center: 1e5,
        t_span: [0.0, 0.5],
    },
    ReproductiveConditions {
        n: 2000,
        dt: 1.25e-4,
        gamma_center: 2e5,
        t_span: [0.0, 0.25],
    },
    ReproductiveConditions {
        n: 3000,
        dt: 1e-4,
        gamma_center: 3e5,
        t_span: [0.0, 0.2],
    },
    ReproductiveConditions {
        n: 4000,
        dt: 7.5e-5,
        gamma_center: 4e5,
        t_span: [0.0, 0.15],
    },
    ReproductiveConditions {
        n: 5000,
        dt: 5e-5,
        gamma_center: 6.75e5,
        t_span: [0.0, 0.1],
    },
];

const SWEEP_N: [usize; 7] = [100, 500, 1000, 2000, 3000, 4000, 5000];

/// Neighborhood width family of the reproductive PTROM cases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Width {
    Narrow,
    Moderate,
    Wide,
    /// No clustering: the GNAT baseline.
    Unclustered,
}

/// Basis rank `M` per bases case (rows) and `N` (columns).
const RANK_NARROW: [[usize; 7]; 4] = [
    [13, 21, 21, 21, 23, 23, 23],
    [14, 22, 22, 22, 23, 23, 24],
    [14, 23, 23, 23, 25, 25, 26],
    [16, 24, 24, 26, 26, 26, 26],
];
const RANK_MODERATE: [[usize; 7]; 4] = [
    [13, 21, 21, 21, 23, 23, 23],
    [14, 22, 22, 22, 23, 23, 24],
    [14, 23, 23, 23, 25, 25, 26],
    [18, 24, 24, 26, 26, 26, 26],
];
const RANK_WIDE: [[usize; 7]; 4] = [
    [13, 21, 21, 21, 23, 23, 23],
    [14, 22, 22, 22, 23, 23, 24],
    [14, 23, 23, 23, 25, 25, 26],
    [18, 24, 24, 26, 26, 32, 33],
];
const RANK_GNAT: [[usize; 7]; 4] = [
    [13, 21, 21, 21, 23, 23, 23],
    [14, 22, 22, 22, 24, 24, 25],
    [14, 24, 24, 24, 25, 25, 26],
    [16, 25, 25, 26, 26, 26, 27],
];

/// Leaf capacities `[θ=0.5, θ=1, θ=2, p_c=0, p_c=1, p_c=2]` per `N`.
const CAPACITY_IMPLICIT: [[usize; 6]; 7] = [
    [100, 100, 100, 100, 100, 100],
    [500, 50, 50, 100, 500, 500],
    [1000, 75, 50, 100, 75, 75],
    [100, 100, 100, 100, 50, 50],
    [75, 75, 75, 75, 75, 75],
    [100, 100, 100, 100, 100, 40],
    [125, 125, 125, 125, 50, 50],
];
const CAPACITY_EXPLICIT: [[usize; 6]; 7] = [
    [100, 100, 100, 100, 100, 100],
    [500, 38, 50, 50, 50, 450],
    [100, 75, 50, 50, 50, 50],
    [50, 100, 100, 100, 100, 50],
    [75, 75, 75, 75, 75, 75],
    [100, 100, 100, 100, 100, 40],
    [50, 125, 125, 125, 125, 50],
];

fn sweep_index(n: usize) -> Result<usize> {
    SWEEP_N.iter().position(|&m| m == n).ok_or_else(|| {
        Error::Config(format!(
            "no reproductive preset for N = {n}; expected one of {SWEEP_N:?}"
        ))
    })
}

pub fn reproductive_conditions(n: usize) -> Result<ReproductiveConditions> {
    Ok(REPRODUCTIVE_CONDITIONS[sweep_index(n)?])
}

/// Gauss–Newton tolerance of bases cases 1–4.
pub fn case_tolerance(case: usize) -> Result<f64> {
    match case {
        1..=4 => Ok(10f64.powi(-(case as i32))),
        _ => Err(Error::Config(format!(
            "bases case must be 1..=4, got {case}"
        ))),
    }
}

/// Published rank `M` and neighborhood width `p_c` for a reproductive case.
pub fn case_hyperparameters(width: Width, case: usize, n: usize) -> Result<(usize, Option<f64>)> {
    case_tolerance(case)?;
    let col = sweep_index(n)?;
    let row = case - 1;
    Ok(match width {
        Width::Narrow => (
            RANK_NARROW[row][col],
            Some(if case == 4 && n >= 3000 { 0.5 } else { 0.0 }),
        ),
        Width::Moderate => (RANK_MODERATE[row][col], Some(1.0)),
        Width::Wide => (RANK_WIDE[row][col], Some(2.0)),
        Width::Unclustered => (RANK_GNAT[row][col], None),
    })
}

/// Selected Barnes–Hut leaf capacities for the standard six baseline variants.
pub fn selected_leaf_capacities(n: usize) -> Result<Vec<LeafCapacity>> {
    let k = sweep_index(n)?;
    // Stored θ ascending; baseline variants list θ descending (2, 1, 0.5) then p_c.
    let order = [2usize, 1, 0, 3, 4, 5];
    Ok(order
        .iter()
        .map(|&c| LeafCapacity {
            implicit: CAPACITY_IMPLICIT[k][c],
            explicit: CAPACITY_EXPLICIT[k][c],
        })
        .collect())
}

fn default_newton() -> NewtonConfig {
    NewtonConfig::default()
}

impl ExperimentConfig {
    /// Vortex pair: `μ = (Γ₁, Γ_N) ∈ [0.25·255, 255]²`, `N = 500`, `t ∈ [0, 5]`.
    pub fn vortex_pair() -> Self {
        let g = 255.0;
        Self {
            name: "vortex_pair".into(),
            kind: ExperimentKind::VortexPair,
            n: 500,
            dt: 0.01,
            t_span: [0.0, 5.0],
            delta_k: 0.2121,
            positions: LinearLayout {
                start: [-52.93, -52.93],
                end: [52.93, 52.93],
            },
            circulation: CirculationLayout::EndParticles { background: 0.01 },
            inflow: None,
            parametric: Some(ParametricSpace {
                lower: [0.25 * g, 0.25 * g],
                upper: [g, g],
                n_training: 4,
                training_points: None,
                query_grid: [6, 6],
            }),
            rom: RomSettings {
                m: 85,
                m_r: 110,
                n_samples: 60,
                criterion: Some(Criterion::Neighbor { p_c: 1.0 }),
                leaf_capacity: 1,
                solver: RomConfig {
                    tol: 1e-4,
                    ..RomConfig::default()
                },
                centering: Centering::default(),
                training_sources: TrainingSources::default(),
                preseed: Vec::new(),
            },
            newton: default_newton(),
            baseline: BaselineSettings::default(),
            output_dir: PathBuf::from("vortex_pair"),
            seed: 2024,
        }
    }

    /// Mushroom cloud: `μ ∈ [−220, −110] × [110, 220]` with semicircular inflow.
    pub fn mushroom() -> Self {
        let g = 220.0;
        Self {
            name: "mushroom".into(),
            kind: ExperimentKind::Mushroom,
            dt: 0.005,
            delta_k: 0.15,
            positions: LinearLayout {
                start: [-37.43, -10.0],
                end: [37.43, -10.0],
            },
            inflow: Some(InflowProfile {
                amplitude: 5.0,
                radius: 1.125,
                offset: 0.5,
                span: [-1.0, 1.0],
            }),
            parametric: Some(ParametricSpace {
                lower: [-g, 0.5 * g],
                upper: [-0.5 * g, g],
                n_training: 4,
                training_points: None,
                query_grid: [6, 6],
            }),
            rom: RomSettings {
                m: 110,
                m_r: 185,
                n_samples: 75,
                ..Self::vortex_pair().rom
            },
            output_dir: PathBuf::from("mushroom"),
            ..Self::vortex_pair()
        }
    }

    /// Reproductive single vortex at one of the sweep sizes, PTROM case `case` of `width`.
    pub fn single_vortex(n: usize, width: Width, case: usize) -> Result<Self> {
        let c = reproductive_conditions(n)?;
        let (m, p_c) = case_hyperparameters(width, case, n)?;
        let lim = n as f64;
        let criterion = p_c.map(|p_c| Criterion::Neighbor { p_c });
        Ok(Self {
            name: format!("single_vortex_n{n}_{}_case{case}", width_name(width)),
            kind: ExperimentKind::SingleVortex,
            n,
            dt: c.dt,
            t_span: c.t_span,
            delta_k: 0.0,
            positions: LinearLayout {
                start: [-lim, -lim],
                end: [lim, lim],
            },
            circulation: CirculationLayout::Center {
                gamma_center: c.gamma_center,
                background: 0.01,
            },
            inflow: None,
            parametric: None,
            rom: RomSettings {
                m,
                m_r: 2 * m,
                n_samples: 2 * m,
                criterion,
                leaf_capacity: 1,
                solver: RomConfig {
                    tol: case_tolerance(case)?,
                    ..RomConfig::default()
                },
                centering: Centering::default(),
                training_sources: TrainingSources::default(),
                preseed: Vec::new(),
            },
            newton: default_newton(),
            baseline: BaselineSettings {
                selected: selected_leaf_capacities(n)?,
                ..BaselineSettings::default()
            },
            output_dir: PathBuf::from(format!("single_vortex_n{n}")),
            seed: 2024,
        })
    }

    /// Desk-scale variant: the query grid shrinks to `grid × grid`.
    pub fn desk_scale(mut self, grid: usize) -> Self {
        if let Some(p) = self.parametric.as_mut() {
            p.query_grid = [grid, grid];
        }
        self
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn time_grid(&self) -> Result<TimeGrid> {
        TimeGrid::spanning(self.t_span[0], self.t_span[1], self.dt)
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n < 2 {
            return bad(format!("N must be >= 2, got {}", self.n));
        }
        if !(self.dt > 0.0) || !(self.t_span[1] > self.t_span[0]) {
            return bad(format!(
                "need dt > 0 and t_f > t_0 (dt = {}, span = {:?})",
                self.dt, self.t_span
            ));
        }
        if !(self.delta_k >= 0.0) {
            return bad(format!("delta_k must be >= 0, got {}", self.delta_k));
        }
        if self.positions.start == self.positions.end {
            return bad("initial layout start and end coincide".into());
        }
        match &self.circulation {
            CirculationLayout::Explicit { gamma } if gamma.len() != self.n => {
                return bad(format!(
                    "explicit circulation has {} entries for N = {}",
                    gamma.len(),
                    self.n
                ));
            }
            CirculationLayout::EndParticles { .. } if self.parametric.is_none() => {
                return bad("end-particle circulation needs a parametric space".into());
            }
            _ => {}
        }
        if let Some(p) = &self.parametric {
            if (0..2).any(|d| !(p.upper[d] >= p.lower[d])) {
                return bad(format!(
                    "parametric bounds inverted: {:?} .. {:?}",
                    p.lower, p.upper
                ));
            }
            if p.query_grid.contains(&0) {
                return bad("query grid needs at least one point per axis".into());
            }
            let n_train = p.training_points.as_ref().map_or(p.n_training, Vec::len);
            if n_train == 0 {
                return bad("at least one training point is required".into());
            }
            if let Some(pts) = &p.training_points {
                if pts
                    .iter()
                    .any(|q| (0..2).any(|d| q[d] < p.lower[d] || q[d] > p.upper[d]))
                {
                    return bad("training point outside the parametric bounds".into());
                }
            }
        }
        let r = &self.rom;
        if r.m == 0 || r.m_r == 0 || r.n_samples == 0 || r.leaf_capacity == 0 {
            return bad("M, M_r, n_samples and leaf_capacity must be positive".into());
        }
        if r.m > 2 * self.n || r.m_r > 2 * self.n || r.n_samples > self.n {
            return bad(format!(
                "ROM sizes exceed the system (M = {}, M_r = {}, n̆ = {}, N = {})",
                r.m, r.m_r, r.n_samples, self.n
            ));
        }
        if r.preseed.iter().any(|&i| i >= self.n) {
            return bad("preseed particle out of range".into());
        }
        if let Some(c) = &r.criterion {
            c.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        r.solver
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        self.newton
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        for t in &self.baseline.thetas {
            if !(*t >= 0.0) {
                return bad(format!("theta must be >= 0, got {t}"));
            }
        }
        if self.baseline.leaf_capacity_sweep.contains(&0) {
            return bad("leaf capacities must be >= 1".into());
        }
        self.time_grid().map(|_| ())
    }
}

pub fn width_name(w: Width) -> &'static str {
    match w {
        Width::Narrow => "narrow",
        Width::Moderate => "moderate",
        Width::Wide => "wide",
        Width::Unclustered => "unclustered",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        ExperimentConfig::vortex_pair().validate().unwrap();
        ExperimentConfig::mushroom().validate().unwrap();
        for n in SWEEP_N {
            ExperimentConfig::single_vortex(n, Width::Narrow, 1)
                .unwrap()
                .validate()
                .unwrap();
        }
    }

    #[test]
    fn case_lookup() {
        assert_eq!(
            case_hyperparameters(Width::Narrow, 1, 100).unwrap(),
            (13, Some(0.0))
        );
        assert_eq!(
            case_hyperparameters(Width::Narrow, 4, 3000).unwrap(),
            (26, Some(0.5))
        );
        assert_eq!(
            case_hyperparameters(Width::Moderate, 4, 100).unwrap(),
            (18, Some(1.0))
        );
        assert_eq!(
            case_hyperparameters(Width::Unclustered, 4, 100).unwrap(),
            (16, None)
        );
        assert!(case_hyperparameters(Width::Wide, 5, 100).is_err());
        assert!(reproductive_conditions(250).is_err());
    }

    #[test]
    fn json_round_trip() {
        let cfg = ExperimentConfig::mushroom();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }
}
