//! Clustered source surrogate built in the weighted POD space.
//!
//! The tree is built once over the pseudo-particles `ΦΣ̂`. For every target we
//! collect its interaction list, deduplicate clusters by node id, and store
//! each unique cluster as Γ-weighted means of its members' rows of `Φ` and
//! `x_ref`. Online, a cluster's position is then `x̃⁰_c + Φ̃_c x̂` and its
//! strength `Γ̃_c`, regardless of `N`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::gnat::check_sample_ids;
use super::pod::{weighted_pod_space, PodBasis};
use crate::error::{check_len, Error, Result};
use crate::kernel::position;
use crate::quadtree::{
    check_partition, collect_clusters, weighted_mean_weights, ClusterList, Criterion, QuadTree,
};

/// Quadtree over the weighted POD space, built once per offline training.
#[derive(Debug, Clone)]
pub struct PodSpaceTree {
    pub tree: QuadTree,
    /// Circulations used as tree weights.
    pub gamma: Vec<f64>,
}

impl PodSpaceTree {
    pub fn build(basis: &PodBasis, gamma: &[f64], leaf_capacity: usize) -> Result<Self> {
        let n = basis.n_dofs() / 2;
        check_len("tree circulation", n, gamma.len())?;
        let w = weighted_pod_space(basis);
        let points: Vec<[f64; 2]> = (0..n).map(|i| position(&w, i)).collect();
        Ok(Self {
            tree: QuadTree::build(&points, gamma, leaf_capacity)?,
            gamma: gamma.to_vec(),
        })
    }

    /// Interaction list of target `i` in POD space.
    pub fn interactions(&self, i: usize, criterion: Criterion) -> ClusterList {
        collect_clusters(
            &self.tree,
            self.tree.point(i),
            Some(i),
            self.tree.leaf_of(i),
            criterion,
        )
    }
}

/// Row-aggregated source model seen by a fixed set of targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateSourceBasis {
    pub n: usize,
    pub m: usize,
    pub criterion: Criterion,
    /// Targets in ascending order; list `k` below belongs to `target_ids[k]`.
    pub target_ids: Vec<usize>,
    /// Tree node of each unique cluster, in first-encounter order.
    pub cluster_node_ids: Vec<usize>,
    pub cluster_membership: Vec<Vec<usize>>,
    /// `2N_c × M`, cluster `c` in rows `c` (χ) and `c + N_c` (ψ).
    #[serde(with = "matrix_serde")]
    pub phi_tilde: DMatrix<f64>,
    pub x0_tilde: Vec<f64>,
    pub gamma_tilde: Vec<f64>,
    /// Clusters whose member circulations cancel; their rows use arithmetic means.
    pub fallback_clusters: Vec<usize>,
    pub per_target_clusters: Vec<Vec<usize>>,
    /// Indices into `direct_ids` for each target.
    pub per_target_direct: Vec<Vec<usize>>,
    /// Union of near-field sources over all targets, ascending.
    pub direct_ids: Vec<usize>,
    /// `2N_dir × M` rows of `Φ` for the near-field sources, same layout as `phi_tilde`.
    #[serde(with = "matrix_serde")]
    pub direct_phi: DMatrix<f64>,
    pub direct_x0: Vec<f64>,
    pub direct_gamma: Vec<f64>,
}

mod matrix_serde {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Raw {
        rows: usize,
        cols: usize,
        data: Vec<f64>,
    }

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        Raw {
            rows: m.nrows(),
            cols: m.ncols(),
            data: m.as_slice().to_vec(),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let raw = Raw::deserialize(d)?;
        if raw.data.len() != raw.rows * raw.cols {
            return Err(serde::de::Error::custom(
                "matrix data length does not match its shape",
            ));
        }
        Ok(DMatrix::from_vec(raw.rows, raw.cols, raw.data))
    }
}

/// Builds the POD-space tree and the surrogate for `target_ids` in one go.
pub fn cluster_pod(
    basis: &PodBasis,
    gamma: &[f64],
    x0: &[f64],
    target_ids: &[usize],
    criterion: Criterion,
    leaf_capacity: usize,
) -> Result<SurrogateSourceBasis> {
    let tree = PodSpaceTree::build(basis, gamma, leaf_capacity)?;
    SurrogateSourceBasis::from_tree(&tree, basis, gamma, x0, target_ids, criterion)
}

struct RowAggregate {
    phi: DMatrix<f64>,
    x0: Vec<f64>,
    gamma: Vec<f64>,
    fallback: Vec<usize>,
}

/// Γ-weighted rows for each member group, laid out as `[χ rows | ψ rows]`.
fn aggregate_rows(
    groups: &[Vec<usize>],
    basis: &PodBasis,
    gamma: &[f64],
    x0: &[f64],
) -> RowAggregate {
    let n = basis.n_dofs() / 2;
    let k = groups.len();
    let m = basis.m();
    let mut phi = DMatrix::zeros(2 * k, m);
    let mut xr = vec![0.0; 2 * k];
    let mut g = vec![0.0; k];
    let mut fallback = Vec::new();
    for (c, members) in groups.iter().enumerate() {
        let (w, fb) = weighted_mean_weights(members, gamma);
        if fb {
            fallback.push(c);
        }
        g[c] = members.iter().map(|&j| gamma[j]).sum();
        for (&j, &wj) in members.iter().zip(&w) {
            xr[c] += wj * x0[j];
            xr[c + k] += wj * x0[j + n];
            for col in 0..m {
                phi[(c, col)] += wj * basis.phi[(j, col)];
                phi[(c + k, col)] += wj * basis.phi[(j + n, col)];
            }
        }
    }
    RowAggregate {
        phi,
        x0: xr,
        gamma: g,
        fallback,
    }
}

impl SurrogateSourceBasis {
    /// Surrogate for `target_ids` from an existing POD-space tree.
    pub fn from_tree(
        tree: &PodSpaceTree,
        basis: &PodBasis,
        gamma: &[f64],
        x0: &[f64],
        target_ids: &[usize],
        criterion: Criterion,
    ) -> Result<Self> {
        criterion.validate()?;
        let n = basis.n_dofs() / 2;
        check_len("tree size", n, tree.tree.n_points())?;
        check_len("circulation", n, gamma.len())?;
        check_len("reference state", 2 * n, x0.len())?;
        check_sample_ids(target_ids, n)?;

        let mut cluster_index: BTreeMap<usize, usize> = BTreeMap::new();
        let mut cluster_node_ids = Vec::new();
        let mut per_target_nodes = Vec::with_capacity(target_ids.len());
        let mut per_target_direct_ids = Vec::with_capacity(target_ids.len());
        let mut direct_set = vec![false; n];
        for &i in target_ids {
            let list = tree.interactions(i, criterion);
            check_partition(&tree.tree, &list, Some(i))?;
            let mut idx = Vec::with_capacity(list.pruned_node_ids.len());
            for &node in &list.pruned_node_ids {
                let next = cluster_node_ids.len();
                let c = *cluster_index.entry(node).or_insert(next);
                if c == next {
                    cluster_node_ids.push(node);
                }
                idx.push(c);
            }
            for &j in &list.direct_ids {
                direct_set[j] = true;
            }
            per_target_nodes.push(idx);
            per_target_direct_ids.push(list.direct_ids);
        }
        let direct_ids: Vec<usize> = (0..n).filter(|&j| direct_set[j]).collect();
        let mut direct_pos = vec![usize::MAX; n];
        for (k, &j) in direct_ids.iter().enumerate() {
            direct_pos[j] = k;
        }
        let per_target_direct = per_target_direct_ids
            .into_iter()
            .map(|ids| ids.into_iter().map(|j| direct_pos[j]).collect())
            .collect();
        let cluster_membership: Vec<Vec<usize>> = cluster_node_ids
            .iter()
            .map(|&c| tree.tree.members(c))
            .collect();

        let mut out = Self {
            n,
            m: basis.m(),
            criterion,
            target_ids: target_ids.to_vec(),
            cluster_node_ids,
            cluster_membership,
            phi_tilde: DMatrix::zeros(0, basis.m()),
            x0_tilde: Vec::new(),
            gamma_tilde: Vec::new(),
            fallback_clusters: Vec::new(),
            per_target_clusters: per_target_nodes,
            per_target_direct,
            direct_ids,
            direct_phi: DMatrix::zeros(0, basis.m()),
            direct_x0: Vec::new(),
            direct_gamma: Vec::new(),
        };
        out.assign(basis, gamma, x0);
        Ok(out)
    }

    fn assign(&mut self, basis: &PodBasis, gamma: &[f64], x0: &[f64]) {
        let agg = aggregate_rows(&self.cluster_membership, basis, gamma, x0);
        self.phi_tilde = agg.phi;
        self.x0_tilde = agg.x0;
        self.gamma_tilde = agg.gamma;
        self.fallback_clusters = agg.fallback;
        let singletons: Vec<Vec<usize>> = self.direct_ids.iter().map(|&j| vec![j]).collect();
        let direct = aggregate_rows(&singletons, basis, gamma, x0);
        self.direct_phi = direct.phi;
        self.direct_x0 = direct.x0;
        self.direct_gamma = direct.gamma;
    }

    /// Number of unique clusters `N_c`.
    pub fn n_clusters(&self) -> usize {
        self.cluster_node_ids.len()
    }

    pub fn n_direct(&self) -> usize {
        self.direct_ids.len()
    }

    /// Unique source points seen by the targets: agglomerated clusters plus
    /// near-field particles, each of which is its own leaf at capacity one.
    pub fn n_unique_sources(&self) -> usize {
        self.n_clusters() + self.n_direct()
    }

    /// Largest interaction list (clusters plus near-field sources) over all targets.
    pub fn max_interactions(&self) -> usize {
        self.per_target_clusters
            .iter()
            .zip(&self.per_target_direct)
            .map(|(c, d)| c.len() + d.len())
            .max()
            .unwrap_or(0)
    }

    /// Recomputes cluster circulations and weighted rows for a new circulation
    /// vector, keeping the clustering itself fixed.
    pub fn reassign_cluster_circulation(
        &self,
        basis: &PodBasis,
        x0: &[f64],
        gamma_mu: &[f64],
    ) -> Result<Self> {
        check_len("circulation", self.n, gamma_mu.len())?;
        check_len("reference state", 2 * self.n, x0.len())?;
        if basis.m() != self.m || basis.n_dofs() != 2 * self.n {
            return Err(Error::DimensionMismatch {
                context: "surrogate basis",
                expected: self.m,
                found: basis.m(),
            });
        }
        let mut out = self.clone();
        out.assign(basis, gamma_mu, x0);
        Ok(out)
    }

    /// Cluster positions `x̃⁰ + Φ̃ x̂` in `[χ | ψ]` layout.
    pub fn cluster_positions(&self, x_hat: &DVector<f64>) -> Vec<f64> {
        affine(&self.phi_tilde, &self.x0_tilde, x_hat)
    }

    /// Near-field source positions reconstructed from their own rows.
    pub fn direct_positions(&self, x_hat: &DVector<f64>) -> Vec<f64> {
        affine(&self.direct_phi, &self.direct_x0, x_hat)
    }
}

fn affine(phi: &DMatrix<f64>, offset: &[f64], x_hat: &DVector<f64>) -> Vec<f64> {
    let mut y = phi * x_hat;
    for (a, b) in y.iter_mut().zip(offset) {
        *a += b;
    }
    y.as_slice().to_vec()
}
