//! Barnes–Hut quadtree over a 2D point set with circulation-weighted centroids.
//!
//! Nodes live in an arena; `node_id` is the arena index and is assigned in
//! depth-first pre-order (children visited SW, SE, NW, NE), so identical
//! inputs always produce identical ids.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::kernel::{
    accumulate_pair, accumulate_pair_jacobian, position, BlockDiagonalJacobian, ParticleSystem,
    VelocityModel,
};

pub const MAX_DEPTH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Bounds {
    pub fn width(&self) -> f64 {
        (self.x_max - self.x_min).max(self.y_max - self.y_min)
    }

    /// Bounds grown by `pad` on every side.
    pub fn inflate(&self, pad: f64) -> Bounds {
        Bounds {
            x_min: self.x_min - pad,
            x_max: self.x_max + pad,
            y_min: self.y_min - pad,
            y_max: self.y_max + pad,
        }
    }

    fn quadrant(&self, q: usize) -> Bounds {
        let mx = 0.5 * (self.x_min + self.x_max);
        let my = 0.5 * (self.y_min + self.y_max);
        let (x_min, x_max) = if q & 1 == 0 {
            (self.x_min, mx)
        } else {
            (mx, self.x_max)
        };
        let (y_min, y_max) = if q & 2 == 0 {
            (self.y_min, my)
        } else {
            (my, self.y_max)
        };
        Bounds {
            x_min,
            x_max,
            y_min,
            y_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub node_id: usize,
    pub parent: Option<usize>,
    pub depth: usize,
    pub bounds: Bounds,
    pub width: f64,
    /// `None` for leaves; otherwise the SW, SE, NW, NE children (empty quadrants are `None`).
    pub children: Option<[Option<usize>; 4]>,
    /// Particle ids held by a leaf, ascending. Empty for internal nodes.
    pub particle_ids: Vec<usize>,
    pub count: usize,
    pub centroid: [f64; 2],
    pub gamma_sum: f64,
    /// Set when `ΣΓ` was numerically zero and the centroid fell back to the arithmetic mean.
    pub centroid_fallback: bool,
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }
}

/// Γ-weighted mean of `values` over `ids`, with the arithmetic-mean fallback
/// when the member circulations cancel. Returns `(mean, fallback)`.
pub(crate) fn weighted_mean_weights(ids: &[usize], gamma: &[f64]) -> (Vec<f64>, bool) {
    let sum: f64 = ids.iter().map(|&i| gamma[i]).sum();
    let abs: f64 = ids.iter().map(|&i| gamma[i].abs()).sum();
    if abs == 0.0 || sum.abs() <= 1e-12 * abs {
        let w = 1.0 / ids.len() as f64;
        (vec![w; ids.len()], true)
    } else {
        (ids.iter().map(|&i| gamma[i] / sum).collect(), false)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadTree {
    nodes: Vec<TreeNode>,
    leaf_of: Vec<usize>,
    points: Vec<[f64; 2]>,
    leaf_capacity: usize,
}

/// Builds the tree over `points` with per-point weights `gamma`.
pub fn build_tree(points: &[[f64; 2]], gamma: &[f64], leaf_capacity: usize) -> Result<QuadTree> {
    QuadTree::build(points, gamma, leaf_capacity)
}

impl QuadTree {
    pub fn build(points: &[[f64; 2]], gamma: &[f64], leaf_capacity: usize) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput(
                "cannot build a tree over zero points".into(),
            ));
        }
        if leaf_capacity == 0 {
            return Err(Error::InvalidInput("leaf_capacity must be >= 1".into()));
        }
        check_len("tree circulation", points.len(), gamma.len())?;
        if points.iter().flatten().chain(gamma).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite tree input".into()));
        }
        let (mut x_lo, mut x_hi, mut y_lo, mut y_hi) = (
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
        );
        for p in points {
            x_lo = x_lo.min(p[0]);
            x_hi = x_hi.max(p[0]);
            y_lo = y_lo.min(p[1]);
            y_hi = y_hi.max(p[1]);
        }
        let half = 0.5 * (x_hi - x_lo).max(y_hi - y_lo);
        let (cx, cy) = (0.5 * (x_lo + x_hi), 0.5 * (y_lo + y_hi));
        let root = Bounds {
            x_min: cx - half,
            x_max: cx + half,
            y_min: cy - half,
            y_max: cy + half,
        };
        let mut tree = QuadTree {
            nodes: Vec::new(),
            leaf_of: vec![usize::MAX; points.len()],
            points: points.to_vec(),
            leaf_capacity,
        };
        let ids: Vec<usize> = (0..points.len()).collect();
        tree.build_node(ids, root, 0, None, gamma);
        Ok(tree)
    }

    fn build_node(
        &mut self,
        ids: Vec<usize>,
        bounds: Bounds,
        depth: usize,
        parent: Option<usize>,
        gamma: &[f64],
    ) -> usize {
        let node_id = self.nodes.len();
        let (w, fallback) = weighted_mean_weights(&ids, gamma);
        let mut centroid = [0.0; 2];
        for (&i, wi) in ids.iter().zip(&w) {
            centroid[0] += wi * self.points[i][0];
            centroid[1] += wi * self.points[i][1];
        }
        let gamma_sum = ids.iter().map(|&i| gamma[i]).sum();
        let first = self.points[ids[0]];
        let coincident = ids.iter().all(|&i| self.points[i] == first);
        let leaf = ids.len() <= self.leaf_capacity || depth >= MAX_DEPTH || coincident;
        self.nodes.push(TreeNode {
            node_id,
            parent,
            depth,
            bounds,
            width: bounds.width(),
            children: None,
            particle_ids: Vec::new(),
            count: ids.len(),
            centroid,
            gamma_sum,
            centroid_fallback: fallback,
        });
        if leaf {
            for &i in &ids {
                self.leaf_of[i] = node_id;
            }
            self.nodes[node_id].particle_ids = ids;
            return node_id;
        }
        let mx = 0.5 * (bounds.x_min + bounds.x_max);
        let my = 0.5 * (bounds.y_min + bounds.y_max);
        let mut parts: [Vec<usize>; 4] = Default::default();
        for i in ids {
            let p = self.points[i];
            let q = usize::from(p[0] > mx) + 2 * usize::from(p[1] > my);
            parts[q].push(i);
        }
        let mut children = [None; 4];
        for (q, part) in parts.into_iter().enumerate() {
            if !part.is_empty() {
                children[q] = Some(self.build_node(
                    part,
                    bounds.quadrant(q),
                    depth + 1,
                    Some(node_id),
                    gamma,
                ));
            }
        }
        self.nodes[node_id].children = Some(children);
        node_id
    }

    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    pub fn node(&self, id: usize) -> &TreeNode {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    pub fn point(&self, i: usize) -> [f64; 2] {
        self.points[i]
    }

    pub fn leaf_capacity(&self) -> usize {
        self.leaf_capacity
    }

    /// Leaf node holding particle `i`.
    pub fn leaf_of(&self, i: usize) -> usize {
        self.leaf_of[i]
    }

    pub fn max_depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    /// All particle ids under `node_id`, ascending.
    pub fn members(&self, node_id: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.nodes[node_id].count);
        let mut stack = vec![node_id];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            match &node.children {
                None => out.extend_from_slice(&node.particle_ids),
                Some(ch) => stack.extend(ch.iter().flatten()),
            }
        }
        out.sort_unstable();
        out
    }

    fn is_ancestor_or_self(&self, node_id: usize, leaf: usize) -> bool {
        let depth = self.nodes[node_id].depth;
        let mut cur = leaf;
        while self.nodes[cur].depth > depth {
            cur = self.nodes[cur].parent.expect("non-root node has a parent");
        }
        cur == node_id
    }

    /// Debug dump: one record per node with bounds, centroid, circulation and children.
    pub fn to_json(&self) -> serde_json::Value {
        #[derive(Serialize)]
        struct Dump<'a> {
            node_id: usize,
            bounds: &'a Bounds,
            centroid: [f64; 2],
            gamma_sum: f64,
            children: Vec<usize>,
            particle_ids: &'a [usize],
        }
        let dump: Vec<Dump> = self
            .nodes
            .iter()
            .map(|n| Dump {
                node_id: n.node_id,
                bounds: &n.bounds,
                centroid: n.centroid,
                gamma_sum: n.gamma_sum,
                children: n
                    .children
                    .map(|c| c.iter().flatten().copied().collect())
                    .unwrap_or_default(),
                particle_ids: &n.particle_ids,
            })
            .collect();
        serde_json::to_value(dump).expect("tree dump serializes")
    }
}

/// Barnes–Hut opening test: prune when `w / ‖s̃ − s‖ ≤ θ`.
///
/// Never prunes for `θ ≤ 0` or when the target sits on the centroid.
pub fn bh_prune_check(node: &TreeNode, target: [f64; 2], theta: f64) -> bool {
    bh_prune(node.width, node.centroid, target, theta)
}

pub(crate) fn bh_prune(width: f64, centroid: [f64; 2], target: [f64; 2], theta: f64) -> bool {
    if !(theta > 0.0) {
        return false;
    }
    let d = (centroid[0] - target[0]).hypot(centroid[1] - target[1]);
    d > 0.0 && width / d <= theta
}

/// Neighborhood test: prune unless the source bounds overlap the target leaf
/// bounds inflated by `p_c · w` (strict inequalities, so shared edges do not overlap).
pub fn neighbor_prune_check(
    source: &Bounds,
    target_leaf: &Bounds,
    target_leaf_width: f64,
    p_c: f64,
) -> bool {
    let h = target_leaf.inflate(p_c * target_leaf_width);
    let overlap = h.x_max > source.x_min
        && h.x_min < source.x_max
        && h.y_max > source.y_min
        && h.y_min < source.y_max;
    !overlap
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Criterion {
    BarnesHut { theta: f64 },
    Neighbor { p_c: f64 },
}

impl Criterion {
    pub fn validate(&self) -> Result<()> {
        let v = match *self {
            Criterion::BarnesHut { theta } => theta,
            Criterion::Neighbor { p_c } => p_c,
        };
        if !(v >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "clustering parameter must be >= 0: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Interaction list of one target.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterList {
    /// Pruned nodes in traversal order.
    pub pruned_node_ids: Vec<usize>,
    /// Near-field particle ids, ascending, excluding the target.
    pub direct_ids: Vec<usize>,
}

/// Depth-first traversal from the root collecting pruned clusters and near-field particles.
///
/// Ancestors of `target_leaf` are never pruned, so the target is always
/// reached through its own leaf and excluded there.
pub fn collect_clusters(
    tree: &QuadTree,
    target: [f64; 2],
    target_id: Option<usize>,
    target_leaf: usize,
    criterion: Criterion,
) -> ClusterList {
    let leaf = tree.node(target_leaf);
    let mut out = ClusterList::default();
    let mut stack = vec![0usize];
    while let Some(id) = stack.pop() {
        let node = tree.node(id);
        let protected = tree.is_ancestor_or_self(id, target_leaf);
        let prune = !protected
            && match criterion {
                Criterion::BarnesHut { theta } => {
                    bh_prune(node.width, node.centroid, target, theta)
                }
                Criterion::Neighbor { p_c } => {
                    neighbor_prune_check(&node.bounds, &leaf.bounds, leaf.width, p_c)
                }
            };
        if prune {
            out.pruned_node_ids.push(id);
            continue;
        }
        match &node.children {
            None => out.direct_ids.extend(
                node.particle_ids
                    .iter()
                    .copied()
                    .filter(|&j| Some(j) != target_id),
            ),
            Some(ch) => stack.extend(ch.iter().rev().flatten()),
        }
    }
    out.direct_ids.sort_unstable();
    out
}

/// Verifies that `list` covers every particle except `target_id` exactly once.
pub fn check_partition(
    tree: &QuadTree,
    list: &ClusterList,
    target_id: Option<usize>,
) -> Result<()> {
    let mut seen = vec![0u32; tree.n_points()];
    for &c in &list.pruned_node_ids {
        for j in tree.members(c) {
            seen[j] += 1;
        }
    }
    for &j in &list.direct_ids {
        seen[j] += 1;
    }
    for (j, &s) in seen.iter().enumerate() {
        let expected = u32::from(Some(j) != target_id);
        if s != expected {
            return Err(Error::Structural(format!(
                "particle {j} covered {s} times in interaction list of target {target_id:?}"
            )));
        }
    }
    Ok(())
}

fn interaction_lists(tree: &QuadTree, criterion: Criterion) -> Vec<ClusterList> {
    (0..tree.n_points())
        .map(|i| collect_clusters(tree, tree.point(i), Some(i), tree.leaf_of(i), criterion))
        .collect()
}

fn points_of(state: &[f64]) -> Vec<[f64; 2]> {
    (0..state.len() / 2).map(|i| position(state, i)).collect()
}

/// Treecode velocity with interaction lists from `tree` (built over `state`):
/// clusters first, in traversal order, then near-field pairs in ascending id order.
pub fn bh_velocity(
    tree: &QuadTree,
    state: &[f64],
    sys: &ParticleSystem,
    criterion: Criterion,
) -> Result<Vec<f64>> {
    check_len("state", 2 * sys.n(), state.len())?;
    check_len("tree size", sys.n(), tree.n_points())?;
    let lists = interaction_lists(tree, criterion);
    let mut out = vec![0.0; state.len()];
    bh_velocity_with(tree, &lists, state, sys, &mut out)?;
    Ok(out)
}

fn bh_velocity_with(
    tree: &QuadTree,
    lists: &[ClusterList],
    state: &[f64],
    sys: &ParticleSystem,
    out: &mut [f64],
) -> Result<u64> {
    let n = sys.n();
    let delta = sys.effective_delta();
    let inv2pi = 1.0 / (2.0 * PI);
    let gamma = sys.circulation();
    let mut evals = 0u64;
    for (i, list) in lists.iter().enumerate() {
        let t = position(state, i);
        let mut acc = [0.0; 2];
        for &c in &list.pruned_node_ids {
            let node = tree.node(c);
            accumulate_pair(t, node.centroid, node.gamma_sum * inv2pi, delta, &mut acc)?;
        }
        for &j in &list.direct_ids {
            accumulate_pair(t, position(state, j), gamma[j] * inv2pi, delta, &mut acc)?;
        }
        evals += (list.pruned_node_ids.len() + list.direct_ids.len()) as u64;
        out[i] = acc[0];
        out[i + n] = acc[1];
    }
    if let Some(inflow) = sys.inflow() {
        for (o, v) in out.iter_mut().zip(inflow) {
            *o += v;
        }
    }
    Ok(evals)
}

/// Barnes–Hut velocity model; the tree is rebuilt from the current positions on every call.
#[derive(Debug, Clone)]
pub struct BarnesHutField<'a> {
    pub sys: &'a ParticleSystem,
    pub criterion: Criterion,
    pub leaf_capacity: usize,
    /// Kernel evaluations performed so far.
    pub kernel_evaluations: u64,
}

impl<'a> BarnesHutField<'a> {
    pub fn new(
        sys: &'a ParticleSystem,
        criterion: Criterion,
        leaf_capacity: usize,
    ) -> Result<Self> {
        criterion.validate()?;
        if leaf_capacity == 0 {
            return Err(Error::InvalidInput("leaf_capacity must be >= 1".into()));
        }
        Ok(Self {
            sys,
            criterion,
            leaf_capacity,
            kernel_evaluations: 0,
        })
    }

    fn tree_and_lists(&self, x: &[f64]) -> Result<(QuadTree, Vec<ClusterList>)> {
        check_len("state", 2 * self.sys.n(), x.len())?;
        let tree = QuadTree::build(&points_of(x), self.sys.circulation(), self.leaf_capacity)?;
        let lists = interaction_lists(&tree, self.criterion);
        Ok((tree, lists))
    }
}

impl VelocityModel for BarnesHutField<'_> {
    fn n(&self) -> usize {
        self.sys.n()
    }

    fn velocity_into(&mut self, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_len("velocity output", x.len(), out.len())?;
        let (tree, lists) = self.tree_and_lists(x)?;
        self.kernel_evaluations += bh_velocity_with(&tree, &lists, x, self.sys, out)?;
        Ok(())
    }

    fn self_jacobian(&mut self, x: &[f64]) -> Result<BlockDiagonalJacobian> {
        let (tree, lists) = self.tree_and_lists(x)?;
        let delta = self.sys.effective_delta();
        let inv2pi = 1.0 / (2.0 * PI);
        let gamma = self.sys.circulation();
        let mut jac = BlockDiagonalJacobian::zeros(self.sys.n());
        for (i, list) in lists.iter().enumerate() {
            let t = position(x, i);
            let mut acc = [0.0; 4];
            for &c in &list.pruned_node_ids {
                let node = tree.node(c);
                accumulate_pair_jacobian(
                    t,
                    node.centroid,
                    node.gamma_sum * inv2pi,
                    delta,
                    &mut acc,
                )?;
            }
            for &j in &list.direct_ids {
                accumulate_pair_jacobian(t, position(x, j), gamma[j] * inv2pi, delta, &mut acc)?;
            }
            jac.xx[i] = acc[0];
            jac.xy[i] = acc[1];
            jac.yx[i] = acc[2];
            jac.yy[i] = acc[3];
        }
        Ok(jac)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn four_points() -> QuadTree {
        let pts = [[0.25, 0.25], [0.75, 0.25], [0.25, 0.75], [0.75, 0.75]];
        QuadTree::build(&pts, &[1.0; 4], 1).unwrap()
    }

    #[test]
    fn single_point_root_leaf() {
        let t = QuadTree::build(&[[2.0, -1.0]], &[3.0], 1).unwrap();
        assert!(t.root().is_leaf());
        assert_eq!(t.root().centroid, [2.0, -1.0]);
        assert_eq!(t.root().particle_ids, vec![0]);
    }

    #[test]
    fn symmetric_four_points_depth_one() {
        let t = four_points();
        assert_eq!(t.max_depth(), 1);
        let ch = t.root().children.unwrap();
        for (q, c) in ch.iter().enumerate() {
            let node = t.node(c.unwrap());
            assert!(node.is_leaf());
            assert_eq!(node.particle_ids, vec![q]);
        }
        assert_eq!(t.root().centroid, [0.5, 0.5]);
        assert_eq!(t.root().gamma_sum, 4.0);
    }

    #[test]
    fn coincident_points_form_one_leaf() {
        let t = QuadTree::build(&[[1.0, 1.0]; 5], &[1.0; 5], 1).unwrap();
        assert!(t.root().is_leaf());
        assert_eq!(t.root().count, 5);
    }

    #[test]
    fn zero_circulation_falls_back_to_mean() {
        let t = QuadTree::build(&[[0.0, 0.0], [2.0, 0.0]], &[1.0, -1.0], 2).unwrap();
        assert!(t.root().centroid_fallback);
        assert_eq!(t.root().centroid, [1.0, 0.0]);
    }

    #[test]
    fn bh_check_cases() {
        let mut node = four_points().root().clone();
        node.width = 1.0;
        node.centroid = [0.0, 0.0];
        assert!(bh_prune_check(&node, [2.0, 0.0], 0.5));
        assert!(!bh_prune_check(&node, [1.0, 0.0], 0.5));
        assert!(!bh_prune_check(&node, [100.0, 0.0], 0.0));
        assert!(!bh_prune_check(&node, [0.0, 0.0], 10.0));
    }

    #[test]
    fn neighbor_check_cases() {
        let leaf = Bounds {
            x_min: 0.0,
            x_max: 1.0,
            y_min: 0.0,
            y_max: 1.0,
        };
        let far = Bounds {
            x_min: 3.0,
            x_max: 4.0,
            y_min: 0.0,
            y_max: 1.0,
        };
        let near = Bounds {
            x_min: 1.5,
            x_max: 2.5,
            y_min: 0.0,
            y_max: 1.0,
        };
        let edge = Bounds {
            x_min: 1.0,
            x_max: 2.0,
            y_min: 0.0,
            y_max: 1.0,
        };
        assert!(neighbor_prune_check(&far, &leaf, 1.0, 1.0));
        assert!(!neighbor_prune_check(&near, &leaf, 1.0, 1.0));
        assert!(neighbor_prune_check(&edge, &leaf, 1.0, 0.0));
    }

    #[test]
    fn infinite_theta_gives_three_sibling_clusters() {
        let t = four_points();
        for i in 0..4 {
            let list = collect_clusters(
                &t,
                t.point(i),
                Some(i),
                t.leaf_of(i),
                Criterion::BarnesHut {
                    theta: f64::INFINITY,
                },
            );
            assert_eq!(list.pruned_node_ids.len(), 3);
            assert!(list.direct_ids.is_empty());
            check_partition(&t, &list, Some(i)).unwrap();
        }
        let list = collect_clusters(
            &t,
            t.point(0),
            Some(0),
            t.leaf_of(0),
            Criterion::BarnesHut { theta: 0.0 },
        );
        assert!(list.pruned_node_ids.is_empty());
        assert_eq!(list.direct_ids, vec![1, 2, 3]);
    }

    #[test]
    fn json_dump_lists_every_node() {
        let t = four_points();
        let v = t.to_json();
        assert_eq!(v.as_array().unwrap().len(), t.nodes().len());
    }
}
