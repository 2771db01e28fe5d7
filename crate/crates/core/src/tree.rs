//! Complete rooted trees, forests and per-vertex test levels.
//!
//! Vertices are numbered breadth first starting with the root at id 0. All
//! structures are immutable after construction.

use std::collections::{BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type VertexId = usize;

/// Absolute slack used when checking the local Bonferroni condition.
pub const LB_TOLERANCE: f64 = 1e-12;

/// Default upper bound on the number of vertices of a constructed tree.
pub const DEFAULT_VERTEX_CAP: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vertex {
    pub id: VertexId,
    pub depth: usize,
    pub parent: Option<VertexId>,
    pub children: Vec<VertexId>,
}

/// A complete rooted tree: every leaf sits exactly `depth` layers below the
/// root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestTree {
    vertices: Vec<Vertex>,
    depth: usize,
    /// Per-layer branching factors when every vertex of a layer has the same
    /// number of children.
    branching: Option<Vec<usize>>,
    /// Start offset of each layer plus a final sentinel, for breadth-first
    /// numbered trees.
    layer_offsets: Option<Vec<usize>>,
}

/// Builds the complete tree in which every depth-`l` vertex has
/// `branching[l]` children.
pub fn build_complete_tree(branching: &[usize], depth: usize) -> Result<TestTree> {
    build_complete_tree_with_cap(branching, depth, DEFAULT_VERTEX_CAP)
}

pub fn build_complete_tree_with_cap(
    branching: &[usize],
    depth: usize,
    cap: usize,
) -> Result<TestTree> {
    if branching.len() != depth {
        return Err(Error::BranchingDepthMismatch {
            got: branching.len(),
            depth,
        });
    }
    if let Some(layer) = branching.iter().position(|&b| b == 0) {
        return Err(Error::ZeroBranching { layer });
    }
    let mut layer_sizes = vec![1u128];
    for &b in branching {
        let next = layer_sizes.last().unwrap() * b as u128;
        layer_sizes.push(next);
        let total: u128 = layer_sizes.iter().sum();
        if total > cap as u128 {
            return Err(Error::TooManyVertices { count: total, cap });
        }
    }
    let total: u128 = layer_sizes.iter().sum();
    if total > cap as u128 {
        return Err(Error::TooManyVertices { count: total, cap });
    }

    let mut layer_offsets = Vec::with_capacity(depth + 2);
    let mut acc = 0usize;
    for &s in &layer_sizes {
        layer_offsets.push(acc);
        acc += s as usize;
    }
    layer_offsets.push(acc);

    let mut vertices = Vec::with_capacity(acc);
    vertices.push(Vertex {
        id: 0,
        depth: 0,
        parent: None,
        children: Vec::new(),
    });
    for (layer, &b) in branching.iter().enumerate() {
        let (start, end) = (layer_offsets[layer], layer_offsets[layer + 1]);
        let mut next_id = end;
        for parent in start..end {
            let children: Vec<VertexId> = (next_id..next_id + b).collect();
            for &c in &children {
                vertices.push(Vertex {
                    id: c,
                    depth: layer + 1,
                    parent: Some(parent),
                    children: Vec::new(),
                });
            }
            next_id += b;
            vertices[parent].children = children;
        }
    }

    Ok(TestTree {
        vertices,
        depth,
        branching: Some(branching.to_vec()),
        layer_offsets: Some(layer_offsets),
    })
}

impl TestTree {
    /// Builds a tree from explicit child lists, `children[v]` being the
    /// ordered descendants of vertex `v`. Vertex 0 is the root. Rejects
    /// anything that is not a single connected complete tree.
    pub fn from_children(children: Vec<Vec<VertexId>>) -> Result<TestTree> {
        let n = children.len();
        if n == 0 {
            return Err(Error::UnknownVertex(0));
        }
        let mut parent: Vec<Option<VertexId>> = vec![None; n];
        for (v, cs) in children.iter().enumerate() {
            for &c in cs {
                if c >= n {
                    return Err(Error::UnknownVertex(c));
                }
                if c == 0 || parent[c].is_some() {
                    return Err(Error::InvalidConfig(format!(
                        "vertex {c} has more than one parent or is the root"
                    )));
                }
                parent[c] = Some(v);
            }
        }
        let mut depth = vec![usize::MAX; n];
        depth[0] = 0;
        let mut queue = VecDeque::from([0usize]);
        let mut seen = 1;
        while let Some(v) = queue.pop_front() {
            for &c in &children[v] {
                depth[c] = depth[v] + 1;
                seen += 1;
                queue.push_back(c);
            }
        }
        if seen != n {
            return Err(Error::InvalidConfig(
                "child lists do not form a single connected tree".into(),
            ));
        }
        let leaf_depths: BTreeSet<usize> = (0..n)
            .filter(|&v| children[v].is_empty())
            .map(|v| depth[v])
            .collect();
        if leaf_depths.len() != 1 {
            return Err(Error::InvalidConfig(format!(
                "tree is not complete: leaves at depths {leaf_depths:?}"
            )));
        }
        let tree_depth = *leaf_depths.iter().next().unwrap();

        let mut branching = Vec::with_capacity(tree_depth);
        let mut uniform = true;
        for layer in 0..tree_depth {
            let mut counts = (0..n)
                .filter(|&v| depth[v] == layer)
                .map(|v| children[v].len());
            let first = counts.next().unwrap_or(0);
            if counts.any(|c| c != first) {
                uniform = false;
                break;
            }
            branching.push(first);
        }

        let bfs_numbered = (1..n).all(|v| {
            depth[v - 1] <= depth[v] && parent[v - 1].unwrap_or(0) <= parent[v].unwrap_or(0)
        });
        let layer_offsets = if bfs_numbered {
            let mut offs = Vec::with_capacity(tree_depth + 2);
            for layer in 0..=tree_depth {
                offs.push(depth.iter().position(|&d| d == layer).unwrap());
            }
            offs.push(n);
            Some(offs)
        } else {
            None
        };

        let vertices = children
            .into_iter()
            .enumerate()
            .map(|(id, cs)| Vertex {
                id,
                depth: depth[id],
                parent: parent[id],
                children: cs,
            })
            .collect();
        Ok(TestTree {
            vertices,
            depth: tree_depth,
            branching: uniform.then_some(branching),
            layer_offsets,
        })
    }

    pub fn root(&self) -> VertexId {
        0
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn vertex(&self, v: VertexId) -> Result<&Vertex> {
        self.vertices.get(v).ok_or(Error::UnknownVertex(v))
    }

    pub fn contains(&self, v: VertexId) -> bool {
        v < self.vertices.len()
    }

    /// The immediate descendants `d(v)`. Panics on an unknown id.
    pub fn children(&self, v: VertexId) -> &[VertexId] {
        &self.vertices[v].children
    }

    pub fn parent(&self, v: VertexId) -> Option<VertexId> {
        self.vertices[v].parent
    }

    pub fn is_leaf(&self, v: VertexId) -> bool {
        self.vertices[v].children.is_empty()
    }

    /// Per-layer branching factors, if the tree has uniform layers.
    pub fn branching(&self) -> Option<&[usize]> {
        self.branching.as_deref()
    }

    pub fn leaves(&self) -> Vec<VertexId> {
        match &self.layer_offsets {
            Some(offs) => (offs[self.depth]..offs[self.depth + 1]).collect(),
            None => (0..self.len()).filter(|&v| self.is_leaf(v)).collect(),
        }
    }

    /// Vertex ids at the given layer, in breadth-first order.
    pub fn layer(&self, depth: usize) -> Vec<VertexId> {
        match &self.layer_offsets {
            Some(offs) if depth <= self.depth => (offs[depth]..offs[depth + 1]).collect(),
            Some(_) => Vec::new(),
            None => (0..self.len())
                .filter(|&v| self.vertices[v].depth == depth)
                .collect(),
        }
    }

    /// All vertices of the complete subtree rooted at `v`, `v` first, in
    /// breadth-first order.
    pub fn subtree(&self, v: VertexId) -> Result<Vec<VertexId>> {
        self.vertex(v)?;
        let mut out = vec![v];
        let mut i = 0;
        while i < out.len() {
            out.extend_from_slice(self.children(out[i]));
            i += 1;
        }
        Ok(out)
    }

    /// Leaves of the subtree rooted at `v`, left to right.
    pub fn subtree_leaves(&self, v: VertexId) -> Result<Vec<VertexId>> {
        Ok(self
            .subtree(v)?
            .into_iter()
            .filter(|&u| self.is_leaf(u))
            .collect())
    }
}

/// Vertices strictly above `v` on its path to the root, parent first.
pub fn ancestors(tree: &TestTree, v: VertexId) -> Result<Vec<VertexId>> {
    tree.vertex(v)?;
    let mut out = Vec::with_capacity(tree.vertices[v].depth);
    let mut cur = tree.parent(v);
    while let Some(p) = cur {
        out.push(p);
        cur = tree.parent(p);
    }
    Ok(out)
}

/// Per-vertex test levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AlphaAllocation {
    alpha: Vec<f64>,
}

impl AlphaAllocation {
    /// Wraps explicit levels indexed by vertex id. Each level must lie in
    /// (0, 1]; coverage and the local Bonferroni condition are checked by
    /// [`validate_lb`].
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if let Some(&bad) = alpha.iter().find(|&&a| !(a > 0.0 && a <= 1.0)) {
            return Err(Error::InvalidLevel(bad));
        }
        Ok(Self { alpha })
    }

    pub fn get(&self, v: VertexId) -> Option<f64> {
        self.alpha.get(v).copied()
    }

    pub fn levels(&self) -> &[f64] {
        &self.alpha
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    pub fn root_level(&self) -> Option<f64> {
        self.alpha.first().copied()
    }

    fn require(&self, v: VertexId) -> Result<f64> {
        self.get(v).ok_or(Error::MissingAlpha(v))
    }
}

fn check_level(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidLevel(alpha))
    }
}

/// Root receives `alpha`; every vertex splits its level equally among its
/// children.
pub fn allocate_alpha_uniform(tree: &TestTree, alpha: f64) -> Result<AlphaAllocation> {
    check_level(alpha)?;
    let mut levels = vec![0.0; tree.len()];
    levels[0] = alpha;
    let mut queue = VecDeque::from([0usize]);
    while let Some(v) = queue.pop_front() {
        let children = tree.children(v);
        for &c in children {
            levels[c] = levels[v] / children.len() as f64;
            queue.push_back(c);
        }
    }
    AlphaAllocation::new(levels)
}

/// Each child `c` of `v` receives `alpha(v) * w(c) / sum of sibling weights`.
/// The root needs no weight.
pub fn allocate_alpha_weighted(
    tree: &TestTree,
    alpha: f64,
    weights: &HashMap<VertexId, f64>,
) -> Result<AlphaAllocation> {
    check_level(alpha)?;
    for v in 1..tree.len() {
        match weights.get(&v) {
            None => return Err(Error::MissingWeight(v)),
            Some(&w) if !(w > 0.0 && w.is_finite()) => {
                return Err(Error::InvalidWeight {
                    vertex: v,
                    weight: w,
                })
            }
            Some(_) => {}
        }
    }
    let mut levels = vec![0.0; tree.len()];
    levels[0] = alpha;
    let mut queue = VecDeque::from([0usize]);
    while let Some(v) = queue.pop_front() {
        let children = tree.children(v);
        let total: f64 = children.iter().map(|c| weights[c]).sum();
        for &c in children {
            levels[c] = levels[v] * weights[&c] / total;
            queue.push_back(c);
        }
    }
    AlphaAllocation::new(levels)
}

/// Every non-leaf vertex whose children's levels sum to more than its own
/// level (plus [`LB_TOLERANCE`]). Empty means the allocation is valid.
pub fn validate_lb(tree: &TestTree, alloc: &AlphaAllocation) -> Result<Vec<VertexId>> {
    if alloc.len() < tree.len() {
        return Err(Error::MissingAlpha(alloc.len()));
    }
    let mut violations = Vec::new();
    for v in 0..tree.len() {
        let children = tree.children(v);
        if children.is_empty() {
            continue;
        }
        let sum: f64 = children.iter().map(|&c| alloc.alpha[c]).sum();
        if sum > alloc.alpha[v] + LB_TOLERANCE {
            violations.push(v);
        }
    }
    Ok(violations)
}

/// Per-vertex null-hypothesis truth values; `true` means the null holds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TruthAssignment {
    t: Vec<bool>,
}

impl TruthAssignment {
    pub fn new(t: Vec<bool>) -> Self {
        Self { t }
    }

    pub fn all_true(n: usize) -> Self {
        Self { t: vec![true; n] }
    }

    pub fn all_false(n: usize) -> Self {
        Self { t: vec![false; n] }
    }

    /// Bit `v` of `bits` gives the truth value of vertex `v`.
    pub fn from_bits(n: usize, bits: u64) -> Self {
        Self {
            t: (0..n).map(|v| bits >> v & 1 == 1).collect(),
        }
    }

    pub fn get(&self, v: VertexId) -> Option<bool> {
        self.t.get(v).copied()
    }

    pub fn is_true_null(&self, v: VertexId) -> bool {
        self.t[v]
    }

    pub fn values(&self) -> &[bool] {
        &self.t
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    fn check_covers(&self, tree: &TestTree) -> Result<()> {
        if self.t.len() < tree.len() {
            Err(Error::MissingTruth(self.t.len()))
        } else {
            Ok(())
        }
    }
}

/// Vertices whose null hypothesis is true while every strict ancestor's null
/// is false.
pub fn first_true_set(tree: &TestTree, truth: &TruthAssignment) -> Result<BTreeSet<VertexId>> {
    truth.check_covers(tree)?;
    let mut out = BTreeSet::new();
    let mut stack = vec![tree.root()];
    while let Some(v) = stack.pop() {
        if truth.t[v] {
            out.insert(v);
        } else {
            stack.extend_from_slice(tree.children(v));
        }
    }
    Ok(out)
}

/// Sum of levels over the first-true set restricted to the complete subtree
/// rooted at `subtree_root`. Never exceeds the level of `subtree_root` when
/// the allocation satisfies the local Bonferroni condition.
pub fn subtree_alpha_sum(
    tree: &TestTree,
    alloc: &AlphaAllocation,
    truth: &TruthAssignment,
    subtree_root: VertexId,
) -> Result<f64> {
    tree.vertex(subtree_root)?;
    truth.check_covers(tree)?;
    if alloc.len() < tree.len() {
        return Err(Error::MissingAlpha(alloc.len()));
    }
    // A true ancestor puts the first-true vertex of this path above the
    // subtree.
    if ancestors(tree, subtree_root)?.iter().any(|&a| truth.t[a]) {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    let mut stack = vec![subtree_root];
    while let Some(v) = stack.pop() {
        if truth.t[v] {
            sum += alloc.require(v)?;
        } else {
            stack.extend_from_slice(tree.children(v));
        }
    }
    Ok(sum)
}

/// A collection of complete trees tested side by side, their root levels
/// bounded in total by the global level.
#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    trees: Vec<TestTree>,
    root_levels: Vec<f64>,
    alpha: f64,
}

impl Forest {
    pub fn new(trees: Vec<TestTree>, root_levels: Vec<f64>, alpha: f64) -> Result<Self> {
        check_level(alpha)?;
        if trees.len() != root_levels.len() {
            return Err(Error::LengthMismatch {
                expected: trees.len(),
                got: root_levels.len(),
            });
        }
        if trees.is_empty() {
            return Err(Error::InvalidConfig("forest has no trees".into()));
        }
        for &l in &root_levels {
            check_level(l)?;
        }
        let sum: f64 = root_levels.iter().sum();
        if sum > alpha + LB_TOLERANCE {
            return Err(Error::ForestBudget { sum, alpha });
        }
        Ok(Self {
            trees,
            root_levels,
            alpha,
        })
    }

    /// Splits `alpha` equally across the roots.
    pub fn uniform(trees: Vec<TestTree>, alpha: f64) -> Result<Self> {
        let k = trees.len().max(1) as f64;
        let levels = vec![alpha / k; trees.len()];
        Self::new(trees, levels, alpha)
    }

    pub fn trees(&self) -> &[TestTree] {
        &self.trees
    }

    pub fn root_levels(&self) -> &[f64] {
        &self.root_levels
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Uniform within-tree allocations starting from each root level.
    pub fn uniform_allocations(&self) -> Result<Vec<AlphaAllocation>> {
        self.trees
            .iter()
            .zip(&self.root_levels)
            .map(|(t, &l)| allocate_alpha_uniform(t, l))
            .collect()
    }
}

/// Serialized form of a tree together with its allocation. A missing
/// `allocation` means the uniform split of `alpha_root`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeDocument {
    pub depth: usize,
    pub branching: Vec<usize>,
    pub alpha_root: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allocation: Option<Vec<f64>>,
}

impl TreeDocument {
    pub fn new(tree: &TestTree, alloc: &AlphaAllocation) -> Result<Self> {
        let branching = tree
            .branching()
            .ok_or_else(|| Error::InvalidConfig("tree has non-uniform layers".into()))?
            .to_vec();
        Ok(Self {
            depth: tree.depth(),
            branching,
            alpha_root: alloc.root_level().ok_or(Error::MissingAlpha(0))?,
            allocation: Some(alloc.levels().to_vec()),
        })
    }

    pub fn build(&self) -> Result<(TestTree, AlphaAllocation)> {
        let tree = build_complete_tree(&self.branching, self.depth)?;
        let alloc = match &self.allocation {
            Some(levels) => {
                if levels.len() != tree.len() {
                    return Err(Error::LengthMismatch {
                        expected: tree.len(),
                        got: levels.len(),
                    });
                }
                AlphaAllocation::new(levels.clone())?
            }
            None => allocate_alpha_uniform(&tree, self.alpha_root)?,
        };
        Ok((tree, alloc))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn binary(depth: usize) -> TestTree {
        build_complete_tree(&vec![2; depth], depth).unwrap()
    }

    #[test]
    fn build_counts() {
        let t = build_complete_tree(&[2, 2], 2).unwrap();
        assert_eq!(t.len(), 7);
        assert_eq!(t.leaves(), vec![3, 4, 5, 6]);
        assert!(t.leaves().iter().all(|&l| t.vertex(l).unwrap().depth == 2));

        let t = build_complete_tree(&[], 0).unwrap();
        assert_eq!(t.len(), 1);
        assert!(t.is_leaf(0));

        let t = build_complete_tree(&[3, 2], 2).unwrap();
        assert_eq!(t.len(), 10);
        assert_eq!(t.children(0), &[1, 2, 3]);
        assert_eq!(t.children(1), &[4, 5]);
        assert_eq!(t.children(3), &[8, 9]);
    }

    #[test]
    fn build_rejects_bad_input() {
        assert_eq!(
            build_complete_tree(&[2, 0], 2),
            Err(Error::ZeroBranching { layer: 1 })
        );
        assert!(matches!(
            build_complete_tree(&[2], 2),
            Err(Error::BranchingDepthMismatch { .. })
        ));
        assert!(matches!(
            build_complete_tree_with_cap(&[10, 10, 10], 3, 1000),
            Err(Error::TooManyVertices {
                count: 1111,
                cap: 1000
            })
        ));
        assert!(matches!(
            build_complete_tree(&[1000; 8], 8),
            Err(Error::TooManyVertices { .. })
        ));
    }

    #[test]
    fn from_children_checks_completeness() {
        let t = TestTree::from_children(vec![
            vec![1, 2],
            vec![3],
            vec![4, 5],
            vec![],
            vec![],
            vec![],
        ])
        .unwrap();
        assert_eq!(t.depth(), 2);
        assert_eq!(t.branching(), None);
        assert_eq!(t.leaves(), vec![3, 4, 5]);

        let incomplete = TestTree::from_children(vec![vec![1, 2], vec![3], vec![], vec![]]);
        assert!(incomplete.is_err());
        let two_parents = TestTree::from_children(vec![vec![1, 2], vec![2], vec![]]);
        assert!(two_parents.is_err());
        let disconnected = TestTree::from_children(vec![vec![1], vec![], vec![]]);
        assert!(disconnected.is_err());
    }

    #[test]
    fn uniform_allocation() {
        let t = binary(2);
        let a = allocate_alpha_uniform(&t, 0.05).unwrap();
        assert_eq!(a.get(0), Some(0.05));
        assert_eq!(a.get(1), Some(0.025));
        assert_eq!(a.get(6), Some(0.0125));

        let t = build_complete_tree(&[3], 1).unwrap();
        let a = allocate_alpha_uniform(&t, 0.06).unwrap();
        for v in 1..4 {
            assert_abs_diff_eq!(a.get(v).unwrap(), 0.02, epsilon = 1e-15);
        }

        let t = build_complete_tree(&[], 0).unwrap();
        assert_eq!(allocate_alpha_uniform(&t, 0.05).unwrap().levels(), &[0.05]);
        assert!(allocate_alpha_uniform(&t, 0.0).is_err());
        assert!(allocate_alpha_uniform(&t, 1.5).is_err());
    }

    #[test]
    fn weighted_allocation() {
        let t = binary(1);
        let w = HashMap::from([(1, 3.0), (2, 1.0)]);
        let a = allocate_alpha_weighted(&t, 0.04, &w).unwrap();
        assert_abs_diff_eq!(a.get(1).unwrap(), 0.03, epsilon = 1e-15);
        assert_abs_diff_eq!(a.get(2).unwrap(), 0.01, epsilon = 1e-15);

        let t = build_complete_tree(&[3, 2], 2).unwrap();
        let equal: HashMap<_, _> = (1..t.len()).map(|v| (v, 2.5)).collect();
        let a = allocate_alpha_weighted(&t, 0.05, &equal).unwrap();
        let u = allocate_alpha_uniform(&t, 0.05).unwrap();
        for v in 0..t.len() {
            assert_abs_diff_eq!(a.get(v).unwrap(), u.get(v).unwrap(), epsilon = 1e-15);
        }

        let missing = HashMap::from([(1, 1.0)]);
        assert_eq!(
            allocate_alpha_weighted(&binary(1), 0.05, &missing),
            Err(Error::MissingWeight(2))
        );
        let negative = HashMap::from([(1, 1.0), (2, -1.0)]);
        assert!(matches!(
            allocate_alpha_weighted(&binary(1), 0.05, &negative),
            Err(Error::InvalidWeight { vertex: 2, .. })
        ));
    }

    #[test]
    fn lb_validation() {
        let t = binary(1);
        let ok = AlphaAllocation::new(vec![0.05, 0.025, 0.025]).unwrap();
        assert!(validate_lb(&t, &ok).unwrap().is_empty());
        let bad = AlphaAllocation::new(vec![0.05, 0.03, 0.03]).unwrap();
        assert_eq!(validate_lb(&t, &bad).unwrap(), vec![0]);
        let root_only = build_complete_tree(&[], 0).unwrap();
        let a = AlphaAllocation::new(vec![0.05]).unwrap();
        assert!(validate_lb(&root_only, &a).unwrap().is_empty());
        let short = AlphaAllocation::new(vec![0.05, 0.025]).unwrap();
        assert_eq!(validate_lb(&t, &short), Err(Error::MissingAlpha(2)));
    }

    #[test]
    fn ancestor_paths() {
        let t = binary(2);
        assert!(ancestors(&t, 0).unwrap().is_empty());
        assert_eq!(ancestors(&t, 5).unwrap(), vec![2, 0]);
        assert_eq!(ancestors(&t, 1).unwrap(), vec![0]);
        assert_eq!(ancestors(&t, 7), Err(Error::UnknownVertex(7)));
    }

    #[test]
    fn first_true_examples() {
        let t = binary(2);
        assert!(first_true_set(&t, &TruthAssignment::all_false(7))
            .unwrap()
            .is_empty());

        let mut bits = vec![false; 7];
        bits[0] = true;
        bits[4] = true;
        assert_eq!(
            first_true_set(&t, &TruthAssignment::new(bits)).unwrap(),
            BTreeSet::from([0])
        );

        // t = (0; 1, 0; -, -, 1, 1): left child true, right child's leaves true.
        let truth = TruthAssignment::new(vec![false, true, false, false, true, true, true]);
        assert_eq!(
            first_true_set(&t, &truth).unwrap(),
            BTreeSet::from([1, 5, 6])
        );
        assert_eq!(
            first_true_set(&t, &TruthAssignment::all_true(3)),
            Err(Error::MissingTruth(3))
        );
    }

    #[test]
    fn subtree_sums() {
        let t = binary(2);
        let a = allocate_alpha_uniform(&t, 0.05).unwrap();
        let none = TruthAssignment::all_false(7);
        assert_eq!(subtree_alpha_sum(&t, &a, &none, 0).unwrap(), 0.0);

        let truth = TruthAssignment::new(vec![false, true, false, false, true, true, true]);
        assert_abs_diff_eq!(
            subtree_alpha_sum(&t, &a, &truth, 0).unwrap(),
            0.05,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            subtree_alpha_sum(&t, &a, &truth, 2).unwrap(),
            0.025,
            epsilon = 1e-15
        );
        assert_eq!(subtree_alpha_sum(&t, &a, &truth, 1).unwrap(), 0.025);
        // Vertex 4 sits below the first-true vertex 1.
        assert_eq!(subtree_alpha_sum(&t, &a, &truth, 4).unwrap(), 0.0);
    }

    #[test]
    fn forest_budget() {
        let trees = vec![binary(1), binary(2)];
        let f = Forest::uniform(trees.clone(), 0.05).unwrap();
        assert_eq!(f.root_levels(), &[0.025, 0.025]);
        let allocs = f.uniform_allocations().unwrap();
        assert_eq!(allocs[1].get(3), Some(0.00625));
        assert!(matches!(
            Forest::new(trees, vec![0.04, 0.02], 0.05),
            Err(Error::ForestBudget { .. })
        ));
    }

    #[test]
    fn tree_document_roundtrip() {
        let t = build_complete_tree(&[3, 2], 2).unwrap();
        let a = allocate_alpha_uniform(&t, 0.05).unwrap();
        let doc = TreeDocument::new(&t, &a).unwrap();
        let json = serde_json::to_string(&doc).unwrap();
        let back: TreeDocument = serde_json::from_str(&json).unwrap();
        let (t2, a2) = back.build().unwrap();
        assert_eq!(t, t2);
        assert_eq!(a, a2);

        let bare: TreeDocument =
            serde_json::from_str(r#"{"depth":1,"branching":[2],"alpha_root":0.05}"#).unwrap();
        let (_, a) = bare.build().unwrap();
        assert_eq!(a.levels(), &[0.05, 0.025, 0.025]);
    }
}
