//! Reference implementations used only as test oracles. None of these share
//! code paths with the library routines they check.
#![allow(dead_code)]

use std::collections::BTreeSet;

use cad_core::tree::TestTree;
use rand::Rng;

/// `Phi(x)` from the all-positive-term series
/// `erf(y) = 2/sqrt(pi) * exp(-y^2) * sum_n 2^n y^(2n+1) / (1*3*...*(2n+1))`,
/// summed with Kahan compensation until terms vanish.
pub fn erf_series_cdf(x: f64) -> f64 {
    let y = x.abs() / std::f64::consts::SQRT_2;
    let mut term = y;
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    let mut n = 0u32;
    loop {
        let t = term - comp;
        let s = sum + t;
        comp = (s - sum) - t;
        sum = s;
        n += 1;
        term *= 2.0 * y * y / (2 * n + 1) as f64;
        if term < 1e-18 * sum || n > 10_000 {
            break;
        }
    }
    let erf = 2.0 / std::f64::consts::PI.sqrt() * (-y * y).exp() * sum;
    if x >= 0.0 {
        0.5 + 0.5 * erf
    } else {
        0.5 - 0.5 * erf
    }
}

/// Textbook recursion: reject `v` iff its p-value is within its level, then
/// recurse into its children.
pub fn naive_cad(tree: &TestTree, alpha: &[f64], p: &[f64]) -> BTreeSet<usize> {
    fn go(tree: &TestTree, alpha: &[f64], p: &[f64], v: usize, out: &mut BTreeSet<usize>) {
        if p[v] <= alpha[v] {
            out.insert(v);
            for &c in &tree.vertices()[v].children {
                go(tree, alpha, p, c, out);
            }
        }
    }
    let mut out = BTreeSet::new();
    go(tree, alpha, p, 0, &mut out);
    out
}

/// Nested shape description: a vertex is the list of its child subtrees.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Shape(pub Vec<Shape>);

impl Shape {
    pub fn size(&self) -> usize {
        1 + self.0.iter().map(Shape::size).sum::<usize>()
    }

    /// Breadth-first child lists.
    pub fn to_tree(&self) -> TestTree {
        let mut children: Vec<Vec<usize>> = vec![Vec::new()];
        let mut queue = std::collections::VecDeque::from([(self, 0usize)]);
        while let Some((s, id)) = queue.pop_front() {
            for c in &s.0 {
                let cid = children.len();
                children.push(Vec::new());
                children[id].push(cid);
                queue.push_back((c, cid));
            }
        }
        TestTree::from_children(children).expect("complete by construction")
    }
}

/// Every complete rooted tree (up to reordering children) with at most
/// `max_vertices` vertices.
pub fn all_complete_trees(max_vertices: usize) -> Vec<Shape> {
    let mut by_depth: Vec<Vec<Shape>> = vec![vec![Shape(vec![])]];
    loop {
        let prev = by_depth.last().unwrap();
        let mut next = Vec::new();
        // Multisets of subtrees from `prev`, non-decreasing index order.
        fn extend(
            prev: &[Shape],
            start: usize,
            budget: usize,
            current: &mut Vec<Shape>,
            out: &mut Vec<Shape>,
        ) {
            if !current.is_empty() {
                out.push(Shape(current.clone()));
            }
            for i in start..prev.len() {
                let s = prev[i].size();
                if s <= budget {
                    current.push(prev[i].clone());
                    extend(prev, i, budget - s, current, out);
                    current.pop();
                }
            }
        }
        extend(prev, 0, max_vertices - 1, &mut Vec::new(), &mut next);
        if next.is_empty() {
            break;
        }
        by_depth.push(next);
    }
    by_depth.into_iter().flatten().collect()
}

/// A random complete tree of the given depth with per-vertex branching in
/// `1..=max_branching`.
pub fn random_complete_tree<R: Rng>(rng: &mut R, depth: usize, max_branching: usize) -> TestTree {
    fn grow<R: Rng>(rng: &mut R, depth: usize, b: usize) -> Shape {
        if depth == 0 {
            return Shape(vec![]);
        }
        let k = rng.random_range(1..=b);
        Shape((0..k).map(|_| grow(rng, depth - 1, b)).collect())
    }
    grow(rng, depth, max_branching).to_tree()
}

/// p-values mostly at or below the vertex level, some exactly equal to it.
pub fn skewed_pvalues<R: Rng>(rng: &mut R, alpha: &[f64]) -> Vec<f64> {
    alpha
        .iter()
        .map(|&a| match rng.random_range(0..10) {
            0 => a,
            1..=5 => rng.random::<f64>() * 2.0 * a,
            _ => rng.random::<f64>().powi(3),
        })
        .collect()
}
