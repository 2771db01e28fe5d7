//! Localisation of time regions whose mean departs from zero, by testing
//! successively finer subdivisions of the time axis.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::procedures::{CadProcedure, PValueMap};
use crate::stats::{z_pvalue, GaussianTestSpec, Sided};
use crate::tree::{
    allocate_alpha_uniform, build_complete_tree, TestTree, TruthAssignment, VertexId,
};

/// `R` repeated trials of a length-`T` series with known noise scale.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialMatrix {
    trials: usize,
    len: usize,
    data: Vec<f64>,
    sigma: f64,
    /// Prefix sums over time of the per-column totals.
    column_prefix: Vec<f64>,
}

impl TrialMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>, sigma: f64) -> Result<Self> {
        let trials = rows.len();
        let len = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != len) {
            return Err(Error::InvalidTrials(format!(
                "row {i} has {} samples, expected {len}",
                r.len()
            )));
        }
        Self::from_flat(trials, len, rows.into_iter().flatten().collect(), sigma)
    }

    /// Row-major `trials x len` samples.
    pub fn from_flat(trials: usize, len: usize, data: Vec<f64>, sigma: f64) -> Result<Self> {
        if trials == 0 || len == 0 {
            return Err(Error::InvalidTrials(format!(
                "need at least one trial and one time point, got {trials} x {len}"
            )));
        }
        if data.len() != trials * len {
            return Err(Error::LengthMismatch {
                expected: trials * len,
                got: data.len(),
            });
        }
        if let Some(&x) = data.iter().find(|x| !x.is_finite()) {
            return Err(Error::NonFinite(x));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidSigma(sigma));
        }
        let mut column_prefix = vec![0.0; len + 1];
        for t in 0..len {
            let col: f64 = (0..trials).map(|r| data[r * len + t]).sum();
            column_prefix[t + 1] = column_prefix[t] + col;
        }
        Ok(Self {
            trials,
            len,
            data,
            sigma,
            column_prefix,
        })
    }

    /// Gaussian trials `x_r(t) = mean(t) + sigma * e_r(t)`.
    pub fn synthetic<R: Rng + ?Sized>(
        trials: usize,
        mean: &[f64],
        sigma: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let len = mean.len();
        let mut data = Vec::with_capacity(trials * len);
        for _ in 0..trials {
            for &m in mean {
                let e: f64 = rng.sample(StandardNormal);
                data.push(m + sigma * e);
            }
        }
        Self::from_flat(trials, len, data, sigma)
    }

    pub fn trials(&self) -> usize {
        self.trials
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.len..(r + 1) * self.len]
    }

    /// Mean over all trials and all time points in `[start, end)`.
    pub fn grand_mean(&self, start: usize, end: usize) -> Result<f64> {
        if start >= end || end > self.len {
            return Err(Error::BadInterval {
                start,
                end,
                len: self.len,
            });
        }
        let total = self.column_prefix[end] - self.column_prefix[start];
        Ok(total / (self.trials * (end - start)) as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalNode {
    pub vertex: VertexId,
    pub start: usize,
    pub end: usize,
    pub depth: usize,
}

impl IntervalNode {
    pub fn width(&self) -> usize {
        self.end - self.start
    }
}

/// Complete `arity`-ary tree whose vertices carry nested time intervals.
#[derive(Debug, Clone)]
pub struct IntervalTree {
    tree: TestTree,
    nodes: Vec<IntervalNode>,
    len: usize,
}

/// Splits `[0, len)` recursively into `arity` contiguous parts per level.
/// Part sizes differ by at most one, the extra samples going to the
/// leftmost parts.
pub fn build_interval_tree(len: usize, depth: usize, arity: usize) -> Result<IntervalTree> {
    if arity == 0 {
        return Err(Error::ZeroBranching { layer: 0 });
    }
    let leaves = u32::try_from(depth).ok().and_then(|d| arity.checked_pow(d));
    if leaves.is_none_or(|l| l > len) {
        return Err(Error::IntervalTreeTooDeep { len, arity, depth });
    }
    let tree = build_complete_tree(&vec![arity; depth], depth)?;
    let mut nodes = vec![
        IntervalNode {
            vertex: 0,
            start: 0,
            end: len,
            depth: 0,
        };
        tree.len()
    ];
    for v in 0..tree.len() {
        let IntervalNode {
            start, end, depth, ..
        } = nodes[v];
        let width = end - start;
        let (base, extra) = (width / arity, width % arity);
        let mut cursor = start;
        for (i, &c) in tree.children(v).iter().enumerate() {
            let size = base + usize::from(i < extra);
            nodes[c] = IntervalNode {
                vertex: c,
                start: cursor,
                end: cursor + size,
                depth: depth + 1,
            };
            cursor += size;
        }
    }
    Ok(IntervalTree { tree, nodes, len })
}

impl IntervalTree {
    pub fn tree(&self) -> &TestTree {
        &self.tree
    }

    pub fn nodes(&self) -> &[IntervalNode] {
        &self.nodes
    }

    pub fn node(&self, v: VertexId) -> &IntervalNode {
        &self.nodes[v]
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Null truth per node: true iff `mean` vanishes on the whole interval.
    pub fn truth_for_mean(&self, mean: &[f64]) -> Result<TruthAssignment> {
        if mean.len() != self.len {
            return Err(Error::LengthMismatch {
                expected: self.len,
                got: mean.len(),
            });
        }
        Ok(TruthAssignment::new(
            self.nodes
                .iter()
                .map(|n| mean[n.start..n.end].iter().all(|&m| m == 0.0))
                .collect(),
        ))
    }
}

/// Two-sided z-test of zero mean on the samples of all trials inside the
/// node's interval.
pub fn interval_pvalue(trials: &TrialMatrix, node: &IntervalNode) -> Result<f64> {
    let mean = trials.grand_mean(node.start, node.end)?;
    let spec = GaussianTestSpec::new(
        0.0,
        trials.sigma(),
        (trials.trials() * node.width()) as f64,
        Sided::TwoSided,
    )?;
    z_pvalue(mean, &spec)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Rejected,
    Accepted,
    NotTested,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalDecision {
    pub vertex: VertexId,
    pub start: usize,
    pub end: usize,
    pub depth: usize,
    pub p_value: f64,
    pub decision: Decision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Localization {
    pub alpha: f64,
    pub depth: usize,
    pub arity: usize,
    pub trials: usize,
    pub len: usize,
    pub sigma: f64,
    pub nodes: Vec<IntervalDecision>,
    /// All rejected vertices.
    pub rejected: Vec<VertexId>,
    /// Rejected vertices none of whose children are rejected: the finest
    /// localisation along each path.
    pub maximal: Vec<VertexId>,
    /// Vertices whose test accepted.
    pub frontier: Vec<VertexId>,
}

impl Localization {
    pub fn rejected_intervals(&self) -> Vec<(usize, usize)> {
        self.rejected
            .iter()
            .map(|&v| (self.nodes[v].start, self.nodes[v].end))
            .collect()
    }

    pub fn maximal_intervals(&self) -> Vec<(usize, usize)> {
        self.maximal
            .iter()
            .map(|&v| (self.nodes[v].start, self.nodes[v].end))
            .collect()
    }
}

/// Tests every subdivision path top down with uniform level splitting,
/// stopping each path at its first acceptance.
pub fn localize(
    trials: &TrialMatrix,
    alpha: f64,
    depth: usize,
    arity: usize,
) -> Result<Localization> {
    let itree = build_interval_tree(trials.len(), depth, arity)?;
    localize_on(trials, &itree, alpha)
}

pub fn localize_on(trials: &TrialMatrix, itree: &IntervalTree, alpha: f64) -> Result<Localization> {
    if itree.len() != trials.len() {
        return Err(Error::LengthMismatch {
            expected: itree.len(),
            got: trials.len(),
        });
    }
    let tree = itree.tree();
    let alloc = allocate_alpha_uniform(tree, alpha)?;
    let pvals: Vec<f64> = itree
        .nodes()
        .iter()
        .map(|n| interval_pvalue(trials, n))
        .collect::<Result<_>>()?;
    let result = CadProcedure::new(tree, &alloc)?.run(&PValueMap::from_vec(pvals.clone())?)?;

    let nodes = itree
        .nodes()
        .iter()
        .zip(&pvals)
        .map(|(n, &p)| IntervalDecision {
            vertex: n.vertex,
            start: n.start,
            end: n.end,
            depth: n.depth,
            p_value: p,
            decision: if result.rejected.contains(&n.vertex) {
                Decision::Rejected
            } else if result.frontier.contains(&n.vertex) {
                Decision::Accepted
            } else {
                Decision::NotTested
            },
        })
        .collect();
    let maximal = result
        .rejected
        .iter()
        .copied()
        .filter(|&v| {
            tree.children(v)
                .iter()
                .all(|c| !result.rejected.contains(c))
        })
        .collect();
    Ok(Localization {
        alpha,
        depth: tree.depth(),
        arity: tree
            .branching()
            .and_then(|b| b.first().copied())
            .unwrap_or(1),
        trials: trials.trials(),
        len: trials.len(),
        sigma: trials.sigma(),
        nodes,
        rejected: result.rejected.into_iter().collect(),
        maximal,
        frontier: result.frontier.into_iter().collect(),
    })
}
