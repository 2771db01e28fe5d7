//! The subdivision procedure, its extension with local multiple-testing
//! problems, and flat baselines.
//!
//! A vertex is rejected iff its p-value is at most its level (`p <= alpha`,
//! closed comparison).

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tree::{validate_lb, AlphaAllocation, TestTree, TruthAssignment, VertexId};

/// Per-vertex p-values. Vertices that are never tested may be left out.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PValueMap {
    p: Vec<Option<f64>>,
}

impl PValueMap {
    /// One p-value per vertex, indexed by id.
    pub fn from_vec(values: Vec<f64>) -> Result<Self> {
        for &p in &values {
            check_p(p)?;
        }
        Ok(Self {
            p: values.into_iter().map(Some).collect(),
        })
    }

    /// Only the listed vertices carry p-values.
    pub fn sparse(n: usize, entries: impl IntoIterator<Item = (VertexId, f64)>) -> Result<Self> {
        let mut p = vec![None; n];
        for (v, value) in entries {
            check_p(value)?;
            *p.get_mut(v).ok_or(Error::UnknownVertex(v))? = Some(value);
        }
        Ok(Self { p })
    }

    pub fn get(&self, v: VertexId) -> Option<f64> {
        self.p.get(v).copied().flatten()
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }
}

#[inline]
fn check_p(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidPValue(p))
    }
}

/// Outcome of a tree procedure.
///
/// `rejected` is closed under taking parents (within the tested hypotheses);
/// `frontier` holds the hypotheses at which an acceptance stopped a branch.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RejectionSet {
    pub rejected: BTreeSet<VertexId>,
    pub frontier: BTreeSet<VertexId>,
}

impl RejectionSet {
    /// Rejection flags over `n` vertex ids.
    pub fn flags(&self, n: usize) -> Vec<bool> {
        let mut out = vec![false; n];
        for &v in &self.rejected {
            if v < n {
                out[v] = true;
            }
        }
        out
    }

    pub fn is_rejected(&self, v: VertexId) -> bool {
        self.rejected.contains(&v)
    }

    /// Serializable report with error metrics against a known truth.
    pub fn document(&self, metrics: Option<ErrorReport>) -> RejectionDocument {
        RejectionDocument {
            rejected: self.rejected.iter().copied().collect(),
            frontier: self.frontier.iter().copied().collect(),
            metrics,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionDocument {
    pub rejected: Vec<VertexId>,
    pub frontier: Vec<VertexId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<ErrorReport>,
}

/// The subdivision procedure bound to a tree and a validated allocation.
///
/// Construction checks coverage and the local Bonferroni condition once, so
/// repeated runs (as in simulation) only pay for the traversal.
#[derive(Debug, Clone)]
pub struct CadProcedure<'a> {
    tree: &'a TestTree,
    alpha: &'a [f64],
    order: Vec<VertexId>,
}

impl<'a> CadProcedure<'a> {
    pub fn new(tree: &'a TestTree, alloc: &'a AlphaAllocation) -> Result<Self> {
        let violations = validate_lb(tree, alloc)?;
        if !violations.is_empty() {
            return Err(Error::LbViolation(violations));
        }
        Ok(Self {
            tree,
            alpha: alloc.levels(),
            order: tree.subtree(tree.root())?,
        })
    }

    pub fn tree(&self) -> &TestTree {
        self.tree
    }

    pub fn run(&self, pvals: &PValueMap) -> Result<RejectionSet> {
        let mut out = RejectionSet::default();
        let mut queue = std::collections::VecDeque::from([self.tree.root()]);
        while let Some(v) = queue.pop_front() {
            let p = pvals.get(v).ok_or(Error::MissingPValue(v))?;
            if p <= self.alpha[v] {
                out.rejected.insert(v);
                queue.extend(self.tree.children(v).iter().copied());
            } else {
                out.frontier.insert(v);
            }
        }
        Ok(out)
    }

    /// Allocation-free run over a dense p-value slice. Writes one flag per
    /// vertex into `rejected` and returns the number of rejections.
    pub fn run_dense(&self, pvals: &[f64], rejected: &mut [bool]) -> usize {
        debug_assert_eq!(pvals.len(), self.tree.len());
        let mut count = 0;
        for &v in &self.order {
            let tested = match self.tree.parent(v) {
                None => true,
                Some(p) => rejected[p],
            };
            let r = tested && pvals[v] <= self.alpha[v];
            rejected[v] = r;
            count += r as usize;
        }
        count
    }
}

/// Tests top down from the root, following each branch while nulls are
/// rejected and stopping at the first acceptance.
pub fn cad_run(
    tree: &TestTree,
    alloc: &AlphaAllocation,
    pvals: &PValueMap,
) -> Result<RejectionSet> {
    CadProcedure::new(tree, alloc)?.run(pvals)
}

fn check_family(pvals: &[f64], level: f64) -> Result<()> {
    if pvals.is_empty() {
        return Err(Error::EmptyPValues);
    }
    if !(level > 0.0 && level <= 1.0) {
        return Err(Error::InvalidLevel(level));
    }
    for &p in pvals {
        check_p(p)?;
    }
    Ok(())
}

fn ascending_order(pvals: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..pvals.len()).collect();
    idx.sort_by(|&a, &b| pvals[a].total_cmp(&pvals[b]));
    idx
}

/// Holm's step-down procedure; flags are in input order.
pub fn holm(pvals: &[f64], level: f64) -> Result<Vec<bool>> {
    check_family(pvals, level)?;
    Ok(holm_unchecked(pvals, level))
}

fn holm_unchecked(pvals: &[f64], level: f64) -> Vec<bool> {
    let m = pvals.len();
    let mut out = vec![false; m];
    if m == 1 {
        out[0] = pvals[0] <= level;
        return out;
    }
    for (i, idx) in ascending_order(pvals).into_iter().enumerate() {
        if pvals[idx] <= level / (m - i) as f64 {
            out[idx] = true;
        } else {
            break;
        }
    }
    out
}

pub fn bonferroni(pvals: &[f64], level: f64) -> Result<Vec<bool>> {
    check_family(pvals, level)?;
    Ok(bonferroni_unchecked(pvals, level))
}

fn bonferroni_unchecked(pvals: &[f64], level: f64) -> Vec<bool> {
    let threshold = level / pvals.len() as f64;
    pvals.iter().map(|&p| p <= threshold).collect()
}

/// Benjamini–Hochberg step-up procedure at target FDR `q`.
pub fn benjamini_hochberg(pvals: &[f64], q: f64) -> Result<Vec<bool>> {
    check_family(pvals, q)?;
    let m = pvals.len();
    let order = ascending_order(pvals);
    let k = order
        .iter()
        .enumerate()
        .rev()
        .find(|&(i, &idx)| pvals[idx] <= (i + 1) as f64 * q / m as f64)
        .map_or(0, |(i, _)| i + 1);
    let mut out = vec![false; m];
    for &idx in &order[..k] {
        out[idx] = true;
    }
    Ok(out)
}

/// Familywise-error-controlling procedure applied to each local problem of
/// the extended procedure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalProcedure {
    #[default]
    Holm,
    Bonferroni,
}

impl LocalProcedure {
    pub fn apply(self, pvals: &[f64], level: f64) -> Result<Vec<bool>> {
        check_family(pvals, level)?;
        Ok(match self {
            LocalProcedure::Holm => holm_unchecked(pvals, level),
            LocalProcedure::Bonferroni => bonferroni_unchecked(pvals, level),
        })
    }
}

/// Extended procedure: every non-leaf vertex `v` carries the local problem
/// of testing the hypotheses of its children at familywise level
/// `alpha(v)`. Testing continues below all children only when the local
/// procedure rejects every one of them.
///
/// Single hypotheses are identified with the child vertex ids, so the root
/// is never itself a hypothesis.
#[derive(Debug, Clone)]
pub struct ExtendedCad<'a> {
    tree: &'a TestTree,
    alpha: &'a [f64],
    local: LocalProcedure,
}

impl<'a> ExtendedCad<'a> {
    pub fn new(
        tree: &'a TestTree,
        alloc: &'a AlphaAllocation,
        local: LocalProcedure,
    ) -> Result<Self> {
        let violations = validate_lb(tree, alloc)?;
        if !violations.is_empty() {
            return Err(Error::LbViolation(violations));
        }
        Ok(Self {
            tree,
            alpha: alloc.levels(),
            local,
        })
    }

    /// `local_pvals[v]` lists the p-values of the children of `v`, in child
    /// order. Only vertices reached by the procedure need an entry.
    pub fn run(&self, local_pvals: &BTreeMap<VertexId, Vec<f64>>) -> Result<RejectionSet> {
        let mut out = RejectionSet::default();
        let mut stack = vec![self.tree.root()];
        while let Some(v) = stack.pop() {
            let children = self.tree.children(v);
            if children.is_empty() {
                continue;
            }
            let ps = local_pvals.get(&v).ok_or(Error::MissingPValue(v))?;
            if ps.len() != children.len() {
                return Err(Error::ArityMismatch {
                    vertex: v,
                    expected: children.len(),
                    got: ps.len(),
                });
            }
            let flags = self.local.apply(ps, self.alpha[v])?;
            for (&c, &f) in children.iter().zip(&flags) {
                if f {
                    out.rejected.insert(c);
                } else {
                    out.frontier.insert(c);
                }
            }
            if flags.iter().all(|&f| f) {
                stack.extend(children.iter().copied());
            }
        }
        Ok(out)
    }

    /// Allocation-light run where the hypothesis of vertex `c` has p-value
    /// `pvals[c]` (the root entry is ignored). Writes rejection flags per
    /// vertex and returns the number of rejected hypotheses.
    pub fn run_dense(&self, pvals: &[f64], rejected: &mut [bool], scratch: &mut Vec<f64>) -> usize {
        debug_assert_eq!(pvals.len(), self.tree.len());
        rejected.iter_mut().for_each(|r| *r = false);
        let mut count = 0;
        let mut stack = vec![self.tree.root()];
        while let Some(v) = stack.pop() {
            let children = self.tree.children(v);
            if children.is_empty() {
                continue;
            }
            scratch.clear();
            scratch.extend(children.iter().map(|&c| pvals[c]));
            let flags = match self.local {
                LocalProcedure::Holm => holm_unchecked(scratch, self.alpha[v]),
                LocalProcedure::Bonferroni => bonferroni_unchecked(scratch, self.alpha[v]),
            };
            let mut all = true;
            for (&c, &f) in children.iter().zip(&flags) {
                rejected[c] = f;
                count += f as usize;
                all &= f;
            }
            if all {
                stack.extend(children.iter().copied());
            }
        }
        count
    }
}

pub fn cad_extended_run(
    tree: &TestTree,
    alloc: &AlphaAllocation,
    local_pvals: &BTreeMap<VertexId, Vec<f64>>,
    local: LocalProcedure,
) -> Result<RejectionSet> {
    ExtendedCad::new(tree, alloc, local)?.run(local_pvals)
}

/// Per-run error accounting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    /// False rejections.
    #[serde(rename = "V")]
    pub false_rejections: usize,
    #[serde(rename = "R")]
    pub rejections: usize,
    /// Number of hypotheses in the family.
    pub m: usize,
    #[serde(rename = "FDP")]
    pub fdp: f64,
    pub any_false: bool,
    pub power: f64,
}

impl ErrorReport {
    /// `V / m`, the per-comparison error proportion.
    pub fn pcer(&self) -> f64 {
        if self.m == 0 {
            0.0
        } else {
            self.false_rejections as f64 / self.m as f64
        }
    }
}

/// Error accounting for rejection flags against null truth flags
/// (`true` = null hypothesis true).
pub fn error_metrics(rejected: &[bool], true_null: &[bool]) -> Result<ErrorReport> {
    if rejected.len() != true_null.len() {
        return Err(Error::LengthMismatch {
            expected: true_null.len(),
            got: rejected.len(),
        });
    }
    Ok(metrics_unchecked(rejected, true_null))
}

pub(crate) fn metrics_unchecked(rejected: &[bool], true_null: &[bool]) -> ErrorReport {
    let mut v = 0;
    let mut r = 0;
    let mut false_nulls = 0;
    let mut discoveries = 0;
    for (&rej, &t) in rejected.iter().zip(true_null) {
        r += rej as usize;
        v += (rej && t) as usize;
        false_nulls += (!t) as usize;
        discoveries += (rej && !t) as usize;
    }
    ErrorReport {
        false_rejections: v,
        rejections: r,
        m: rejected.len(),
        fdp: v as f64 / r.max(1) as f64,
        any_false: v >= 1,
        power: discoveries as f64 / false_nulls.max(1) as f64,
    }
}

/// Error accounting for a rejection set over the hypotheses `hypotheses`
/// (vertex ids), using `truth` for null status.
pub fn set_metrics(
    set: &RejectionSet,
    truth: &TruthAssignment,
    hypotheses: &[VertexId],
) -> Result<ErrorReport> {
    let mut rej = Vec::with_capacity(hypotheses.len());
    let mut t = Vec::with_capacity(hypotheses.len());
    for &h in hypotheses {
        t.push(truth.get(h).ok_or(Error::MissingTruth(h))?);
        rej.push(set.is_rejected(h));
    }
    if let Some(&stray) = set.rejected.iter().find(|v| !hypotheses.contains(v)) {
        return Err(Error::UnknownVertex(stray));
    }
    Ok(metrics_unchecked(&rej, &t))
}
