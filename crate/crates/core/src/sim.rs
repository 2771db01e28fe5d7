//! Monte Carlo error-rate estimation and exhaustive verification of the
//! first-true-set bound.
//!
//! Replication `i` draws all of its randomness from a ChaCha8 stream keyed
//! by the master seed with stream id `i`. Replications are processed in
//! fixed-size batches whose partial sums are merged in batch order, so a
//! report is bit-identical for any number of worker threads.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::procedures::{
    benjamini_hochberg, bonferroni, holm, metrics_unchecked, CadProcedure, ExtendedCad,
    LocalProcedure,
};
use crate::stats::{pvalue_from_z, Sided};
use crate::tree::{
    allocate_alpha_uniform, allocate_alpha_weighted, build_complete_tree,
    build_complete_tree_with_cap, first_true_set, subtree_alpha_sum, validate_lb, AlphaAllocation,
    Forest, TestTree, TruthAssignment, VertexId, LB_TOLERANCE,
};

/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 20_090_101;

/// Replications per work item, independent of the thread count.
const BATCH: u64 = 1024;

/// Largest replication count accepted (exactly representable in `f64`).
pub const MAX_REPLICATIONS: u64 = 1 << 53;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Structure {
    /// Per-layer branching factors of a single complete tree.
    Tree(Vec<usize>),
    /// Several complete trees, possibly of different depths.
    Forest(Vec<Vec<usize>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AllocationKind {
    #[default]
    Uniform,
    /// Proportional split by weight. Explicit weights are indexed by global
    /// vertex id (roots ignored); otherwise weights are drawn uniformly from
    /// [0.1, 1) with `seed`.
    Weighted {
        #[serde(default)]
        weights: Option<Vec<f64>>,
        #[serde(default)]
        seed: Option<u64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TruthSpec {
    /// Every null hypothesis true.
    #[default]
    GlobalNull,
    /// Every null hypothesis false.
    AllFalse,
    /// One flag per global vertex id, `true` = null true.
    Explicit(Vec<bool>),
    /// Nulls along the root-to-leaf path ending at the given global leaf id
    /// are false, all others true.
    FalsePath(VertexId),
    /// Each vertex (each leaf under nested means) is a true null with the
    /// given probability, drawn afresh per replication.
    Random { density: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Dependence {
    /// Independent unit-variance z statistics per vertex.
    #[default]
    Independent,
    /// Independent leaf statistics; every internal vertex uses the
    /// normalised mean of the leaves below it.
    NestedMeans,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Procedure {
    Cad,
    CadExtended,
    HolmFlat,
    BonferroniFlat,
    BhFlat,
}

impl Procedure {
    pub const ALL: [Procedure; 5] = [
        Procedure::Cad,
        Procedure::CadExtended,
        Procedure::HolmFlat,
        Procedure::BonferroniFlat,
        Procedure::BhFlat,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Procedure::Cad => "cad",
            Procedure::CadExtended => "cad_extended",
            Procedure::HolmFlat => "holm_flat",
            Procedure::BonferroniFlat => "bonferroni_flat",
            Procedure::BhFlat => "bh_flat",
        }
    }
}

impl std::str::FromStr for Procedure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Procedure::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown procedure {s:?}")))
    }
}

impl std::fmt::Display for Procedure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

fn default_alpha() -> f64 {
    0.05
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub structure: Structure,
    #[serde(default)]
    pub allocation: AllocationKind,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub truth: TruthSpec,
    /// Mean shift, in z units, of statistics at false nulls.
    #[serde(default)]
    pub effect: f64,
    #[serde(default)]
    pub dependence: Dependence,
    /// Defaults to `ceil(500 / alpha)`.
    #[serde(default)]
    pub replications: Option<u64>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub sided: Sided,
    #[serde(default)]
    pub local_procedure: LocalProcedure,
}

impl SimConfig {
    pub fn tree(branching: Vec<usize>) -> Self {
        Self {
            structure: Structure::Tree(branching),
            allocation: AllocationKind::Uniform,
            alpha: default_alpha(),
            truth: TruthSpec::GlobalNull,
            effect: 0.0,
            dependence: Dependence::Independent,
            replications: None,
            seed: DEFAULT_SEED,
            sided: Sided::TwoSided,
            local_procedure: LocalProcedure::Holm,
        }
    }

    pub fn replication_count(&self) -> u64 {
        self.replications
            .unwrap_or_else(|| (500.0 / self.alpha).ceil() as u64)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if !(self.effect >= 0.0 && self.effect.is_finite()) {
            return bad(format!(
                "effect must be finite and >= 0, got {}",
                self.effect
            ));
        }
        let n = self.replication_count();
        if n == 0 {
            return bad("replications must be at least 1".into());
        }
        if n > MAX_REPLICATIONS {
            return bad(format!("replication counter overflow: {n} > 2^53"));
        }
        if let TruthSpec::Random { density } = self.truth {
            if !(0.0..=1.0).contains(&density) {
                return bad(format!("density must lie in [0, 1], got {density}"));
            }
        }
        if let Structure::Forest(trees) = &self.structure {
            if trees.is_empty() {
                return bad("forest has no trees".into());
            }
        }
        Ok(())
    }
}

/// Global vertex numbering over all trees of the simulated structure.
struct Layout {
    trees: Vec<TestTree>,
    allocs: Vec<AlphaAllocation>,
    offsets: Vec<usize>,
    total: usize,
    leaves: Vec<usize>,
    roots: Vec<usize>,
    /// Global leaf ids below each global vertex, as a range into the
    /// per-tree leaf layer (trees are breadth-first numbered, so subtree
    /// leaves are contiguous).
    leaf_span: Vec<(usize, usize)>,
}

impl Layout {
    fn new(config: &SimConfig) -> Result<Self> {
        let shapes = match &config.structure {
            Structure::Tree(b) => vec![b.clone()],
            Structure::Forest(f) => f.clone(),
        };
        let trees = shapes
            .iter()
            .map(|b| build_complete_tree(b, b.len()))
            .collect::<Result<Vec<_>>>()?;
        let forest = Forest::uniform(trees, config.alpha)?;
        let mut offsets = Vec::new();
        let mut total = 0;
        for t in forest.trees() {
            offsets.push(total);
            total += t.len();
        }
        let allocs = match &config.allocation {
            AllocationKind::Uniform => forest.uniform_allocations()?,
            AllocationKind::Weighted { weights, seed } => {
                let global: Vec<f64> = match weights {
                    Some(w) => {
                        if w.len() != total {
                            return Err(Error::InvalidConfig(format!(
                                "weights cover {} vertices, structure has {total}",
                                w.len()
                            )));
                        }
                        w.clone()
                    }
                    None => {
                        let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(config.seed));
                        (0..total).map(|_| rng.random_range(0.1..1.0)).collect()
                    }
                };
                forest
                    .trees()
                    .iter()
                    .zip(forest.root_levels())
                    .zip(&offsets)
                    .map(|((t, &level), &off)| {
                        let w: HashMap<VertexId, f64> =
                            (1..t.len()).map(|v| (v, global[off + v])).collect();
                        allocate_alpha_weighted(t, level, &w)
                    })
                    .collect::<Result<Vec<_>>>()?
            }
        };
        let trees = forest.trees().to_vec();
        let mut leaves = Vec::new();
        let mut leaf_span = vec![(0, 0); total];
        for (t, &off) in trees.iter().zip(&offsets) {
            let leaf_start = leaves.len();
            let first_leaf = t.leaves()[0];
            leaves.extend(t.leaves().into_iter().map(|l| off + l));
            // Subtree leaf ranges, bottom up.
            for v in (0..t.len()).rev() {
                leaf_span[off + v] = if t.is_leaf(v) {
                    let i = leaf_start + v - first_leaf;
                    (i, i + 1)
                } else {
                    let cs = t.children(v);
                    (
                        leaf_span[off + cs[0]].0,
                        leaf_span[off + *cs.last().unwrap()].1,
                    )
                };
            }
        }
        let roots = offsets.clone();
        Ok(Self {
            trees,
            allocs,
            offsets,
            total,
            leaves,
            roots,
            leaf_span,
        })
    }

    fn tree_of(&self, v: usize) -> (usize, usize) {
        let k = self.offsets.partition_point(|&o| o <= v) - 1;
        (k, v - self.offsets[k])
    }

    /// Truth flags per global vertex for deterministic truth specs.
    fn fixed_truth(&self, spec: &TruthSpec, dependence: Dependence) -> Result<Option<Vec<bool>>> {
        let t = match spec {
            TruthSpec::GlobalNull => vec![true; self.total],
            TruthSpec::AllFalse => vec![false; self.total],
            TruthSpec::Explicit(t) => {
                if t.len() != self.total {
                    return Err(Error::InvalidConfig(format!(
                        "explicit truth covers {} vertices, structure has {}",
                        t.len(),
                        self.total
                    )));
                }
                t.clone()
            }
            TruthSpec::FalsePath(leaf) => {
                if !self.leaves.contains(leaf) {
                    return Err(Error::InvalidConfig(format!("{leaf} is not a leaf")));
                }
                let (k, local) = self.tree_of(*leaf);
                let mut t = vec![true; self.total];
                t[*leaf] = false;
                for a in crate::tree::ancestors(&self.trees[k], local)? {
                    t[self.offsets[k] + a] = false;
                }
                t
            }
            TruthSpec::Random { .. } => return Ok(None),
        };
        if dependence == Dependence::NestedMeans {
            let derived = self.derive_nested_truth(&t);
            if derived != t {
                return Err(Error::InvalidConfig(
                    "under nested means an internal null is true iff all leaf nulls below it are true"
                        .into(),
                ));
            }
        }
        Ok(Some(t))
    }

    /// Internal truth values implied by the leaf values.
    fn derive_nested_truth(&self, t: &[bool]) -> Vec<bool> {
        self.leaf_span
            .iter()
            .map(|&(a, b)| self.leaves[a..b].iter().all(|&l| t[l]))
            .collect()
    }
}

/// Running sums for one procedure. Merging is exact for the integer
/// counters; float sums are merged in batch order.
#[derive(Debug, Clone, Default)]
struct Accumulator {
    replications: u64,
    any_false: u64,
    fdp_sum: f64,
    pcer_sum: f64,
    power_sum: f64,
    rejections: u64,
    false_rejections: u64,
    domination_violations: u64,
    vertex_rejections: Vec<u64>,
}

impl Accumulator {
    fn new(total: usize) -> Self {
        Self {
            vertex_rejections: vec![0; total],
            ..Default::default()
        }
    }

    fn merge(&mut self, other: &Accumulator) {
        self.replications += other.replications;
        self.any_false += other.any_false;
        self.fdp_sum += other.fdp_sum;
        self.pcer_sum += other.pcer_sum;
        self.power_sum += other.power_sum;
        self.rejections += other.rejections;
        self.false_rejections += other.false_rejections;
        self.domination_violations += other.domination_violations;
        for (a, b) in self
            .vertex_rejections
            .iter_mut()
            .zip(&other.vertex_rejections)
        {
            *a += b;
        }
    }
}

/// Summary of a Monte Carlo run for one procedure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub procedure: Procedure,
    pub replications: u64,
    /// Fraction of replications with at least one false rejection.
    pub fwer_hat: f64,
    /// Binomial standard error of `fwer_hat`.
    pub fwer_se: f64,
    pub fdr_hat: f64,
    pub pcer_hat: f64,
    pub power_hat: f64,
    pub any_false_count: u64,
    pub total_rejections: u64,
    pub total_false_rejections: u64,
    /// Replications where FDP or V/m exceeded the false-rejection indicator.
    /// Always zero; kept as a per-replication audit.
    pub domination_violations: u64,
    /// Number of hypotheses tested per replication.
    pub hypotheses: usize,
    /// Rejection frequency per global vertex id.
    pub vertex_rejection_freq: Vec<f64>,
    pub wall_time_secs: f64,
    pub config: SimConfig,
}

impl SimReport {
    /// `alpha + 3 * sqrt(alpha (1 - alpha) / N)`.
    pub fn fwer_upper_limit(&self, alpha: f64) -> f64 {
        fwer_upper_limit(alpha, self.replications)
    }
}

pub fn fwer_upper_limit(alpha: f64, replications: u64) -> f64 {
    alpha + 3.0 * (alpha * (1.0 - alpha) / replications as f64).sqrt()
}

/// Per-replication workspace.
struct Scratch {
    truth: Vec<bool>,
    z: Vec<f64>,
    p: Vec<f64>,
    leaf_sum: Vec<f64>,
    rejected: Vec<bool>,
    flags_t: Vec<bool>,
    flags_r: Vec<bool>,
    leaf_p: Vec<f64>,
    local: Vec<f64>,
}

struct Engine<'a> {
    config: &'a SimConfig,
    layout: &'a Layout,
    fixed_truth: Option<Vec<bool>>,
    cad: Vec<CadProcedure<'a>>,
    ext: Vec<ExtendedCad<'a>>,
    procedures: &'a [Procedure],
    ext_hypotheses: Vec<usize>,
}

impl<'a> Engine<'a> {
    fn scratch(&self) -> Scratch {
        let n = self.layout.total;
        Scratch {
            truth: vec![true; n],
            z: vec![0.0; n],
            p: vec![0.0; n],
            leaf_sum: vec![0.0; self.layout.leaves.len() + 1],
            rejected: vec![false; n],
            flags_t: Vec::with_capacity(n),
            flags_r: Vec::with_capacity(n),
            leaf_p: Vec::with_capacity(self.layout.leaves.len()),
            local: Vec::new(),
        }
    }

    fn draw(&self, rep: u64, s: &mut Scratch) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(rep);
        let layout = self.layout;
        let nested = self.config.dependence == Dependence::NestedMeans;

        match (&self.fixed_truth, &self.config.truth) {
            (Some(t), _) => s.truth.copy_from_slice(t),
            (None, TruthSpec::Random { density }) => {
                if nested {
                    for &l in &layout.leaves {
                        s.truth[l] = rng.random_bool(*density);
                    }
                    let derived = layout.derive_nested_truth(&s.truth);
                    s.truth.copy_from_slice(&derived);
                } else {
                    for t in s.truth.iter_mut() {
                        *t = rng.random_bool(*density);
                    }
                }
            }
            (None, _) => unreachable!("non-random truth specs are fixed"),
        }

        let delta = self.config.effect;
        if nested {
            s.leaf_sum[0] = 0.0;
            for (i, &l) in layout.leaves.iter().enumerate() {
                let shift = if s.truth[l] { 0.0 } else { delta };
                let x: f64 = rng.sample::<f64, _>(StandardNormal) + shift;
                s.leaf_sum[i + 1] = s.leaf_sum[i] + x;
                s.z[l] = x;
            }
            for v in 0..layout.total {
                let (a, b) = layout.leaf_span[v];
                if b - a > 1 {
                    s.z[v] = (s.leaf_sum[b] - s.leaf_sum[a]) / ((b - a) as f64).sqrt();
                }
            }
        } else {
            for v in 0..layout.total {
                let shift = if s.truth[v] { 0.0 } else { delta };
                s.z[v] = rng.sample::<f64, _>(StandardNormal) + shift;
            }
        }
        let sided = self.config.sided;
        for (p, &z) in s.p.iter_mut().zip(&s.z) {
            *p = pvalue_from_z(z, sided);
        }
    }

    fn evaluate(&self, s: &mut Scratch, accs: &mut [Accumulator]) {
        let layout = self.layout;
        let alpha = self.config.alpha;
        for (proc_, acc) in self.procedures.iter().zip(accs.iter_mut()) {
            s.flags_t.clear();
            s.flags_r.clear();
            match proc_ {
                Procedure::Cad => {
                    for ((c, &off), t) in self.cad.iter().zip(&layout.offsets).zip(&layout.trees) {
                        let end = off + t.len();
                        c.run_dense(&s.p[off..end], &mut s.rejected[off..end]);
                    }
                    s.flags_r.extend_from_slice(&s.rejected);
                    s.flags_t.extend_from_slice(&s.truth);
                    for (v, &r) in s.rejected.iter().enumerate() {
                        acc.vertex_rejections[v] += r as u64;
                    }
                }
                Procedure::CadExtended => {
                    for ((c, &off), t) in self.ext.iter().zip(&layout.offsets).zip(&layout.trees) {
                        let end = off + t.len();
                        c.run_dense(&s.p[off..end], &mut s.rejected[off..end], &mut s.local);
                    }
                    for &h in &self.ext_hypotheses {
                        s.flags_r.push(s.rejected[h]);
                        s.flags_t.push(s.truth[h]);
                        acc.vertex_rejections[h] += s.rejected[h] as u64;
                    }
                }
                Procedure::HolmFlat | Procedure::BonferroniFlat | Procedure::BhFlat => {
                    s.leaf_p.clear();
                    s.leaf_p.extend(layout.leaves.iter().map(|&l| s.p[l]));
                    let flags = match proc_ {
                        Procedure::HolmFlat => holm(&s.leaf_p, alpha),
                        Procedure::BonferroniFlat => bonferroni(&s.leaf_p, alpha),
                        _ => benjamini_hochberg(&s.leaf_p, alpha),
                    }
                    .expect("p-values in range and level validated");
                    for (&l, &f) in layout.leaves.iter().zip(&flags) {
                        s.flags_r.push(f);
                        s.flags_t.push(s.truth[l]);
                        acc.vertex_rejections[l] += f as u64;
                    }
                }
            }
            let m = metrics_unchecked(&s.flags_r, &s.flags_t);
            let indicator = if m.any_false { 1.0 } else { 0.0 };
            let pcer = m.pcer();
            if m.fdp > indicator || pcer > indicator {
                acc.domination_violations += 1;
            }
            acc.replications += 1;
            acc.any_false += m.any_false as u64;
            acc.fdp_sum += m.fdp;
            acc.pcer_sum += pcer;
            acc.power_sum += m.power;
            acc.rejections += m.rejections as u64;
            acc.false_rejections += m.false_rejections as u64;
        }
    }
}

/// Result of running several procedures on shared simulated data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub reports: Vec<SimReport>,
}

impl Comparison {
    /// Fixed-width text table, one row per procedure.
    pub fn table(&self) -> String {
        comparison_table(&self.reports)
    }
}

pub fn comparison_table(reports: &[SimReport]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<16} {:>10} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}",
        "procedure", "reps", "fwer", "fwer_se", "fdr", "pcer", "power", "rej/rep"
    );
    for r in reports {
        let _ = writeln!(
            out,
            "{:<16} {:>10} {:>9.5} {:>9.5} {:>9.5} {:>9.5} {:>9.5} {:>9.3}",
            r.procedure.name(),
            r.replications,
            r.fwer_hat,
            r.fwer_se,
            r.fdr_hat,
            r.pcer_hat,
            r.power_hat,
            r.total_rejections as f64 / r.replications as f64
        );
    }
    out
}

/// Runs `procedures` on identical simulated data: every replication draws
/// its statistics once and feeds them to each procedure.
pub fn compare_procedures(config: &SimConfig, procedures: &[Procedure]) -> Result<Comparison> {
    if procedures.is_empty() {
        return Err(Error::InvalidConfig("empty procedure list".into()));
    }
    config.validate()?;
    let start = Instant::now();
    let layout = Layout::new(config)?;
    let fixed_truth = layout.fixed_truth(&config.truth, config.dependence)?;
    let cad = layout
        .trees
        .iter()
        .zip(&layout.allocs)
        .map(|(t, a)| CadProcedure::new(t, a))
        .collect::<Result<Vec<_>>>()?;
    let ext = layout
        .trees
        .iter()
        .zip(&layout.allocs)
        .map(|(t, a)| ExtendedCad::new(t, a, config.local_procedure))
        .collect::<Result<Vec<_>>>()?;
    let ext_hypotheses: Vec<usize> = (0..layout.total)
        .filter(|v| !layout.roots.contains(v))
        .collect();
    let engine = Engine {
        config,
        layout: &layout,
        fixed_truth,
        cad,
        ext,
        procedures,
        ext_hypotheses,
    };

    let n = config.replication_count();
    let batches = n.div_ceil(BATCH);
    let partials: Vec<Vec<Accumulator>> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut s = engine.scratch();
            let mut accs = vec![Accumulator::new(layout.total); procedures.len()];
            for rep in b * BATCH..((b + 1) * BATCH).min(n) {
                engine.draw(rep, &mut s);
                engine.evaluate(&mut s, &mut accs);
            }
            accs
        })
        .collect();
    let mut totals = vec![Accumulator::new(layout.total); procedures.len()];
    for part in &partials {
        for (t, p) in totals.iter_mut().zip(part) {
            t.merge(p);
        }
    }
    let elapsed = start.elapsed().as_secs_f64();

    let reports = procedures
        .iter()
        .zip(totals)
        .map(|(&procedure, acc)| {
            let reps = acc.replications as f64;
            let fwer = acc.any_false as f64 / reps;
            let hypotheses = match procedure {
                Procedure::Cad => layout.total,
                Procedure::CadExtended => engine.ext_hypotheses.len(),
                _ => layout.leaves.len(),
            };
            SimReport {
                procedure,
                replications: acc.replications,
                fwer_hat: fwer,
                fwer_se: (fwer * (1.0 - fwer) / reps).sqrt(),
                fdr_hat: acc.fdp_sum / reps,
                pcer_hat: acc.pcer_sum / reps,
                power_hat: acc.power_sum / reps,
                any_false_count: acc.any_false,
                total_rejections: acc.rejections,
                total_false_rejections: acc.false_rejections,
                domination_violations: acc.domination_violations,
                hypotheses,
                vertex_rejection_freq: acc
                    .vertex_rejections
                    .iter()
                    .map(|&c| c as f64 / reps)
                    .collect(),
                wall_time_secs: elapsed,
                config: config.clone(),
            }
        })
        .collect();
    Ok(Comparison { reports })
}

pub fn simulate(config: &SimConfig, procedure: Procedure) -> Result<SimReport> {
    Ok(compare_procedures(config, &[procedure])?
        .reports
        .pop()
        .expect("one report per procedure"))
}

/// One row of the per-vertex frequency export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexFrequency {
    pub procedure: Procedure,
    pub vertex: usize,
    pub tree: usize,
    pub depth: usize,
    pub frequency: f64,
}

/// Flattens per-vertex rejection frequencies of the given reports.
pub fn vertex_frequencies(reports: &[SimReport]) -> Result<Vec<VertexFrequency>> {
    let mut rows = Vec::new();
    for r in reports {
        let layout = Layout::new(&r.config)?;
        for (v, &f) in r.vertex_rejection_freq.iter().enumerate() {
            let (k, local) = layout.tree_of(v);
            rows.push(VertexFrequency {
                procedure: r.procedure,
                vertex: v,
                tree: k,
                depth: layout.trees[k].vertex(local)?.depth,
                frequency: f,
            });
        }
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Exhaustive checks
// ---------------------------------------------------------------------------

/// Deepest tree enumerated by [`brute_force_eq2`].
pub const MAX_ENUM_DEPTH: usize = 3;
/// Largest branching factor enumerated by [`brute_force_eq2`].
pub const MAX_ENUM_BRANCHING: usize = 3;
/// Trees up to this many vertices are checked over every one of the
/// `2^|V|` truth assignments literally; larger trees enumerate the distinct
/// first-true sets instead.
pub const LITERAL_ENUM_LIMIT: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeReport {
    pub branching: Vec<usize>,
    pub vertices: usize,
    pub allocations: usize,
    /// Literal: truth assignments evaluated. Otherwise: distinct first-true
    /// sets evaluated, which together represent every assignment.
    pub cases_checked: u64,
    pub literal: bool,
    /// Truth assignments covered per allocation (`2^|V|`).
    pub assignments_covered: u128,
    /// Largest first-true level sum divided by the root level, over all
    /// cases and allocations.
    pub max_ratio: f64,
    pub violations: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Eq2Report {
    pub alpha: f64,
    pub shapes: Vec<ShapeReport>,
    pub cases_checked: u64,
    /// Largest first-true level sum seen (in units of the level, root level
    /// `alpha`).
    pub max_sum: f64,
    pub violations: u64,
}

impl Eq2Report {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// All branching sequences of length `0..=max_depth` over `branchings`.
pub fn enumerate_shapes(max_depth: usize, branchings: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..max_depth {
        let mut next = Vec::new();
        for s in &frontier {
            for &b in branchings {
                let mut t: Vec<usize> = s.clone();
                t.push(b);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// Exhaustively checks that the levels of the first-true set never sum to
/// more than the root level, over every complete tree with per-layer
/// branching factors from `branchings` and depth up to `max_depth`, every
/// truth assignment, and the uniform plus `random_allocations` randomly
/// weighted allocations.
pub fn brute_force_eq2(
    max_depth: usize,
    branchings: &[usize],
    alpha: f64,
    random_allocations: usize,
    seed: u64,
) -> Result<Eq2Report> {
    if max_depth > MAX_ENUM_DEPTH {
        return Err(Error::BudgetExceeded(format!(
            "depth {max_depth} > {MAX_ENUM_DEPTH}"
        )));
    }
    if branchings.is_empty() {
        return Err(Error::InvalidConfig("no branching factors".into()));
    }
    if let Some(&b) = branchings
        .iter()
        .find(|&&b| b == 0 || b > MAX_ENUM_BRANCHING)
    {
        return Err(Error::BudgetExceeded(format!(
            "branching factor {b} outside 1..={MAX_ENUM_BRANCHING}"
        )));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidLevel(alpha));
    }
    let mut dedup = branchings.to_vec();
    dedup.sort_unstable();
    dedup.dedup();

    let shapes = enumerate_shapes(max_depth, &dedup);
    let reports = shapes
        .par_iter()
        .enumerate()
        .map(|(si, shape)| check_shape(shape, alpha, random_allocations, seed ^ (si as u64) << 32))
        .collect::<Result<Vec<_>>>()?;

    let cases_checked = reports.iter().map(|r| r.cases_checked).sum();
    let violations = reports.iter().map(|r| r.violations).sum();
    let max_sum = reports.iter().map(|r| r.max_ratio).fold(0.0, f64::max) * alpha;
    Ok(Eq2Report {
        alpha,
        shapes: reports,
        cases_checked,
        max_sum,
        violations,
    })
}

fn check_shape(
    shape: &[usize],
    alpha: f64,
    random_allocations: usize,
    seed: u64,
) -> Result<ShapeReport> {
    let tree = build_complete_tree_with_cap(shape, shape.len(), 1 << 16)?;
    let mut allocs = vec![allocate_alpha_uniform(&tree, alpha)?];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..random_allocations {
        let w: HashMap<VertexId, f64> = (1..tree.len())
            .map(|v| (v, rng.random_range(0.05..1.0)))
            .collect();
        allocs.push(allocate_alpha_weighted(&tree, alpha, &w)?);
    }
    let literal = tree.len() <= LITERAL_ENUM_LIMIT;
    let mut cases = 0u64;
    let mut max_sum = 0.0f64;
    let mut violations = 0u64;
    for a in &allocs {
        debug_assert!(validate_lb(&tree, a)?.is_empty());
        let bound = alpha + LB_TOLERANCE;
        let (c, m, v) = if literal {
            enumerate_literal(&tree, a, bound)
        } else {
            enumerate_classes(&tree, a, bound)
        };
        cases += c;
        max_sum = max_sum.max(m);
        violations += v;
    }
    Ok(ShapeReport {
        branching: shape.to_vec(),
        vertices: tree.len(),
        allocations: allocs.len(),
        cases_checked: cases,
        literal,
        assignments_covered: 1u128 << tree.len(),
        max_ratio: max_sum / alpha,
        violations,
    })
}

/// Every assignment in `{0,1}^|V|`, first-true set computed per assignment.
fn enumerate_literal(tree: &TestTree, alloc: &AlphaAllocation, bound: f64) -> (u64, f64, u64) {
    let n = tree.len();
    let levels = alloc.levels();
    let mut max_sum = 0.0f64;
    let mut violations = 0;
    let mut stack = Vec::with_capacity(n);
    for bits in 0u64..(1 << n) {
        let mut sum = 0.0;
        stack.clear();
        stack.push(0usize);
        while let Some(v) = stack.pop() {
            if bits >> v & 1 == 1 {
                sum += levels[v];
            } else {
                stack.extend_from_slice(tree.children(v));
            }
        }
        max_sum = max_sum.max(sum);
        violations += (sum > bound) as u64;
    }
    (1 << n, max_sum, violations)
}

/// Level sums of every distinct first-true set of the subtree at `v`
/// (restricted to that subtree, assuming all ancestors false).
fn class_sums(tree: &TestTree, levels: &[f64], v: VertexId) -> Vec<f64> {
    let children = tree.children(v);
    let mut out = vec![levels[v]];
    if children.is_empty() {
        // Leaf false: empty first-true set.
        out.push(0.0);
        return out;
    }
    let mut combos = vec![0.0];
    for &c in children {
        let cs = class_sums(tree, levels, c);
        let mut next = Vec::with_capacity(combos.len() * cs.len());
        for &a in &combos {
            for &b in &cs {
                next.push(a + b);
            }
        }
        combos = next;
    }
    out.extend(combos);
    out
}

/// Streams every distinct first-true set of the whole tree: the root true,
/// or the root false combined with each choice of class per child subtree.
fn enumerate_classes(tree: &TestTree, alloc: &AlphaAllocation, bound: f64) -> (u64, f64, u64) {
    let levels = alloc.levels();
    let mut state = (1u64, levels[0], (levels[0] > bound) as u64);
    let lists: Vec<Vec<f64>> = tree
        .children(0)
        .iter()
        .map(|&c| class_sums(tree, levels, c))
        .collect();

    fn stream(lists: &[Vec<f64>], partial: f64, bound: f64, state: &mut (u64, f64, u64)) {
        if let [last] = lists {
            let mut max = state.1;
            let mut viol = 0u64;
            for &x in last {
                let s = partial + x;
                max = max.max(s);
                viol += (s > bound) as u64;
            }
            state.0 += last.len() as u64;
            state.1 = max;
            state.2 += viol;
        } else {
            for &x in &lists[0] {
                stream(&lists[1..], partial + x, bound, state);
            }
        }
    }
    if lists.is_empty() {
        // Single-vertex tree: root false gives the empty set.
        state.0 += 1;
    } else {
        stream(&lists, 0.0, bound, &mut state);
    }
    state
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Eq3Report {
    pub vertices_checked: usize,
    pub violations: Vec<VertexId>,
    /// `S` at the root.
    pub root_sum: f64,
    /// Largest `S / alpha(rho)` over all subtree roots.
    pub max_ratio: f64,
}

/// Checks the subtree bound `S_U <= alpha(root of U)` at every vertex.
pub fn brute_force_eq3(
    tree: &TestTree,
    alloc: &AlphaAllocation,
    truth: &TruthAssignment,
) -> Result<Eq3Report> {
    if tree.len() > 1 << 16 {
        return Err(Error::BudgetExceeded(format!(
            "{} vertices is too many to enumerate",
            tree.len()
        )));
    }
    let mut violations = Vec::new();
    let mut max_ratio = 0.0f64;
    let mut root_sum = 0.0;
    for v in 0..tree.len() {
        let s = subtree_alpha_sum(tree, alloc, truth, v)?;
        let a = alloc.get(v).ok_or(Error::MissingAlpha(v))?;
        if v == 0 {
            root_sum = s;
        }
        max_ratio = max_ratio.max(s / a);
        if s > a + LB_TOLERANCE {
            violations.push(v);
        }
    }
    Ok(Eq3Report {
        vertices_checked: tree.len(),
        violations,
        root_sum,
        max_ratio,
    })
}

/// Level sum of the first-true set for one truth assignment.
pub fn first_true_level_sum(
    tree: &TestTree,
    alloc: &AlphaAllocation,
    truth: &TruthAssignment,
) -> Result<f64> {
    first_true_set(tree, truth)?
        .into_iter()
        .map(|v| alloc.get(v).ok_or(Error::MissingAlpha(v)))
        .sum()
}
