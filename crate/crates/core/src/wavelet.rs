//! Haar wavelet analysis and coefficient thresholding by tree testing.
//!
//! A signal of length `n = 2^(J+1)` has detail levels `j = 0..=J`, level `j`
//! holding `2^j` coefficients, plus one scaling coefficient. Levels `1..=J`
//! are arranged as two binary trees rooted at the two level-1 coefficients,
//! coefficient `(j, k)` splitting into `(j+1, 2k)` and `(j+1, 2k+1)`
//! (0-based `k`). The scaling coefficient and the level-0 detail form the
//! coarse block, which is never tested and always kept.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::procedures::CadProcedure;
use crate::stats::{critical_z, pvalue_from_z, Sided};
use crate::tree::{build_complete_tree, AlphaAllocation, Forest, TestTree, VertexId};

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// MAD of a standard normal sample, `Phi^{-1}(3/4)`.
pub const MAD_NORMAL_SCALE: f64 = 0.674_489_750_196_081_7;

/// Haar coefficients grouped by resolution level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveletTree {
    scaling: f64,
    /// `details[j]` holds the `2^j` level-`j` coefficients, `j = 0..=J`.
    details: Vec<Vec<f64>>,
}

fn check_length(n: usize) -> Result<u32> {
    if n < 4 || !n.is_power_of_two() {
        return Err(Error::BadSignalLength(n));
    }
    Ok(n.trailing_zeros() - 1)
}

/// Orthonormal Haar transform: `s = (a + b)/sqrt(2)`, `d = (a - b)/sqrt(2)`,
/// recursing on `s`.
pub fn haar_forward(signal: &[f64]) -> Result<WaveletTree> {
    let top = check_length(signal.len())?;
    let mut approx = signal.to_vec();
    let mut details = Vec::with_capacity(top as usize + 1);
    while approx.len() > 1 {
        let half = approx.len() / 2;
        let mut s = Vec::with_capacity(half);
        let mut d = Vec::with_capacity(half);
        for pair in approx.chunks_exact(2) {
            s.push((pair[0] + pair[1]) * FRAC_1_SQRT_2);
            d.push((pair[0] - pair[1]) * FRAC_1_SQRT_2);
        }
        details.push(d);
        approx = s;
    }
    details.reverse();
    Ok(WaveletTree {
        scaling: approx[0],
        details,
    })
}

pub fn haar_inverse(tree: &WaveletTree) -> Result<Vec<f64>> {
    tree.check()?;
    let mut approx = vec![tree.scaling];
    for d in &tree.details {
        let mut next = Vec::with_capacity(2 * d.len());
        for (&s, &w) in approx.iter().zip(d) {
            next.push((s + w) * FRAC_1_SQRT_2);
            next.push((s - w) * FRAC_1_SQRT_2);
        }
        approx = next;
    }
    Ok(approx)
}

impl WaveletTree {
    /// Assembles a tree from a scaling coefficient and detail levels
    /// `0..=J`.
    pub fn from_parts(scaling: f64, details: Vec<Vec<f64>>) -> Result<Self> {
        let t = Self { scaling, details };
        t.check()?;
        Ok(t)
    }

    fn check(&self) -> Result<()> {
        if self.details.len() < 2 {
            return Err(Error::MalformedWaveletTree(format!(
                "need at least 2 detail levels, got {}",
                self.details.len()
            )));
        }
        for (j, d) in self.details.iter().enumerate() {
            if d.len() != 1 << j {
                return Err(Error::MalformedWaveletTree(format!(
                    "level {j} has {} coefficients, expected {}",
                    d.len(),
                    1usize << j
                )));
            }
        }
        Ok(())
    }

    /// `J`, the finest detail level.
    pub fn top_level(&self) -> u32 {
        self.details.len() as u32 - 1
    }

    pub fn signal_len(&self) -> usize {
        2 << self.top_level()
    }

    pub fn scaling(&self) -> f64 {
        self.scaling
    }

    pub fn level(&self, j: u32) -> &[f64] {
        &self.details[j as usize]
    }

    pub fn level_mut(&mut self, j: u32) -> &mut [f64] {
        &mut self.details[j as usize]
    }

    pub fn get(&self, j: u32, k: usize) -> f64 {
        self.details[j as usize][k]
    }

    /// Sum of squared coefficients.
    pub fn energy(&self) -> f64 {
        self.scaling * self.scaling + self.details.iter().flatten().map(|w| w * w).sum::<f64>()
    }

    /// Number of nonzero detail coefficients at levels `1..=J`.
    pub fn nonzero_tested(&self) -> usize {
        self.details[1..]
            .iter()
            .flatten()
            .filter(|&&w| w != 0.0)
            .count()
    }
}

/// Coefficients of levels `start..=J` viewed as `2^start` complete binary
/// trees, one per level-`start` coefficient.
#[derive(Debug, Clone)]
pub struct CoefficientForest {
    start: u32,
    top: u32,
    tree: TestTree,
}

impl CoefficientForest {
    pub fn new(top_level: u32, start_level: u32) -> Result<Self> {
        if start_level == 0 || start_level > top_level {
            return Err(Error::InvalidConfig(format!(
                "test start level {start_level} outside 1..={top_level}"
            )));
        }
        let depth = (top_level - start_level) as usize;
        Ok(Self {
            start: start_level,
            top: top_level,
            tree: build_complete_tree(&vec![2; depth], depth)?,
        })
    }

    pub fn roots(&self) -> usize {
        1 << self.start
    }

    /// Shape shared by every tree of the forest.
    pub fn tree(&self) -> &TestTree {
        &self.tree
    }

    /// Level and position of vertex `v` of tree `r`.
    pub fn position(&self, r: usize, v: VertexId) -> (u32, usize) {
        let d = (usize::BITS - (v + 1).leading_zeros() - 1) as usize;
        let q = v + 1 - (1 << d);
        (self.start + d as u32, (r << d) + q)
    }

    /// Tree index and vertex id of coefficient `(j, k)`.
    pub fn vertex(&self, j: u32, k: usize) -> (usize, VertexId) {
        let d = (j - self.start) as usize;
        (k >> d, (1 << d) - 1 + (k & ((1 << d) - 1)))
    }

    pub fn top_level(&self) -> u32 {
        self.top
    }
}

/// Two-sided p-values of `w / sigma` for levels `1..=J`: entry `[j - 1][k]`
/// belongs to coefficient `(j, k)`.
pub fn coefficient_pvalues(tree: &WaveletTree, sigma: f64) -> Result<Vec<Vec<f64>>> {
    check_sigma(sigma)?;
    Ok(tree.details[1..]
        .iter()
        .map(|d| {
            d.iter()
                .map(|&w| pvalue_from_z(w / sigma, Sided::TwoSided))
                .collect()
        })
        .collect())
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidSigma(sigma))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelThreshold {
    pub level: u32,
    /// Test level of every coefficient at this resolution level.
    pub alpha: f64,
    pub critical_z: f64,
    /// Smallest `|w|` kept when the path above is kept: `critical_z * sigma`.
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdOptions {
    pub alpha: f64,
    /// First tested level. Levels below it are kept without testing and the
    /// level's coefficients become forest roots sharing `alpha`. The default
    /// of 1 tests every level.
    pub start_level: u32,
}

impl ThresholdOptions {
    pub fn new(alpha: f64) -> Self {
        Self {
            alpha,
            start_level: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub tree: WaveletTree,
    /// `kept[j - 1][k]` tells whether coefficient `(j, k)` survived.
    pub kept: Vec<Vec<bool>>,
    pub kept_count: usize,
    pub thresholds: Vec<LevelThreshold>,
}

/// Keeps exactly the coefficients whose hypotheses the subdivision
/// procedure rejects on the coefficient forest, zeroing the rest.
pub fn cad_threshold(tree: &WaveletTree, alpha: f64, sigma: f64) -> Result<WaveletTree> {
    Ok(cad_threshold_with(tree, ThresholdOptions::new(alpha), sigma)?.tree)
}

pub fn cad_threshold_with(
    tree: &WaveletTree,
    options: ThresholdOptions,
    sigma: f64,
) -> Result<ThresholdResult> {
    tree.check()?;
    check_sigma(sigma)?;
    if !(options.alpha > 0.0 && options.alpha < 1.0) {
        return Err(Error::InvalidProbability(options.alpha));
    }
    let top = tree.top_level();
    let forest = CoefficientForest::new(top, options.start_level)?;
    let roots = forest.roots();
    let shape = forest.tree();
    let trees = Forest::uniform(vec![shape.clone(); roots], options.alpha)?;
    // All trees share shape and root level, so one allocation serves all.
    let alloc: AlphaAllocation = trees.uniform_allocations()?.swap_remove(0);
    let procedure = CadProcedure::new(shape, &alloc)?;

    let mut kept: Vec<Vec<bool>> = (1..=top)
        .map(|j| vec![j < options.start_level; 1 << j])
        .collect();
    let mut p = vec![0.0; shape.len()];
    let mut flags = vec![false; shape.len()];
    for r in 0..roots {
        for (v, pv) in p.iter_mut().enumerate() {
            let (j, k) = forest.position(r, v);
            *pv = pvalue_from_z(tree.get(j, k) / sigma, Sided::TwoSided);
        }
        procedure.run_dense(&p, &mut flags);
        for (v, &f) in flags.iter().enumerate() {
            let (j, k) = forest.position(r, v);
            kept[j as usize - 1][k] = f;
        }
    }

    let mut out = tree.clone();
    let mut kept_count = 0;
    for (j, mask) in (1..=top).zip(&kept) {
        for (w, &keep) in out.level_mut(j).iter_mut().zip(mask) {
            if keep {
                kept_count += 1;
            } else {
                *w = 0.0;
            }
        }
    }

    let mut thresholds = Vec::new();
    for j in options.start_level..=top {
        let (_, v) = forest.vertex(j, 0);
        let a = alloc.levels()[v];
        let z = critical_z(a, Sided::TwoSided)?;
        thresholds.push(LevelThreshold {
            level: j,
            alpha: a,
            critical_z: z,
            threshold: z * sigma,
        });
    }
    Ok(ThresholdResult {
        tree: out,
        kept,
        kept_count,
        thresholds,
    })
}

/// Noise scale from the finest detail level: median absolute deviation
/// around the median, divided by [`MAD_NORMAL_SCALE`].
pub fn estimate_sigma(tree: &WaveletTree) -> Result<f64> {
    tree.check()?;
    let finest = tree.level(tree.top_level());
    if finest.len() < 16 {
        return Err(Error::TooFewCoefficients {
            got: finest.len(),
            need: 16,
        });
    }
    let med = median(finest);
    let dev: Vec<f64> = finest.iter().map(|w| (w - med).abs()).collect();
    Ok(median(&dev) / MAD_NORMAL_SCALE)
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaMode {
    Known(f64),
    Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenoiseResult {
    pub signal: Vec<f64>,
    pub sigma: f64,
    pub kept: usize,
    pub thresholds: Vec<LevelThreshold>,
}

pub fn denoise(signal: &[f64], alpha: f64, sigma: SigmaMode) -> Result<DenoiseResult> {
    denoise_with(signal, ThresholdOptions::new(alpha), sigma)
}

pub fn denoise_with(
    signal: &[f64],
    options: ThresholdOptions,
    sigma: SigmaMode,
) -> Result<DenoiseResult> {
    if let Some(&x) = signal.iter().find(|x| !x.is_finite()) {
        return Err(Error::NonFinite(x));
    }
    let tree = haar_forward(signal)?;
    let sigma = match sigma {
        SigmaMode::Known(s) => s,
        SigmaMode::Estimate => estimate_sigma(&tree)?,
    };
    let t = cad_threshold_with(&tree, options, sigma)?;
    Ok(DenoiseResult {
        signal: haar_inverse(&t.tree)?,
        sigma,
        kept: t.kept_count,
        thresholds: t.thresholds,
    })
}

/// Piecewise-constant test signal with eleven jumps, scaled so that the
/// smallest jump has size `min_jump`.
pub fn blocks(n: usize, min_jump: f64) -> Vec<f64> {
    const POS: [f64; 11] = [
        0.1, 0.13, 0.15, 0.23, 0.25, 0.40, 0.44, 0.65, 0.76, 0.78, 0.81,
    ];
    const HEIGHT: [f64; 11] = [4.0, -5.0, 3.0, -4.0, 5.0, -4.2, 2.1, 4.3, -3.1, 2.1, -4.2];
    let scale = min_jump / 2.1;
    (0..n)
        .map(|i| {
            let t = i as f64 / n as f64;
            scale
                * POS
                    .iter()
                    .zip(HEIGHT)
                    .filter(|(&p, _)| t >= p)
                    .map(|(_, h)| h)
                    .sum::<f64>()
        })
        .collect()
}
