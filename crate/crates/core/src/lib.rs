//! Sequential multiple testing by successive subdivision.
//!
//! A rooted tree of hypotheses is tested top down. Each branch is followed
//! for as long as its hypotheses are rejected; testing stops on a branch at
//! the first acceptance. When the per-vertex test levels satisfy the local
//! Bonferroni condition (children's levels sum to at most the parent's), the
//! probability of any false rejection is bounded by the root level.
//!
//! The crate is organised as:
//!
//! * [`tree`]: complete trees, forests, alpha allocations and the
//!   combinatorial objects used to verify the error bound.
//! * [`procedures`]: the subdivision procedure, its extension with local
//!   multiple-testing problems, and Bonferroni/Holm/Benjamini–Hochberg
//!   baselines with error accounting.
//! * [`stats`]: normal CDF/quantile and Gaussian z-test p-values.
//! * [`sim`]: Monte Carlo error-rate estimation and exhaustive checks.
//! * [`wavelet`]: Haar transform and coefficient thresholding.
//! * [`interval`]: localisation of mean shifts in repeated time series.

pub mod error;
pub mod interval;
pub mod procedures;
pub mod sim;
pub mod stats;
pub mod tree;
pub mod wavelet;

pub use error::{Error, Result};
pub use procedures::{
    benjamini_hochberg, bonferroni, cad_extended_run, cad_run, error_metrics, holm, CadProcedure,
    ErrorReport, ExtendedCad, LocalProcedure, PValueMap, RejectionSet,
};
pub use tree::{
    allocate_alpha_uniform, allocate_alpha_weighted, ancestors, build_complete_tree,
    first_true_set, subtree_alpha_sum, validate_lb, AlphaAllocation, Forest, TestTree,
    TruthAssignment, Vertex, VertexId,
};
