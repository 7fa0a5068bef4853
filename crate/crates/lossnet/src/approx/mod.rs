//! Approximation engines for networks too large to enumerate.
//!
//! Three fixed-point schemes of increasing fidelity, plus linear-programming
//! performance bounds:
//!
//! * [`kelly_simple`] — per-resource passing probabilities `p_j` solving the
//!   complementary-slackness system `sum_r A_jr kappa_r prod_k p_k^{A_kr} =
//!   m*_j <= C_j` with `p_j = 1` on slack resources; acceptance
//!   `P_r = prod_j p_j^{A_jr}`. Exact in the proportional-scaling limit.
//! * [`reduced_load`] — the multiservice reduced-load (knapsack)
//!   approximation: each resource's occupancy law is the one-dimensional
//!   Kaufman recursion under loads thinned by the other resources' passing
//!   probabilities `p_kr`.
//! * [`efpa`] — the Erlang fixed point for 0/1 requirement matrices,
//!   `p_j = 1 - E(sum_r A_jr kappa_r prod_{k != j} p_k^{A_kr}, C_j)`, which
//!   has a unique solution.
//!
//! All iterations are deterministic: fixed initialization at `p = 1`, plain
//! successive substitution, and damping engaged only once the residual has
//! repeatedly failed to decrease.

mod fixed_point;
mod lp;

pub use fixed_point::{efpa, kelly_simple, reduced_load};
pub use lp::{lp_bound_general, lp_bound_single, simplex_maximize, BindingConstraint, LpBound, SimplexOutcome};

use serde::Serialize;
use thiserror::Error;

/// Iteration controls for the fixed-point solvers.
#[derive(Debug, Clone, Copy)]
pub struct FixedPointConfig {
    /// Convergence threshold on the max-norm change per iteration.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Damping factor applied after oscillation is detected:
    /// `p <- damping * old + (1 - damping) * new`.
    pub damping: f64,
    /// Iterations of non-decreasing residual tolerated before damping.
    pub oscillation_window: usize,
    /// Cap on a single resource capacity for the 1-D recursions.
    pub max_single_capacity: u32,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        FixedPointConfig {
            tolerance: 1e-10,
            max_iterations: 10_000,
            damping: 0.5,
            oscillation_window: 10,
            max_single_capacity: 1_000_000,
        }
    }
}

impl FixedPointConfig {
    /// Default for the Erlang fixed point, which converges to tighter
    /// tolerances since each update is a scalar Erlang evaluation.
    pub fn efpa_default() -> Self {
        FixedPointConfig {
            tolerance: 1e-12,
            ..Default::default()
        }
    }
}

/// Passing probabilities of a fixed-point solution: per resource for the
/// schemes that share one probability across classes, per resource-class
/// pair for the reduced-load scheme.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum PassingProbs {
    PerResource(Vec<f64>),
    PerResourceClass(Vec<Vec<f64>>),
}

/// Solution of a fixed-point scheme, with iteration diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPointResult {
    pub passing: PassingProbs,
    /// Per-class acceptance probabilities `P_r`.
    #[serde(rename = "P")]
    pub acceptance: Vec<f64>,
    pub iterations: usize,
    /// Max-norm change of the last iteration.
    pub residual: f64,
    pub converged: bool,
    /// Set when a second seed converges to a different solution.
    pub multiplicity_note: Option<String>,
    /// Target loads `m*_j` (the simple approximation only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected_usage: Option<Vec<f64>>,
}

impl FixedPointResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serialization cannot fail")
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ApproxError {
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("requirement matrix entry A[{resource}][{class}] = {value} is not 0 or 1")]
    NotZeroOne {
        resource: usize,
        class: usize,
        value: u32,
    },
    #[error("resource {resource} capacity {capacity} exceeds the 1-D recursion cap {cap}")]
    CapacityTooLarge {
        resource: usize,
        capacity: u32,
        cap: u32,
    },
    #[error("problem size {size} exceeds the dense simplex cap {cap}")]
    TooManyVariables { size: usize, cap: usize },
}
