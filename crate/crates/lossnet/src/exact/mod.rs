//! Exact stationary analysis of loss networks.
//!
//! For uncontrolled networks the stationary distribution over feasible
//! occupancies `n` is a normalized product of truncated Poisson weights
//! `prod_r kappa_r^{n_r} / n_r!`, the unique solution of the detailed
//! balance equations `pi(n) n_r mu_r = pi(n - e_r) nu_r`. All classical
//! quantities (acceptance probabilities, mean occupancies, the occupancy
//! distribution of each resource) follow from it, either by direct
//! enumeration here or via the Kaufman-Dziong-Roberts recursion in
//! [`kdr`](crate::exact::kdr()) which sidesteps enumeration of the call
//! state space.
//!
//! Controlled networks lack product form; [`brute_force_controlled`]
//! solves the global balance equations directly on small state spaces and
//! serves as the reference oracle for the approximation engines.

mod controlled;
mod recursion;

pub use controlled::{brute_force_controlled, controlled_acceptance, ControlledStationary};
pub use recursion::{acceptance_from_usage, check_conditional_identity, check_conditional_identity_against, kdr};

use std::collections::HashMap;
use std::hash::Hash;

use serde::Serialize;
use thiserror::Error;

use crate::linalg::LinalgError;
use crate::model::{
    DimensionMismatch, NetworkSpec, OccupancyVector, PolicyError, INFINITE_CAPACITY,
};

/// Resource usage point of the aggregated state space (one entry per resource).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct UsageVector(pub Vec<u32>);

impl UsageVector {
    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }
}

/// States that can index a [`Distribution`].
pub trait StateVector: Clone + Eq + Hash {
    fn components(&self) -> &[u32];
}

impl StateVector for OccupancyVector {
    fn components(&self) -> &[u32] {
        self.as_slice()
    }
}

impl StateVector for UsageVector {
    fn components(&self) -> &[u32] {
        self.as_slice()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistributionError {
    #[error("support and probability vectors have different lengths")]
    LengthMismatch,
    #[error("probability {value} at entry {index} is negative or not finite")]
    InvalidProbability { index: usize, value: f64 },
    #[error("probabilities sum to {sum}, not 1 within 1e-12")]
    NotNormalized { sum: f64 },
    #[error("duplicate state at entry {index}")]
    DuplicateState { index: usize },
}

/// A probability distribution over an enumerated finite state set.
#[derive(Debug, Clone)]
pub struct Distribution<S: StateVector> {
    support: Vec<S>,
    probs: Vec<f64>,
    index: HashMap<S, usize>,
}

impl<S: StateVector> Distribution<S> {
    pub fn new(support: Vec<S>, probs: Vec<f64>) -> Result<Self, DistributionError> {
        if support.len() != probs.len() {
            return Err(DistributionError::LengthMismatch);
        }
        let mut sum = 0.0;
        for (i, &p) in probs.iter().enumerate() {
            if !(p >= 0.0) || !p.is_finite() {
                return Err(DistributionError::InvalidProbability { index: i, value: p });
            }
            sum += p;
        }
        if (sum - 1.0).abs() > 1e-12 {
            return Err(DistributionError::NotNormalized { sum });
        }
        let mut index = HashMap::with_capacity(support.len());
        for (i, s) in support.iter().enumerate() {
            if index.insert(s.clone(), i).is_some() {
                return Err(DistributionError::DuplicateState { index: i });
            }
        }
        Ok(Distribution {
            support,
            probs,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn support(&self) -> &[S] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Probability of a state; zero when outside the support.
    pub fn prob(&self, state: &S) -> f64 {
        self.index.get(state).map_or(0.0, |&i| self.probs[i])
    }

    pub fn position(&self, state: &S) -> Option<usize> {
        self.index.get(state).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&S, f64)> {
        self.support.iter().zip(self.probs.iter().copied())
    }

    /// CSV export with header `state,prob`; states are semicolon-joined.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("state,prob\n");
        for (s, p) in self.iter() {
            let state = s
                .components()
                .iter()
                .map(|c| c.to_string())
                .collect::<Vec<_>>()
                .join(";");
            out.push_str(&format!("{state},{p}\n"));
        }
        out
    }
}

/// Per-class acceptance probabilities, blocking probabilities and mean
/// occupancies.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AcceptanceReport {
    #[serde(rename = "P")]
    pub acceptance: Vec<f64>,
    #[serde(rename = "B")]
    pub blocking: Vec<f64>,
    pub mean_occupancy: Vec<f64>,
}

impl AcceptanceReport {
    pub fn from_acceptance(acceptance: Vec<f64>, mean_occupancy: Vec<f64>) -> Self {
        let blocking = acceptance.iter().map(|p| 1.0 - p).collect();
        AcceptanceReport {
            acceptance,
            blocking,
            mean_occupancy,
        }
    }

    /// Largest violation of Little's identity `E n_r = kappa_r P_r`.
    pub fn little_residual(&self, spec: &NetworkSpec) -> f64 {
        self.acceptance
            .iter()
            .zip(&self.mean_occupancy)
            .zip(spec.classes())
            .map(|((p, m), class)| (m - class.offered_load() * p).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

/// Size caps protecting the exact computations.
#[derive(Debug, Clone, Copy)]
pub struct ExactLimits {
    /// Cap on the a-priori bound for the number of feasible occupancies.
    pub max_occupancy_states: u128,
    /// Cap on the number of usage states `prod_j (C_j + 1)`.
    pub max_usage_states: u128,
    /// Cap on the state count of a global balance solve.
    pub max_balance_states: usize,
}

impl Default for ExactLimits {
    fn default() -> Self {
        ExactLimits {
            max_occupancy_states: 10_000_000,
            max_usage_states: 100_000_000,
            max_balance_states: 200_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExactError {
    #[error("state space bound {estimate} exceeds cap {cap}")]
    StateSpaceTooLarge { estimate: u128, cap: u128 },
    #[error("resource {resource} has infinite capacity; exact analysis needs finite capacities")]
    InfiniteCapacity { resource: usize },
    #[error(
        "recursion rows disagree at usage {state:?}: {left} vs {right} (unreachable-state handling bug)"
    )]
    InconsistentRecursion {
        state: Vec<u32>,
        left: f64,
        right: f64,
    },
    #[error("chain restricted to the {reachable} states reachable from 0 is not irreducible ({communicating} communicate with 0)")]
    NotIrreducible {
        reachable: usize,
        communicating: usize,
    },
    #[error("global balance solved with residual {residual:.3e}, above 1e-10")]
    BalanceResidual { residual: f64 },
    #[error(transparent)]
    PolicyInvalid(#[from] PolicyError),
    #[error(transparent)]
    Dimension(#[from] DimensionMismatch),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// A-priori bound on the number of feasible occupancy states: the product
/// over classes of one plus the largest feasible count of that class alone.
fn occupancy_state_bound(spec: &NetworkSpec) -> Result<u128, ExactError> {
    let mut bound: u128 = 1;
    for r in 0..spec.class_count() {
        let mut per_class: Option<u128> = None;
        for j in 0..spec.resource_count() {
            let req = spec.requirement(j, r);
            if req == 0 {
                continue;
            }
            if spec.capacity(j) == INFINITE_CAPACITY {
                continue;
            }
            let max_n = u128::from(spec.capacity(j) / req);
            per_class = Some(per_class.map_or(max_n, |b| b.min(max_n)));
        }
        let per_class = per_class.ok_or_else(|| {
            // Every resource used by this class is infinite.
            let j = (0..spec.resource_count())
                .find(|&j| spec.requirement(j, r) > 0)
                .unwrap_or(0);
            ExactError::InfiniteCapacity { resource: j }
        })?;
        bound = bound.saturating_mul(per_class + 1);
    }
    Ok(bound)
}

/// Enumerates the feasible occupancy set `{n >= 0 : A n <= C}` in
/// lexicographic order.
pub fn enumerate_states(
    spec: &NetworkSpec,
    limits: &ExactLimits,
) -> Result<Vec<OccupancyVector>, ExactError> {
    let bound = occupancy_state_bound(spec)?;
    if bound > limits.max_occupancy_states {
        return Err(ExactError::StateSpaceTooLarge {
            estimate: bound,
            cap: limits.max_occupancy_states,
        });
    }

    let class_count = spec.class_count();
    let resource_count = spec.resource_count();
    let mut states = Vec::new();
    let mut current = vec![0u32; class_count];
    let mut slack: Vec<i64> = (0..resource_count)
        .map(|j| {
            if spec.capacity(j) == INFINITE_CAPACITY {
                i64::MAX
            } else {
                i64::from(spec.capacity(j))
            }
        })
        .collect();

    fn descend(
        spec: &NetworkSpec,
        r: usize,
        current: &mut Vec<u32>,
        slack: &mut Vec<i64>,
        states: &mut Vec<OccupancyVector>,
    ) {
        if r == spec.class_count() {
            states.push(OccupancyVector(current.clone()));
            return;
        }
        // Count 0 first keeps lexicographic order.
        let mut count = 0u32;
        loop {
            current[r] = count;
            descend(spec, r + 1, current, slack, states);
            // Try one more class-r call.
            let fits = (0..spec.resource_count())
                .all(|j| slack[j] >= i64::from(spec.requirement(j, r)));
            if !fits {
                break;
            }
            for j in 0..spec.resource_count() {
                if slack[j] != i64::MAX {
                    slack[j] -= i64::from(spec.requirement(j, r));
                }
            }
            count += 1;
        }
        // Restore slack consumed by this class.
        for j in 0..spec.resource_count() {
            if slack[j] != i64::MAX {
                slack[j] += i64::from(count) * i64::from(spec.requirement(j, r));
            }
        }
        current[r] = 0;
    }

    descend(spec, 0, &mut current, &mut slack, &mut states);
    Ok(states)
}

/// Log of the unnormalized product-form weight of a state.
fn log_weight(spec: &NetworkSpec, n: &OccupancyVector) -> f64 {
    let mut lw = 0.0;
    for (r, &count) in n.as_slice().iter().enumerate() {
        if count == 0 {
            continue;
        }
        let kappa = spec.class(r).offered_load();
        if kappa == 0.0 {
            return f64::NEG_INFINITY;
        }
        for v in 1..=count {
            lw += kappa.ln() - f64::from(v).ln();
        }
    }
    lw
}

fn normalize_log_weights(log_weights: &[f64]) -> Vec<f64> {
    let max = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = log_weights.iter().map(|&lw| (lw - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights.iter().map(|w| w / total).collect()
}

/// Product-form stationary distribution of the uncontrolled network.
pub fn product_form(
    spec: &NetworkSpec,
    limits: &ExactLimits,
) -> Result<Distribution<OccupancyVector>, ExactError> {
    let states = enumerate_states(spec, limits)?;
    let log_weights: Vec<f64> = states.iter().map(|n| log_weight(spec, n)).collect();
    let probs = normalize_log_weights(&log_weights);
    Ok(Distribution::new(states, probs)?)
}

/// Largest residual of the detailed balance equations
/// `pi(n) n_r mu_r = pi(n - e_r) nu_r` over all states and classes.
pub fn check_detailed_balance(spec: &NetworkSpec, dist: &Distribution<OccupancyVector>) -> f64 {
    let mut worst = 0.0f64;
    for (n, p) in dist.iter() {
        for r in 0..spec.class_count() {
            let count = n.as_slice()[r];
            let up = p * f64::from(count) * spec.class(r).service_rate;
            let down = match n.minus_one(r) {
                Some(prev) => dist.prob(&prev) * spec.class(r).arrival_rate,
                None => 0.0,
            };
            worst = worst.max((up - down).abs());
        }
    }
    worst
}

/// Exact acceptance probabilities and mean occupancies of the uncontrolled
/// network, by enumeration of the product-form distribution.
pub fn acceptance_exact(
    spec: &NetworkSpec,
    limits: &ExactLimits,
) -> Result<AcceptanceReport, ExactError> {
    let dist = product_form(spec, limits)?;
    let class_count = spec.class_count();
    let mut acceptance = vec![0.0; class_count];
    let mut mean = vec![0.0; class_count];
    for (n, p) in dist.iter() {
        let usage = spec.occupancy(n)?;
        for r in 0..class_count {
            mean[r] += f64::from(n.as_slice()[r]) * p;
            let fits = (0..spec.resource_count())
                .all(|j| usage.free[j] >= i64::from(spec.requirement(j, r)));
            if fits {
                acceptance[r] += p;
            }
        }
    }
    Ok(AcceptanceReport::from_acceptance(acceptance, mean))
}

/// Erlang's blocking probability `E(kappa, C)` computed by the stable
/// recurrence `E(kappa, c) = kappa E(kappa, c-1) / (c + kappa E(kappa, c-1))`.
pub fn erlang_b(kappa: f64, capacity: u32) -> f64 {
    assert!(kappa >= 0.0 && kappa.is_finite(), "offered load must be finite and nonnegative");
    let mut blocking = 1.0;
    for c in 1..=capacity {
        blocking = kappa * blocking / (f64::from(c) + kappa * blocking);
    }
    blocking
}

/// Large-network estimates for a single resource at offered load `kappa`
/// and capacity `C`, with `p = C / kappa`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticEstimate {
    /// Limiting acceptance probability `min(1, p)`.
    pub limit: f64,
    /// Refined overload estimate `p - p / (kappa (1 - p))`; only meaningful
    /// when `p < 1`.
    pub refined: Option<f64>,
    /// Estimated expected free capacity `p / (1 - p)`; only when `p < 1`.
    pub expected_free: Option<f64>,
}

/// Limiting and refined single-resource acceptance estimates.
pub fn single_resource_asymptotics(kappa: f64, capacity: u32) -> AsymptoticEstimate {
    assert!(kappa > 0.0, "offered load must be positive");
    let p = f64::from(capacity) / kappa;
    if p < 1.0 {
        AsymptoticEstimate {
            limit: p,
            refined: Some(p - p / (kappa * (1.0 - p))),
            expected_free: Some(p / (1.0 - p)),
        }
    } else {
        AsymptoticEstimate {
            limit: 1.0,
            refined: None,
            expected_free: None,
        }
    }
}

/// Groups a product-form distribution by resource usage (the aggregation
/// identity mapping the call-state law to the usage law).
pub fn aggregate_by_usage(
    spec: &NetworkSpec,
    dist: &Distribution<OccupancyVector>,
) -> Result<HashMap<Vec<u32>, f64>, ExactError> {
    let mut agg: HashMap<Vec<u32>, f64> = HashMap::new();
    for (n, p) in dist.iter() {
        let usage = spec.occupancy(n)?;
        let m: Vec<u32> = usage.used.iter().map(|&u| u as u32).collect();
        *agg.entry(m).or_insert(0.0) += p;
    }
    Ok(agg)
}
