//! Global-balance solve for networks with admission controls.
//!
//! Controlled networks generally have no product form, so the stationary
//! distribution is obtained directly: enumerate the states reachable from
//! the empty network under the policy-gated transition structure, assemble
//! the generator, and solve the balance equations with one state pinned.
//! Works at desk scale only and is the reference oracle for everything in
//! [`approx`](crate::approx).

use std::collections::HashMap;

use super::{AcceptanceReport, Distribution, ExactError, ExactLimits};
use crate::linalg::stationary_distribution;
use crate::model::{AdmissionPolicy, NetworkSpec, OccupancyVector, INFINITE_CAPACITY};

/// Stationary distribution of a controlled network plus solve diagnostics.
#[derive(Debug, Clone)]
pub struct ControlledStationary {
    pub distribution: Distribution<OccupancyVector>,
    /// Residual of the global balance equations at the solution.
    pub balance_residual: f64,
    /// Number of states reachable from the empty network.
    pub reachable_states: usize,
}

/// Solves the controlled chain's global balance equations on the states
/// reachable from the empty network.
pub fn brute_force_controlled(
    spec: &NetworkSpec,
    policy: &AdmissionPolicy,
    limits: &ExactLimits,
) -> Result<ControlledStationary, ExactError> {
    policy.validate_for(spec)?;
    for (j, &c) in spec.capacities().iter().enumerate() {
        if c == INFINITE_CAPACITY {
            return Err(ExactError::InfiniteCapacity { resource: j });
        }
    }

    // Breadth-first reachability from the empty state. Departures always
    // lead to already-seen smaller states, so only arrivals generate.
    let zero = OccupancyVector::zero(spec.class_count());
    let mut seen: HashMap<OccupancyVector, usize> = HashMap::new();
    let mut frontier = vec![zero.clone()];
    seen.insert(zero.clone(), 0);
    let mut states = vec![zero.clone()];
    while let Some(n) = frontier.pop() {
        let usage = spec.occupancy(&n)?;
        for r in 0..spec.class_count() {
            if spec.class(r).arrival_rate == 0.0 {
                continue;
            }
            if !spec.admits(policy, &usage, r) {
                continue;
            }
            let next = n.plus_one(r);
            if seen.contains_key(&next) {
                continue;
            }
            if states.len() >= limits.max_balance_states {
                return Err(ExactError::StateSpaceTooLarge {
                    estimate: states.len() as u128 + 1,
                    cap: limits.max_balance_states as u128,
                });
            }
            seen.insert(next.clone(), 0);
            states.push(next.clone());
            frontier.push(next);
        }
    }

    // Lexicographic order keeps the generator narrow-banded.
    states.sort_by(|a, b| a.as_slice().cmp(b.as_slice()));
    let index: HashMap<OccupancyVector, usize> = states
        .iter()
        .enumerate()
        .map(|(i, s)| (s.clone(), i))
        .collect();

    let mut transitions: Vec<(usize, usize, f64)> = Vec::new();
    for (i, n) in states.iter().enumerate() {
        let usage = spec.occupancy(n)?;
        for r in 0..spec.class_count() {
            let rate = spec.class(r).arrival_rate;
            if rate > 0.0 && spec.admits(policy, &usage, r) {
                let target = index[&n.plus_one(r)];
                transitions.push((i, target, rate));
            }
            if let Some(prev) = n.minus_one(r) {
                let rate = f64::from(n.as_slice()[r]) * spec.class(r).service_rate;
                transitions.push((i, index[&prev], rate));
            }
        }
    }

    // The chain always communicates with the empty state through departures;
    // verify rather than assume.
    let communicating = reverse_reachable_count(states.len(), &transitions, index[&zero]);
    if communicating != states.len() {
        return Err(ExactError::NotIrreducible {
            reachable: states.len(),
            communicating,
        });
    }

    let (probs, residual) =
        stationary_distribution(states.len(), &transitions, index[&zero])?;
    if residual > 1e-10 {
        return Err(ExactError::BalanceResidual { residual });
    }
    let reachable_states = states.len();
    Ok(ControlledStationary {
        distribution: Distribution::new(states, probs)?,
        balance_residual: residual,
        reachable_states,
    })
}

/// Number of states from which the pinned state is reachable.
fn reverse_reachable_count(
    n: usize,
    transitions: &[(usize, usize, f64)],
    start: usize,
) -> usize {
    let mut incoming: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(from, to, rate) in transitions {
        if rate > 0.0 {
            incoming[to].push(from);
        }
    }
    let mut seen = vec![false; n];
    let mut stack = vec![start];
    seen[start] = true;
    let mut count = 1;
    while let Some(s) = stack.pop() {
        for &p in &incoming[s] {
            if !seen[p] {
                seen[p] = true;
                count += 1;
                stack.push(p);
            }
        }
    }
    count
}

/// Acceptance report for a controlled network from its stationary law:
/// `P_r` is the stationary probability that the policy admits class `r`.
pub fn controlled_acceptance(
    spec: &NetworkSpec,
    policy: &AdmissionPolicy,
    dist: &Distribution<OccupancyVector>,
) -> Result<AcceptanceReport, ExactError> {
    let class_count = spec.class_count();
    let mut acceptance = vec![0.0; class_count];
    let mut mean = vec![0.0; class_count];
    for (n, p) in dist.iter() {
        let usage = spec.occupancy(n)?;
        for r in 0..class_count {
            mean[r] += f64::from(n.as_slice()[r]) * p;
            if spec.admits(policy, &usage, r) {
                acceptance[r] += p;
            }
        }
    }
    Ok(AcceptanceReport::from_acceptance(acceptance, mean))
}
