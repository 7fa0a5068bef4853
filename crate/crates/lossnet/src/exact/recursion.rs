//! The Kaufman-Dziong-Roberts recursion on the resource usage space.
//!
//! The stationary usage distribution of an uncontrolled network obeys
//!
//! ```text
//! sum_r A_jr kappa_r pi'(m - A_r) = m_j pi'(m)     for every j with m_j > 0,
//! ```
//!
//! which determines every value as a multiple of `pi'(0)`. States are
//! visited in lexicographic order; any coordinate with `m_j > 0` may be
//! used to step, and the remaining rows serve as consistency checks. Usage
//! points not of the form `A n` receive probability zero: every recursion
//! row evaluates to zero there, so no special casing is needed, and a
//! disagreement between rows beyond tolerance is reported as an error.

use super::{
    aggregate_by_usage, enumerate_states, product_form, AcceptanceReport, Distribution,
    ExactError, ExactLimits, UsageVector,
};
use crate::model::{NetworkSpec, INFINITE_CAPACITY};

/// Row-consistency tolerance of the recursion (relative).
const ROW_TOLERANCE: f64 = 1e-9;
/// Unnormalized values are rescaled when they exceed this magnitude.
const RESCALE_THRESHOLD: f64 = 1e250;

struct UsageGrid {
    dims: Vec<u32>,
    strides: Vec<usize>,
    total: usize,
}

impl UsageGrid {
    fn new(spec: &NetworkSpec, limits: &ExactLimits) -> Result<Self, ExactError> {
        let mut total: u128 = 1;
        for (j, &c) in spec.capacities().iter().enumerate() {
            if c == INFINITE_CAPACITY {
                return Err(ExactError::InfiniteCapacity { resource: j });
            }
            total = total.saturating_mul(u128::from(c) + 1);
        }
        if total > limits.max_usage_states {
            return Err(ExactError::StateSpaceTooLarge {
                estimate: total,
                cap: limits.max_usage_states,
            });
        }
        let dims: Vec<u32> = spec.capacities().iter().map(|&c| c + 1).collect();
        let mut strides = vec![0usize; dims.len()];
        let mut s = 1usize;
        for j in (0..dims.len()).rev() {
            strides[j] = s;
            s *= dims[j] as usize;
        }
        Ok(UsageGrid {
            dims,
            strides,
            total: s,
        })
    }

    fn decode(&self, mut idx: usize) -> Vec<u32> {
        let mut m = vec![0u32; self.dims.len()];
        for j in 0..self.dims.len() {
            m[j] = (idx / self.strides[j]) as u32;
            idx %= self.strides[j];
        }
        m
    }
}

/// Usage distribution computed by the KDR recursion.
pub fn kdr(
    spec: &NetworkSpec,
    limits: &ExactLimits,
) -> Result<Distribution<UsageVector>, ExactError> {
    let grid = UsageGrid::new(spec, limits)?;
    let resource_count = spec.resource_count();
    let class_count = spec.class_count();
    let loads = spec.offered_loads();

    // Offset of m - A_r in the flattened table, plus the column itself for
    // the componentwise validity check.
    let columns: Vec<Vec<u32>> = (0..class_count)
        .map(|r| spec.requirement_column(r))
        .collect();
    let column_offsets: Vec<usize> = (0..class_count)
        .map(|r| {
            (0..resource_count)
                .map(|j| columns[r][j] as usize * grid.strides[j])
                .sum()
        })
        .collect();

    let mut table = vec![0.0f64; grid.total];
    table[0] = 1.0;
    let mut m = vec![0u32; resource_count];
    for idx in 1..grid.total {
        // Advance the mixed-radix counter (lexicographic order).
        let mut j = resource_count - 1;
        loop {
            m[j] += 1;
            if m[j] < grid.dims[j] {
                break;
            }
            m[j] = 0;
            j -= 1;
        }

        let mut value: Option<f64> = None;
        for j in 0..resource_count {
            if m[j] == 0 {
                continue;
            }
            let mut acc = 0.0;
            for r in 0..class_count {
                let req = columns[r][j];
                if req == 0 {
                    continue;
                }
                if (0..resource_count).any(|k| m[k] < columns[r][k]) {
                    continue;
                }
                acc += f64::from(req) * loads[r] * table[idx - column_offsets[r]];
            }
            let candidate = acc / f64::from(m[j]);
            match value {
                None => value = Some(candidate),
                Some(first) => {
                    let scale = first.abs().max(candidate.abs());
                    if (first - candidate).abs() > ROW_TOLERANCE * scale {
                        return Err(ExactError::InconsistentRecursion {
                            state: m.clone(),
                            left: first,
                            right: candidate,
                        });
                    }
                }
            }
        }
        let value = value.expect("nonzero usage state has a positive coordinate");
        table[idx] = value;
        if value > RESCALE_THRESHOLD {
            for entry in table.iter_mut().take(idx + 1) {
                *entry /= RESCALE_THRESHOLD;
            }
        }
    }

    let total: f64 = table.iter().sum();
    let support: Vec<UsageVector> = (0..grid.total)
        .map(|idx| UsageVector(grid.decode(idx)))
        .collect();
    let probs: Vec<f64> = table.into_iter().map(|v| v / total).collect();
    Ok(Distribution::new(support, probs)?)
}

/// Acceptance probabilities read off a usage distribution: a class-`r`
/// arrival is accepted exactly when `m + A_r <= C`. Mean occupancies follow
/// from Little's identity `E n_r = kappa_r P_r`.
pub fn acceptance_from_usage(
    spec: &NetworkSpec,
    usage_dist: &Distribution<UsageVector>,
) -> AcceptanceReport {
    let class_count = spec.class_count();
    let mut acceptance = vec![0.0; class_count];
    for (m, p) in usage_dist.iter() {
        for r in 0..class_count {
            let fits = (0..spec.resource_count()).all(|j| {
                u64::from(m.as_slice()[j]) + u64::from(spec.requirement(j, r))
                    <= u64::from(spec.capacity(j))
            });
            if fits {
                acceptance[r] += p;
            }
        }
    }
    let mean = acceptance
        .iter()
        .enumerate()
        .map(|(r, p)| spec.class(r).offered_load() * p)
        .collect();
    AcceptanceReport::from_acceptance(acceptance, mean)
}

/// Largest residual of the conditional-mean identity
/// `kappa_r pi'(m - A_r) = E(n_r | m) pi'(m)` with the right-hand side
/// accumulated by brute force from the product-form law, against the
/// KDR usage distribution.
pub fn check_conditional_identity(
    spec: &NetworkSpec,
    limits: &ExactLimits,
) -> Result<f64, ExactError> {
    let usage_dist = kdr(spec, limits)?;
    check_conditional_identity_against(spec, &usage_dist, limits)
}

/// Same check against a caller-supplied usage distribution (used to verify
/// that corrupted distributions are detected).
pub fn check_conditional_identity_against(
    spec: &NetworkSpec,
    usage_dist: &Distribution<UsageVector>,
    limits: &ExactLimits,
) -> Result<f64, ExactError> {
    let call_dist = product_form(spec, limits)?;
    let states = enumerate_states(spec, limits)?;
    let class_count = spec.class_count();
    let resource_count = spec.resource_count();

    // S_r(m) = sum over {n : A n = m} of n_r pi(n), and the aggregated law.
    let mut weighted: std::collections::HashMap<Vec<u32>, Vec<f64>> =
        std::collections::HashMap::new();
    for n in &states {
        let usage = spec.occupancy(n)?;
        let m: Vec<u32> = usage.used.iter().map(|&u| u as u32).collect();
        let p = call_dist.prob(n);
        let entry = weighted.entry(m).or_insert_with(|| vec![0.0; class_count]);
        for r in 0..class_count {
            entry[r] += f64::from(n.as_slice()[r]) * p;
        }
    }
    let aggregated = aggregate_by_usage(spec, &call_dist)?;

    let mut worst = 0.0f64;
    for (m, pm) in usage_dist.iter() {
        let agg_mass = aggregated.get(m.as_slice()).copied().unwrap_or(0.0);
        for r in 0..class_count {
            let column = spec.requirement_column(r);
            let prev: Option<Vec<u32>> = (0..resource_count)
                .map(|j| m.as_slice()[j].checked_sub(column[j]))
                .collect();
            let prev_mass = prev
                .map(|p| usage_dist.prob(&UsageVector(p)))
                .unwrap_or(0.0);
            let left = spec.class(r).offered_load() * prev_mass;
            if agg_mass == 0.0 {
                // Unreachable usage point: the no-division form of the
                // identity reads kappa_r pi'(m - A_r) = 0 there.
                worst = worst.max(left.abs());
                continue;
            }
            let s_r = weighted.get(m.as_slice()).map_or(0.0, |v| v[r]);
            let conditional_mean = s_r / agg_mass;
            worst = worst.max((left - conditional_mean * pm).abs());
        }
    }
    Ok(worst)
}
