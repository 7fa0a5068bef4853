//! Linear-programming performance bounds.
//!
//! For any admission policy, Little's identity forces the stationary
//! acceptance probabilities to satisfy `sum_r A_jr kappa_r P_r <= C_j`, so
//! the value of any linear objective `phi = sum_r a_r kappa_r P_r` over
//! achievable operating points is bounded by the LP over the box
//! `P in [0,1]^R` under those constraints. Solved by a textbook dense
//! simplex with Bland's rule; sizes here are tiny and determinism matters
//! more than speed.

use serde::Serialize;

use super::ApproxError;
use crate::model::{NetworkSpec, INFINITE_CAPACITY};

/// Default cap on `variables + constraints` of the dense simplex.
pub const DEFAULT_SIMPLEX_CAP: usize = 200;

const PIVOT_TOLERANCE: f64 = 1e-9;

/// A constraint active at the LP optimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BindingConstraint {
    Resource { resource: usize },
    UpperBound { class: usize },
    LowerBound { class: usize },
}

/// Solution of an LP performance bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpBound {
    /// Optimal acceptance probabilities.
    #[serde(rename = "P")]
    pub acceptance: Vec<f64>,
    /// Optimal objective value `phi`.
    pub objective: f64,
    pub binding: Vec<BindingConstraint>,
    /// A basic variable was zero at the optimum (multiple optimal bases).
    pub degenerate: bool,
    /// Feasibility and complementary slackness verified to 1e-8.
    pub certified: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl LpBound {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bound serialization cannot fail")
    }
}

/// Raw simplex output.
#[derive(Debug, Clone)]
pub struct SimplexOutcome {
    pub solution: Vec<f64>,
    pub objective: f64,
    /// Dual value per constraint row.
    pub duals: Vec<f64>,
    pub degenerate: bool,
}

/// Maximizes `c . x` over `G x <= h`, `x >= 0`, where every `h_i >= 0`
/// (slack basis is feasible, so no phase one is needed). Bland's rule
/// guarantees termination.
pub fn simplex_maximize(
    c: &[f64],
    g: &[Vec<f64>],
    h: &[f64],
) -> Result<SimplexOutcome, ApproxError> {
    let n = c.len();
    let m = g.len();
    debug_assert!(h.iter().all(|&v| v >= 0.0));
    let cols = n + m;

    let mut tableau: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let mut row = vec![0.0; cols + 1];
            row[..n].copy_from_slice(&g[i]);
            row[n + i] = 1.0;
            row[cols] = h[i];
            row
        })
        .collect();
    let mut reduced: Vec<f64> = c.iter().copied().chain(std::iter::repeat(0.0).take(m)).collect();
    let mut objective = 0.0f64;
    let mut basis: Vec<usize> = (n..cols).collect();
    let mut degenerate = false;

    let max_pivots = 10_000 + 100 * (n + m);
    for pivot_count in 0.. {
        if pivot_count > max_pivots {
            return Err(ApproxError::NoConvergence {
                iterations: pivot_count,
                residual: f64::NAN,
            });
        }
        // Bland: entering variable is the lowest index with positive
        // reduced cost.
        let entering = match (0..cols).find(|&j| reduced[j] > PIVOT_TOLERANCE) {
            Some(j) => j,
            None => break,
        };
        // Ratio test; ties broken by the lowest basic variable index.
        let mut leaving: Option<(usize, f64)> = None;
        for i in 0..m {
            let coeff = tableau[i][entering];
            if coeff > PIVOT_TOLERANCE {
                let ratio = tableau[i][cols] / coeff;
                let better = match leaving {
                    None => true,
                    Some((row, best)) => {
                        ratio < best - PIVOT_TOLERANCE
                            || (ratio <= best + PIVOT_TOLERANCE && basis[i] < basis[row])
                    }
                };
                if better {
                    leaving = Some((i, ratio));
                }
            }
        }
        let (pivot_row, ratio) = leaving.ok_or(ApproxError::NoConvergence {
            iterations: pivot_count,
            residual: f64::INFINITY,
        })?;
        if ratio <= PIVOT_TOLERANCE {
            degenerate = true;
        }

        let pivot = tableau[pivot_row][entering];
        for v in tableau[pivot_row].iter_mut() {
            *v /= pivot;
        }
        for i in 0..m {
            if i != pivot_row {
                let factor = tableau[i][entering];
                if factor != 0.0 {
                    for j in 0..=cols {
                        let delta = factor * tableau[pivot_row][j];
                        tableau[i][j] -= delta;
                    }
                }
            }
        }
        let factor = reduced[entering];
        for j in 0..cols {
            reduced[j] -= factor * tableau[pivot_row][j];
        }
        objective += factor * tableau[pivot_row][cols];
        basis[pivot_row] = entering;
    }

    let mut solution = vec![0.0; n];
    for (i, &var) in basis.iter().enumerate() {
        let value = tableau[i][cols];
        if value.abs() <= PIVOT_TOLERANCE {
            degenerate = true;
        }
        if var < n {
            solution[var] = value;
        }
    }
    let duals = (0..m).map(|i| -reduced[n + i]).collect();
    Ok(SimplexOutcome {
        solution,
        objective,
        duals,
        degenerate,
    })
}

/// LP upper bound on `phi = sum_r a_r kappa_r P_r` over `P in [0,1]^R`,
/// `sum_r A_jr kappa_r P_r <= C_j`.
pub fn lp_bound_general(spec: &NetworkSpec) -> Result<LpBound, ApproxError> {
    let class_count = spec.class_count();
    let resource_count = spec.resource_count();
    let size = class_count + resource_count;
    if size > DEFAULT_SIMPLEX_CAP {
        return Err(ApproxError::TooManyVariables {
            size,
            cap: DEFAULT_SIMPLEX_CAP,
        });
    }

    let loads = spec.offered_loads();
    let objective: Vec<f64> = (0..class_count)
        .map(|r| spec.class(r).value_weight * loads[r])
        .collect();

    // Resource rows (finite capacities only), then the unit upper bounds.
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    let mut resource_of_row: Vec<Option<usize>> = Vec::new();
    for j in 0..resource_count {
        if spec.capacity(j) == INFINITE_CAPACITY {
            continue;
        }
        rows.push(
            (0..class_count)
                .map(|r| f64::from(spec.requirement(j, r)) * loads[r])
                .collect(),
        );
        rhs.push(f64::from(spec.capacity(j)));
        resource_of_row.push(Some(j));
    }
    for r in 0..class_count {
        let mut row = vec![0.0; class_count];
        row[r] = 1.0;
        rows.push(row);
        rhs.push(1.0);
        resource_of_row.push(None);
    }

    let outcome = simplex_maximize(&objective, &rows, &rhs)?;
    let mut acceptance = outcome.solution;
    let mut note = None;
    for r in 0..class_count {
        acceptance[r] = acceptance[r].clamp(0.0, 1.0);
        if loads[r] == 0.0 {
            // Zero offered load leaves P_r free; report 1 by convention.
            acceptance[r] = 1.0;
            note = Some("classes with zero offered load reported as P = 1".to_string());
        }
    }
    let objective_value: f64 = (0..class_count)
        .map(|r| spec.class(r).value_weight * loads[r] * acceptance[r])
        .sum();

    let mut binding = Vec::new();
    let mut certified = true;
    for (i, row) in rows.iter().enumerate() {
        let value: f64 = row.iter().zip(&acceptance).map(|(a, p)| a * p).sum();
        if value > rhs[i] + 1e-8 {
            certified = false;
        }
        let slack = rhs[i] - value;
        if slack.abs() <= 1e-9 {
            match resource_of_row[i] {
                Some(j) => binding.push(BindingConstraint::Resource { resource: j }),
                None => binding.push(BindingConstraint::UpperBound {
                    class: i - (rows.len() - class_count),
                }),
            }
        }
        // Complementary slackness: positive dual forces a tight constraint.
        if outcome.duals[i] > 1e-8 && slack > 1e-8 {
            certified = false;
        }
    }
    for r in 0..class_count {
        if acceptance[r].abs() <= 1e-9 {
            binding.push(BindingConstraint::LowerBound { class: r });
        }
    }

    Ok(LpBound {
        acceptance,
        objective: objective_value,
        binding,
        degenerate: outcome.degenerate,
        certified,
        note,
    })
}

/// Closed-form solution of the two-class single-resource bound
/// (`a1 > a2 > 0`): serve the more valuable class first, then fill the
/// remaining capacity.
pub fn lp_bound_single(
    kappa1: f64,
    kappa2: f64,
    capacity: f64,
    a1: f64,
    a2: f64,
) -> LpBound {
    assert!(a1 > a2 && a2 > 0.0, "weights must satisfy a1 > a2 > 0");
    assert!(capacity > 0.0 && kappa1 >= 0.0 && kappa2 >= 0.0);

    let mut note = None;
    let p1 = if kappa1 == 0.0 {
        note = Some("kappa_1 = 0: P_1 = 1 by convention".to_string());
        1.0
    } else {
        (capacity / kappa1).min(1.0)
    };
    let p2 = if p1 >= 1.0 {
        if kappa2 == 0.0 {
            note = Some(match note {
                Some(n) => format!("{n}; kappa_2 = 0: P_2 = 1 by convention"),
                None => "kappa_2 = 0: P_2 = 1 by convention".to_string(),
            });
            1.0
        } else {
            (((capacity - kappa1) / kappa2).max(0.0)).min(1.0)
        }
    } else {
        0.0
    };
    let objective = a1 * kappa1 * p1 + a2 * kappa2 * p2;

    // The optimum is characterised by: all-slack implies both probabilities
    // are one, and a capped class 1 implies class 2 gets nothing.
    let used = kappa1 * p1 + kappa2 * p2;
    debug_assert!(used < capacity - 1e-12 || used <= capacity + 1e-9);
    debug_assert!(!(used < capacity - 1e-9) || (p1 == 1.0 && p2 == 1.0));
    debug_assert!(!(p1 < 1.0) || p2 == 0.0);

    let mut binding = Vec::new();
    if used >= capacity - 1e-9 {
        binding.push(BindingConstraint::Resource { resource: 0 });
    }
    if p1 >= 1.0 {
        binding.push(BindingConstraint::UpperBound { class: 0 });
    }
    if p2 >= 1.0 {
        binding.push(BindingConstraint::UpperBound { class: 1 });
    }
    if p2 == 0.0 {
        binding.push(BindingConstraint::LowerBound { class: 1 });
    }

    LpBound {
        acceptance: vec![p1, p2],
        objective,
        binding,
        degenerate: false,
        certified: true,
        note,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::solve_dense;
    use crate::model::CallClass;

    #[test]
    fn single_bound_splits_capacity() {
        let bound = lp_bound_single(5.0, 5.0, 8.0, 2.0, 1.0);
        assert_eq!(bound.acceptance, vec![1.0, 0.6]);
        assert!((bound.objective - 13.0).abs() < 1e-12);
    }

    #[test]
    fn single_bound_caps_class_one() {
        let bound = lp_bound_single(10.0, 5.0, 8.0, 2.0, 1.0);
        assert_eq!(bound.acceptance, vec![0.8, 0.0]);
        assert!((bound.objective - 2.0 * 8.0).abs() < 1e-12);
    }

    #[test]
    fn single_bound_underloaded() {
        let bound = lp_bound_single(2.0, 2.0, 8.0, 2.0, 1.0);
        assert_eq!(bound.acceptance, vec![1.0, 1.0]);
    }

    #[test]
    fn single_bound_zero_load_convention() {
        let bound = lp_bound_single(0.0, 1.0, 4.0, 2.0, 1.0);
        assert_eq!(bound.acceptance, vec![1.0, 1.0]);
        assert!(bound.note.is_some());
    }

    fn spec_with_weights(
        classes: Vec<(f64, f64, f64)>,
        caps: Vec<u32>,
        reqs: Vec<Vec<u32>>,
    ) -> NetworkSpec {
        NetworkSpec::new(
            classes
                .into_iter()
                .map(|(nu, mu, w)| CallClass::with_weight(nu, mu, w))
                .collect(),
            caps,
            reqs,
        )
        .unwrap()
    }

    /// Brute-force LP oracle: enumerate all candidate vertices as solutions
    /// of R active constraints drawn from resource rows and box faces.
    fn vertex_oracle(spec: &NetworkSpec) -> (Vec<f64>, f64) {
        let class_count = spec.class_count();
        let loads = spec.offered_loads();
        let mut constraints: Vec<(Vec<f64>, f64)> = Vec::new();
        for j in 0..spec.resource_count() {
            constraints.push((
                (0..class_count)
                    .map(|r| f64::from(spec.requirement(j, r)) * loads[r])
                    .collect(),
                f64::from(spec.capacity(j)),
            ));
        }
        for r in 0..class_count {
            let mut row = vec![0.0; class_count];
            row[r] = 1.0;
            constraints.push((row.clone(), 1.0));
            constraints.push((row, 0.0));
        }
        let total = constraints.len();
        let mut best: Option<(Vec<f64>, f64)> = None;
        let mut chosen = vec![0usize; class_count];
        fn recurse(
            start: usize,
            depth: usize,
            chosen: &mut Vec<usize>,
            total: usize,
            class_count: usize,
            constraints: &[(Vec<f64>, f64)],
            spec: &NetworkSpec,
            loads: &[f64],
            best: &mut Option<(Vec<f64>, f64)>,
        ) {
            if depth == class_count {
                let mut a: Vec<Vec<f64>> = Vec::new();
                let mut b = Vec::new();
                for &c in chosen.iter() {
                    // Box faces at 0 use the same row with rhs 0.
                    let (row, rhs) = &constraints[c];
                    let rhs = if c >= spec.resource_count() && (c - spec.resource_count()) % 2 == 1
                    {
                        0.0
                    } else {
                        *rhs
                    };
                    a.push(row.clone());
                    b.push(rhs);
                }
                if solve_dense(&mut a, &mut b).is_err() {
                    return;
                }
                let p = b;
                let feasible = p.iter().all(|&v| (-1e-9..=1.0 + 1e-9).contains(&v))
                    && (0..spec.resource_count()).all(|j| {
                        let used: f64 = (0..spec.class_count())
                            .map(|r| f64::from(spec.requirement(j, r)) * loads[r] * p[r])
                            .sum();
                        used <= f64::from(spec.capacity(j)) + 1e-9
                    });
                if feasible {
                    let value: f64 = (0..spec.class_count())
                        .map(|r| spec.class(r).value_weight * loads[r] * p[r])
                        .sum();
                    if best.as_ref().map_or(true, |(_, v)| value > *v) {
                        *best = Some((p, value));
                    }
                }
                return;
            }
            for c in start..total {
                chosen[depth] = c;
                recurse(
                    c + 1,
                    depth + 1,
                    chosen,
                    total,
                    class_count,
                    constraints,
                    spec,
                    loads,
                    best,
                );
            }
        }
        recurse(
            0,
            0,
            &mut chosen,
            total,
            class_count,
            &constraints,
            spec,
            &loads,
            &mut best,
        );
        best.expect("feasible LP has a vertex optimum")
    }

    #[test]
    fn general_bound_reduces_to_single() {
        let spec = spec_with_weights(
            vec![(5.0, 1.0, 2.0), (5.0, 1.0, 1.0)],
            vec![8],
            vec![vec![1, 1]],
        );
        let general = lp_bound_general(&spec).unwrap();
        let single = lp_bound_single(5.0, 5.0, 8.0, 2.0, 1.0);
        assert!((general.objective - single.objective).abs() < 1e-9);
        for (a, b) in general.acceptance.iter().zip(&single.acceptance) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!(general.certified);
    }

    #[test]
    fn general_bound_all_slack() {
        let spec = spec_with_weights(
            vec![(1.0, 1.0, 1.0), (1.0, 1.0, 1.0)],
            vec![10, 10],
            vec![vec![1, 0], vec![0, 1]],
        );
        let bound = lp_bound_general(&spec).unwrap();
        assert_eq!(bound.acceptance, vec![1.0, 1.0]);
        assert!((bound.objective - 2.0).abs() < 1e-12);
    }

    #[test]
    fn general_bound_matches_vertex_enumeration() {
        // Two-resource topology with a class spanning both resources.
        let spec = spec_with_weights(
            vec![(1.0, 1.0, 1.0), (1.0, 1.0, 1.0), (4.0, 1.0, 1.0)],
            vec![3, 3],
            vec![vec![1, 0, 1], vec![0, 1, 1]],
        );
        let bound = lp_bound_general(&spec).unwrap();
        let (_, oracle_value) = vertex_oracle(&spec);
        assert!(
            (bound.objective - oracle_value).abs() < 1e-9,
            "{} vs oracle {}",
            bound.objective,
            oracle_value
        );
        assert!(bound.certified);
    }

    #[test]
    fn general_bound_oracle_sweep() {
        let cases = vec![
            spec_with_weights(
                vec![(2.0, 1.0, 3.0), (3.0, 1.0, 1.0)],
                vec![4],
                vec![vec![1, 2]],
            ),
            spec_with_weights(
                vec![(2.0, 1.0, 1.0), (1.5, 1.0, 2.0), (0.5, 1.0, 5.0)],
                vec![2, 3],
                vec![vec![1, 1, 0], vec![0, 1, 2]],
            ),
            spec_with_weights(
                vec![(6.0, 2.0, 2.0), (2.0, 1.0, 1.5), (1.0, 1.0, 1.0)],
                vec![5, 2],
                vec![vec![2, 1, 0], vec![0, 0, 1]],
            ),
        ];
        for spec in cases {
            let bound = lp_bound_general(&spec).unwrap();
            let (_, oracle_value) = vertex_oracle(&spec);
            assert!(
                (bound.objective - oracle_value).abs() < 1e-8,
                "{} vs oracle {}",
                bound.objective,
                oracle_value
            );
        }
    }
}
