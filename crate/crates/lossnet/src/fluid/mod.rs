//! Fluid-limit dynamics of loss networks under proportional scaling.
//!
//! With arrival rates and capacities scaled by `N`, the normalized call
//! counts `x = n / N` converge to a deterministic flow
//!
//! ```text
//! dx_r/dt = nu_r P_r(x) - mu_r x_r
//! ```
//!
//! on the polytope `X = {x >= 0 : A x <= C}`. In the interior all
//! tail-accepting classes see `P_r = 1`; on the part of the boundary where
//! exactly one constraint binds, the rates come from the stationary law of
//! that resource's free-capacity chain (module [`chain`]). Where two or
//! more constraints bind the limiting rates are genuinely not determined
//! by `x`, and every operation here reports that instead of inventing
//! dynamics.
//!
//! Fixed points solve `nu_r P_r(x) = mu_r x_r`; for uncontrolled networks
//! the concave function of [`lyapunov`] increases along every trajectory
//! and is maximized exactly at the unique fixed point.

pub mod chain;
mod dynamics;

pub use chain::{ChainClass, ChainSpec, SolvedChain};
pub use dynamics::{
    fixed_points, integrate, FixedPointSearch, FluidFixedPoint, FluidTrajectory,
    IntegratorConfig, Termination,
};

use thiserror::Error;

use crate::linalg::LinalgError;
use crate::model::{AdmissionPolicy, NetworkSpec, PolicyError, INFINITE_CAPACITY};

/// Numerical controls shared by the fluid computations.
#[derive(Debug, Clone, Copy)]
pub struct FluidConfig {
    /// A constraint counts as active when its relative slack is below this.
    pub boundary_band: f64,
    /// Acceptable stationary mass above the truncation midpoint.
    pub tail_tolerance: f64,
    /// Hard cap on the chain truncation level.
    pub max_truncation: u64,
    /// Residual below which a candidate satisfies the fixed-point equations.
    pub residual_tolerance: f64,
    /// Grid resolution of the boundary fixed-point search.
    pub grid_points: usize,
    /// Convergence threshold of the inner boundary iteration.
    pub inner_tolerance: f64,
    pub inner_max_iterations: usize,
}

impl Default for FluidConfig {
    fn default() -> Self {
        FluidConfig {
            boundary_band: 1e-6,
            tail_tolerance: 1e-8,
            max_truncation: 1 << 20,
            residual_tolerance: 1e-8,
            grid_points: 64,
            inner_tolerance: 1e-12,
            inner_max_iterations: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FluidError {
    #[error("fluid state has {got} entries, spec has {expected} classes")]
    Dimension { got: usize, expected: usize },
    #[error("state violates capacity constraint {resource} by {violation:.3e}")]
    Infeasible { resource: usize, violation: f64 },
    #[error(
        "resource {resource}: tail mass {tail_mass:.3e} above tolerance at truncation {level}"
    )]
    TruncationFailure {
        resource: usize,
        level: u64,
        tail_mass: f64,
    },
    #[error("resource {resource}: free-capacity chain has no upward transitions")]
    DegenerateChain { resource: usize },
    #[error("resource {resource}: chain solve failed: {source}")]
    ChainSolve {
        resource: usize,
        source: LinalgError,
    },
    #[error("acceptance rates undetermined: constraints {active:?} are simultaneously active")]
    Undetermined { active: Vec<usize> },
    #[error("operation requires a single resource, spec has {resources}")]
    SingleResourceOnly { resources: usize },
    #[error("integration step collapsed at t = {time:.6} (violation {violation:.3e})")]
    StepCollapse { time: f64, violation: f64 },
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

/// Boundary acceptance rates at a fluid state, or the report that they are
/// not determined by the state.
#[derive(Debug, Clone, PartialEq)]
pub enum AcceptanceRates {
    Determined(Vec<f64>),
    /// Two or more constraints active; the limit dynamics are stochastic.
    Undetermined { active: Vec<usize> },
}

impl AcceptanceRates {
    pub fn rates(&self) -> Option<&[f64]> {
        match self {
            AcceptanceRates::Determined(r) => Some(r),
            AcceptanceRates::Undetermined { .. } => None,
        }
    }
}

/// Indices of the active (tight within the boundary band) constraints.
pub fn active_constraints(spec: &NetworkSpec, x: &[f64], config: &FluidConfig) -> Vec<usize> {
    (0..spec.resource_count())
        .filter(|&j| {
            let c = spec.capacity(j);
            if c == INFINITE_CAPACITY {
                return false;
            }
            let c = f64::from(c);
            let load: f64 = (0..spec.class_count())
                .map(|r| f64::from(spec.requirement(j, r)) * x[r])
                .sum();
            c - load <= config.boundary_band * c.max(1.0)
        })
        .collect()
}

fn check_state(spec: &NetworkSpec, x: &[f64], _config: &FluidConfig) -> Result<(), FluidError> {
    if x.len() != spec.class_count() {
        return Err(FluidError::Dimension {
            got: x.len(),
            expected: spec.class_count(),
        });
    }
    for j in 0..spec.resource_count() {
        let c = spec.capacity(j);
        if c == INFINITE_CAPACITY {
            continue;
        }
        let c = f64::from(c);
        let load: f64 = (0..spec.class_count())
            .map(|r| f64::from(spec.requirement(j, r)) * x[r])
            .sum();
        // Only grossly infeasible states are rejected: trial points of the
        // integrator may leave the polytope by a step length before being
        // projected back, and anything within the boundary band counts as
        // active anyway.
        if load - c > 0.05 * c.max(1.0) {
            return Err(FluidError::Infeasible {
                resource: j,
                violation: load - c,
            });
        }
    }
    Ok(())
}

/// Whether class `r` passes every resource other than `j` when those are
/// slack (free capacity of order N): only windows unbounded above pass.
fn passes_slack_resources(
    spec: &NetworkSpec,
    policy: &AdmissionPolicy,
    j: Option<usize>,
    r: usize,
) -> bool {
    (0..spec.resource_count())
        .filter(|&k| Some(k) != j)
        .all(|k| policy.acceptance_window(spec, k, r).1.is_none())
}

/// Initial truncation level for a resource's chain.
fn initial_truncation(spec: &NetworkSpec, j: usize) -> u64 {
    let offered: f64 = (0..spec.class_count())
        .map(|r| f64::from(spec.requirement(j, r)) * spec.class(r).offered_load())
        .sum();
    let base = f64::from(spec.capacity(j)).max(offered);
    (10.0 * base).ceil() as u64
}

/// Free-capacity chain of resource `j` at fluid state `x`: arrivals gated by
/// the policy (classes shut off by a bounded window at any slack resource
/// enter at rate zero), departures at `mu_r x_r`.
pub fn chain_at_state(
    spec: &NetworkSpec,
    policy: &AdmissionPolicy,
    j: usize,
    x: &[f64],
) -> ChainSpec {
    let classes = (0..spec.class_count())
        .filter(|&r| spec.requirement(j, r) > 0)
        .map(|r| {
            let (lo, hi) = policy.acceptance_window(spec, j, r);
            let gated_on = passes_slack_resources(spec, policy, Some(j), r);
            ChainClass {
                jump: u64::from(spec.requirement(j, r)),
                arrival_rate: if gated_on { spec.class(r).arrival_rate } else { 0.0 },
                window_lo: lo,
                window_hi: hi,
                departure_rate: spec.class(r).service_rate * x[r].max(0.0),
            }
        })
        .collect();
    ChainSpec { classes }
}

/// Acceptance rates of every class given a solved chain on resource `j`.
fn rates_from_chain(
    spec: &NetworkSpec,
    policy: &AdmissionPolicy,
    j: usize,
    solved: &SolvedChain,
) -> Vec<f64> {
    (0..spec.class_count())
        .map(|r| {
            if !passes_slack_resources(spec, policy, Some(j), r) {
                return 0.0;
            }
            let (lo, hi) = policy.acceptance_window(spec, j, r);
            solved.window_mass(lo, hi)
        })
        .collect()
}

/// Interior acceptance rates: 1 for classes accepted at all large free
/// capacities, 0 otherwise.
fn interior_rates(spec: &NetworkSpec, policy: &AdmissionPolicy) -> Vec<f64> {
    (0..spec.class_count())
        .map(|r| {
            if policy.accepts_all_large_free(spec, r) {
                1.0
            } else {
                0.0
            }
        })
        .collect()
}

/// Limiting per-class acceptance rates at a fluid state.
///
/// Interior states see the interior rates; with exactly one active
/// constraint the rates come from that resource's free-capacity chain when
/// it is ergodic (and fall back to the interior rates when it is not, the
/// state then being outside the blocking set); two or more active
/// constraints are reported as undetermined.
pub fn acceptance_rate(
    spec: &NetworkSpec,
    policy: &AdmissionPolicy,
    x: &[f64],
    config: &FluidConfig,
) -> Result<AcceptanceRates, FluidError> {
    policy.validate_for(spec)?;
    check_state(spec, x, config)?;
    let active = active_constraints(spec, x, config);
    match active.len() {
        0 => Ok(AcceptanceRates::Determined(interior_rates(spec, policy))),
        1 => {
            let j = active[0];
            let chain = chain_at_state(spec, policy, j, x);
            match chain::solve_chain(&chain, j, initial_truncation(spec, j), config)? {
                Some(solved) => Ok(AcceptanceRates::Determined(rates_from_chain(
                    spec, policy, j, &solved,
                ))),
                None => Ok(AcceptanceRates::Determined(interior_rates(spec, policy))),
            }
        }
        _ => Ok(AcceptanceRates::Undetermined { active }),
    }
}

/// Value of the concave potential
/// `f(x) = sum_r (x_r log nu_r - x_r log(mu_r x_r) + x_r)` and of its
/// derivative along the flow,
/// `g(x) = sum_r (log nu_r - log mu_r x_r)(nu_r P_r(x) - mu_r x_r)`.
///
/// For uncontrolled networks `g >= 0` with equality exactly at the fixed
/// point, so `f` acts as a Lyapunov function. On the axes (`x_r = 0` with
/// `nu_r P_r > 0`) the derivative is infinite and reported as such.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovValue {
    pub potential: f64,
    pub drift: f64,
}

pub fn lyapunov(
    spec: &NetworkSpec,
    x: &[f64],
    config: &FluidConfig,
) -> Result<LyapunovValue, FluidError> {
    let policy = AdmissionPolicy::Uncontrolled;
    let rates = match acceptance_rate(spec, &policy, x, config)? {
        AcceptanceRates::Determined(r) => r,
        AcceptanceRates::Undetermined { active } => {
            return Err(FluidError::Undetermined { active })
        }
    };
    let mut potential = 0.0f64;
    let mut drift = 0.0f64;
    for r in 0..spec.class_count() {
        let nu = spec.class(r).arrival_rate;
        let mu = spec.class(r).service_rate;
        let xr = x[r];
        if xr > 0.0 {
            potential += xr * nu.ln() - xr * (mu * xr).ln() + xr;
            drift += (nu.ln() - (mu * xr).ln()) * (nu * rates[r] - mu * xr);
        } else {
            // x_r log x_r -> 0; the drift term is +inf when calls still
            // flow in at the axis, 0 otherwise.
            if nu * rates[r] > 0.0 {
                drift = f64::INFINITY;
            }
        }
    }
    Ok(LyapunovValue { potential, drift })
}

/// Limiting acceptance probabilities of a single-resource network under
/// reservation controls as the reservation parameters grow: complete
/// prioritisation in class order. `r0` is the largest prefix of classes
/// whose combined offered load fits; the next class receives the leftover
/// fraction and everything after is shut out.
pub fn reservation_limit(spec: &NetworkSpec) -> Result<Vec<f64>, FluidError> {
    if spec.resource_count() != 1 {
        return Err(FluidError::SingleResourceOnly {
            resources: spec.resource_count(),
        });
    }
    let capacity = f64::from(spec.capacity(0));
    let class_count = spec.class_count();
    let mut acceptance = vec![0.0; class_count];
    let mut used = 0.0f64;
    let mut r = 0usize;
    while r < class_count {
        let demand = f64::from(spec.requirement(0, r)) * spec.class(r).offered_load();
        if used + demand <= capacity {
            acceptance[r] = 1.0;
            used += demand;
            r += 1;
        } else {
            break;
        }
    }
    if r < class_count {
        let demand = f64::from(spec.requirement(0, r)) * spec.class(r).offered_load();
        if demand > 0.0 {
            acceptance[r] = ((capacity - used) / demand).clamp(0.0, 1.0);
        } else {
            acceptance[r] = 1.0;
        }
    }
    Ok(acceptance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CallClass;

    fn spec(classes: Vec<(f64, f64)>, caps: Vec<u32>, reqs: Vec<Vec<u32>>) -> NetworkSpec {
        NetworkSpec::new(
            classes
                .into_iter()
                .map(|(nu, mu)| CallClass::new(nu, mu))
                .collect(),
            caps,
            reqs,
        )
        .unwrap()
    }

    fn config() -> FluidConfig {
        FluidConfig::default()
    }

    fn hunt_policy() -> AdmissionPolicy {
        // Classes 1 and 2 accepted only at small free capacity of their own
        // resource; class 3 needs one unit on each.
        AdmissionPolicy::IntervalSets {
            lo: vec![vec![1, 0, 1], vec![0, 1, 1]],
            hi: vec![
                vec![Some(2), None, None],
                vec![None, Some(2), None],
            ],
        }
    }

    fn hunt_spec(nu3: f64) -> NetworkSpec {
        spec(
            vec![(2.0, 1.0), (2.0, 1.0), (nu3, 1.0)],
            vec![4, 4],
            vec![vec![1, 0, 1], vec![0, 1, 1]],
        )
    }

    #[test]
    fn interior_uncontrolled_accepts_everything() {
        let s = spec(vec![(1.0, 1.0), (1.0, 1.0)], vec![4, 4], vec![vec![1, 1], vec![0, 1]]);
        let rates = acceptance_rate(
            &s,
            &AdmissionPolicy::Uncontrolled,
            &[0.5, 0.5],
            &config(),
        )
        .unwrap();
        assert_eq!(rates.rates().unwrap(), &[1.0, 1.0]);
    }

    #[test]
    fn boundary_rates_match_birth_death_closed_form() {
        // Single resource, A = (1, 1), boundary x1 + x2 = C, mu = 1. The
        // chain is birth-death with up rate x1 + x2 = C and down rate
        // nu1 + nu2 above zero: geometric with ratio C / (nu1 + nu2).
        let (nu1, nu2, c) = (4.0, 3.0, 4u32);
        let s = spec(vec![(nu1, 1.0), (nu2, 1.0)], vec![c], vec![vec![1, 1]]);
        let x = [2.5, 1.5];
        let rates = acceptance_rate(&s, &AdmissionPolicy::Uncontrolled, &x, &config()).unwrap();
        let rho = f64::from(c) / (nu1 + nu2);
        let expect = rho; // mass of {free >= 1} under the geometric law
        for r in 0..2 {
            assert!(
                (rates.rates().unwrap()[r] - expect).abs() < 1e-9,
                "class {r}: {} vs {expect}",
                rates.rates().unwrap()[r]
            );
        }
    }

    #[test]
    fn hunt_interior_rates() {
        let s = hunt_spec(3.0);
        let rates =
            acceptance_rate(&s, &hunt_policy(), &[0.2, 0.2, 1.0], &config()).unwrap();
        assert_eq!(rates.rates().unwrap(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn hunt_subcritical_boundary_falls_back_to_interior() {
        // nu3 <= C: the chain on a saturated resource is not ergodic, so the
        // rates stay at their interior values even on the boundary.
        let s = hunt_spec(3.0);
        let x = [0.5, 0.0, 3.5]; // resource 1 saturated: x1 + x3 = 4
        let rates = acceptance_rate(&s, &hunt_policy(), &x, &config()).unwrap();
        assert_eq!(rates.rates().unwrap(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn hunt_supercritical_boundary_uses_chain() {
        let s = hunt_spec(5.0);
        let x = [0.5, 0.0, 3.5];
        let rates = acceptance_rate(&s, &hunt_policy(), &x, &config()).unwrap();
        let rates = rates.rates().unwrap().to_vec();
        // Chain: up rate x1 + x3 = 4, down 2 + 5 on [1,2], 5 above.
        let r1 = 4.0 / 7.0;
        let w0 = 1.0;
        let w1 = r1;
        let w2 = r1 * r1;
        let tail: f64 = w2 * (4.0 / 5.0) / (1.0 - 4.0 / 5.0);
        let z = w0 + w1 + w2 + tail;
        let expect1 = (w1 + w2) / z;
        let expect3 = (z - w0) / z;
        assert!((rates[0] - expect1).abs() < 1e-8, "{} vs {expect1}", rates[0]);
        assert_eq!(rates[1], 0.0);
        assert!((rates[2] - expect3).abs() < 1e-8, "{} vs {expect3}", rates[2]);
    }

    #[test]
    fn two_active_constraints_are_undetermined() {
        let s = hunt_spec(5.0);
        let x = [0.0, 0.0, 4.0]; // both resources saturated
        let rates = acceptance_rate(&s, &hunt_policy(), &x, &config()).unwrap();
        assert!(matches!(
            rates,
            AcceptanceRates::Undetermined { ref active } if active == &vec![0, 1]
        ));
    }

    #[test]
    fn lyapunov_single_class_maximum() {
        // f'(x) = log(kappa / x): the maximum over [0, C] sits at
        // min(kappa, C).
        let s = spec(vec![(2.0, 1.0)], vec![4], vec![vec![1]]);
        let at = |x: f64| lyapunov(&s, &[x], &config()).unwrap().potential;
        let best = at(2.0);
        for x in [0.5, 1.0, 1.5, 2.5, 3.0, 3.9] {
            assert!(at(x) < best, "f({x}) = {} !< {best}", at(x));
        }
    }

    #[test]
    fn lyapunov_drift_positive_away_from_fixed_point() {
        let s = spec(
            vec![(4.0, 1.0), (1.0, 1.0), (1.0, 1.0)],
            vec![3, 3],
            vec![vec![1, 0, 1], vec![0, 1, 1]],
        );
        for x in [[1.0, 0.5, 0.5], [2.0, 0.8, 0.9], [0.3, 0.2, 0.1]] {
            let value = lyapunov(&s, &x, &config()).unwrap();
            assert!(value.drift > 0.0, "g({x:?}) = {}", value.drift);
        }
    }

    #[test]
    fn lyapunov_drift_vanishes_at_fixed_point() {
        // Interior fixed point x = kappa.
        let s = spec(vec![(1.0, 1.0), (0.5, 1.0)], vec![4, 4], vec![vec![1, 1], vec![0, 1]]);
        let value = lyapunov(&s, &[1.0, 0.5], &config()).unwrap();
        assert!(value.drift.abs() <= 1e-8);
    }

    #[test]
    fn reservation_limit_light_traffic() {
        let s = spec(vec![(1.0, 1.0), (1.0, 1.0)], vec![5], vec![vec![1, 1]]);
        assert_eq!(reservation_limit(&s).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn reservation_limit_partial_class() {
        let s = spec(vec![(3.0, 1.0), (4.0, 1.0)], vec![5], vec![vec![1, 1]]);
        let p = reservation_limit(&s).unwrap();
        assert_eq!(p[0], 1.0);
        assert!((p[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn reservation_limit_first_class_overloaded() {
        let s = spec(
            vec![(8.0, 1.0), (1.0, 1.0), (1.0, 1.0)],
            vec![5],
            vec![vec![1, 1, 1]],
        );
        let p = reservation_limit(&s).unwrap();
        assert!((p[0] - 5.0 / 8.0).abs() < 1e-12);
        assert_eq!(&p[1..], &[0.0, 0.0]);
    }
}
