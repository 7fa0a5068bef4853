//! Trajectory integration and fixed points of the fluid flow.

use super::chain::solve_chain;
use super::{
    acceptance_rate, active_constraints, chain_at_state, initial_truncation, interior_rates,
    rates_from_chain, AcceptanceRates, FluidConfig, FluidError,
};
use serde::Serialize;

use crate::model::{AdmissionPolicy, NetworkSpec, INFINITE_CAPACITY};

/// Why an integration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Horizon,
    FixedPoint,
    MultiConstraintBoundary,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::Horizon => "horizon",
            Termination::FixedPoint => "fixed_point",
            Termination::MultiConstraintBoundary => "multi_constraint_boundary",
        }
    }
}

/// A time grid with states, acceptance rates and active constraints.
#[derive(Debug, Clone)]
pub struct FluidTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub rates: Vec<Vec<f64>>,
    pub active: Vec<Vec<usize>>,
    pub termination: Termination,
}

impl FluidTrajectory {
    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectory has at least one point")
    }

    /// CSV export: `t,x_1..x_R,P_1..P_R,active_constraints`.
    pub fn to_csv(&self) -> String {
        let class_count = self.states.first().map_or(0, Vec::len);
        let mut out = String::from("t");
        for r in 1..=class_count {
            out.push_str(&format!(",x_{r}"));
        }
        for r in 1..=class_count {
            out.push_str(&format!(",P_{r}"));
        }
        out.push_str(",active_constraints\n");
        for i in 0..self.times.len() {
            out.push_str(&format!("{}", self.times[i]));
            for v in &self.states[i] {
                out.push_str(&format!(",{v}"));
            }
            for v in &self.rates[i] {
                out.push_str(&format!(",{v}"));
            }
            let active = self.active[i]
                .iter()
                .map(|j| j.to_string())
                .collect::<Vec<_>>()
                .join(";");
            out.push(',');
            out.push_str(&active);
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IntegratorConfig {
    /// Fixed step; defaults to `1e-3 / min_r mu_r`.
    pub step: Option<f64>,
    pub horizon: f64,
    /// Early stop when the drift's max norm falls below this.
    pub fixed_point_tolerance: f64,
    /// Record every n-th accepted step (the first and last always are).
    pub record_stride: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            step: None,
            horizon: 50.0,
            fixed_point_tolerance: 1e-9,
            record_stride: 1,
        }
    }
}

fn drift_at(
    spec: &NetworkSpec,
    policy: &AdmissionPolicy,
    x: &[f64],
    config: &FluidConfig,
) -> Result<Option<(Vec<f64>, Vec<f64>)>, FluidError> {
    match acceptance_rate(spec, policy, x, config)? {
        AcceptanceRates::Determined(rates) => {
            let drift = (0..spec.class_count())
                .map(|r| {
                    spec.class(r).arrival_rate * rates[r]
                        - spec.class(r).service_rate * x[r].max(0.0)
                })
                .collect();
            Ok(Some((drift, rates)))
        }
        AcceptanceRates::Undetermined { .. } => Ok(None),
    }
}

fn constraint_violations(spec: &NetworkSpec, x: &[f64]) -> Vec<(usize, f64)> {
    (0..spec.resource_count())
        .filter_map(|j| {
            if spec.capacity(j) == INFINITE_CAPACITY {
                return None;
            }
            let load: f64 = (0..spec.class_count())
                .map(|r| f64::from(spec.requirement(j, r)) * x[r])
                .sum();
            let violation = load - f64::from(spec.capacity(j));
            (violation > 0.0).then_some((j, violation))
        })
        .collect()
}

/// Projects a slightly infeasible state back onto the polytope, moving
/// against the flow direction where that resolves the violation and
/// orthogonally to the constraint otherwise.
fn project(spec: &NetworkSpec, x: &mut [f64], direction: &[f64]) {
    for _ in 0..8 {
        let violations = constraint_violations(spec, x);
        if violations.is_empty() {
            break;
        }
        for (j, violation) in violations {
            let row: Vec<f64> = (0..spec.class_count())
                .map(|r| f64::from(spec.requirement(j, r)))
                .collect();
            let along: f64 = row.iter().zip(direction).map(|(a, d)| a * d).sum();
            let dir_norm: f64 = direction.iter().map(|d| d * d).sum::<f64>().sqrt();
            if along > 1e-9 * dir_norm.max(1e-300) {
                let t = violation / along;
                for (xr, d) in x.iter_mut().zip(direction) {
                    *xr -= t * d;
                }
            } else {
                let row_norm: f64 = row.iter().map(|a| a * a).sum();
                for (xr, a) in x.iter_mut().zip(&row) {
                    *xr -= violation * a / row_norm;
                }
            }
        }
        for xr in x.iter_mut() {
            if *xr < 0.0 {
                *xr = 0.0;
            }
        }
    }
}

enum StepOutcome {
    Accepted(Vec<f64>),
    UndeterminedStage,
}

fn rk4_step(
    spec: &NetworkSpec,
    policy: &AdmissionPolicy,
    x: &[f64],
    k1: &[f64],
    h: f64,
    config: &FluidConfig,
) -> Result<Option<Vec<f64>>, FluidError> {
    let advance = |k: &[f64], f: f64| -> Vec<f64> {
        x.iter().zip(k).map(|(a, b)| a + f * b).collect()
    };
    let stage = |y: &[f64]| -> Result<Option<Vec<f64>>, FluidError> {
        Ok(drift_at(spec, policy, y, config)?.map(|(d, _)| d))
    };
    let k2 = match stage(&advance(k1, 0.5 * h))? {
        Some(v) => v,
        None => return Ok(None),
    };
    let k3 = match stage(&advance(&k2, 0.5 * h))? {
        Some(v) => v,
        None => return Ok(None),
    };
    let k4 = match stage(&advance(&k3, h))? {
        Some(v) => v,
        None => return Ok(None),
    };
    let next = (0..x.len())
        .map(|r| x[r] + h / 6.0 * (k1[r] + 2.0 * k2[r] + 2.0 * k3[r] + k4[r]))
        .collect();
    Ok(Some(next))
}

/// Integrates the fluid flow from `x0` with a classical fourth-order
/// scheme, projecting small boundary violations and halving the step on
/// larger ones. Stops at the horizon, at a fixed point, or where the
/// dynamics stop being determined (multiple active constraints).
pub fn integrate(
    spec: &NetworkSpec,
    policy: &AdmissionPolicy,
    x0: &[f64],
    integrator: &IntegratorConfig,
    config: &FluidConfig,
) -> Result<FluidTrajectory, FluidError> {
    policy.validate_for(spec)?;
    let mu_min = spec
        .classes()
        .iter()
        .map(|c| c.service_rate)
        .fold(f64::INFINITY, f64::min);
    let initial_step = integrator.step.unwrap_or(1e-3 / mu_min);
    let min_step = initial_step * 2f64.powi(-40);

    let mut x = x0.to_vec();
    let mut t = 0.0;
    let mut h = initial_step;
    let stride = integrator.record_stride.max(1);

    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut rates_log = Vec::new();
    let mut active_log = Vec::new();
    let mut steps = 0usize;

    macro_rules! record {
        ($t:expr, $x:expr, $rates:expr) => {{
            times.push($t);
            states.push($x.to_vec());
            rates_log.push($rates);
            active_log.push(active_constraints(spec, $x, config));
        }};
    }

    let termination = loop {
        let (drift, rates) = match drift_at(spec, policy, &x, config)? {
            Some(pair) => pair,
            None => {
                record!(t, &x, vec![f64::NAN; spec.class_count()]);
                break Termination::MultiConstraintBoundary;
            }
        };
        let due = steps % stride == 0;
        if due {
            record!(t, &x, rates.clone());
        }
        let speed = drift.iter().fold(0.0f64, |acc, d| acc.max(d.abs()));
        if speed <= integrator.fixed_point_tolerance {
            if !due {
                record!(t, &x, rates);
            }
            break Termination::FixedPoint;
        }
        if t >= integrator.horizon {
            if !due {
                record!(t, &x, rates);
            }
            break Termination::Horizon;
        }

        let mut halved = false;
        let outcome = loop {
            match rk4_step(spec, policy, &x, &drift, h, config)? {
                None => break StepOutcome::UndeterminedStage,
                Some(mut next) => {
                    // Violations up to (step length)^2 are projected away;
                    // anything larger means the step jumped too deep past
                    // the boundary and is retried shorter.
                    let tolerated = h * h * (1.0 + speed) * (1.0 + speed);
                    for v in next.iter_mut() {
                        if *v < 0.0 && *v > -tolerated {
                            *v = 0.0;
                        }
                    }
                    let negative = -next.iter().cloned().fold(0.0f64, f64::min);
                    let worst = constraint_violations(spec, &next)
                        .into_iter()
                        .map(|(_, v)| v)
                        .fold(0.0f64, f64::max)
                        .max(negative);
                    if worst <= tolerated {
                        if worst > 0.0 {
                            project(spec, &mut next, &drift);
                        }
                        break StepOutcome::Accepted(next);
                    }
                    h *= 0.5;
                    halved = true;
                    if h < min_step {
                        return Err(FluidError::StepCollapse {
                            time: t,
                            violation: worst,
                        });
                    }
                }
            }
        };
        match outcome {
            StepOutcome::Accepted(next) => {
                x = next;
                t += h;
                steps += 1;
                if !halved {
                    // Recover the step size once past the boundary entry.
                    h = (2.0 * h).min(initial_step);
                }
            }
            StepOutcome::UndeterminedStage => {
                if !due {
                    record!(t, &x, rates);
                }
                break Termination::MultiConstraintBoundary;
            }
        }
    };

    Ok(FluidTrajectory {
        times,
        states,
        rates: rates_log,
        active: active_log,
        termination,
    })
}

/// A fixed point of the fluid flow.
#[derive(Debug, Clone, Serialize)]
pub struct FluidFixedPoint {
    pub state: Vec<f64>,
    /// Residual of `nu_r P_r(x) - mu_r x_r` at the returned point.
    pub residual: f64,
    /// Boundary fixed points record the saturated resource.
    pub active_resource: Option<usize>,
}

/// Outcome of the fixed-point search with its diagnostics. The grid-based
/// boundary search cannot certify completeness unless the bracketing
/// function was monotone on the grid; callers get the resolution either way.
#[derive(Debug, Clone, Serialize)]
pub struct FixedPointSearch {
    pub points: Vec<FluidFixedPoint>,
    pub grid_points: usize,
    pub search_complete: bool,
    pub notes: Vec<String>,
}

fn fixed_point_residual(
    spec: &NetworkSpec,
    policy: &AdmissionPolicy,
    x: &[f64],
    config: &FluidConfig,
) -> Result<Option<f64>, FluidError> {
    Ok(drift_at(spec, policy, x, config)?
        .map(|(drift, _)| drift.iter().fold(0.0f64, |acc, d| acc.max(d.abs()))))
}

/// Finds the fluid fixed points: the light-traffic candidate
/// `x_r = kappa_r P_r(interior)` when feasible, plus a one-dimensional
/// search along each single-resource boundary parametrised by the total
/// upward intensity of that resource's free-capacity chain.
pub fn fixed_points(
    spec: &NetworkSpec,
    policy: &AdmissionPolicy,
    config: &FluidConfig,
) -> Result<FixedPointSearch, FluidError> {
    policy.validate_for(spec)?;
    let mut points: Vec<FluidFixedPoint> = Vec::new();
    let mut notes = Vec::new();
    let mut search_complete = true;

    let interior = interior_rates(spec, policy);
    let candidate: Vec<f64> = (0..spec.class_count())
        .map(|r| spec.class(r).offered_load() * interior[r])
        .collect();
    let feasible = (0..spec.resource_count()).all(|j| {
        let c = spec.capacity(j);
        if c == INFINITE_CAPACITY {
            return true;
        }
        let load: f64 = (0..spec.class_count())
            .map(|r| f64::from(spec.requirement(j, r)) * candidate[r])
            .sum();
        load <= f64::from(c) * (1.0 + 1e-12)
    });
    if feasible {
        match fixed_point_residual(spec, policy, &candidate, config)? {
            Some(residual) if residual <= config.residual_tolerance => {
                points.push(FluidFixedPoint {
                    state: candidate,
                    residual,
                    active_resource: None,
                });
            }
            Some(_) => {}
            None => {
                notes.push(
                    "light-traffic candidate sits on a multi-constraint boundary; skipped"
                        .to_string(),
                );
                search_complete = false;
            }
        }
    }

    for j in 0..spec.resource_count() {
        if spec.capacity(j) == INFINITE_CAPACITY {
            continue;
        }
        boundary_search(
            spec,
            policy,
            j,
            config,
            &mut points,
            &mut notes,
            &mut search_complete,
        )?;
    }

    Ok(FixedPointSearch {
        points,
        grid_points: config.grid_points,
        search_complete,
        notes,
    })
}

/// One evaluation of the boundary consistency map at total upward
/// intensity `c`.
struct BoundaryEval {
    /// `sum_r A_jr x_r - C_j` at the self-consistent point.
    mismatch: f64,
    /// Upward intensity `mu_r x_r` per class (zero off the chain).
    intensities: Vec<f64>,
    /// Acceptance rates of every class at the solved chain.
    rates: Vec<f64>,
}

/// Solves the inner self-consistency problem on the boundary of resource
/// `j`: `u_r = nu_r pi_u(window_r)` over the classes with a positive gated
/// arrival rate. The chain's flow balance keeps `sum_r A_jr u_r` invariant
/// along the iteration, so `c` parametrises the solutions.
fn eval_boundary(
    spec: &NetworkSpec,
    policy: &AdmissionPolicy,
    j: usize,
    c: f64,
    config: &FluidConfig,
) -> Result<Option<BoundaryEval>, FluidError> {
    let template = chain_at_state(spec, policy, j, &vec![0.0; spec.class_count()]);
    let in_chain: Vec<usize> = (0..spec.class_count())
        .filter(|&r| spec.requirement(j, r) > 0)
        .collect();
    let active_slots: Vec<usize> = (0..in_chain.len())
        .filter(|&i| template.classes[i].arrival_rate > 0.0)
        .collect();
    if active_slots.is_empty() {
        return Ok(None);
    }
    let weight: f64 = active_slots
        .iter()
        .map(|&i| template.classes[i].arrival_rate * template.classes[i].jump as f64)
        .sum();
    let mut intensities: Vec<f64> = active_slots
        .iter()
        .map(|&i| c * template.classes[i].arrival_rate / weight)
        .collect();

    let mut previous_residual = f64::INFINITY;
    let mut stalled = 0usize;
    let mut damped = false;
    for _ in 0..config.inner_max_iterations {
        let mut chain = template.clone();
        for (slot, &i) in active_slots.iter().enumerate() {
            chain.classes[i].departure_rate = intensities[slot];
        }
        let solved = match solve_chain(&chain, j, initial_truncation(spec, j), config)? {
            Some(s) => s,
            None => return Ok(None),
        };
        let next: Vec<f64> = active_slots
            .iter()
            .map(|&i| {
                let class = &template.classes[i];
                class.arrival_rate * solved.window_mass(class.window_lo, class.window_hi)
            })
            .collect();
        let residual = intensities
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        if residual >= previous_residual {
            stalled += 1;
            if stalled >= 10 {
                damped = true;
            }
        } else {
            stalled = 0;
        }
        previous_residual = residual;
        for (slot, value) in next.iter().enumerate() {
            intensities[slot] = if damped {
                0.5 * intensities[slot] + 0.5 * value
            } else {
                *value
            };
        }
        if residual <= config.inner_tolerance * c.max(1.0) {
            let mut full = vec![0.0; spec.class_count()];
            for (slot, &i) in active_slots.iter().enumerate() {
                full[in_chain[i]] = intensities[slot];
            }
            let mismatch: f64 = in_chain
                .iter()
                .map(|&r| {
                    f64::from(spec.requirement(j, r)) * full[r] / spec.class(r).service_rate
                })
                .sum::<f64>()
                - f64::from(spec.capacity(j));
            let rates = rates_from_chain(spec, policy, j, &solved);
            return Ok(Some(BoundaryEval {
                mismatch,
                intensities: full,
                rates,
            }));
        }
    }
    Ok(None)
}

fn boundary_search(
    spec: &NetworkSpec,
    policy: &AdmissionPolicy,
    j: usize,
    config: &FluidConfig,
    points: &mut Vec<FluidFixedPoint>,
    notes: &mut Vec<String>,
    search_complete: &mut bool,
) -> Result<(), FluidError> {
    let template = chain_at_state(spec, policy, j, &vec![0.0; spec.class_count()]);
    let drift_cap = template.down_drift();
    if drift_cap <= 0.0 {
        return Ok(());
    }

    let grid = config.grid_points.max(4);
    let mut samples: Vec<(f64, f64)> = Vec::with_capacity(grid);
    for i in 1..=grid {
        let c = drift_cap * i as f64 / (grid + 1) as f64;
        match eval_boundary(spec, policy, j, c, config) {
            Ok(Some(eval)) => samples.push((c, eval.mismatch)),
            Ok(None) => {
                samples.push((c, f64::NAN));
            }
            Err(FluidError::TruncationFailure { .. }) => {
                notes.push(format!(
                    "resource {j}: chain truncation failed near intensity {c:.4}; grid point skipped"
                ));
                *search_complete = false;
                samples.push((c, f64::NAN));
            }
            Err(other) => return Err(other),
        }
    }

    let valid: Vec<(f64, f64)> = samples
        .iter()
        .copied()
        .filter(|(_, f)| f.is_finite())
        .collect();
    if valid.len() < samples.len() {
        *search_complete = false;
    }
    if valid.len() >= 2 {
        let increasing = valid.windows(2).all(|w| w[1].1 >= w[0].1 - 1e-12);
        let decreasing = valid.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12);
        if !increasing && !decreasing {
            *search_complete = false;
        }
    }

    let mut roots: Vec<f64> = Vec::new();
    for w in valid.windows(2) {
        let (c0, f0) = w[0];
        let (c1, f1) = w[1];
        if f0 == 0.0 {
            roots.push(c0);
            continue;
        }
        if f0 * f1 < 0.0 {
            let (mut lo, mut hi, mut flo) = (c0, c1, f0);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                let fmid = match eval_boundary(spec, policy, j, mid, config) {
                    Ok(Some(eval)) => eval.mismatch,
                    _ => break,
                };
                if fmid == 0.0 || (hi - lo) < 1e-13 * drift_cap {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if flo * fmid < 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    flo = fmid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
    }
    if let Some(&(c_last, f_last)) = valid.last() {
        if f_last == 0.0 {
            roots.push(c_last);
        }
    }

    for c in roots {
        let eval = match eval_boundary(spec, policy, j, c, config)? {
            Some(e) => e,
            None => continue,
        };
        let mut state = vec![0.0; spec.class_count()];
        for r in 0..spec.class_count() {
            if spec.requirement(j, r) > 0 {
                state[r] = eval.intensities[r] / spec.class(r).service_rate;
            } else {
                state[r] = spec.class(r).offered_load() * eval.rates[r];
            }
        }
        // Only a genuine single-constraint boundary point qualifies; the
        // other resources must stay strictly slack.
        let others_slack = (0..spec.resource_count()).all(|k| {
            if k == j || spec.capacity(k) == INFINITE_CAPACITY {
                return true;
            }
            let load: f64 = (0..spec.class_count())
                .map(|r| f64::from(spec.requirement(k, r)) * state[r])
                .sum();
            let c_k = f64::from(spec.capacity(k));
            c_k - load > config.boundary_band * c_k.max(1.0)
        });
        if !others_slack {
            notes.push(format!(
                "resource {j}: boundary candidate touches another constraint; skipped"
            ));
            *search_complete = false;
            continue;
        }
        match fixed_point_residual(spec, policy, &state, config)? {
            Some(residual) if residual <= config.residual_tolerance => {
                let duplicate = points.iter().any(|p| {
                    p.state
                        .iter()
                        .zip(&state)
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0f64, f64::max)
                        <= 1e-6
                });
                if !duplicate {
                    points.push(FluidFixedPoint {
                        state,
                        residual,
                        active_resource: Some(j),
                    });
                }
            }
            Some(residual) => {
                notes.push(format!(
                    "resource {j}: boundary candidate failed verification (residual {residual:.3e})"
                ));
                *search_complete = false;
            }
            None => {
                notes.push(format!(
                    "resource {j}: boundary candidate landed on a multi-constraint boundary"
                ));
                *search_complete = false;
            }
        }
    }
    Ok(())
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
        AdmissionPolicy::IntervalSets {
            lo: vec![vec![1, 0, 1], vec![0, 1, 1]],
            hi: vec![vec![Some(2), None, None], vec![None, Some(2), None]],
        }
    }

    fn hunt_spec(nu1: f64, nu2: f64, nu3: f64) -> NetworkSpec {
        spec(
            vec![(nu1, 1.0), (nu2, 1.0), (nu3, 1.0)],
            vec![4, 4],
            vec![vec![1, 0, 1], vec![0, 1, 1]],
        )
    }

    /// Hand-computed first-regime coordinate of the bistable example with
    /// nu = (2, *, 5), C = 4, windows [1,2]: the chain has up rate 4, down
    /// rate 7 on [1,2] and 5 above.
    fn hunt_a1() -> f64 {
        let z = 1.0 + 4.0 / 7.0 + (16.0 / 49.0) * 5.0;
        2.0 * (4.0 / 7.0 + 16.0 / 49.0) / z
    }

    #[test]
    fn trajectory_constant_at_fixed_point() {
        let s = spec(vec![(1.0, 1.0)], vec![4], vec![vec![1]]);
        let traj = integrate(
            &s,
            &AdmissionPolicy::Uncontrolled,
            &[1.0],
            &IntegratorConfig::default(),
            &config(),
        )
        .unwrap();
        assert_eq!(traj.termination, Termination::FixedPoint);
        assert_eq!(traj.times.len(), 1);
        assert!((traj.final_state()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn trajectory_matches_linear_ode_closed_form() {
        // Underloaded single class: x(t) = kappa (1 - e^{-mu t}).
        let (kappa, mu) = (2.0, 0.7);
        let s = spec(vec![(kappa * mu, mu)], vec![10], vec![vec![1]]);
        let integrator = IntegratorConfig {
            horizon: 3.0,
            record_stride: 100,
            ..Default::default()
        };
        let traj = integrate(
            &s,
            &AdmissionPolicy::Uncontrolled,
            &[0.0],
            &integrator,
            &config(),
        )
        .unwrap();
        for (t, x) in traj.times.iter().zip(&traj.states) {
            let expect = kappa * (1.0 - (-mu * t).exp());
            assert!((x[0] - expect).abs() < 1e-8, "t={t}: {} vs {expect}", x[0]);
        }
    }

    #[test]
    fn overloaded_link_slides_to_boundary_fixed_point() {
        let s = spec(vec![(8.0, 1.0)], vec![4], vec![vec![1]]);
        let integrator = IntegratorConfig {
            horizon: 60.0,
            record_stride: 1000,
            ..Default::default()
        };
        let traj = integrate(
            &s,
            &AdmissionPolicy::Uncontrolled,
            &[0.0],
            &integrator,
            &config(),
        )
        .unwrap();
        assert_eq!(traj.termination, Termination::FixedPoint);
        // Position accuracy is limited by the boundary detection band.
        assert!((traj.final_state()[0] - 4.0).abs() < 1e-5);
    }

    #[test]
    fn hunt_overload_saturating_resource_one_reaches_first_regime() {
        let s = hunt_spec(2.0, 2.0, 5.0);
        let integrator = IntegratorConfig {
            horizon: 120.0,
            record_stride: 1000,
            ..Default::default()
        };
        let traj = integrate(&s, &hunt_policy(), &[4.0, 0.0, 0.0], &integrator, &config())
            .unwrap();
        assert_eq!(traj.termination, Termination::FixedPoint);
        let x = traj.final_state();
        let a1 = hunt_a1();
        assert!((x[0] - a1).abs() < 1e-4, "{} vs {a1}", x[0]);
        assert!(x[1].abs() < 1e-9);
        assert!((x[2] - (4.0 - a1)).abs() < 1e-4);
    }

    #[test]
    fn light_traffic_fixed_point_is_offered_load() {
        let s = spec(vec![(1.0, 1.0), (0.5, 1.0)], vec![5], vec![vec![1, 2]]);
        let policy = AdmissionPolicy::Reservation {
            thresholds: vec![0, 2],
        };
        let search = fixed_points(&s, &policy, &config()).unwrap();
        assert_eq!(search.points.len(), 1);
        let p = &search.points[0];
        assert!(p.active_resource.is_none());
        assert!((p.state[0] - 1.0).abs() < 1e-9);
        assert!((p.state[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn heavy_traffic_reservation_fixed_point_matches_hand_chain() {
        // kappa = (3, 4), A = (1, 1), C = 5, thresholds (0, 2): at the
        // boundary the chain has up rate 5, down 3 on [1,2] and 7 above.
        let s = spec(vec![(3.0, 1.0), (4.0, 1.0)], vec![5], vec![vec![1, 1]]);
        let policy = AdmissionPolicy::Reservation {
            thresholds: vec![0, 2],
        };
        let search = fixed_points(&s, &policy, &config()).unwrap();
        assert_eq!(search.points.len(), 1, "notes: {:?}", search.notes);
        let p = &search.points[0];
        assert_eq!(p.active_resource, Some(0));
        // Weights: w0 = 1, w1 = 5/3, w2 = 25/9, then ratio 5/7.
        let w0: f64 = 1.0;
        let w1: f64 = 5.0 / 3.0;
        let w2: f64 = 25.0 / 9.0;
        let tail = w2 * (5.0 / 7.0) / (1.0 - 5.0 / 7.0);
        let z = w0 + w1 + w2 + tail;
        let p1 = (z - w0) / z;
        let p2 = (w2 * (5.0 / 7.0) / (1.0 - 5.0 / 7.0)) / z;
        assert!((p.state[0] - 3.0 * p1).abs() < 1e-8, "{} vs {}", p.state[0], 3.0 * p1);
        assert!((p.state[1] - 4.0 * p2).abs() < 1e-8, "{} vs {}", p.state[1], 4.0 * p2);
        // Flow balance pins the boundary: x1 + x2 = C.
        assert!((p.state[0] + p.state[1] - 5.0).abs() < 1e-8);
    }

    #[test]
    fn hunt_underload_has_single_fixed_point() {
        let s = hunt_spec(2.0, 2.0, 3.0);
        let search = fixed_points(&s, &hunt_policy(), &config()).unwrap();
        assert_eq!(search.points.len(), 1, "notes: {:?}", search.notes);
        let p = &search.points[0];
        assert!(p.active_resource.is_none());
        assert!(p.state[0].abs() < 1e-9);
        assert!(p.state[1].abs() < 1e-9);
        assert!((p.state[2] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn hunt_overload_has_two_boundary_fixed_points() {
        let s = hunt_spec(2.0, 2.0, 5.0);
        let search = fixed_points(&s, &hunt_policy(), &config()).unwrap();
        assert_eq!(search.points.len(), 2, "notes: {:?}", search.notes);
        let a = hunt_a1();
        let p1 = search
            .points
            .iter()
            .find(|p| p.active_resource == Some(0))
            .unwrap();
        assert!((p1.state[0] - a).abs() < 1e-8);
        assert!(p1.state[1].abs() < 1e-12);
        assert!((p1.state[2] - (4.0 - a)).abs() < 1e-8);
        let p2 = search
            .points
            .iter()
            .find(|p| p.active_resource == Some(1))
            .unwrap();
        assert!((p2.state[1] - a).abs() < 1e-8);
        assert!(p2.state[0].abs() < 1e-12);
        assert!(p1.residual <= 1e-8 && p2.residual <= 1e-8);
    }

    #[test]
    fn hunt_first_regime_independent_of_second_class_rate() {
        let base = fixed_points(&hunt_spec(2.0, 2.0, 5.0), &hunt_policy(), &config()).unwrap();
        let doubled = fixed_points(&hunt_spec(2.0, 4.0, 5.0), &hunt_policy(), &config()).unwrap();
        let a_base = base
            .points
            .iter()
            .find(|p| p.active_resource == Some(0))
            .unwrap()
            .state[0];
        let a_doubled = doubled
            .points
            .iter()
            .find(|p| p.active_resource == Some(0))
            .unwrap()
            .state[0];
        assert!((a_base - a_doubled).abs() <= 1e-6);
    }

    #[test]
    fn uncontrolled_two_resource_fixed_point_matches_kelly() {
        let s = spec(
            vec![(4.0, 1.0), (1.0, 1.0), (1.0, 1.0)],
            vec![3, 3],
            vec![vec![1, 0, 1], vec![0, 1, 1]],
        );
        let search = fixed_points(&s, &AdmissionPolicy::Uncontrolled, &config()).unwrap();
        assert_eq!(search.points.len(), 1, "notes: {:?}", search.notes);
        let p = &search.points[0];
        let expect = [2.4, 1.0, 0.6];
        for r in 0..3 {
            assert!(
                (p.state[r] - expect[r]).abs() < 1e-6,
                "class {r}: {} vs {}",
                p.state[r],
                expect[r]
            );
        }
    }

    #[test]
    fn trajectory_csv_shape() {
        let s = spec(vec![(1.0, 1.0)], vec![4], vec![vec![1]]);
        let integrator = IntegratorConfig {
            horizon: 0.01,
            ..Default::default()
        };
        let traj = integrate(
            &s,
            &AdmissionPolicy::Uncontrolled,
            &[0.5],
            &integrator,
            &config(),
        )
        .unwrap();
        let csv = traj.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "t,x_1,P_1,active_constraints");
        assert!(lines.next().unwrap().starts_with("0,0.5,1,"));
    }
}
