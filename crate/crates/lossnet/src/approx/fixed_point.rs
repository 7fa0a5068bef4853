//! The three fixed-point schemes: Kelly's simple approximation, the
//! multiservice reduced-load approximation, and the Erlang fixed point.

use super::{ApproxError, FixedPointConfig, FixedPointResult, PassingProbs};
use crate::exact::erlang_b;
use crate::model::{NetworkSpec, INFINITE_CAPACITY};

/// Tracks the residual history and decides when to engage damping.
struct OscillationGuard {
    window: usize,
    previous: f64,
    non_decreasing: usize,
    damped: bool,
}

impl OscillationGuard {
    fn new(window: usize) -> Self {
        OscillationGuard {
            window,
            previous: f64::INFINITY,
            non_decreasing: 0,
            damped: false,
        }
    }

    /// Feeds one residual; returns whether updates should be damped from now on.
    fn observe(&mut self, residual: f64) -> bool {
        if residual >= self.previous {
            self.non_decreasing += 1;
            if self.non_decreasing >= self.window {
                self.damped = true;
            }
        } else {
            self.non_decreasing = 0;
        }
        self.previous = residual;
        self.damped
    }
}

fn load_on_resource(spec: &NetworkSpec, j: usize, p: &[f64], include_own: bool) -> f64 {
    let mut total = 0.0;
    for r in 0..spec.class_count() {
        let req = spec.requirement(j, r);
        if req == 0 {
            continue;
        }
        let mut thinned = spec.class(r).offered_load();
        for k in 0..spec.resource_count() {
            if !include_own && k == j {
                continue;
            }
            let a = spec.requirement(k, r);
            if a > 0 {
                thinned *= p[k].powi(a as i32);
            }
        }
        total += f64::from(req) * thinned;
    }
    total
}

/// Kelly's simple approximation: coordinate-wise solve of the
/// complementary-slackness system. For each resource in turn, the passing
/// probability is 1 when the resource is slack at `p_j = 1`, otherwise the
/// unique root of `load_j(p_j) = C_j` found by bisection; sweeps repeat
/// until the system residual is below tolerance.
pub fn kelly_simple(
    spec: &NetworkSpec,
    config: &FixedPointConfig,
) -> Result<FixedPointResult, ApproxError> {
    let resource_count = spec.resource_count();
    let mut p = vec![1.0f64; resource_count];

    let residual_of = |p: &[f64]| -> f64 {
        let mut worst = 0.0f64;
        for j in 0..resource_count {
            if spec.capacity(j) == INFINITE_CAPACITY {
                continue;
            }
            let load = load_on_resource(spec, j, p, true);
            let c = f64::from(spec.capacity(j));
            let violation = if p[j] < 1.0 {
                (load - c).abs()
            } else {
                (load - c).max(0.0)
            };
            worst = worst.max(violation);
        }
        worst
    };

    let mut iterations = 0;
    let mut residual = residual_of(&p);
    while residual > config.tolerance {
        if iterations >= config.max_iterations {
            return Err(ApproxError::NoConvergence {
                iterations,
                residual,
            });
        }
        for j in 0..resource_count {
            if spec.capacity(j) == INFINITE_CAPACITY {
                p[j] = 1.0;
                continue;
            }
            let c = f64::from(spec.capacity(j));
            p[j] = 1.0;
            if load_on_resource(spec, j, &p, true) <= c {
                continue;
            }
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                p[j] = mid;
                if load_on_resource(spec, j, &p, true) > c {
                    hi = mid;
                } else {
                    lo = mid;
                }
                if hi - lo <= f64::EPSILON * hi {
                    break;
                }
            }
            p[j] = 0.5 * (lo + hi);
        }
        iterations += 1;
        residual = residual_of(&p);
    }

    let acceptance = acceptance_per_resource(spec, &p);
    let expected_usage = (0..resource_count)
        .map(|j| load_on_resource(spec, j, &p, true))
        .collect();
    Ok(FixedPointResult {
        passing: PassingProbs::PerResource(p),
        acceptance,
        iterations,
        residual,
        converged: true,
        multiplicity_note: None,
        expected_usage: Some(expected_usage),
    })
}

fn acceptance_per_resource(spec: &NetworkSpec, p: &[f64]) -> Vec<f64> {
    (0..spec.class_count())
        .map(|r| {
            let mut prob = 1.0;
            for j in 0..spec.resource_count() {
                let a = spec.requirement(j, r);
                if a > 0 {
                    prob *= p[j].powi(a as i32);
                }
            }
            prob
        })
        .collect()
}

/// Occupancy distribution of a single resource of the given capacity fed by
/// independent Poisson streams with requirements and (possibly thinned)
/// offered loads; the one-dimensional Kaufman recursion, rescaled on the fly
/// so large capacities do not overflow.
fn single_resource_occupancy(capacity: u32, demands: &[(u32, f64)]) -> Vec<f64> {
    let len = capacity as usize + 1;
    let mut weights = vec![0.0f64; len];
    weights[0] = 1.0;
    for m in 1..len {
        let mut acc = 0.0;
        for &(req, load) in demands {
            let req = req as usize;
            if req != 0 && req <= m {
                acc += req as f64 * load * weights[m - req];
            }
        }
        let value = acc / m as f64;
        weights[m] = value;
        if value > 1e250 {
            for w in weights.iter_mut().take(m + 1) {
                *w /= 1e250;
            }
        }
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    weights
}

/// The multiservice reduced-load approximation. Starting from all passing
/// probabilities one, each iteration recomputes every resource's occupancy
/// law under thinned loads and reads off new passing probabilities, until
/// the update is below tolerance.
pub fn reduced_load(
    spec: &NetworkSpec,
    config: &FixedPointConfig,
) -> Result<FixedPointResult, ApproxError> {
    for j in 0..spec.resource_count() {
        let c = spec.capacity(j);
        if c != INFINITE_CAPACITY && c > config.max_single_capacity {
            return Err(ApproxError::CapacityTooLarge {
                resource: j,
                capacity: c,
                cap: config.max_single_capacity,
            });
        }
    }
    let (p, iterations, residual) = reduced_load_from_seed(spec, config, 1.0)?;

    // The fixed point need not be unique; a second seed diagnoses whether
    // another solution is nearby. The reported solution is always the
    // one reached from p = 1.
    let multiplicity_note = match reduced_load_from_seed(spec, config, 0.5) {
        Ok((other, _, _)) => {
            let diff = p
                .iter()
                .flatten()
                .zip(other.iter().flatten())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            (diff > 1e-6).then(|| {
                format!("seed p=0.5 converged to a different fixed point (max diff {diff:.3e})")
            })
        }
        Err(_) => Some("seed p=0.5 failed to converge".to_string()),
    };

    let acceptance: Vec<f64> = (0..spec.class_count())
        .map(|r| (0..spec.resource_count()).map(|j| p[j][r]).product())
        .collect();
    Ok(FixedPointResult {
        passing: PassingProbs::PerResourceClass(p),
        acceptance,
        iterations,
        residual,
        converged: true,
        multiplicity_note,
        expected_usage: None,
    })
}

fn reduced_load_from_seed(
    spec: &NetworkSpec,
    config: &FixedPointConfig,
    seed: f64,
) -> Result<(Vec<Vec<f64>>, usize, f64), ApproxError> {
    let resource_count = spec.resource_count();
    let class_count = spec.class_count();
    let mut p = vec![vec![seed; class_count]; resource_count];
    for (j, row) in p.iter_mut().enumerate() {
        for (r, entry) in row.iter_mut().enumerate() {
            if spec.requirement(j, r) == 0 {
                *entry = 1.0;
            }
        }
    }
    let mut guard = OscillationGuard::new(config.oscillation_window);
    for iteration in 1..=config.max_iterations {
        let mut next = vec![vec![1.0f64; class_count]; resource_count];
        for j in 0..resource_count {
            if spec.capacity(j) == INFINITE_CAPACITY {
                continue;
            }
            let demands: Vec<(u32, f64)> = (0..class_count)
                .filter(|&r| spec.requirement(j, r) > 0)
                .map(|r| {
                    let mut thinned = spec.class(r).offered_load();
                    for k in 0..resource_count {
                        if k != j && spec.requirement(k, r) > 0 {
                            thinned *= p[k][r];
                        }
                    }
                    (spec.requirement(j, r), thinned)
                })
                .collect();
            let occupancy = single_resource_occupancy(spec.capacity(j), &demands);
            for r in 0..class_count {
                let req = spec.requirement(j, r);
                if req == 0 {
                    continue;
                }
                next[j][r] = if req <= spec.capacity(j) {
                    occupancy[..=(spec.capacity(j) - req) as usize].iter().sum()
                } else {
                    0.0
                };
            }
        }
        let residual = p
            .iter()
            .flatten()
            .zip(next.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        let damped = guard.observe(residual);
        for j in 0..resource_count {
            for r in 0..class_count {
                p[j][r] = if damped {
                    config.damping * p[j][r] + (1.0 - config.damping) * next[j][r]
                } else {
                    next[j][r]
                };
            }
        }
        if residual <= config.tolerance {
            return Ok((p, iteration, residual));
        }
    }
    Err(ApproxError::NoConvergence {
        iterations: config.max_iterations,
        residual: f64::NAN,
    })
}

/// The Erlang fixed point approximation, for 0/1 requirement matrices.
/// Unique solution; successive substitution from `p = 1`, damped only if
/// oscillation is detected.
pub fn efpa(
    spec: &NetworkSpec,
    config: &FixedPointConfig,
) -> Result<FixedPointResult, ApproxError> {
    for j in 0..spec.resource_count() {
        for r in 0..spec.class_count() {
            let a = spec.requirement(j, r);
            if a > 1 {
                return Err(ApproxError::NotZeroOne {
                    resource: j,
                    class: r,
                    value: a,
                });
            }
        }
    }

    let resource_count = spec.resource_count();
    let mut p = vec![1.0f64; resource_count];
    let mut guard = OscillationGuard::new(config.oscillation_window);
    for iteration in 1..=config.max_iterations {
        let mut next = vec![1.0f64; resource_count];
        for j in 0..resource_count {
            if spec.capacity(j) == INFINITE_CAPACITY {
                continue;
            }
            let thinned = load_on_resource(spec, j, &p, false);
            next[j] = 1.0 - erlang_b(thinned, spec.capacity(j));
        }
        let residual = p
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        let damped = guard.observe(residual);
        for j in 0..resource_count {
            p[j] = if damped {
                config.damping * p[j] + (1.0 - config.damping) * next[j]
            } else {
                next[j]
            };
        }
        if residual <= config.tolerance {
            let acceptance = acceptance_per_resource(spec, &p);
            return Ok(FixedPointResult {
                passing: PassingProbs::PerResource(p),
                acceptance,
                iterations: iteration,
                residual,
                converged: true,
                multiplicity_note: None,
                expected_usage: None,
            });
        }
    }
    Err(ApproxError::NoConvergence {
        iterations: config.max_iterations,
        residual: f64::NAN,
    })
}
