//! Stationary analysis of the free-capacity chain of a saturated resource.
//!
//! When exactly one capacity constraint binds in the fluid limit, the spare
//! capacity of that resource evolves as a Markov chain on the nonnegative
//! integers: accepting a class-`r` call moves the free capacity down by
//! `A_jr` at rate `nu_r` (gated by the class's acceptance window), a
//! departure moves it up by `A_jr` at rate `mu_r x_r`. The chain's
//! stationary law, when it exists, gives the boundary acceptance rates.
//!
//! The chain is positive recurrent exactly when the asymptotic down drift
//! (from classes whose windows are unbounded above) exceeds the up drift.
//! It is solved on a truncated range, with the truncation level doubled
//! until the tail mass is negligible.

use super::{FluidConfig, FluidError};
use crate::linalg::{gcd, stationary_distribution};

/// One class's transitions in the free-capacity chain.
#[derive(Debug, Clone)]
pub struct ChainClass {
    /// Jump size `A_jr` on the designated resource.
    pub jump: u64,
    /// Effective arrival rate (zero when the class is gated off by a
    /// bounded window at some slack resource).
    pub arrival_rate: f64,
    /// Acceptance window on this resource's free capacity.
    pub window_lo: u64,
    pub window_hi: Option<u64>,
    /// Upward rate `mu_r x_r`.
    pub departure_rate: f64,
}

/// Transition structure of the chain, before truncation.
#[derive(Debug, Clone)]
pub struct ChainSpec {
    pub classes: Vec<ChainClass>,
}

impl ChainSpec {
    /// Asymptotic down drift: only classes accepted at arbitrarily large
    /// free capacity keep pulling the chain down.
    pub fn down_drift(&self) -> f64 {
        self.classes
            .iter()
            .filter(|c| c.window_hi.is_none())
            .map(|c| c.arrival_rate * c.jump as f64)
            .sum()
    }

    /// Asymptotic up drift from departures.
    pub fn up_drift(&self) -> f64 {
        self.classes
            .iter()
            .map(|c| c.departure_rate * c.jump as f64)
            .sum()
    }

    /// Whether a stationary distribution exists (strictly negative drift
    /// of the free capacity at large values).
    pub fn is_ergodic(&self) -> bool {
        self.down_drift() > self.up_drift()
    }

    fn max_jump(&self) -> u64 {
        self.classes.iter().map(|c| c.jump).max().unwrap_or(1)
    }

    fn largest_finite_window(&self) -> u64 {
        self.classes
            .iter()
            .filter_map(|c| c.window_hi)
            .chain(self.classes.iter().map(|c| c.window_lo))
            .max()
            .unwrap_or(0)
    }

    /// Total down rate out of a level.
    fn down_rate_at(&self, level: u64) -> f64 {
        self.classes
            .iter()
            .filter(|c| {
                c.arrival_rate > 0.0
                    && level >= c.window_lo
                    && c.window_hi.map_or(true, |h| level <= h)
            })
            .map(|c| c.arrival_rate)
            .sum()
    }

    /// Highest level `b` such that no down transition from a level `>= b`
    /// lands below `b`; everything below is transient.
    fn barrier(&self, truncation: u64) -> u64 {
        let mut barrier = 0;
        for b in 1..=truncation {
            let crossed = self.classes.iter().any(|c| {
                if c.arrival_rate == 0.0 {
                    return false;
                }
                // A state in [b, b + jump - 1] inside the window jumps below b.
                let lo = c.window_lo.max(b);
                let hi_candidate = b + c.jump - 1;
                let hi = c.window_hi.map_or(hi_candidate, |h| h.min(hi_candidate));
                lo <= hi
            });
            if !crossed {
                barrier = b;
            }
        }
        barrier
    }
}

/// Stationary law of a truncated free-capacity chain.
#[derive(Debug, Clone)]
pub struct SolvedChain {
    /// Lowest retained level.
    pub start: u64,
    /// Lattice step between retained levels (gcd of the jump sizes).
    pub step: u64,
    /// Truncation level actually used.
    pub truncation: u64,
    probs: Vec<f64>,
}

impl SolvedChain {
    /// Stationary mass of a window `[lo, hi]` on free capacity.
    pub fn window_mass(&self, lo: u64, hi: Option<u64>) -> f64 {
        self.levels()
            .zip(&self.probs)
            .filter(|(level, _)| *level >= lo && hi.map_or(true, |h| *level <= h))
            .map(|(_, p)| p)
            .sum()
    }

    pub fn levels(&self) -> impl Iterator<Item = u64> + '_ {
        let (start, step, n) = (self.start, self.step, self.probs.len());
        (0..n).map(move |i| start + step * i as u64)
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn mean_level(&self) -> f64 {
        self.levels()
            .zip(&self.probs)
            .map(|(level, p)| level as f64 * p)
            .sum()
    }
}

/// Solves the chain by truncation, doubling the level until the tail mass
/// bound holds. Returns `None` when no stationary distribution exists.
pub fn solve_chain(
    chain: &ChainSpec,
    resource: usize,
    initial_truncation: u64,
    config: &FluidConfig,
) -> Result<Option<SolvedChain>, FluidError> {
    if !chain.is_ergodic() {
        return Ok(None);
    }
    if chain.up_drift() == 0.0 {
        // All mass collapses onto the lowest reachable levels; with zero up
        // drift the fluid boundary cannot be meaningfully occupied.
        return Err(FluidError::DegenerateChain { resource });
    }

    let floor = chain.largest_finite_window() + 2 * chain.max_jump() + 8;
    let mut truncation = initial_truncation.max(floor).max(64);
    loop {
        let solved = solve_truncated(chain, resource, truncation)?;
        let midpoint = solved.start + (truncation - solved.start) / 2;
        let tail: f64 = solved
            .levels()
            .zip(solved.probabilities())
            .filter(|(level, _)| *level > midpoint)
            .map(|(_, p)| p)
            .sum();
        if tail <= config.tail_tolerance {
            return Ok(Some(solved));
        }
        if truncation >= config.max_truncation {
            return Err(FluidError::TruncationFailure {
                resource,
                level: truncation,
                tail_mass: tail,
            });
        }
        truncation = (truncation * 2).min(config.max_truncation);
    }
}

fn solve_truncated(
    chain: &ChainSpec,
    resource: usize,
    truncation: u64,
) -> Result<SolvedChain, FluidError> {
    let barrier = chain.barrier(truncation);

    // Jumps confine the chain to a sublattice; anchor it at multiples of the
    // gcd (free capacity is C N minus a lattice combination of jumps, and the
    // scaling sequence can always be chosen with C N divisible by the gcd).
    let step = chain
        .classes
        .iter()
        .filter(|c| c.arrival_rate > 0.0 || c.departure_rate > 0.0)
        .map(|c| c.jump)
        .fold(0, gcd)
        .max(1);
    let mut start = barrier;
    if start % step != 0 {
        start += step - start % step;
    }
    if start > truncation {
        return Err(FluidError::DegenerateChain { resource });
    }
    let count = ((truncation - start) / step + 1) as usize;
    let level_of = |i: usize| start + step * i as u64;

    let unit_jumps = chain.classes.iter().all(|c| c.jump == step);
    let probs = if unit_jumps {
        // Birth-death closed form with on-the-fly rescaling.
        let up: f64 = chain.classes.iter().map(|c| c.departure_rate).sum();
        let mut weights = vec![0.0f64; count];
        weights[0] = 1.0;
        for i in 1..count {
            let down = chain.down_rate_at(level_of(i));
            debug_assert!(down > 0.0, "barrier cut leaves positive down rates");
            let w = weights[i - 1] * up / down;
            weights[i] = w;
            if w > 1e250 {
                for entry in weights.iter_mut().take(i + 1) {
                    *entry /= 1e250;
                }
            }
        }
        let total: f64 = weights.iter().sum();
        weights.into_iter().map(|w| w / total).collect()
    } else {
        let mut transitions: Vec<(usize, usize, f64)> = Vec::new();
        for i in 0..count {
            let level = level_of(i);
            for class in &chain.classes {
                let hop = (class.jump / step) as usize;
                if class.arrival_rate > 0.0
                    && level >= class.window_lo
                    && class.window_hi.map_or(true, |h| level <= h)
                {
                    debug_assert!(i >= hop, "barrier cut prevents down-crossings");
                    transitions.push((i, i - hop, class.arrival_rate));
                }
                if class.departure_rate > 0.0 && i + hop < count {
                    transitions.push((i, i + hop, class.departure_rate));
                }
            }
        }
        let (probs, residual) = stationary_distribution(count, &transitions, 0)
            .map_err(|source| FluidError::ChainSolve { resource, source })?;
        if residual > 1e-9 {
            return Err(FluidError::ChainSolve {
                resource,
                source: crate::linalg::LinalgError::PoorResidual {
                    residual,
                    tolerance: 1e-9,
                },
            });
        }
        probs
    };

    Ok(SolvedChain {
        start,
        step,
        truncation,
        probs,
    })
}
