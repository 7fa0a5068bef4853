//! Discrete-event simulation of loss networks.
//!
//! Event-driven and exact: per-class Poisson arrival streams are interleaved
//! through an event heap, holding times are sampled per call, and capacity
//! constraints are asserted at every event. Three topologies are supported:
//! an arbitrary network under any admission policy, the fully connected
//! network with two-link alternative routing (fixed, DAR or least-busy
//! routing, with trunk reservation protecting direct traffic), and the
//! symmetric star network.
//!
//! Everything is reproducible: a replication is fully determined by its
//! inputs and seed, and experiment replications draw their seeds from the
//! master seed by a fixed splitting rule.

mod engine;
mod routed;

pub use engine::run_generic;
pub use routed::{dar_route, lba_route, RouteDecision};

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::model::{AdmissionPolicy, NetworkSpec, PolicyError};

/// Random generator identity recorded in every result for reproducibility.
pub const GENERATOR_ID: &str = "chacha12; replication seeds via splitmix64(master + (i+1)*0x9e3779b97f4a7c15)";

/// Simulated system layout.
#[derive(Debug, Clone)]
pub enum Topology {
    /// Any network spec; admission decided by the supplied policy.
    Generic(NetworkSpec),
    /// `nodes` nodes, one link of the given capacity per node pair; calls
    /// arrive per pair at `pair_arrival_rate` and hold at unit requirement.
    FullyConnected {
        nodes: usize,
        capacity: u32,
        pair_arrival_rate: f64,
        service_rate: f64,
    },
    /// `links` identical links; a size-`s` call seizes one unit on `s`
    /// distinct links chosen uniformly at random.
    Star {
        links: usize,
        capacity: u32,
        traffic: Vec<StarTraffic>,
    },
}

/// One call-size stream of the star network. `arrival_rate_per_link` is the
/// total offered rate each link sees from this stream.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StarTraffic {
    pub size: usize,
    pub arrival_rate_per_link: f64,
    pub service_rate: f64,
}

impl Topology {
    /// Number of statistics classes: call classes, node pairs, or sizes.
    pub fn class_count(&self) -> usize {
        match self {
            Topology::Generic(spec) => spec.class_count(),
            Topology::FullyConnected { nodes, .. } => nodes * (nodes - 1) / 2,
            Topology::Star { traffic, .. } => traffic.len(),
        }
    }

    /// Offered load per statistics class.
    pub fn offered_loads(&self) -> Vec<f64> {
        match self {
            Topology::Generic(spec) => spec.offered_loads(),
            Topology::FullyConnected {
                nodes,
                pair_arrival_rate,
                service_rate,
                ..
            } => vec![pair_arrival_rate / service_rate; nodes * (nodes - 1) / 2],
            Topology::Star { links, traffic, .. } => traffic
                .iter()
                .map(|t| t.arrival_rate_per_link * *links as f64 / t.size as f64 / t.service_rate)
                .collect(),
        }
    }
}

/// Routing discipline of the fully connected network.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum RoutingPolicy {
    /// Direct link only.
    Fixed,
    /// Dynamic alternative routing: one preferred two-link alternative per
    /// pair, resampled uniformly at random on rejection. Alternative routes
    /// need `reservation + 1` free circuits on both links.
    Dar { reservation: u32 },
    /// Least busy alternative: the transit node minimising the maximum
    /// occupancy of the two links, ties to the lowest index.
    Lba { reservation: u32 },
}

/// Holding-time family; every variant has mean exactly `1 / mu_r`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum HoldingTime {
    Exponential,
    Deterministic,
    /// Mixture of two exponential phases in normalized (unit-mean) form,
    /// scaled by the class mean: requires `p/rate_fast + (1-p)/rate_slow = 1`.
    HyperExponential {
        p_fast: f64,
        rate_fast: f64,
        rate_slow: f64,
    },
}

impl HoldingTime {
    pub fn validate(&self) -> Result<(), SimError> {
        if let HoldingTime::HyperExponential {
            p_fast,
            rate_fast,
            rate_slow,
        } = self
        {
            if !(0.0..=1.0).contains(p_fast) || *rate_fast <= 0.0 || *rate_slow <= 0.0 {
                return Err(SimError::HoldingNotUnitMean { mean: f64::NAN });
            }
            let mean = p_fast / rate_fast + (1.0 - p_fast) / rate_slow;
            if (mean - 1.0).abs() > 1e-9 {
                return Err(SimError::HoldingNotUnitMean { mean });
            }
        }
        Ok(())
    }

    /// Samples one holding time for a class with the given service rate.
    pub fn sample(&self, service_rate: f64, rng: &mut impl Rng) -> f64 {
        let mean = 1.0 / service_rate;
        match self {
            HoldingTime::Exponential => mean * exponential(rng),
            HoldingTime::Deterministic => mean,
            HoldingTime::HyperExponential {
                p_fast,
                rate_fast,
                rate_slow,
            } => {
                let duration = if rng.gen::<f64>() < *p_fast {
                    exponential(rng) / rate_fast
                } else {
                    exponential(rng) / rate_slow
                };
                mean * duration
            }
        }
    }
}

/// Unit-rate exponential variate.
fn exponential(rng: &mut impl Rng) -> f64 {
    let u: f64 = rng.gen();
    -(1.0 - u).ln()
}

/// Statistic a run can histogram, time-weighted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StatisticKind {
    /// Calls of one class in progress.
    ClassCount(usize),
    /// Busy circuits of one resource (link).
    ResourceOccupancy(usize),
    /// Alternatively-routed calls in progress (fully connected only).
    AlternativeCalls,
}

/// Time-weighted histogram over integer values of the designated statistic.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub statistic: StatisticKind,
    /// `(value, fraction of observed time)` sorted by value.
    pub bins: Vec<(u64, f64)>,
}

impl Histogram {
    /// Value with the largest time weight (ties to the smallest value).
    pub fn mode(&self) -> Option<u64> {
        self.bins
            .iter()
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(b.0.cmp(&a.0)))
            .map(|(v, _)| *v)
    }

    /// CSV export with header `bin_lo,bin_hi,weight`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,weight\n");
        for (value, weight) in &self.bins {
            out.push_str(&format!("{},{},{}\n", value, value + 1, weight));
        }
        out
    }

    pub(crate) fn from_weights(statistic: StatisticKind, weights: &[f64], total: f64) -> Self {
        let bins = weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > 0.0)
            .map(|(v, w)| (v as u64, w / total))
            .collect();
        Histogram { statistic, bins }
    }
}

/// Per-class counts and estimates of one run or one aggregated experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimStats {
    pub offered: Vec<u64>,
    pub accepted: Vec<u64>,
    pub blocked: Vec<u64>,
    pub time_average_occupancy: Vec<f64>,
    /// Acceptance probability estimate per class: accepted over offered, or
    /// the time average of the admission indicator when nothing was offered.
    pub acceptance_estimate: Vec<f64>,
    /// 95% half-widths across replications; absent for a single run.
    pub acceptance_half_width: Vec<Option<f64>>,
    pub direct_routed: Vec<u64>,
    pub alternative_routed: Vec<u64>,
    pub replication_seeds: Vec<u64>,
    pub warmup: f64,
    pub horizon: f64,
    pub generator: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub histogram: Option<Histogram>,
}

impl SimStats {
    pub fn class_count(&self) -> usize {
        self.offered.len()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("stats serialization cannot fail")
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("horizon {horizon} must exceed warmup {warmup} >= 0")]
    InvalidHorizon { warmup: f64, horizon: f64 },
    #[error("experiments need at least 2 replications, got {got}")]
    TooFewReplications { got: usize },
    #[error("alternative routing requires the fully connected topology")]
    RoutingNeedsFullyConnected,
    #[error("admission policies apply to the generic topology only")]
    PolicyNotSupported,
    #[error("hyperexponential phases have mean {mean}, expected 1")]
    HoldingNotUnitMean { mean: f64 },
    #[error("instrumented statistic refers to class/resource {index} outside the topology")]
    InstrumentOutOfRange { index: usize },
    #[error("initial state is infeasible or has wrong dimension")]
    BadInitialState,
    #[error("fully connected topology needs at least 3 nodes, got {nodes}")]
    TooFewNodes { nodes: usize },
    #[error("star call size {size} exceeds the number of links {links}")]
    OversizedStarCall { size: usize, links: usize },
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

/// Everything that defines a replication except its seed.
#[derive(Debug, Clone)]
pub struct SimInputs<'a> {
    pub topology: &'a Topology,
    pub policy: &'a AdmissionPolicy,
    pub routing: &'a RoutingPolicy,
    pub holding: &'a HoldingTime,
    pub warmup: f64,
    pub horizon: f64,
    /// Starting occupancy (generic topology only); empty network otherwise.
    pub initial_state: Option<&'a [u32]>,
    pub instrument: Option<StatisticKind>,
}

impl<'a> SimInputs<'a> {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.warmup >= 0.0 && self.horizon > self.warmup) {
            return Err(SimError::InvalidHorizon {
                warmup: self.warmup,
                horizon: self.horizon,
            });
        }
        self.holding.validate()?;
        match self.topology {
            Topology::Generic(spec) => {
                self.policy.validate_for(spec)?;
                if !matches!(self.routing, RoutingPolicy::Fixed) {
                    return Err(SimError::RoutingNeedsFullyConnected);
                }
                if let Some(n0) = self.initial_state {
                    if n0.len() != spec.class_count()
                        || !spec
                            .is_feasible(&crate::model::OccupancyVector(n0.to_vec()))
                            .unwrap_or(false)
                    {
                        return Err(SimError::BadInitialState);
                    }
                }
                if let Some(kind) = self.instrument {
                    let (index, cap) = match kind {
                        StatisticKind::ClassCount(r) => (r, spec.class_count()),
                        StatisticKind::ResourceOccupancy(j) => (j, spec.resource_count()),
                        StatisticKind::AlternativeCalls => {
                            return Err(SimError::RoutingNeedsFullyConnected)
                        }
                    };
                    if index >= cap {
                        return Err(SimError::InstrumentOutOfRange { index });
                    }
                }
            }
            Topology::FullyConnected { nodes, .. } => {
                if *nodes < 3 {
                    return Err(SimError::TooFewNodes { nodes: *nodes });
                }
                if !matches!(self.policy, AdmissionPolicy::Uncontrolled) {
                    return Err(SimError::PolicyNotSupported);
                }
                if self.initial_state.is_some() {
                    return Err(SimError::BadInitialState);
                }
            }
            Topology::Star { links, traffic, .. } => {
                if !matches!(self.routing, RoutingPolicy::Fixed) {
                    return Err(SimError::RoutingNeedsFullyConnected);
                }
                if !matches!(self.policy, AdmissionPolicy::Uncontrolled) {
                    return Err(SimError::PolicyNotSupported);
                }
                for t in traffic {
                    if t.size == 0 || t.size > *links {
                        return Err(SimError::OversizedStarCall {
                            size: t.size,
                            links: *links,
                        });
                    }
                }
                if self.initial_state.is_some() {
                    return Err(SimError::BadInitialState);
                }
            }
        }
        Ok(())
    }
}

/// One simulation run, fully determined by `(inputs, seed)`.
pub fn run_replication(inputs: &SimInputs, seed: u64) -> Result<SimStats, SimError> {
    inputs.validate()?;
    engine::dispatch(inputs, seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Seed of replication `index` under a master seed.
pub fn replication_seed(master: u64, index: usize) -> u64 {
    splitmix64(master.wrapping_add(0x9e3779b97f4a7c15u64.wrapping_mul(index as u64 + 1)))
}

/// Two-sided 97.5% Student-t quantiles for small samples, indexed by
/// degrees of freedom; beyond the table the normal quantile is used.
const T_975: [f64; 30] = [
    12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228, 2.201, 2.179, 2.160,
    2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064, 2.060, 2.056,
    2.052, 2.048, 2.045, 2.042,
];

pub(crate) fn t_quantile_975(df: usize) -> f64 {
    match df {
        0 => f64::INFINITY,
        1..=30 => T_975[df - 1],
        31..=40 => 2.042 - (2.042 - 2.021) * (df - 30) as f64 / 10.0,
        41..=60 => 2.021 - (2.021 - 2.000) * (df - 40) as f64 / 20.0,
        61..=120 => 2.000 - (2.000 - 1.980) * (df - 60) as f64 / 60.0,
        _ => 1.959964,
    }
}

/// Runs independent replications and aggregates: counts are summed, time
/// averages averaged, and per-class acceptance estimates get a 95%
/// confidence half-width across replications. Aggregation only depends on
/// the replication index order, never on completion order.
pub fn run_experiment(
    inputs: &SimInputs,
    master_seed: u64,
    replications: usize,
) -> Result<SimStats, SimError> {
    if replications < 2 {
        return Err(SimError::TooFewReplications { got: replications });
    }
    inputs.validate()?;

    let mut runs = Vec::with_capacity(replications);
    for i in 0..replications {
        runs.push(run_replication(inputs, replication_seed(master_seed, i))?);
    }

    let classes = runs[0].class_count();
    let mut stats = SimStats {
        offered: vec![0; classes],
        accepted: vec![0; classes],
        blocked: vec![0; classes],
        time_average_occupancy: vec![0.0; classes],
        acceptance_estimate: vec![0.0; classes],
        acceptance_half_width: vec![None; classes],
        direct_routed: vec![0; classes],
        alternative_routed: vec![0; classes],
        replication_seeds: runs.iter().flat_map(|r| r.replication_seeds.clone()).collect(),
        warmup: inputs.warmup,
        horizon: inputs.horizon,
        generator: GENERATOR_ID.to_string(),
        histogram: None,
    };
    for run in &runs {
        for r in 0..classes {
            stats.offered[r] += run.offered[r];
            stats.accepted[r] += run.accepted[r];
            stats.blocked[r] += run.blocked[r];
            stats.time_average_occupancy[r] +=
                run.time_average_occupancy[r] / replications as f64;
            stats.direct_routed[r] += run.direct_routed[r];
            stats.alternative_routed[r] += run.alternative_routed[r];
        }
    }
    for r in 0..classes {
        let samples: Vec<f64> = runs.iter().map(|run| run.acceptance_estimate[r]).collect();
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let variance = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
        stats.acceptance_estimate[r] = mean;
        stats.acceptance_half_width[r] =
            Some(t_quantile_975(samples.len() - 1) * (variance / n).sqrt());
    }

    // Merge histograms by total time weight (equal horizons, equal weights).
    if let Some(kind) = inputs.instrument {
        let mut merged: Vec<f64> = Vec::new();
        for run in &runs {
            if let Some(h) = &run.histogram {
                for &(value, weight) in &h.bins {
                    let idx = value as usize;
                    if idx >= merged.len() {
                        merged.resize(idx + 1, 0.0);
                    }
                    merged[idx] += weight;
                }
            }
        }
        stats.histogram = Some(Histogram::from_weights(
            kind,
            &merged,
            replications as f64,
        ));
    }
    Ok(stats)
}

/// The run's time-weighted histogram of the designated statistic.
pub fn occupancy_histogram(stats: &SimStats) -> Option<&Histogram> {
    stats.histogram.as_ref()
}
