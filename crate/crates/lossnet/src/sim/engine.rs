//! Event loop scaffolding and the generic-topology engine.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use super::routed;
use super::{
    exponential, Histogram, SimError, SimInputs, SimStats, StatisticKind, Topology, GENERATOR_ID,
};
use crate::model::INFINITE_CAPACITY;

/// Queued event; orders by `(time, sequence)` so simultaneous events fire
/// in scheduling order.
pub(super) struct Queued<K> {
    pub time: f64,
    seq: u64,
    pub kind: K,
}

impl<K> PartialEq for Queued<K> {
    fn eq(&self, other: &Self) -> bool {
        self.time == other.time && self.seq == other.seq
    }
}
impl<K> Eq for Queued<K> {}
impl<K> PartialOrd for Queued<K> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<K> Ord for Queued<K> {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed for the max-heap: the earliest event pops first.
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

pub(super) struct EventQueue<K> {
    heap: BinaryHeap<Queued<K>>,
    next_seq: u64,
}

impl<K> EventQueue<K> {
    pub fn new() -> Self {
        EventQueue {
            heap: BinaryHeap::new(),
            next_seq: 0,
        }
    }

    pub fn schedule(&mut self, time: f64, kind: K) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Queued { time, seq, kind });
    }

    pub fn pop(&mut self) -> Option<Queued<K>> {
        self.heap.pop()
    }
}

/// Time-weighted accumulation of per-class statistics over `[warmup, horizon]`.
pub(super) struct Collector {
    warmup: f64,
    horizon: f64,
    pub offered: Vec<u64>,
    pub accepted: Vec<u64>,
    pub blocked: Vec<u64>,
    pub direct: Vec<u64>,
    pub alternative: Vec<u64>,
    occupancy_integral: Vec<f64>,
    admit_integral: Vec<f64>,
    instrument: Option<StatisticKind>,
    histogram_weights: Vec<f64>,
}

impl Collector {
    pub fn new(classes: usize, warmup: f64, horizon: f64, instrument: Option<StatisticKind>) -> Self {
        Collector {
            warmup,
            horizon,
            offered: vec![0; classes],
            accepted: vec![0; classes],
            blocked: vec![0; classes],
            direct: vec![0; classes],
            alternative: vec![0; classes],
            occupancy_integral: vec![0.0; classes],
            admit_integral: vec![0.0; classes],
            instrument,
            histogram_weights: Vec::new(),
        }
    }

    pub fn counts(&self, time: f64) -> bool {
        time >= self.warmup
    }

    /// Accumulates the piecewise-constant state over `[from, to)`.
    pub fn advance(
        &mut self,
        from: f64,
        to: f64,
        in_progress: &[u32],
        admissible: &[f64],
        statistic_value: u64,
    ) {
        let lo = from.max(self.warmup);
        let hi = to.min(self.horizon);
        if hi <= lo {
            return;
        }
        let dt = hi - lo;
        for (acc, &n) in self.occupancy_integral.iter_mut().zip(in_progress) {
            *acc += dt * f64::from(n);
        }
        for (acc, &a) in self.admit_integral.iter_mut().zip(admissible) {
            *acc += dt * a;
        }
        if self.instrument.is_some() {
            let idx = statistic_value as usize;
            if idx >= self.histogram_weights.len() {
                self.histogram_weights.resize(idx + 1, 0.0);
            }
            self.histogram_weights[idx] += dt;
        }
    }

    pub fn finish(self, seed: u64, warmup: f64, horizon: f64) -> SimStats {
        let span = horizon - warmup;
        let classes = self.offered.len();
        let mut acceptance = vec![0.0; classes];
        for r in 0..classes {
            acceptance[r] = if self.offered[r] > 0 {
                self.accepted[r] as f64 / self.offered[r] as f64
            } else {
                self.admit_integral[r] / span
            };
        }
        let histogram = self
            .instrument
            .map(|kind| Histogram::from_weights(kind, &self.histogram_weights, span));
        SimStats {
            offered: self.offered,
            accepted: self.accepted,
            blocked: self.blocked,
            time_average_occupancy: self
                .occupancy_integral
                .iter()
                .map(|v| v / span)
                .collect(),
            acceptance_estimate: acceptance,
            acceptance_half_width: vec![None; classes],
            direct_routed: self.direct,
            alternative_routed: self.alternative,
            replication_seeds: vec![seed],
            warmup,
            horizon,
            generator: GENERATOR_ID.to_string(),
            histogram,
        }
    }
}

pub(super) fn dispatch(inputs: &SimInputs, seed: u64) -> Result<SimStats, SimError> {
    match inputs.topology {
        Topology::Generic(spec) => run_generic_inner(spec, inputs, seed),
        Topology::FullyConnected { .. } => routed::run_fully_connected(inputs, seed),
        Topology::Star { .. } => routed::run_star(inputs, seed),
    }
}

/// Simulation of an arbitrary network under an admission policy.
pub fn run_generic(inputs: &SimInputs, seed: u64) -> Result<SimStats, SimError> {
    inputs.validate()?;
    match inputs.topology {
        Topology::Generic(spec) => run_generic_inner(spec, inputs, seed),
        _ => Err(SimError::PolicyNotSupported),
    }
}

enum GenericEvent {
    Arrival { class: usize },
    Departure { class: usize },
}

fn run_generic_inner(
    spec: &crate::model::NetworkSpec,
    inputs: &SimInputs,
    seed: u64,
) -> Result<SimStats, SimError> {
    let classes = spec.class_count();
    let resources = spec.resource_count();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut queue: EventQueue<GenericEvent> = EventQueue::new();
    let mut collector = Collector::new(classes, inputs.warmup, inputs.horizon, inputs.instrument);

    let mut in_progress: Vec<u32> = match inputs.initial_state {
        Some(n0) => n0.to_vec(),
        None => vec![0; classes],
    };
    let mut used: Vec<u64> = (0..resources)
        .map(|j| {
            (0..classes)
                .map(|r| u64::from(spec.requirement(j, r)) * u64::from(in_progress[r]))
                .sum()
        })
        .collect();

    // Initial calls depart with fresh holding times sampled at time zero.
    for r in 0..classes {
        for _ in 0..in_progress[r] {
            let holding = inputs.holding.sample(spec.class(r).service_rate, &mut rng);
            queue.schedule(holding, GenericEvent::Departure { class: r });
        }
    }
    for r in 0..classes {
        let rate = spec.class(r).arrival_rate;
        if rate > 0.0 {
            queue.schedule(exponential(&mut rng) / rate, GenericEvent::Arrival { class: r });
        }
    }

    let free_of = |used: &[u64]| -> Vec<i64> {
        (0..resources)
            .map(|j| {
                if spec.capacity(j) == INFINITE_CAPACITY {
                    i64::MAX
                } else {
                    i64::from(spec.capacity(j)) - used[j] as i64
                }
            })
            .collect()
    };
    let statistic_value =
        |in_progress: &[u32], used: &[u64]| -> u64 {
            match inputs.instrument {
                Some(StatisticKind::ClassCount(r)) => u64::from(in_progress[r]),
                Some(StatisticKind::ResourceOccupancy(j)) => used[j],
                _ => 0,
            }
        };

    let mut now = 0.0f64;
    let mut admissible: Vec<f64> = {
        let free = free_of(&used);
        (0..classes)
            .map(|r| f64::from(u8::from(spec.admits_free(inputs.policy, &free, r))))
            .collect()
    };

    while let Some(event) = queue.pop() {
        if event.time > inputs.horizon {
            break;
        }
        collector.advance(
            now,
            event.time,
            &in_progress,
            &admissible,
            statistic_value(&in_progress, &used),
        );
        now = event.time;
        match event.kind {
            GenericEvent::Arrival { class } => {
                let free = free_of(&used);
                let admitted = spec.admits_free(inputs.policy, &free, class);
                if collector.counts(now) {
                    collector.offered[class] += 1;
                    if admitted {
                        collector.accepted[class] += 1;
                        collector.direct[class] += 1;
                    } else {
                        collector.blocked[class] += 1;
                    }
                }
                if admitted {
                    in_progress[class] += 1;
                    for j in 0..resources {
                        used[j] += u64::from(spec.requirement(j, class));
                    }
                    let holding = inputs
                        .holding
                        .sample(spec.class(class).service_rate, &mut rng);
                    queue.schedule(now + holding, GenericEvent::Departure { class });
                }
                let rate = spec.class(class).arrival_rate;
                queue.schedule(now + exponential(&mut rng) / rate, GenericEvent::Arrival {
                    class,
                });
            }
            GenericEvent::Departure { class } => {
                debug_assert!(in_progress[class] > 0);
                in_progress[class] -= 1;
                for j in 0..resources {
                    used[j] -= u64::from(spec.requirement(j, class));
                }
            }
        }
        debug_assert!((0..resources).all(|j| {
            spec.capacity(j) == INFINITE_CAPACITY || used[j] <= u64::from(spec.capacity(j))
        }));
        let free = free_of(&used);
        for r in 0..classes {
            admissible[r] = f64::from(u8::from(spec.admits_free(inputs.policy, &free, r)));
        }
    }
    collector.advance(
        now,
        inputs.horizon,
        &in_progress,
        &admissible,
        statistic_value(&in_progress, &used),
    );
    Ok(collector.finish(seed, inputs.warmup, inputs.horizon))
}
