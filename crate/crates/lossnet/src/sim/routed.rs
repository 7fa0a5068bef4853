//! Fully connected networks with two-link alternative routing, and the
//! symmetric star network.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use super::engine::{Collector, EventQueue};
use super::{exponential, RoutingPolicy, SimError, SimInputs, SimStats, StatisticKind, Topology};

/// Index of the link joining nodes `u < v` in lexicographic pair order.
pub fn link_index(nodes: usize, u: usize, v: usize) -> usize {
    debug_assert!(u < v && v < nodes);
    u * (2 * nodes - u - 1) / 2 + (v - u - 1)
}

/// Pair `(u, v)` of a class index, inverse of [`link_index`].
pub fn pair_of(nodes: usize, mut index: usize) -> (usize, usize) {
    for u in 0..nodes {
        let row = nodes - u - 1;
        if index < row {
            return (u, u + 1 + index);
        }
        index -= row;
    }
    unreachable!("pair index out of range")
}

/// View of the link occupancies used by the routing decisions.
pub struct LinkState<'a> {
    pub nodes: usize,
    pub capacity: u32,
    pub occupancy: &'a [u32],
}

impl LinkState<'_> {
    fn free(&self, u: usize, v: usize) -> u32 {
        let (a, b) = if u < v { (u, v) } else { (v, u) };
        self.capacity - self.occupancy[link_index(self.nodes, a, b)]
    }
}

/// Outcome of a routing decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RouteDecision {
    Direct,
    /// Route over the two links through this transit node.
    Alternative { transit: usize },
    Reject,
}

/// Dynamic alternative routing: direct if one circuit is free; otherwise the
/// current preferred two-link alternative, provided both its links keep
/// `reservation` circuits after accepting; otherwise reject (on rejection
/// the caller draws a fresh preferred alternative uniformly at random).
pub fn dar_route(
    state: &LinkState,
    u: usize,
    v: usize,
    preferred: usize,
    reservation: u32,
) -> RouteDecision {
    if state.free(u, v) >= 1 {
        return RouteDecision::Direct;
    }
    if state.free(u, preferred) >= reservation + 1 && state.free(preferred, v) >= reservation + 1 {
        return RouteDecision::Alternative { transit: preferred };
    }
    RouteDecision::Reject
}

/// Least busy alternative: direct if possible, else the transit node
/// minimising the maximum occupancy of its two links (ties to the lowest
/// node index), accepted only if both links keep `reservation` circuits.
pub fn lba_route(state: &LinkState, u: usize, v: usize, reservation: u32) -> RouteDecision {
    if state.free(u, v) >= 1 {
        return RouteDecision::Direct;
    }
    let best = (0..state.nodes)
        .filter(|&w| w != u && w != v)
        .min_by_key(|&w| {
            (state.capacity - state.free(u, w)).max(state.capacity - state.free(w, v))
        });
    match best {
        Some(w) if state.free(u, w) >= reservation + 1 && state.free(w, v) >= reservation + 1 => {
            RouteDecision::Alternative { transit: w }
        }
        _ => RouteDecision::Reject,
    }
}

/// Uniform draw of a transit node for a pair, over all other nodes.
pub(super) fn resample_preferred(
    rng: &mut impl Rng,
    nodes: usize,
    u: usize,
    v: usize,
) -> usize {
    let pick = rng.gen_range(0..nodes - 2);
    (0..nodes).filter(|&w| w != u && w != v).nth(pick).unwrap()
}

enum PairEvent {
    Arrival { pair: usize },
    Departure { pair: usize, links: (usize, Option<usize>) },
}

pub(super) fn run_fully_connected(inputs: &SimInputs, seed: u64) -> Result<SimStats, SimError> {
    let (nodes, capacity, pair_rate, service_rate) = match inputs.topology {
        Topology::FullyConnected {
            nodes,
            capacity,
            pair_arrival_rate,
            service_rate,
        } => (*nodes, *capacity, *pair_arrival_rate, *service_rate),
        _ => unreachable!("dispatched on topology"),
    };
    let pairs = nodes * (nodes - 1) / 2;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut queue: EventQueue<PairEvent> = EventQueue::new();
    let mut collector = Collector::new(pairs, inputs.warmup, inputs.horizon, inputs.instrument);

    let mut occupancy = vec![0u32; pairs];
    let mut in_progress = vec![0u32; pairs];
    let mut alternative_calls: u64 = 0;
    // Preferred alternative per pair, initially the lowest third node.
    let mut preferred: Vec<usize> = (0..pairs)
        .map(|p| {
            let (u, v) = pair_of(nodes, p);
            (0..nodes).find(|&w| w != u && w != v).unwrap()
        })
        .collect();

    if pair_rate > 0.0 {
        for pair in 0..pairs {
            queue.schedule(exponential(&mut rng) / pair_rate, PairEvent::Arrival { pair });
        }
    }

    let admissible_now = |occupancy: &[u32], preferred: &[usize]| -> Vec<f64> {
        (0..pairs)
            .map(|p| {
                let (u, v) = pair_of(nodes, p);
                let state = LinkState {
                    nodes,
                    capacity,
                    occupancy,
                };
                let decision = match inputs.routing {
                    RoutingPolicy::Fixed => {
                        if state.free(u, v) >= 1 {
                            RouteDecision::Direct
                        } else {
                            RouteDecision::Reject
                        }
                    }
                    RoutingPolicy::Dar { reservation } => {
                        dar_route(&state, u, v, preferred[p], *reservation)
                    }
                    RoutingPolicy::Lba { reservation } => lba_route(&state, u, v, *reservation),
                };
                f64::from(u8::from(decision != RouteDecision::Reject))
            })
            .collect()
    };
    let statistic_value = |in_progress: &[u32], occupancy: &[u32], alternative: u64| -> u64 {
        match inputs.instrument {
            Some(StatisticKind::ClassCount(p)) => u64::from(in_progress[p]),
            Some(StatisticKind::ResourceOccupancy(l)) => u64::from(occupancy[l]),
            Some(StatisticKind::AlternativeCalls) => alternative,
            None => 0,
        }
    };

    let mut now = 0.0f64;
    let mut admissible = admissible_now(&occupancy, &preferred);
    while let Some(event) = queue.pop() {
        if event.time > inputs.horizon {
            break;
        }
        collector.advance(
            now,
            event.time,
            &in_progress,
            &admissible,
            statistic_value(&in_progress, &occupancy, alternative_calls),
        );
        now = event.time;
        match event.kind {
            PairEvent::Arrival { pair } => {
                let (u, v) = pair_of(nodes, pair);
                let decision = {
                    let state = LinkState {
                        nodes,
                        capacity,
                        occupancy: &occupancy,
                    };
                    match inputs.routing {
                        RoutingPolicy::Fixed => {
                            if state.free(u, v) >= 1 {
                                RouteDecision::Direct
                            } else {
                                RouteDecision::Reject
                            }
                        }
                        RoutingPolicy::Dar { reservation } => {
                            dar_route(&state, u, v, preferred[pair], *reservation)
                        }
                        RoutingPolicy::Lba { reservation } => {
                            lba_route(&state, u, v, *reservation)
                        }
                    }
                };
                let counting = collector.counts(now);
                if counting {
                    collector.offered[pair] += 1;
                }
                match decision {
                    RouteDecision::Direct => {
                        let link = link_index(nodes, u, v);
                        occupancy[link] += 1;
                        in_progress[pair] += 1;
                        if counting {
                            collector.accepted[pair] += 1;
                            collector.direct[pair] += 1;
                        }
                        let holding = inputs.holding.sample(service_rate, &mut rng);
                        queue.schedule(
                            now + holding,
                            PairEvent::Departure {
                                pair,
                                links: (link, None),
                            },
                        );
                    }
                    RouteDecision::Alternative { transit } => {
                        let first = link_index(nodes, u.min(transit), u.max(transit));
                        let second = link_index(nodes, transit.min(v), transit.max(v));
                        occupancy[first] += 1;
                        occupancy[second] += 1;
                        in_progress[pair] += 1;
                        alternative_calls += 1;
                        if counting {
                            collector.accepted[pair] += 1;
                            collector.alternative[pair] += 1;
                        }
                        let holding = inputs.holding.sample(service_rate, &mut rng);
                        queue.schedule(
                            now + holding,
                            PairEvent::Departure {
                                pair,
                                links: (first, Some(second)),
                            },
                        );
                    }
                    RouteDecision::Reject => {
                        if counting {
                            collector.blocked[pair] += 1;
                        }
                        if matches!(inputs.routing, RoutingPolicy::Dar { .. }) {
                            preferred[pair] = resample_preferred(&mut rng, nodes, u, v);
                        }
                    }
                }
                queue.schedule(now + exponential(&mut rng) / pair_rate, PairEvent::Arrival {
                    pair,
                });
            }
            PairEvent::Departure { pair, links } => {
                occupancy[links.0] -= 1;
                if let Some(second) = links.1 {
                    occupancy[second] -= 1;
                    alternative_calls -= 1;
                }
                debug_assert!(in_progress[pair] > 0);
                in_progress[pair] -= 1;
            }
        }
        debug_assert!(occupancy.iter().all(|&o| o <= capacity));
        admissible = admissible_now(&occupancy, &preferred);
    }
    collector.advance(
        now,
        inputs.horizon,
        &in_progress,
        &admissible,
        statistic_value(&in_progress, &occupancy, alternative_calls),
    );
    Ok(collector.finish(seed, inputs.warmup, inputs.horizon))
}

enum StarEvent {
    Arrival { class: usize },
    Departure { class: usize, links: Vec<usize> },
}

pub(super) fn run_star(inputs: &SimInputs, seed: u64) -> Result<SimStats, SimError> {
    let (links, capacity, traffic) = match inputs.topology {
        Topology::Star {
            links,
            capacity,
            traffic,
        } => (*links, *capacity, traffic.clone()),
        _ => unreachable!("dispatched on topology"),
    };
    let classes = traffic.len();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut queue: EventQueue<StarEvent> = EventQueue::new();
    let mut collector = Collector::new(classes, inputs.warmup, inputs.horizon, inputs.instrument);

    let mut occupancy = vec![0u32; links];
    let mut in_progress = vec![0u32; classes];
    // Total arrival rate of size-s calls so each link sees the stated load.
    let total_rates: Vec<f64> = traffic
        .iter()
        .map(|t| t.arrival_rate_per_link * links as f64 / t.size as f64)
        .collect();
    for (class, &rate) in total_rates.iter().enumerate() {
        if rate > 0.0 {
            queue.schedule(exponential(&mut rng) / rate, StarEvent::Arrival { class });
        }
    }

    // PASTA indicator: probability that a uniform set of `size` distinct
    // links is entirely non-full.
    let admissible_now = |occupancy: &[u32]| -> Vec<f64> {
        let open = occupancy.iter().filter(|&&o| o < capacity).count();
        traffic
            .iter()
            .map(|t| {
                if t.size > open {
                    return 0.0;
                }
                (0..t.size)
                    .map(|i| (open - i) as f64 / (links - i) as f64)
                    .product()
            })
            .collect()
    };
    let statistic_value = |in_progress: &[u32], occupancy: &[u32]| -> u64 {
        match inputs.instrument {
            Some(StatisticKind::ClassCount(c)) => u64::from(in_progress[c]),
            Some(StatisticKind::ResourceOccupancy(l)) => u64::from(occupancy[l]),
            _ => 0,
        }
    };

    let mut scratch: Vec<usize> = (0..links).collect();
    let mut now = 0.0f64;
    let mut admissible = admissible_now(&occupancy);
    while let Some(event) = queue.pop() {
        if event.time > inputs.horizon {
            break;
        }
        collector.advance(
            now,
            event.time,
            &in_progress,
            &admissible,
            statistic_value(&in_progress, &occupancy),
        );
        now = event.time;
        match event.kind {
            StarEvent::Arrival { class } => {
                let size = traffic[class].size;
                // Uniform set of `size` distinct links by partial shuffle.
                for (i, slot) in scratch.iter_mut().enumerate() {
                    *slot = i;
                }
                for i in 0..size {
                    let j = rng.gen_range(i..links);
                    scratch.swap(i, j);
                }
                let chosen = &scratch[..size];
                let admitted = chosen.iter().all(|&l| occupancy[l] < capacity);
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
                    for &l in chosen {
                        occupancy[l] += 1;
                    }
                    in_progress[class] += 1;
                    let holding = inputs
                        .holding
                        .sample(traffic[class].service_rate, &mut rng);
                    queue.schedule(
                        now + holding,
                        StarEvent::Departure {
                            class,
                            links: chosen.to_vec(),
                        },
                    );
                }
                queue.schedule(
                    now + exponential(&mut rng) / total_rates[class],
                    StarEvent::Arrival { class },
                );
            }
            StarEvent::Departure { class, links } => {
                for l in links {
                    occupancy[l] -= 1;
                }
                debug_assert!(in_progress[class] > 0);
                in_progress[class] -= 1;
            }
        }
        debug_assert!(occupancy.iter().all(|&o| o <= capacity));
        admissible = admissible_now(&occupancy);
    }
    collector.advance(
        now,
        inputs.horizon,
        &in_progress,
        &admissible,
        statistic_value(&in_progress, &occupancy),
    );
    Ok(collector.finish(seed, inputs.warmup, inputs.horizon))
}
