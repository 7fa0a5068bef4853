//! Scenario files: a named network or topology, the controls, and the
//! simulation settings, in one JSON document.
//!
//! Network scenarios put the model schema at the top level (`classes`,
//! `capacities`, `requirements`, `policy`) and extend it with `routing`,
//! `holding` and `sim` blocks; routed topologies (fully connected, star)
//! use a `topology` object instead of the network fields. A small library
//! of named scenarios covering the standard examples ships built in.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{AdmissionPolicy, CallClass, NetworkSpec, PolicyError, ValidationReport};
use crate::sim::{HoldingTime, RoutingPolicy, StarTraffic, StatisticKind, Topology};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TopologyDoc {
    FullyConnected {
        nodes: usize,
        capacity: u32,
        nu: f64,
        mu: f64,
    },
    Star {
        links: usize,
        capacity: u32,
        sizes: Vec<StarSizeDoc>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarSizeDoc {
    pub size: usize,
    pub nu: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RoutingDoc {
    Fixed,
    Dar { k: u32 },
    Lba { k: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum HoldingDoc {
    Exponential,
    Deterministic,
    Hyperexponential {
        p: f64,
        rate_fast: f64,
        rate_slow: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "statistic", rename_all = "snake_case")]
pub enum InstrumentDoc {
    ClassCount { index: usize },
    ResourceOccupancy { index: usize },
    AlternativeCalls,
}

/// Simulation settings block of a scenario file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SimBlock {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warmup: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replications: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<Vec<u32>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub instrument: Option<InstrumentDoc>,
}

/// One scenario document, as stored on disk. Field combinations are only
/// checked by [`Scenario::resolve`], so files round-trip losslessly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classes: Option<Vec<CallClass>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub capacities: Option<Vec<u32>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub requirements: Option<Vec<Vec<u32>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub policy: Option<AdmissionPolicy>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub topology: Option<TopologyDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub routing: Option<RoutingDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub holding: Option<HoldingDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimBlock>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub methods: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("scenario must define either the network fields or a topology, not both")]
    NetworkOrTopology,
    #[error("network scenarios need classes, capacities, requirements and policy")]
    IncompleteNetwork,
    #[error("routed topologies take no admission policy")]
    PolicyWithTopology,
    #[error("network validation failed: {0}")]
    Network(#[from] ValidationReport),
    #[error("policy validation failed: {0}")]
    Policy(#[from] PolicyError),
    #[error("json: {0}")]
    Json(String),
}

/// A scenario with every choice made: concrete topology, controls and
/// fully-defaulted simulation settings.
#[derive(Debug, Clone)]
pub struct ResolvedScenario {
    pub name: String,
    pub topology: Topology,
    pub policy: AdmissionPolicy,
    pub routing: RoutingPolicy,
    pub holding: HoldingTime,
    pub seed: Option<u64>,
    pub warmup: f64,
    pub horizon: f64,
    pub replications: usize,
    pub initial_state: Option<Vec<u32>>,
    pub instrument: Option<StatisticKind>,
    pub methods: Vec<String>,
}

impl ResolvedScenario {
    /// The network spec, for methods that need the generic topology.
    pub fn network(&self) -> Option<&NetworkSpec> {
        match &self.topology {
            Topology::Generic(spec) => Some(spec),
            _ => None,
        }
    }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        serde_json::from_str(text).map_err(|e| ScenarioError::Json(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialization cannot fail")
    }

    pub fn resolve(&self) -> Result<ResolvedScenario, ScenarioError> {
        let has_network =
            self.classes.is_some() || self.capacities.is_some() || self.requirements.is_some();
        let (topology, policy, min_service_rate) = match (&self.topology, has_network) {
            (Some(_), true) | (None, false) => return Err(ScenarioError::NetworkOrTopology),
            (None, true) => {
                let (classes, capacities, requirements, policy) = match (
                    &self.classes,
                    &self.capacities,
                    &self.requirements,
                    &self.policy,
                ) {
                    (Some(cl), Some(ca), Some(re), Some(po)) => {
                        (cl.clone(), ca.clone(), re.clone(), po.clone())
                    }
                    _ => return Err(ScenarioError::IncompleteNetwork),
                };
                let spec = NetworkSpec::new(classes, capacities, requirements)?;
                policy.validate_for(&spec)?;
                let mu_min = spec
                    .classes()
                    .iter()
                    .map(|c| c.service_rate)
                    .fold(f64::INFINITY, f64::min);
                (Topology::Generic(spec), policy, mu_min)
            }
            (Some(doc), false) => {
                if self.policy.is_some() {
                    return Err(ScenarioError::PolicyWithTopology);
                }
                let (topology, mu_min) = match doc {
                    TopologyDoc::FullyConnected {
                        nodes,
                        capacity,
                        nu,
                        mu,
                    } => (
                        Topology::FullyConnected {
                            nodes: *nodes,
                            capacity: *capacity,
                            pair_arrival_rate: *nu,
                            service_rate: *mu,
                        },
                        *mu,
                    ),
                    TopologyDoc::Star {
                        links,
                        capacity,
                        sizes,
                    } => (
                        Topology::Star {
                            links: *links,
                            capacity: *capacity,
                            traffic: sizes
                                .iter()
                                .map(|s| StarTraffic {
                                    size: s.size,
                                    arrival_rate_per_link: s.nu,
                                    service_rate: s.mu,
                                })
                                .collect(),
                        },
                        sizes.iter().map(|s| s.mu).fold(f64::INFINITY, f64::min),
                    ),
                };
                (topology, AdmissionPolicy::Uncontrolled, mu_min)
            }
        };

        let routing = match self.routing.as_ref().unwrap_or(&RoutingDoc::Fixed) {
            RoutingDoc::Fixed => RoutingPolicy::Fixed,
            RoutingDoc::Dar { k } => RoutingPolicy::Dar { reservation: *k },
            RoutingDoc::Lba { k } => RoutingPolicy::Lba { reservation: *k },
        };
        let holding = match self.holding.as_ref().unwrap_or(&HoldingDoc::Exponential) {
            HoldingDoc::Exponential => HoldingTime::Exponential,
            HoldingDoc::Deterministic => HoldingTime::Deterministic,
            HoldingDoc::Hyperexponential {
                p,
                rate_fast,
                rate_slow,
            } => HoldingTime::HyperExponential {
                p_fast: *p,
                rate_fast: *rate_fast,
                rate_slow: *rate_slow,
            },
        };

        let sim = self.sim.clone().unwrap_or_default();
        // Warmup heuristic: equilibrium within a few holding times.
        let warmup = sim.warmup.unwrap_or(10.0 / min_service_rate);
        let horizon = sim.horizon.unwrap_or(warmup + 200.0 / min_service_rate);
        let instrument = sim.instrument.as_ref().map(|doc| match doc {
            InstrumentDoc::ClassCount { index } => StatisticKind::ClassCount(*index),
            InstrumentDoc::ResourceOccupancy { index } => {
                StatisticKind::ResourceOccupancy(*index)
            }
            InstrumentDoc::AlternativeCalls => StatisticKind::AlternativeCalls,
        });
        Ok(ResolvedScenario {
            name: self.name.clone(),
            topology,
            policy,
            routing,
            holding,
            seed: sim.seed,
            warmup,
            horizon,
            replications: sim.replications.unwrap_or(10),
            initial_state: sim.initial_state.clone(),
            instrument,
            methods: self.methods.clone(),
        })
    }
}

fn network_scenario(
    name: &str,
    classes: Vec<(f64, f64)>,
    capacities: Vec<u32>,
    requirements: Vec<Vec<u32>>,
    policy: AdmissionPolicy,
    methods: &[&str],
) -> Scenario {
    Scenario {
        name: name.to_string(),
        classes: Some(
            classes
                .into_iter()
                .map(|(nu, mu)| CallClass::new(nu, mu))
                .collect(),
        ),
        capacities: Some(capacities),
        requirements: Some(requirements),
        policy: Some(policy),
        topology: None,
        routing: None,
        holding: None,
        sim: Some(SimBlock {
            seed: Some(1),
            ..Default::default()
        }),
        methods: methods.iter().map(|m| m.to_string()).collect(),
    }
}

/// Built-in scenario library.
pub fn library() -> Vec<Scenario> {
    let mut scenarios = vec![
        network_scenario(
            "single_link",
            vec![(6.0, 1.0)],
            vec![10],
            vec![vec![1]],
            AdmissionPolicy::Uncontrolled,
            &["exact", "kdr", "efpa", "reduced-load", "kelly", "simulate"],
        ),
        network_scenario(
            "two_class_reservation",
            vec![(14.0, 1.0), (10.0, 1.0)],
            vec![20],
            vec![vec![1, 1]],
            AdmissionPolicy::Reservation {
                thresholds: vec![0, 3],
            },
            &["exact", "lp", "simulate"],
        ),
        // Three-link repacking network: with repacking allowed, admissibility
        // reduces to the pairwise constraints n_r + n_r' <= C'_r + C'_r'.
        network_scenario(
            "triangle_repacking",
            vec![(8.0, 1.0), (9.0, 1.0), (10.0, 1.0)],
            vec![20, 20, 20],
            vec![vec![1, 1, 0], vec![1, 0, 1], vec![0, 1, 1]],
            AdmissionPolicy::Uncontrolled,
            &["exact", "kdr", "reduced-load", "kelly", "lp"],
        ),
        network_scenario(
            "hunt_underload",
            vec![(2.0, 1.0), (2.0, 1.0), (3.0, 1.0)],
            vec![4, 4],
            vec![vec![1, 0, 1], vec![0, 1, 1]],
            hunt_policy(),
            &["fluid"],
        ),
        network_scenario(
            "hunt_overload",
            vec![(2.0, 1.0), (2.0, 1.0), (5.0, 1.0)],
            vec![4, 4],
            vec![vec![1, 0, 1], vec![0, 1, 1]],
            hunt_policy(),
            &["fluid"],
        ),
    ];
    scenarios.push(Scenario {
        name: "fully_connected_dar".to_string(),
        classes: None,
        capacities: None,
        requirements: None,
        policy: None,
        topology: Some(TopologyDoc::FullyConnected {
            nodes: 6,
            capacity: 20,
            nu: 16.0,
            mu: 1.0,
        }),
        routing: Some(RoutingDoc::Dar { k: 2 }),
        holding: None,
        sim: Some(SimBlock {
            seed: Some(1),
            warmup: Some(10.0),
            horizon: Some(210.0),
            replications: Some(5),
            initial_state: None,
            instrument: Some(InstrumentDoc::AlternativeCalls),
        }),
        methods: vec!["simulate".to_string()],
    });
    scenarios.push(Scenario {
        name: "star_k_links".to_string(),
        classes: None,
        capacities: None,
        requirements: None,
        policy: None,
        topology: Some(TopologyDoc::Star {
            links: 10,
            capacity: 5,
            sizes: vec![
                StarSizeDoc {
                    size: 1,
                    nu: 2.0,
                    mu: 1.0,
                },
                StarSizeDoc {
                    size: 2,
                    nu: 1.5,
                    mu: 1.0,
                },
            ],
        }),
        routing: None,
        holding: None,
        sim: Some(SimBlock {
            seed: Some(1),
            warmup: Some(10.0),
            horizon: Some(210.0),
            replications: Some(5),
            initial_state: None,
            instrument: Some(InstrumentDoc::ResourceOccupancy { index: 0 }),
        }),
        methods: vec!["simulate".to_string()],
    });
    scenarios
}

fn hunt_policy() -> AdmissionPolicy {
    AdmissionPolicy::IntervalSets {
        lo: vec![vec![1, 0, 1], vec![0, 1, 1]],
        hi: vec![vec![Some(2), None, None], vec![None, Some(2), None]],
    }
}

/// Looks up a library scenario by name.
pub fn builtin(name: &str) -> Option<Scenario> {
    library().into_iter().find(|s| s.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn library_scenarios_resolve() {
        let scenarios = library();
        let names: Vec<&str> = scenarios.iter().map(|s| s.name.as_str()).collect();
        for expected in [
            "single_link",
            "two_class_reservation",
            "triangle_repacking",
            "hunt_underload",
            "hunt_overload",
            "fully_connected_dar",
            "star_k_links",
        ] {
            assert!(names.contains(&expected), "missing {expected}");
        }
        for scenario in &scenarios {
            let resolved = scenario.resolve().expect(&scenario.name);
            assert!(!resolved.methods.is_empty());
        }
    }

    #[test]
    fn scenarios_round_trip_losslessly() {
        for scenario in library() {
            let json = scenario.to_json();
            let back = Scenario::from_json(&json).unwrap();
            assert_eq!(back, scenario, "{}", scenario.name);
            assert_eq!(back.to_json(), json);
        }
    }

    #[test]
    fn network_and_topology_are_mutually_exclusive() {
        let mut scenario = builtin("single_link").unwrap();
        scenario.topology = Some(TopologyDoc::FullyConnected {
            nodes: 4,
            capacity: 2,
            nu: 1.0,
            mu: 1.0,
        });
        assert!(matches!(
            scenario.resolve(),
            Err(ScenarioError::NetworkOrTopology)
        ));
    }

    #[test]
    fn incomplete_network_rejected() {
        let scenario = Scenario {
            policy: None,
            ..builtin("single_link").unwrap()
        };
        assert!(matches!(
            scenario.resolve(),
            Err(ScenarioError::IncompleteNetwork)
        ));
    }

    #[test]
    fn defaults_fill_sim_settings() {
        let resolved = builtin("single_link").unwrap().resolve().unwrap();
        assert_eq!(resolved.warmup, 10.0);
        assert_eq!(resolved.horizon, 210.0);
        assert_eq!(resolved.replications, 10);
        assert_eq!(resolved.seed, Some(1));
    }

    #[test]
    fn field_names_match_schema() {
        let json = builtin("single_link").unwrap().to_json();
        for field in ["\"classes\"", "\"nu\"", "\"mu\"", "\"capacities\"", "\"requirements\"", "\"policy\""] {
            assert!(json.contains(field), "missing {field}");
        }
    }
}
