//! Cross-method consistency: each engine validated against a different one
//! on the same inputs.

use lossnet::approx::{self, FixedPointConfig, PassingProbs};
use lossnet::exact::{self, ExactLimits};
use lossnet::fluid::{self, FluidConfig};
use lossnet::model::{AdmissionPolicy, CallClass, NetworkSpec};
use lossnet::sim::{self, HoldingTime, RoutingPolicy, SimInputs, Topology};

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

#[test]
fn controlled_balance_solution_within_simulation_intervals() {
    // Two-class single link under reservation: the global-balance solve
    // against an independent simulation estimate.
    let s = spec(vec![(2.0, 1.0), (1.0, 1.0)], vec![4], vec![vec![1, 1]]);
    let policy = AdmissionPolicy::Reservation {
        thresholds: vec![0, 1],
    };
    let solved = exact::brute_force_controlled(&s, &policy, &ExactLimits::default()).unwrap();
    let report = exact::controlled_acceptance(&s, &policy, &solved.distribution).unwrap();

    let topology = Topology::Generic(s);
    let inputs = SimInputs {
        topology: &topology,
        policy: &policy,
        routing: &RoutingPolicy::Fixed,
        holding: &HoldingTime::Exponential,
        warmup: 20.0,
        horizon: 820.0,
        initial_state: None,
        instrument: None,
    };
    let stats = sim::run_experiment(&inputs, 424_242, 30).unwrap();
    for r in 0..2 {
        let gap = (stats.acceptance_estimate[r] - report.acceptance[r]).abs();
        let half = stats.acceptance_half_width[r].unwrap();
        assert!(
            gap <= 3.0 * half,
            "class {r}: balance {} vs simulation {} +- {half}",
            report.acceptance[r],
            stats.acceptance_estimate[r]
        );
    }
}

#[test]
fn growing_reservations_approach_the_prioritisation_limit() {
    // Single link, two classes in priority order, growing threshold on the
    // lower class: the boundary fixed point's rates approach the complete
    // prioritisation values.
    let s = spec(vec![(3.0, 1.0), (4.0, 1.0)], vec![5], vec![vec![1, 1]]);
    let limit = fluid::reservation_limit(&s).unwrap();
    assert_eq!(limit[0], 1.0);
    assert!((limit[1] - 0.5).abs() < 1e-12);

    let config = FluidConfig::default();
    let mut previous = f64::INFINITY;
    for k in [2u32, 8, 24] {
        let policy = AdmissionPolicy::Reservation {
            thresholds: vec![0, k],
        };
        let search = fluid::fixed_points(&s, &policy, &config).unwrap();
        assert_eq!(search.points.len(), 1, "k={k}: {:?}", search.notes);
        let point = &search.points[0];
        let rates: Vec<f64> = (0..2)
            .map(|r| point.state[r] / s.class(r).offered_load())
            .collect();
        let gap = rates
            .iter()
            .zip(&limit)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(gap < previous, "k={k}: gap {gap} !< {previous}");
        previous = gap;
    }
    assert!(previous <= 0.01, "largest threshold still {previous} away");
}

#[test]
fn kelly_target_load_matches_implied_state() {
    // m*_j of the simple approximation equals A x for the implied
    // per-class state x_r = kappa_r prod_j p_j^(A_jr).
    let s = spec(
        vec![(6.0, 1.0), (2.0, 0.5), (1.5, 1.0)],
        vec![5, 4],
        vec![vec![1, 0, 2], vec![0, 1, 1]],
    );
    let result = approx::kelly_simple(&s, &FixedPointConfig::default()).unwrap();
    let p = match &result.passing {
        PassingProbs::PerResource(p) => p.clone(),
        _ => unreachable!(),
    };
    let implied: Vec<f64> = (0..3)
        .map(|r| {
            let mut x = s.class(r).offered_load();
            for j in 0..2 {
                x *= p[j].powi(s.requirement(j, r) as i32);
            }
            x
        })
        .collect();
    let target = result.expected_usage.unwrap();
    for j in 0..2 {
        let load: f64 = (0..3)
            .map(|r| f64::from(s.requirement(j, r)) * implied[r])
            .sum();
        assert!(
            (load - target[j]).abs() <= 1e-9,
            "resource {j}: {load} vs {}",
            target[j]
        );
    }
}

#[test]
fn usage_recursion_report_equals_enumeration_report() {
    let cases = vec![
        spec(
            vec![(2.0, 1.0), (1.0, 2.0)],
            vec![4, 5],
            vec![vec![1, 2], vec![1, 1]],
        ),
        spec(
            vec![(5.0, 1.0), (2.0, 1.0), (2.0, 1.0)],
            vec![4, 4],
            vec![vec![1, 0, 1], vec![0, 1, 1]],
        ),
    ];
    for s in cases {
        let via_usage =
            exact::acceptance_from_usage(&s, &exact::kdr(&s, &ExactLimits::default()).unwrap());
        let via_enumeration = exact::acceptance_exact(&s, &ExactLimits::default()).unwrap();
        for r in 0..s.class_count() {
            assert!(
                (via_usage.acceptance[r] - via_enumeration.acceptance[r]).abs() <= 1e-12,
                "class {r}"
            );
            assert!(
                (via_usage.mean_occupancy[r] - via_enumeration.mean_occupancy[r]).abs() <= 1e-12,
                "class {r} occupancy"
            );
        }
    }
}
