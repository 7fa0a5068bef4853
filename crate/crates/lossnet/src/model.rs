//! Network definitions: call classes, capacity constraints and admission policies.
//!
//! A loss network is described by a set of call classes `r = 0..R`, a set of
//! resources `j = 0..J` with integer capacities `C_j`, and a nonnegative
//! integer requirement matrix `A` (J rows, R columns). A state `n` (calls in
//! progress per class) is feasible when `A n <= C` componentwise. Admission
//! policies decide, from the free capacity seen by an arriving call, whether
//! the call is accepted.
//!
//! Policies are expressed on *free* capacity: class `r` is accepted at free
//! capacity `f` iff `f_j` lies in a per-resource acceptance window for every
//! resource `j`. The uncontrolled network corresponds to the window
//! `[A_jr, inf)`, reservation thresholds to `[k_r + A_jr, inf)`, and the
//! general interval policy to arbitrary windows `[lo_jr, hi_jr]` (upper end
//! possibly unbounded). Every window's lower end is clamped to at least
//! `A_jr`, so an accepted call never violates a capacity constraint.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Capacity value treated as infinite (admission on that resource is never
/// capacity-limited). Used by simulation scenarios; finite analysis rejects it.
pub const INFINITE_CAPACITY: u32 = u32::MAX;

/// One call class: Poisson arrivals at `arrival_rate`, holding times with
/// mean `1 / service_rate`, and an optional value weight used by LP bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallClass {
    #[serde(rename = "nu")]
    pub arrival_rate: f64,
    #[serde(rename = "mu")]
    pub service_rate: f64,
    #[serde(rename = "weight", default = "default_weight")]
    pub value_weight: f64,
}

fn default_weight() -> f64 {
    1.0
}

impl CallClass {
    pub fn new(arrival_rate: f64, service_rate: f64) -> Self {
        CallClass {
            arrival_rate,
            service_rate,
            value_weight: 1.0,
        }
    }

    pub fn with_weight(arrival_rate: f64, service_rate: f64, value_weight: f64) -> Self {
        CallClass {
            arrival_rate,
            service_rate,
            value_weight,
        }
    }

    /// Offered load: ratio of arrival rate to service rate.
    pub fn offered_load(&self) -> f64 {
        self.arrival_rate / self.service_rate
    }
}

/// A single violated invariant found while validating a [`NetworkSpec`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpecViolation {
    #[error("class {class}: service rate must be positive")]
    NonPositiveServiceRate { class: usize },
    #[error("class {class}: arrival rate must be nonnegative and finite")]
    InvalidArrivalRate { class: usize },
    #[error("class {class}: value weight must be nonnegative and finite")]
    InvalidWeight { class: usize },
    #[error("class {class}: requirement column is all zero")]
    ZeroColumn { class: usize },
    #[error("resource {resource}, class {class}: requirement exceeds capacity")]
    OversizedRequirement { resource: usize, class: usize },
    #[error("requirement row {row} has length {got}, expected {expected}")]
    RaggedRequirements {
        row: usize,
        got: usize,
        expected: usize,
    },
    #[error("{got} requirement rows for {expected} resources")]
    RowCountMismatch { got: usize, expected: usize },
    #[error("network must have at least one class and one resource")]
    Empty,
}

/// Validation failure listing every violated invariant.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid network spec: {}", format_violations(.violations))]
pub struct ValidationReport {
    pub violations: Vec<SpecViolation>,
}

fn format_violations(violations: &[SpecViolation]) -> String {
    violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("occupancy vector has length {got}, spec has {expected} classes")]
pub struct DimensionMismatch {
    pub got: usize,
    pub expected: usize,
}

/// A validated loss network: classes, capacities `C_j` and the requirement
/// matrix `A` (row-major, J rows of R entries).
///
/// Immutable after construction; freely shareable across threads.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkSpec {
    classes: Vec<CallClass>,
    capacities: Vec<u32>,
    requirements: Vec<Vec<u32>>,
}

impl NetworkSpec {
    /// Validates and builds a spec. On failure the report lists *every*
    /// violated invariant, not just the first.
    pub fn new(
        classes: Vec<CallClass>,
        capacities: Vec<u32>,
        requirements: Vec<Vec<u32>>,
    ) -> Result<Self, ValidationReport> {
        let mut violations = Vec::new();
        let class_count = classes.len();
        let resource_count = capacities.len();

        if class_count == 0 || resource_count == 0 {
            violations.push(SpecViolation::Empty);
        }
        if requirements.len() != resource_count {
            violations.push(SpecViolation::RowCountMismatch {
                got: requirements.len(),
                expected: resource_count,
            });
        }
        for (j, row) in requirements.iter().enumerate() {
            if row.len() != class_count {
                violations.push(SpecViolation::RaggedRequirements {
                    row: j,
                    got: row.len(),
                    expected: class_count,
                });
            }
        }
        if !violations.is_empty() {
            // Shape is broken; per-entry checks below would index out of bounds.
            return Err(ValidationReport { violations });
        }

        for (r, class) in classes.iter().enumerate() {
            if !(class.service_rate > 0.0) || !class.service_rate.is_finite() {
                violations.push(SpecViolation::NonPositiveServiceRate { class: r });
            }
            if !(class.arrival_rate >= 0.0) || !class.arrival_rate.is_finite() {
                violations.push(SpecViolation::InvalidArrivalRate { class: r });
            }
            if !(class.value_weight >= 0.0) || !class.value_weight.is_finite() {
                violations.push(SpecViolation::InvalidWeight { class: r });
            }
        }
        for r in 0..class_count {
            if (0..resource_count).all(|j| requirements[j][r] == 0) {
                violations.push(SpecViolation::ZeroColumn { class: r });
            }
        }
        for j in 0..resource_count {
            for r in 0..class_count {
                if capacities[j] != INFINITE_CAPACITY && requirements[j][r] > capacities[j] {
                    violations.push(SpecViolation::OversizedRequirement {
                        resource: j,
                        class: r,
                    });
                }
            }
        }

        if violations.is_empty() {
            Ok(NetworkSpec {
                classes,
                capacities,
                requirements,
            })
        } else {
            Err(ValidationReport { violations })
        }
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    pub fn resource_count(&self) -> usize {
        self.capacities.len()
    }

    pub fn classes(&self) -> &[CallClass] {
        &self.classes
    }

    pub fn class(&self, r: usize) -> &CallClass {
        &self.classes[r]
    }

    pub fn capacities(&self) -> &[u32] {
        &self.capacities
    }

    pub fn capacity(&self, j: usize) -> u32 {
        self.capacities[j]
    }

    /// Requirement `A_jr` of class `r` on resource `j`.
    pub fn requirement(&self, j: usize, r: usize) -> u32 {
        self.requirements[j][r]
    }

    pub fn requirements(&self) -> &[Vec<u32>] {
        &self.requirements
    }

    /// Column `A_r` of the requirement matrix.
    pub fn requirement_column(&self, r: usize) -> Vec<u32> {
        (0..self.resource_count())
            .map(|j| self.requirements[j][r])
            .collect()
    }

    /// Offered loads per class.
    pub fn offered_loads(&self) -> Vec<f64> {
        self.classes.iter().map(|c| c.offered_load()).collect()
    }

    /// Resource usage `m = A n` induced by an occupancy vector. The result
    /// may exceed capacity; feasibility is the caller's concern.
    pub fn occupancy(&self, n: &OccupancyVector) -> Result<ResourceUsage, DimensionMismatch> {
        if n.len() != self.class_count() {
            return Err(DimensionMismatch {
                got: n.len(),
                expected: self.class_count(),
            });
        }
        let used: Vec<u64> = (0..self.resource_count())
            .map(|j| {
                n.as_slice()
                    .iter()
                    .enumerate()
                    .map(|(r, &count)| u64::from(self.requirements[j][r]) * u64::from(count))
                    .sum()
            })
            .collect();
        let free = used
            .iter()
            .zip(&self.capacities)
            .map(|(&m, &c)| {
                if c == INFINITE_CAPACITY {
                    i64::MAX
                } else {
                    i64::from(c) - m as i64
                }
            })
            .collect();
        Ok(ResourceUsage { used, free })
    }

    /// Whether `A n <= C` componentwise.
    pub fn is_feasible(&self, n: &OccupancyVector) -> Result<bool, DimensionMismatch> {
        Ok(self.occupancy(n)?.is_feasible())
    }

    /// Admission decision for a class-`r` arrival at the given usage.
    ///
    /// The usage must be feasible. Accepting never violates a capacity
    /// constraint: every policy's acceptance window on resource `j` starts
    /// at `A_jr` or above.
    pub fn admits(&self, policy: &AdmissionPolicy, usage: &ResourceUsage, r: usize) -> bool {
        self.admits_free(policy, &usage.free, r)
    }

    /// Admission decision given the per-resource free capacity directly.
    pub fn admits_free(&self, policy: &AdmissionPolicy, free: &[i64], r: usize) -> bool {
        (0..self.resource_count()).all(|j| {
            if self.capacities[j] == INFINITE_CAPACITY {
                return true;
            }
            let (lo, hi) = policy.acceptance_window(self, j, r);
            free[j] >= lo as i64 && hi.map_or(true, |h| free[j] <= h as i64)
        })
    }
}

/// Custom deserialization goes through validation so that a deserialized
/// spec upholds the same invariants as a constructed one.
impl<'de> Deserialize<'de> for NetworkSpec {
    fn deserialize<D>(deserializer: D) -> Result<Self, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        #[derive(Deserialize)]
        struct Raw {
            classes: Vec<CallClass>,
            capacities: Vec<u32>,
            requirements: Vec<Vec<u32>>,
        }
        let raw = Raw::deserialize(deserializer)?;
        NetworkSpec::new(raw.classes, raw.capacities, raw.requirements)
            .map_err(serde::de::Error::custom)
    }
}

/// Calls in progress per class.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OccupancyVector(pub Vec<u32>);

impl OccupancyVector {
    pub fn zero(classes: usize) -> Self {
        OccupancyVector(vec![0; classes])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    /// Copy with one more class-`r` call.
    pub fn plus_one(&self, r: usize) -> Self {
        let mut v = self.0.clone();
        v[r] += 1;
        OccupancyVector(v)
    }

    /// Copy with one fewer class-`r` call, or `None` when none is present.
    pub fn minus_one(&self, r: usize) -> Option<Self> {
        if self.0[r] == 0 {
            return None;
        }
        let mut v = self.0.clone();
        v[r] -= 1;
        Some(OccupancyVector(v))
    }
}

/// Per-resource usage `m` and derived free capacity `C - m`.
///
/// Free capacity is signed: usages produced by [`NetworkSpec::occupancy`]
/// may be infeasible, in which case the corresponding entries are negative.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResourceUsage {
    pub used: Vec<u64>,
    pub free: Vec<i64>,
}

impl ResourceUsage {
    pub fn is_feasible(&self) -> bool {
        self.free.iter().all(|&f| f >= 0)
    }
}

/// Errors in an admission policy relative to a given spec.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolicyError {
    #[error("policy has {got} per-class entries, spec has {expected} classes")]
    ClassCountMismatch { got: usize, expected: usize },
    #[error("policy has {got} per-resource rows, spec has {expected} resources")]
    ResourceCountMismatch { got: usize, expected: usize },
    #[error("resource {resource}, class {class}: window lower end {lo} below requirement {req}")]
    WindowBelowRequirement {
        resource: usize,
        class: usize,
        lo: u32,
        req: u32,
    },
    #[error("resource {resource}, class {class}: empty window [{lo}, {hi}]")]
    EmptyWindow {
        resource: usize,
        class: usize,
        lo: u32,
        hi: u32,
    },
}

/// Admission policy on free capacity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum AdmissionPolicy {
    /// Accept whenever the resulting state is feasible.
    Uncontrolled,
    /// Trunk reservation: accept class `r` iff `free_j >= k_r + A_jr` on
    /// every resource it uses.
    Reservation {
        #[serde(rename = "k")]
        thresholds: Vec<u32>,
    },
    /// Arbitrary per-class, per-resource windows on free capacity.
    /// `hi[j][r] = None` means unbounded above. Lower ends must be at least
    /// the requirement `A_jr`.
    #[serde(rename = "intervals")]
    IntervalSets {
        lo: Vec<Vec<u32>>,
        hi: Vec<Vec<Option<u32>>>,
    },
}

impl AdmissionPolicy {
    /// Acceptance window `[lo, hi]` for class `r` on resource `j`, with the
    /// lower end clamped to the requirement `A_jr`. `hi = None` is unbounded.
    pub fn acceptance_window(
        &self,
        spec: &NetworkSpec,
        j: usize,
        r: usize,
    ) -> (u64, Option<u64>) {
        let req = u64::from(spec.requirement(j, r));
        match self {
            AdmissionPolicy::Uncontrolled => (req, None),
            AdmissionPolicy::Reservation { thresholds } => {
                if req >= 1 {
                    (u64::from(thresholds[r]) + req, None)
                } else {
                    (0, None)
                }
            }
            AdmissionPolicy::IntervalSets { lo, hi } => (
                u64::from(lo[j][r]).max(req),
                hi[j][r].map(u64::from),
            ),
        }
    }

    /// Whether class `r` is accepted at all sufficiently large free
    /// capacities on every resource (membership of `r` in the accepting
    /// tail set).
    pub fn accepts_all_large_free(&self, spec: &NetworkSpec, r: usize) -> bool {
        match self {
            AdmissionPolicy::Uncontrolled | AdmissionPolicy::Reservation { .. } => true,
            AdmissionPolicy::IntervalSets { hi, .. } => {
                (0..spec.resource_count()).all(|j| hi[j][r].is_none())
            }
        }
    }

    /// Checks the policy's shape and windows against a spec.
    pub fn validate_for(&self, spec: &NetworkSpec) -> Result<(), PolicyError> {
        match self {
            AdmissionPolicy::Uncontrolled => Ok(()),
            AdmissionPolicy::Reservation { thresholds } => {
                if thresholds.len() != spec.class_count() {
                    return Err(PolicyError::ClassCountMismatch {
                        got: thresholds.len(),
                        expected: spec.class_count(),
                    });
                }
                Ok(())
            }
            AdmissionPolicy::IntervalSets { lo, hi } => {
                for mat in [lo.len(), hi.len()] {
                    if mat != spec.resource_count() {
                        return Err(PolicyError::ResourceCountMismatch {
                            got: mat,
                            expected: spec.resource_count(),
                        });
                    }
                }
                for j in 0..spec.resource_count() {
                    for rows in [lo[j].len(), hi[j].len()] {
                        if rows != spec.class_count() {
                            return Err(PolicyError::ClassCountMismatch {
                                got: rows,
                                expected: spec.class_count(),
                            });
                        }
                    }
                }
                for j in 0..spec.resource_count() {
                    for r in 0..spec.class_count() {
                        let req = spec.requirement(j, r);
                        if lo[j][r] < req {
                            return Err(PolicyError::WindowBelowRequirement {
                                resource: j,
                                class: r,
                                lo: lo[j][r],
                                req,
                            });
                        }
                        if let Some(h) = hi[j][r] {
                            if h < lo[j][r] {
                                return Err(PolicyError::EmptyWindow {
                                    resource: j,
                                    class: r,
                                    lo: lo[j][r],
                                    hi: h,
                                });
                            }
                        }
                    }
                }
                Ok(())
            }
        }
    }
}

/// Network plus policy, as serialized: the on-disk JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkDocument {
    #[serde(flatten)]
    pub spec: NetworkSpec,
    pub policy: AdmissionPolicy,
}

impl NetworkDocument {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("document serialization cannot fail")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_link(c: u32, kappa: f64) -> NetworkSpec {
        NetworkSpec::new(vec![CallClass::new(kappa, 1.0)], vec![c], vec![vec![1]]).unwrap()
    }

    #[test]
    fn minimal_spec_is_valid() {
        let spec = NetworkSpec::new(
            vec![CallClass::new(1.0, 1.0)],
            vec![3],
            vec![vec![1]],
        );
        assert!(spec.is_ok());
    }

    #[test]
    fn zero_service_rate_rejected() {
        let err = NetworkSpec::new(vec![CallClass::new(1.0, 0.0)], vec![3], vec![vec![1]])
            .unwrap_err();
        assert!(err
            .violations
            .contains(&SpecViolation::NonPositiveServiceRate { class: 0 }));
    }

    #[test]
    fn oversized_requirement_rejected() {
        let err = NetworkSpec::new(vec![CallClass::new(1.0, 1.0)], vec![1], vec![vec![2]])
            .unwrap_err();
        assert!(err.violations.contains(&SpecViolation::OversizedRequirement {
            resource: 0,
            class: 0
        }));
    }

    #[test]
    fn zero_column_rejected_and_all_violations_reported() {
        let err = NetworkSpec::new(
            vec![CallClass::new(1.0, 0.0), CallClass::new(1.0, 1.0)],
            vec![1],
            vec![vec![0, 2]],
        )
        .unwrap_err();
        assert!(err.violations.contains(&SpecViolation::ZeroColumn { class: 0 }));
        assert!(err.violations.contains(&SpecViolation::OversizedRequirement {
            resource: 0,
            class: 1
        }));
        assert!(err
            .violations
            .contains(&SpecViolation::NonPositiveServiceRate { class: 0 }));
    }

    #[test]
    fn occupancy_is_matrix_product() {
        let spec = NetworkSpec::new(
            vec![
                CallClass::new(1.0, 1.0),
                CallClass::new(1.0, 1.0),
                CallClass::new(1.0, 1.0),
            ],
            vec![10, 10],
            vec![vec![1, 0, 1], vec![0, 1, 1]],
        )
        .unwrap();
        let usage = spec.occupancy(&OccupancyVector(vec![1, 2, 3])).unwrap();
        assert_eq!(usage.used, vec![4, 5]);
        assert_eq!(usage.free, vec![6, 5]);
    }

    #[test]
    fn occupancy_of_zero_state_is_zero() {
        let spec = single_link(5, 1.0);
        let usage = spec.occupancy(&OccupancyVector::zero(1)).unwrap();
        assert_eq!(usage.used, vec![0]);
    }

    #[test]
    fn occupancy_two_classes_one_link() {
        let spec = NetworkSpec::new(
            vec![CallClass::new(1.0, 1.0), CallClass::new(1.0, 1.0)],
            vec![9],
            vec![vec![1, 1]],
        )
        .unwrap();
        let usage = spec.occupancy(&OccupancyVector(vec![2, 3])).unwrap();
        assert_eq!(usage.used, vec![5]);
    }

    #[test]
    fn occupancy_dimension_mismatch() {
        let spec = single_link(5, 1.0);
        assert!(spec.occupancy(&OccupancyVector(vec![1, 2])).is_err());
    }

    #[test]
    fn uncontrolled_rejects_full_resource() {
        let spec = single_link(3, 1.0);
        let usage = spec.occupancy(&OccupancyVector(vec![3])).unwrap();
        assert!(!spec.admits(&AdmissionPolicy::Uncontrolled, &usage, 0));
        let usage = spec.occupancy(&OccupancyVector(vec![2])).unwrap();
        assert!(spec.admits(&AdmissionPolicy::Uncontrolled, &usage, 0));
    }

    #[test]
    fn reservation_threshold_arithmetic() {
        let spec = NetworkSpec::new(
            vec![CallClass::new(1.0, 1.0), CallClass::new(1.0, 1.0)],
            vec![10],
            vec![vec![1, 1]],
        )
        .unwrap();
        let policy = AdmissionPolicy::Reservation {
            thresholds: vec![0, 2],
        };
        // m = 9, free = 1: class 2 needs free >= 3.
        let usage = spec.occupancy(&OccupancyVector(vec![9, 0])).unwrap();
        assert!(!spec.admits(&policy, &usage, 1));
        assert!(spec.admits(&policy, &usage, 0));
    }

    #[test]
    fn interval_policy_rejects_above_window() {
        // Acceptance window on resource 0 free capacity: [1, k1] with k1 = 2.
        let spec = NetworkSpec::new(
            vec![CallClass::new(1.0, 1.0)],
            vec![10],
            vec![vec![1]],
        )
        .unwrap();
        let policy = AdmissionPolicy::IntervalSets {
            lo: vec![vec![1]],
            hi: vec![vec![Some(2)]],
        };
        policy.validate_for(&spec).unwrap();
        // free = k1 + 1 = 3 is outside the window.
        let usage = spec.occupancy(&OccupancyVector(vec![7])).unwrap();
        assert_eq!(usage.free, vec![3]);
        assert!(!spec.admits(&policy, &usage, 0));
        // free = 2 is inside.
        let usage = spec.occupancy(&OccupancyVector(vec![8])).unwrap();
        assert!(spec.admits(&policy, &usage, 0));
    }

    #[test]
    fn uncontrolled_equals_zero_reservation_exhaustively() {
        let spec = NetworkSpec::new(
            vec![CallClass::new(1.0, 1.0), CallClass::new(2.0, 1.0)],
            vec![3, 2],
            vec![vec![1, 2], vec![1, 0]],
        )
        .unwrap();
        let zero = AdmissionPolicy::Reservation {
            thresholds: vec![0, 0],
        };
        for n1 in 0..=3 {
            for n2 in 0..=1 {
                let n = OccupancyVector(vec![n1, n2]);
                if !spec.is_feasible(&n).unwrap() {
                    continue;
                }
                let usage = spec.occupancy(&n).unwrap();
                for r in 0..2 {
                    assert_eq!(
                        spec.admits(&AdmissionPolicy::Uncontrolled, &usage, r),
                        spec.admits(&zero, &usage, r),
                        "disagreement at {n:?} class {r}"
                    );
                }
            }
        }
    }

    #[test]
    fn interval_lower_end_below_requirement_rejected() {
        let spec = NetworkSpec::new(
            vec![CallClass::new(1.0, 1.0)],
            vec![4],
            vec![vec![2]],
        )
        .unwrap();
        let policy = AdmissionPolicy::IntervalSets {
            lo: vec![vec![1]],
            hi: vec![vec![None]],
        };
        assert!(matches!(
            policy.validate_for(&spec),
            Err(PolicyError::WindowBelowRequirement { .. })
        ));
    }

    #[test]
    fn json_schema_field_names() {
        let doc: NetworkDocument = serde_json::from_str(
            r#"{
                "classes": [{"nu": 1.0, "mu": 2.0}, {"nu": 0.5, "mu": 1.0, "weight": 3.0}],
                "capacities": [4],
                "requirements": [[1, 2]],
                "policy": {"type": "reservation", "k": [0, 1]}
            }"#,
        )
        .unwrap();
        assert_eq!(doc.spec.class_count(), 2);
        assert_eq!(doc.spec.class(0).value_weight, 1.0);
        assert_eq!(doc.spec.class(1).value_weight, 3.0);
        assert!(matches!(doc.policy, AdmissionPolicy::Reservation { .. }));

        let round = NetworkDocument::from_json(&doc.to_json()).unwrap();
        assert_eq!(round, doc);

        let text = doc.to_json();
        for field in ["\"nu\"", "\"mu\"", "\"capacities\"", "\"requirements\"", "\"policy\""] {
            assert!(text.contains(field), "missing {field} in {text}");
        }
    }

    #[test]
    fn invalid_spec_fails_deserialization() {
        let err = NetworkDocument::from_json(
            r#"{"classes":[{"nu":1.0,"mu":0.0}],"capacities":[1],"requirements":[[1]],
                "policy":{"type":"uncontrolled"}}"#,
        );
        assert!(err.is_err());
    }
}
