//! Method dispatch: each method reads the resolved scenario, runs the
//! corresponding engine and writes its result files.

use std::path::{Path, PathBuf};

use lossnet::approx::{self, ApproxError, FixedPointConfig};
use lossnet::exact::{self, ExactError, ExactLimits};
use lossnet::fluid::{self, FluidConfig, FluidError, IntegratorConfig};
use lossnet::model::{AdmissionPolicy, NetworkSpec};
use lossnet::scenario::ResolvedScenario;
use lossnet::sim::{self, SimError, SimInputs};

use crate::{CliError, OutputFormat};

pub const METHODS: &[&str] = &[
    "exact",
    "kdr",
    "efpa",
    "reduced-load",
    "kelly",
    "lp",
    "fluid",
    "simulate",
];

fn classify_exact(e: ExactError) -> CliError {
    match e {
        ExactError::StateSpaceTooLarge { .. }
        | ExactError::InfiniteCapacity { .. }
        | ExactError::PolicyInvalid(_)
        | ExactError::Dimension(_) => CliError::Validation(e.to_string()),
        _ => CliError::Method(e.to_string()),
    }
}

fn classify_approx(e: ApproxError) -> CliError {
    match e {
        ApproxError::NoConvergence { .. } => CliError::Method(e.to_string()),
        _ => CliError::Validation(e.to_string()),
    }
}

fn classify_fluid(e: FluidError) -> CliError {
    match e {
        FluidError::Dimension { .. }
        | FluidError::Infeasible { .. }
        | FluidError::SingleResourceOnly { .. }
        | FluidError::Policy(_) => CliError::Validation(e.to_string()),
        _ => CliError::Method(e.to_string()),
    }
}

fn classify_sim(e: SimError) -> CliError {
    CliError::Validation(e.to_string())
}

fn network_of<'a>(
    resolved: &'a ResolvedScenario,
    method: &str,
) -> Result<&'a NetworkSpec, CliError> {
    resolved.network().ok_or_else(|| {
        CliError::Validation(format!(
            "method '{method}' needs a network scenario, not a routed topology"
        ))
    })
}

fn require_uncontrolled(resolved: &ResolvedScenario, method: &str) -> Result<(), CliError> {
    match resolved.policy {
        AdmissionPolicy::Uncontrolled => Ok(()),
        _ => Err(CliError::Validation(format!(
            "method '{method}' applies to uncontrolled networks only"
        ))),
    }
}

struct Outputs<'a> {
    dir: &'a Path,
    stem: String,
    format: OutputFormat,
    written: Vec<PathBuf>,
}

impl<'a> Outputs<'a> {
    fn new(dir: &'a Path, name: &str, method: &str, format: OutputFormat) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| {
            CliError::Validation(format!("cannot create {}: {e}", dir.display()))
        })?;
        Ok(Outputs {
            dir,
            stem: format!("{name}.{method}"),
            format,
            written: Vec::new(),
        })
    }

    fn write(&mut self, suffix: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(format!("{}.{suffix}", self.stem));
        std::fs::write(&path, contents)
            .map_err(|e| CliError::Validation(format!("cannot write {}: {e}", path.display())))?;
        self.written.push(path);
        Ok(())
    }

    fn write_csv(&mut self, suffix: &str, contents: &str) -> Result<(), CliError> {
        if self.format == OutputFormat::Csv {
            self.write(suffix, contents)?;
        }
        Ok(())
    }
}

fn acceptance_csv(acceptance: &[f64]) -> String {
    let mut out = String::from("class,P\n");
    for (r, p) in acceptance.iter().enumerate() {
        out.push_str(&format!("{},{}\n", r + 1, p));
    }
    out
}

/// Runs one method, writing `<name>.<method>.json` (always) and CSV tables
/// (unless `--format json`). Returns the written paths.
pub fn run_method(
    resolved: &ResolvedScenario,
    method: &str,
    seed_override: Option<u64>,
    out_dir: &Path,
    format: OutputFormat,
) -> Result<Vec<PathBuf>, CliError> {
    if !METHODS.contains(&method) {
        return Err(CliError::Validation(format!(
            "unknown method '{method}'; expected one of {METHODS:?}"
        )));
    }
    let mut outputs = Outputs::new(out_dir, &resolved.name, method, format)?;
    let limits = ExactLimits::default();
    match method {
        "exact" => {
            let spec = network_of(resolved, method)?;
            match &resolved.policy {
                AdmissionPolicy::Uncontrolled => {
                    let report = exact::acceptance_exact(spec, &limits).map_err(classify_exact)?;
                    let dist = exact::product_form(spec, &limits).map_err(classify_exact)?;
                    outputs.write("json", &report.to_json())?;
                    outputs.write_csv("csv", &dist.to_csv())?;
                }
                policy => {
                    let solved = exact::brute_force_controlled(spec, policy, &limits)
                        .map_err(classify_exact)?;
                    let report = exact::controlled_acceptance(spec, policy, &solved.distribution)
                        .map_err(classify_exact)?;
                    outputs.write("json", &report.to_json())?;
                    outputs.write_csv("csv", &solved.distribution.to_csv())?;
                }
            }
        }
        "kdr" => {
            let spec = network_of(resolved, method)?;
            require_uncontrolled(resolved, method)?;
            let dist = exact::kdr(spec, &limits).map_err(classify_exact)?;
            let report = exact::acceptance_from_usage(spec, &dist);
            outputs.write("json", &report.to_json())?;
            outputs.write_csv("csv", &dist.to_csv())?;
        }
        "efpa" => {
            let spec = network_of(resolved, method)?;
            require_uncontrolled(resolved, method)?;
            let result = approx::efpa(spec, &FixedPointConfig::efpa_default())
                .map_err(classify_approx)?;
            outputs.write("json", &result.to_json())?;
            outputs.write_csv("csv", &acceptance_csv(&result.acceptance))?;
        }
        "reduced-load" => {
            let spec = network_of(resolved, method)?;
            require_uncontrolled(resolved, method)?;
            let result = approx::reduced_load(spec, &FixedPointConfig::default())
                .map_err(classify_approx)?;
            outputs.write("json", &result.to_json())?;
            outputs.write_csv("csv", &acceptance_csv(&result.acceptance))?;
        }
        "kelly" => {
            let spec = network_of(resolved, method)?;
            require_uncontrolled(resolved, method)?;
            let result = approx::kelly_simple(spec, &FixedPointConfig::default())
                .map_err(classify_approx)?;
            outputs.write("json", &result.to_json())?;
            outputs.write_csv("csv", &acceptance_csv(&result.acceptance))?;
        }
        "lp" => {
            let spec = network_of(resolved, method)?;
            let bound = approx::lp_bound_general(spec).map_err(classify_approx)?;
            outputs.write("json", &bound.to_json())?;
            outputs.write_csv("csv", &acceptance_csv(&bound.acceptance))?;
        }
        "fluid" => {
            let spec = network_of(resolved, method)?;
            let config = FluidConfig::default();
            let search = fluid::fixed_points(spec, &resolved.policy, &config)
                .map_err(classify_fluid)?;
            outputs.write(
                "json",
                &serde_json::to_string_pretty(&search)
                    .expect("search serialization cannot fail"),
            )?;
            if format == OutputFormat::Csv {
                for (index, start) in trajectory_starts(spec).into_iter().enumerate() {
                    let integrator = IntegratorConfig {
                        horizon: 150.0,
                        record_stride: 100,
                        ..Default::default()
                    };
                    let trajectory =
                        fluid::integrate(spec, &resolved.policy, &start, &integrator, &config)
                            .map_err(classify_fluid)?;
                    outputs.write(&format!("traj{index}.csv"), &trajectory.to_csv())?;
                }
            }
        }
        "simulate" => {
            let seed = seed_override.or(resolved.seed).ok_or_else(|| {
                CliError::Validation(
                    "simulate needs a seed: pass --seed or set sim.seed in the scenario"
                        .to_string(),
                )
            })?;
            let inputs = SimInputs {
                topology: &resolved.topology,
                policy: &resolved.policy,
                routing: &resolved.routing,
                holding: &resolved.holding,
                warmup: resolved.warmup,
                horizon: resolved.horizon,
                initial_state: resolved.initial_state.as_deref(),
                instrument: resolved.instrument,
            };
            let stats = sim::run_experiment(&inputs, seed, resolved.replications)
                .map_err(classify_sim)?;
            outputs.write("json", &stats.to_json())?;
            if let Some(histogram) = sim::occupancy_histogram(&stats) {
                outputs.write_csv("hist.csv", &histogram.to_csv())?;
            }
        }
        _ => unreachable!("method list checked above"),
    }
    Ok(outputs.written)
}

/// Default fluid trajectory starting points: the empty network plus, for
/// each resource, the corner saturating it through a class confined to it.
fn trajectory_starts(spec: &NetworkSpec) -> Vec<Vec<f64>> {
    let mut starts = vec![vec![0.0; spec.class_count()]];
    for j in 0..spec.resource_count() {
        let candidate = (0..spec.class_count()).find(|&r| {
            spec.requirement(j, r) > 0
                && (0..spec.resource_count()).all(|k| k == j || spec.requirement(k, r) == 0)
        });
        if let Some(r) = candidate {
            let mut x = vec![0.0; spec.class_count()];
            x[r] = f64::from(spec.capacity(j)) / f64::from(spec.requirement(j, r));
            if !starts.contains(&x) {
                starts.push(x);
            }
        }
    }
    starts
}

/// Per-class acceptance probabilities of one method, for comparisons. The
/// second element carries simulation half-widths when applicable.
pub fn acceptance_of(
    resolved: &ResolvedScenario,
    method: &str,
    seed_override: Option<u64>,
) -> Result<(Vec<f64>, Option<Vec<f64>>), CliError> {
    let limits = ExactLimits::default();
    match method {
        "exact" => {
            let spec = network_of(resolved, method)?;
            let report = match &resolved.policy {
                AdmissionPolicy::Uncontrolled => {
                    exact::acceptance_exact(spec, &limits).map_err(classify_exact)?
                }
                policy => {
                    let solved = exact::brute_force_controlled(spec, policy, &limits)
                        .map_err(classify_exact)?;
                    exact::controlled_acceptance(spec, policy, &solved.distribution)
                        .map_err(classify_exact)?
                }
            };
            Ok((report.acceptance, None))
        }
        "kdr" => {
            let spec = network_of(resolved, method)?;
            require_uncontrolled(resolved, method)?;
            let dist = exact::kdr(spec, &limits).map_err(classify_exact)?;
            Ok((exact::acceptance_from_usage(spec, &dist).acceptance, None))
        }
        "efpa" => {
            let spec = network_of(resolved, method)?;
            require_uncontrolled(resolved, method)?;
            let result = approx::efpa(spec, &FixedPointConfig::efpa_default())
                .map_err(classify_approx)?;
            Ok((result.acceptance, None))
        }
        "reduced-load" => {
            let spec = network_of(resolved, method)?;
            require_uncontrolled(resolved, method)?;
            let result = approx::reduced_load(spec, &FixedPointConfig::default())
                .map_err(classify_approx)?;
            Ok((result.acceptance, None))
        }
        "kelly" => {
            let spec = network_of(resolved, method)?;
            require_uncontrolled(resolved, method)?;
            let result = approx::kelly_simple(spec, &FixedPointConfig::default())
                .map_err(classify_approx)?;
            Ok((result.acceptance, None))
        }
        "lp" => {
            let spec = network_of(resolved, method)?;
            let bound = approx::lp_bound_general(spec).map_err(classify_approx)?;
            Ok((bound.acceptance, None))
        }
        "fluid" => {
            let spec = network_of(resolved, method)?;
            let config = FluidConfig::default();
            let search =
                fluid::fixed_points(spec, &resolved.policy, &config).map_err(classify_fluid)?;
            match search.points.len() {
                1 => {
                    let point = &search.points[0];
                    let acceptance = (0..spec.class_count())
                        .map(|r| {
                            let kappa = spec.class(r).offered_load();
                            if kappa > 0.0 {
                                point.state[r] / kappa
                            } else {
                                1.0
                            }
                        })
                        .collect();
                    Ok((acceptance, None))
                }
                n => Err(CliError::Method(format!(
                    "fluid comparison needs a unique fixed point, found {n}"
                ))),
            }
        }
        "simulate" => {
            let seed = seed_override.or(resolved.seed).ok_or_else(|| {
                CliError::Validation(
                    "simulate needs a seed: pass --seed or set sim.seed in the scenario"
                        .to_string(),
                )
            })?;
            let inputs = SimInputs {
                topology: &resolved.topology,
                policy: &resolved.policy,
                routing: &resolved.routing,
                holding: &resolved.holding,
                warmup: resolved.warmup,
                horizon: resolved.horizon,
                initial_state: resolved.initial_state.as_deref(),
                instrument: None,
            };
            let stats = sim::run_experiment(&inputs, seed, resolved.replications)
                .map_err(classify_sim)?;
            let half: Vec<f64> = stats
                .acceptance_half_width
                .iter()
                .map(|h| h.unwrap_or(f64::NAN))
                .collect();
            Ok((stats.acceptance_estimate, Some(half)))
        }
        other => Err(CliError::Validation(format!(
            "unknown method '{other}'; expected one of {METHODS:?}"
        ))),
    }
}
