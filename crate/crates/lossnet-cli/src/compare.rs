//! Cross-method comparison tables.

use std::path::{Path, PathBuf};

use lossnet::exact::{self, ExactLimits};
use lossnet::model::AdmissionPolicy;
use lossnet::scenario::ResolvedScenario;

use crate::methods::acceptance_of;
use crate::CliError;

/// Reference column: exact when the scenario is enumerable, otherwise a
/// simulation estimate with its confidence half-width.
struct Reference {
    label: &'static str,
    acceptance: Vec<f64>,
    half_width: Option<Vec<f64>>,
}

fn reference_of(
    resolved: &ResolvedScenario,
    seed_override: Option<u64>,
) -> Result<Reference, CliError> {
    if let Some(spec) = resolved.network() {
        let limits = ExactLimits::default();
        let attempt = match &resolved.policy {
            AdmissionPolicy::Uncontrolled => {
                exact::acceptance_exact(spec, &limits).map(|r| r.acceptance)
            }
            policy => exact::brute_force_controlled(spec, policy, &limits).and_then(|solved| {
                exact::controlled_acceptance(spec, policy, &solved.distribution)
                    .map(|r| r.acceptance)
            }),
        };
        if let Ok(acceptance) = attempt {
            return Ok(Reference {
                label: "exact",
                acceptance,
                half_width: None,
            });
        }
    }
    let (acceptance, half_width) = acceptance_of(resolved, "simulate", seed_override)?;
    Ok(Reference {
        label: "simulation",
        acceptance,
        half_width,
    })
}

/// Runs the requested methods, builds the comparison table, writes
/// `<name>.compare.csv` and returns the human-readable table.
pub fn run_compare(
    resolved: &ResolvedScenario,
    methods: &[String],
    seed_override: Option<u64>,
    out_dir: &Path,
) -> Result<(String, PathBuf), CliError> {
    if methods.is_empty() {
        return Err(CliError::Validation(
            "no methods requested and the scenario lists none".to_string(),
        ));
    }
    let reference = reference_of(resolved, seed_override)?;
    let classes = reference.acceptance.len();

    let mut columns: Vec<(String, Vec<f64>)> = Vec::new();
    for method in methods {
        let (acceptance, _) = acceptance_of(resolved, method, seed_override)?;
        if acceptance.len() != classes {
            return Err(CliError::Method(format!(
                "method '{method}' produced {} classes, reference has {classes}",
                acceptance.len()
            )));
        }
        columns.push((method.clone(), acceptance));
    }

    // CSV: one row per class, acceptance per method, deviation from the
    // reference per method.
    let mut csv = String::from("class,reference");
    if reference.half_width.is_some() {
        csv.push_str(",reference_half_width");
    }
    for (m, _) in &columns {
        csv.push_str(&format!(",P_{m}"));
    }
    for (m, _) in &columns {
        csv.push_str(&format!(",dev_{m}"));
    }
    csv.push('\n');
    for r in 0..classes {
        csv.push_str(&format!("{},{}", r + 1, reference.acceptance[r]));
        if let Some(hw) = &reference.half_width {
            csv.push_str(&format!(",{}", hw[r]));
        }
        for (_, acc) in &columns {
            csv.push_str(&format!(",{}", acc[r]));
        }
        for (_, acc) in &columns {
            csv.push_str(&format!(",{}", (acc[r] - reference.acceptance[r]).abs()));
        }
        csv.push('\n');
    }

    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Validation(format!("cannot create {}: {e}", out_dir.display())))?;
    let path = out_dir.join(format!("{}.compare.csv", resolved.name));
    std::fs::write(&path, &csv)
        .map_err(|e| CliError::Validation(format!("cannot write {}: {e}", path.display())))?;

    // Console table.
    let mut table = format!(
        "scenario {}: acceptance probability per class (reference: {})\n",
        resolved.name, reference.label
    );
    table.push_str(&format!("{:<7}{:>14}", "class", reference.label));
    for (m, _) in &columns {
        table.push_str(&format!("{:>14}", m));
    }
    for (m, _) in &columns {
        table.push_str(&format!("{:>14}", format!("|d| {m}")));
    }
    table.push('\n');
    for r in 0..classes {
        table.push_str(&format!("{:<7}{:>14.8}", r + 1, reference.acceptance[r]));
        for (_, acc) in &columns {
            table.push_str(&format!("{:>14.8}", acc[r]));
        }
        for (_, acc) in &columns {
            table.push_str(&format!(
                "{:>14.3e}",
                (acc[r] - reference.acceptance[r]).abs()
            ));
        }
        table.push('\n');
    }
    Ok((table, path))
}
