//! End-to-end tests of the binary: exit codes, file outputs, and the
//! cross-method comparison contract.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn binary() -> &'static str {
    env!("CARGO_BIN_EXE_lossnet")
}

fn workdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("lossnet-cli-{}-{tag}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> Output {
    Command::new(binary())
        .args(args)
        .output()
        .expect("binary runs")
}

fn read_csv_column(path: &Path, header: &str) -> Vec<f64> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let headers: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = headers
        .iter()
        .position(|h| *h == header)
        .unwrap_or_else(|| panic!("no column {header} in {headers:?}"));
    lines
        .map(|l| l.split(',').nth(idx).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn run_kdr_on_builtin_single_link() {
    let dir = workdir("kdr");
    let out = run(&[
        "run",
        "--method",
        "kdr",
        "--out",
        dir.to_str().unwrap(),
        "builtin:single_link",
    ]);
    assert!(out.status.success(), "{out:?}");
    let json = std::fs::read_to_string(dir.join("single_link.kdr.json")).unwrap();
    assert!(json.contains("\"P\""));
    assert!(json.contains("\"mean_occupancy\""));
    let csv = std::fs::read_to_string(dir.join("single_link.kdr.csv")).unwrap();
    assert!(csv.starts_with("state,prob\n"));
    assert_eq!(csv.lines().count(), 12); // header + states 0..=10
}

#[test]
fn efpa_rejects_general_requirements_with_exit_2() {
    let dir = workdir("efpa-reject");
    let scenario = dir.join("wide.json");
    std::fs::write(
        &scenario,
        r#"{
            "name": "wide",
            "classes": [{"nu": 1.0, "mu": 1.0}],
            "capacities": [4],
            "requirements": [[2]],
            "policy": {"type": "uncontrolled"}
        }"#,
    )
    .unwrap();
    let out = run(&[
        "run",
        "--method",
        "efpa",
        "--out",
        dir.to_str().unwrap(),
        scenario.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "{out:?}");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("not 0 or 1"), "stderr: {stderr}");
}

#[test]
fn simulate_without_seed_is_a_validation_error() {
    let dir = workdir("noseed");
    let scenario = dir.join("noseed.json");
    std::fs::write(
        &scenario,
        r#"{
            "name": "noseed",
            "classes": [{"nu": 1.0, "mu": 1.0}],
            "capacities": [4],
            "requirements": [[1]],
            "policy": {"type": "uncontrolled"}
        }"#,
    )
    .unwrap();
    let out = run(&[
        "run",
        "--method",
        "simulate",
        "--out",
        dir.to_str().unwrap(),
        scenario.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "{out:?}");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("seed"), "stderr: {stderr}");
    // With --seed it runs.
    let out = run(&[
        "run",
        "--method",
        "simulate",
        "--seed",
        "7",
        "--out",
        dir.to_str().unwrap(),
        scenario.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{out:?}");
    assert!(dir.join("noseed.simulate.json").exists());
}

#[test]
fn compare_single_link_efpa_equals_exact() {
    let dir = workdir("compare");
    let out = run(&[
        "compare",
        "--methods",
        "efpa,kdr,simulate",
        "--out",
        dir.to_str().unwrap(),
        "builtin:single_link",
    ]);
    assert!(out.status.success(), "{out:?}");
    let path = dir.join("single_link.compare.csv");
    let exact = read_csv_column(&path, "reference");
    let efpa = read_csv_column(&path, "P_efpa");
    let kdr = read_csv_column(&path, "P_kdr");
    for r in 0..exact.len() {
        assert!((exact[r] - efpa[r]).abs() <= 1e-10, "efpa vs exact");
        assert!((exact[r] - kdr[r]).abs() <= 1e-10, "kdr vs exact");
    }
    let dev = read_csv_column(&path, "dev_simulate");
    assert!(dev[0] < 0.05, "simulation should land near exact");
}

#[test]
fn compare_with_no_arrivals_reports_one_everywhere() {
    let dir = workdir("zero");
    let scenario = dir.join("zero.json");
    std::fs::write(
        &scenario,
        r#"{
            "name": "zero",
            "classes": [{"nu": 0.0, "mu": 1.0}, {"nu": 0.0, "mu": 2.0}],
            "capacities": [3],
            "requirements": [[1, 1]],
            "policy": {"type": "uncontrolled"},
            "sim": {"seed": 5}
        }"#,
    )
    .unwrap();
    let out = run(&[
        "compare",
        "--methods",
        "exact,kdr,efpa,reduced-load,kelly,lp,simulate",
        "--out",
        dir.to_str().unwrap(),
        scenario.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{out:?}");
    let path = dir.join("zero.compare.csv");
    for method in ["exact", "kdr", "efpa", "reduced-load", "kelly", "lp", "simulate"] {
        let column = read_csv_column(&path, &format!("P_{method}"));
        for (r, p) in column.iter().enumerate() {
            assert_eq!(*p, 1.0, "method {method} class {r}");
        }
    }
}

#[test]
fn fluid_hunt_overload_writes_two_fixed_points_and_trajectories() {
    let dir = workdir("hunt");
    let out = run(&[
        "run",
        "--method",
        "fluid",
        "--out",
        dir.to_str().unwrap(),
        "builtin:hunt_overload",
    ]);
    assert!(out.status.success(), "{out:?}");
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("hunt_overload.fluid.json")).unwrap())
            .unwrap();
    assert_eq!(json["points"].as_array().unwrap().len(), 2);
    // Trajectories: empty start plus one saturating corner per resource.
    assert!(dir.join("hunt_overload.fluid.traj0.csv").exists());
    assert!(dir.join("hunt_overload.fluid.traj1.csv").exists());
    assert!(dir.join("hunt_overload.fluid.traj2.csv").exists());
    let traj = std::fs::read_to_string(dir.join("hunt_overload.fluid.traj1.csv")).unwrap();
    assert!(traj.starts_with("t,x_1,x_2,x_3,P_1,P_2,P_3,active_constraints\n"));
}

#[test]
fn scenario_library_writes_and_lists() {
    let dir = workdir("library");
    let out = run(&["scenarios", "list"]);
    assert!(out.status.success());
    let names = String::from_utf8_lossy(&out.stdout);
    for expected in [
        "single_link",
        "two_class_reservation",
        "triangle_repacking",
        "hunt_underload",
        "hunt_overload",
        "fully_connected_dar",
        "star_k_links",
    ] {
        assert!(names.contains(expected), "missing {expected}");
    }
    let out = run(&["scenarios", "write", "--dir", dir.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(dir.join("fully_connected_dar.json").exists());
    // A written scenario file runs as-is.
    let out = run(&[
        "run",
        "--method",
        "simulate",
        "--out",
        dir.to_str().unwrap(),
        dir.join("fully_connected_dar.json").to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{out:?}");
    assert!(dir.join("fully_connected_dar.simulate.hist.csv").exists());
    let hist = std::fs::read_to_string(dir.join("fully_connected_dar.simulate.hist.csv")).unwrap();
    assert!(hist.starts_with("bin_lo,bin_hi,weight\n"));
}

#[test]
fn unknown_method_is_a_validation_error() {
    let out = run(&["run", "--method", "magic", "builtin:single_link"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn format_json_suppresses_csv() {
    let dir = workdir("jsononly");
    let out = run(&[
        "run",
        "--method",
        "kdr",
        "--format",
        "json",
        "--out",
        dir.to_str().unwrap(),
        "builtin:single_link",
    ]);
    assert!(out.status.success());
    assert!(dir.join("single_link.kdr.json").exists());
    assert!(!dir.join("single_link.kdr.csv").exists());
}

#[test]
fn every_library_scenario_runs_under_its_first_method() {
    let dir = workdir("all-builtins");
    let list = run(&["scenarios", "list"]);
    let names: Vec<String> = String::from_utf8_lossy(&list.stdout)
        .lines()
        .map(str::to_string)
        .collect();
    assert_eq!(names.len(), 7);
    for name in names {
        let written = run(&["scenarios", "write", "--dir", dir.to_str().unwrap(), &name]);
        assert!(written.status.success());
        let path = dir.join(format!("{name}.json"));
        let scenario: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        let method = scenario["methods"][0].as_str().unwrap().to_string();
        let started = std::time::Instant::now();
        let out = run(&[
            "run",
            "--method",
            &method,
            "--out",
            dir.to_str().unwrap(),
            path.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{name} under {method}: {out:?}");
        assert!(
            started.elapsed().as_secs() < 60,
            "{name} under {method} took {:?}",
            started.elapsed()
        );
    }
}

#[test]
fn compare_deviation_shrinks_under_proportional_scaling() {
    let dir = workdir("sweep");
    let mut previous = f64::INFINITY;
    for n in [1u32, 4, 16] {
        let scenario = dir.join(format!("scaled{n}.json"));
        std::fs::write(
            &scenario,
            format!(
                r#"{{
                    "name": "scaled{n}",
                    "classes": [
                        {{"nu": {}, "mu": 1.0}},
                        {{"nu": {}, "mu": 1.0}},
                        {{"nu": {}, "mu": 1.0}}
                    ],
                    "capacities": [{}, {}],
                    "requirements": [[1, 0, 1], [0, 1, 1]],
                    "policy": {{"type": "uncontrolled"}}
                }}"#,
                5.0 * f64::from(n),
                2.0 * f64::from(n),
                2.0 * f64::from(n),
                4 * n,
                4 * n
            ),
        )
        .unwrap();
        let out = run(&[
            "compare",
            "--methods",
            "kelly",
            "--out",
            dir.to_str().unwrap(),
            scenario.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{out:?}");
        let dev = read_csv_column(&dir.join(format!("scaled{n}.compare.csv")), "dev_kelly");
        let worst = dev.iter().cloned().fold(0.0f64, f64::max);
        assert!(worst < previous, "N={n}: deviation {worst} !< {previous}");
        previous = worst;
    }
}
