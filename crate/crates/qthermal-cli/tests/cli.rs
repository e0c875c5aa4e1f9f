//! End-to-end tests of the `qthermal` binary: exit codes, report and
//! ledger formats, CSV stability, and the canned netlists.

use std::path::Path;
use std::process::{Command, Output};

fn qthermal(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qthermal"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn write_preset(name: &str, dir: &Path) -> String {
    let file = format!("{name}.qtc");
    let out = qthermal(&["preset", name], dir);
    assert!(out.status.success(), "{}", stderr(&out));
    file
}

const RESISTOR: &str = "qubit 1 omega=2\nqubit 2 omega=2.5\ncoupling 1 2 J=1\n\
                        bath A qubit=1 T=0 gamma=0.1\nbath B qubit=2 T=4 gamma=0.05\n";

#[test]
fn run_reports_heat_flowing_out_of_the_grounded_bath() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("resistor.qtc"), RESISTOR).unwrap();
    let out = qthermal(&["run", "resistor.qtc"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let report = stdout(&out);
    let j_a1: f64 = report
        .lines()
        .find_map(|l| l.strip_prefix("bath-current A "))
        .expect("bath-current row")
        .parse()
        .unwrap();
    assert!(j_a1 < 0.0, "heat must flow from qubit 1 into the cold bath: {j_a1}");
    for prefix in [
        "steady-state residual",
        "link-current 1 2",
        "link-current 2 1",
        "node-residual 1",
        "effective-temperature 1",
        "potential 1 A",
        "potential 2 B",
    ] {
        assert!(report.lines().any(|l| l.starts_with(prefix)), "missing row {prefix}");
    }
}

#[test]
fn run_narrows_to_the_selected_observables() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("resistor.qtc"), RESISTOR).unwrap();
    let out = qthermal(
        &["run", "resistor.qtc", "--tol", "1e-12", "--observables", "temp.1", "bath.B"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let lines: Vec<String> = stdout(&out).lines().map(String::from).collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("temp.1 "));
    assert!(lines[1].starts_with("bath.B "));
}

#[test]
fn run_rejects_a_malformed_netlist_with_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("broken.qtc"), "qubit 1 omega=oops\n").unwrap();
    let out = qthermal(&["run", "broken.qtc"], dir.path());
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
    assert!(!stderr(&out).is_empty());
}

#[test]
fn run_maps_solver_failures_to_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    // Qubit 3 is wired to nothing and touches no bath, so the stationary
    // state is structurally non-unique.
    let text = "qubit 1 omega=1\nqubit 2 omega=2\nqubit 3 omega=3\ncoupling 1 2 J=1\n\
                bath A qubit=1 T=0 gamma=0.1\nbath B qubit=2 T=5 gamma=0.1\n";
    std::fs::write(dir.path().join("floating.qtc"), text).unwrap();
    let out = qthermal(&["run", "floating.qtc"], dir.path());
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn sweep_emits_byte_stable_csv_in_grid_order() {
    let dir = tempfile::tempdir().unwrap();
    let file = write_preset("fig4", dir.path());
    let args = [
        "sweep", &file, "--param", "bath.B.T", "--from", "1", "--to", "20", "--steps", "8",
        "--out", "a.csv", "--observables", "bath.A", "bath.B", "law.kirchhoff-current(3)",
    ];
    let out = qthermal(&args, dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let mut rerun = args;
    rerun[11] = "b.csv";
    let out = qthermal(&rerun, dir.path());
    assert!(out.status.success(), "{}", stderr(&out));

    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(a, b, "csv must be byte-stable across runs");

    let text = String::from_utf8(a).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "bath.B.T,bath.A,bath.B,law.kirchhoff-current(3)");
    assert_eq!(lines.len(), 9);
    let mut previous = f64::NEG_INFINITY;
    for line in &lines[1..] {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells.len(), 4);
        let t: f64 = cells[0].parse().unwrap();
        assert!(t > previous, "rows must follow the grid order");
        previous = t;
        // Current conservation at the bath-free node, at every point.
        let residual: f64 = cells[3].parse().unwrap();
        assert!(residual.abs() < 1e-9, "kirchhoff residual {residual:.3e} at T={t}");
    }
}

#[test]
fn sweep_with_one_step_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("resistor.qtc"), RESISTOR).unwrap();
    let args = ["sweep", "resistor.qtc", "--param", "bath.B.T", "--from", "1", "--to", "2",
                "--steps", "1", "--out", "x.csv"];
    let out = qthermal(&args, dir.path());
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
    assert!(!dir.path().join("x.csv").exists());
}

#[test]
fn sweep_survives_failing_points_with_empty_cells() {
    let dir = tempfile::tempdir().unwrap();
    let text = "qubit 1 omega=1\nqubit 2 omega=2\nqubit 3 omega=3\ncoupling 1 2 J=1\n\
                bath A qubit=1 T=0 gamma=0.1\nbath B qubit=2 T=5 gamma=0.1\n";
    std::fs::write(dir.path().join("floating.qtc"), text).unwrap();
    let args = ["sweep", "floating.qtc", "--param", "bath.B.T", "--from", "1", "--to", "3",
                "--steps", "3", "--out", "holes.csv"];
    let out = qthermal(&args, dir.path());
    assert!(out.status.success(), "a failing point must not abort the sweep");
    assert!(stderr(&out).contains("note:"), "{}", stderr(&out));
    let text = std::fs::read_to_string(dir.path().join("holes.csv")).unwrap();
    for line in text.lines().skip(1) {
        let (value, cells) = line.split_once(',').unwrap();
        value.parse::<f64>().unwrap();
        assert!(cells.split(',').all(str::is_empty), "cells should be empty: {line}");
    }
}

#[test]
fn sweep_crosses_the_shielded_center_balance() {
    let dir = tempfile::tempdir().unwrap();
    let file = write_preset("swb-cond2", dir.path());
    // The preset holds J46 = 1.3 with the other ties satisfied, so the
    // current into the center qubit changes sign exactly at J34 = 1.3
    // (the circuit has incidental zeros elsewhere; the balance one is
    // guaranteed).
    let args = ["sweep", &file, "--param", "coupling.3.4.J", "--from", "1.2", "--to", "1.4",
                "--steps", "3", "--out", "cross.csv", "--observables", "link.3.7"];
    let out = qthermal(&args, dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let text = std::fs::read_to_string(dir.path().join("cross.csv")).unwrap();
    let j37: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(j37[0] * j37[2] < 0.0, "sign change expected across J34 = 1.3: {j37:?}");
    assert!(j37[1].abs() < 1e-10, "current into qubit 7 at balance: {:.3e}", j37[1]);
}

#[test]
fn verify_passes_a_healthy_circuit() {
    let dir = tempfile::tempdir().unwrap();
    let file = write_preset("fig4", dir.path());
    let out = qthermal(&["verify", &file], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    for line in stdout(&out).lines() {
        let fields: Vec<&str> = line.split(' ').collect();
        assert_eq!(fields.len(), 4, "ledger line: {line}");
        assert_eq!(*fields.last().unwrap(), "PASS");
    }
    assert!(stdout(&out).lines().count() >= 10);
}

#[test]
fn verify_fails_a_deliberately_perturbed_state() {
    let dir = tempfile::tempdir().unwrap();
    let file = write_preset("fig4", dir.path());
    let out = qthermal(&["verify", &file, "--perturb"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(stdout(&out).lines().any(|l| l.ends_with("FAIL")), "{}", stdout(&out));
}

#[test]
fn verify_reports_the_adder_laws_on_the_tuned_preset() {
    let dir = tempfile::tempdir().unwrap();
    let file = write_preset("adder-n2", dir.path());
    let out = qthermal(&["verify", &file], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let text = stdout(&out);
    assert!(text.lines().any(|l| l.starts_with("adder-current-sum") && l.ends_with("PASS")));
    assert!(
        text.lines().any(|l| l.starts_with("adder-temperature-relation") && l.ends_with("PASS")),
        "{text}"
    );
}

#[test]
fn verify_maps_solver_failures_to_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let text = "qubit 1 omega=1\nqubit 2 omega=2\nqubit 3 omega=3\ncoupling 1 2 J=1\n\
                bath A qubit=1 T=0 gamma=0.1\nbath B qubit=2 T=5 gamma=0.1\n";
    std::fs::write(dir.path().join("floating.qtc"), text).unwrap();
    let out = qthermal(&["verify", "floating.qtc"], dir.path());
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn presets_write_parseable_files() {
    let dir = tempfile::tempdir().unwrap();
    for name in qthermal_cli::PRESET_NAMES {
        let out = qthermal(&["preset", name, "--out", "circuit.qtc"], dir.path());
        assert!(out.status.success(), "preset {name}: {}", stderr(&out));
        let text = std::fs::read_to_string(dir.path().join("circuit.qtc")).unwrap();
        qthermal::netlist::parse_circuit(&text)
            .unwrap_or_else(|e| panic!("preset {name} does not parse: {e}"));
    }
}

#[test]
fn unknown_presets_list_the_valid_names() {
    let dir = tempfile::tempdir().unwrap();
    let out = qthermal(&["preset", "bogus"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("fig4") && err.contains("adder-n2"), "{err}");
}
