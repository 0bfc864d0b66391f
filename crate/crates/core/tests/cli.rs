use std::path::Path;
use std::process::{Command, Output};

use gridfreq::dynamics::run_scenario;
use gridfreq::metrics::{metrics_from_series, MetricsParams};
use gridfreq::output::read_csv_columns;
use gridfreq::scenario::bundled_scenario;

fn gridfreq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gridfreq")).args(args).output().unwrap()
}

fn out_dir(dir: &Path) -> &str {
    dir.to_str().unwrap()
}

#[test]
fn simulate_writes_three_files_and_metrics_survive_the_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let o = gridfreq(&["simulate", "ercot40", "--out", out_dir(dir.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["trace.csv", "events.csv", "metrics.csv"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }

    let cfg = bundled_scenario("ercot40").unwrap();
    let direct = run_scenario(&cfg).unwrap().metrics;
    let (header, cols) = read_csv_columns(&dir.path().join("trace.csv")).unwrap();
    assert_eq!(&header[..2], ["t_s", "f_coi_hz"]);
    let again = metrics_from_series(&cols[0], &cols[1], &MetricsParams::for_scenario(&cfg)).unwrap();
    assert!((again.nadir_hz - direct.nadir_hz).abs() <= 1e-9);
    assert!((again.nadir_time_s - direct.nadir_time_s).abs() <= 1e-9);
    assert!((again.settling_hz - direct.settling_hz).abs() <= 1e-9);
    assert!((again.rocof_hz_per_s - direct.rocof_hz_per_s).abs() <= 1e-9);
}

#[test]
fn frl_trip_is_logged_in_the_events_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = gridfreq(&["compare", "ercot80", "--tactics", "frl", "--out", out_dir(dir.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let events = std::fs::read_to_string(dir.path().join("events_frl.csv")).unwrap();
    assert_eq!(events.lines().filter(|l| l.contains(",frl_trip,")).count(), 1, "{events}");
    let table = std::fs::read_to_string(dir.path().join("comparison.csv")).unwrap();
    let labels: Vec<_> = table.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(labels, ["baseline", "frl"]);
}

#[test]
fn unknown_tactic_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = gridfreq(&["compare", "ei80", "--tactics", "flywheel", "--out", out_dir(dir.path())]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("flywheel"));
}

#[test]
fn malformed_config_fails_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "name = \"x\"\n[sim]\ndt_s = \"fast\"\n").unwrap();
    let o = gridfreq(&["simulate", cfg.to_str().unwrap(), "--out", out_dir(dir.path())]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
    assert!(!dir.path().join("trace.csv").exists());
}

#[test]
fn sweep_writes_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("d.cfg");
    std::fs::write(
        &spec,
        "scenario = \"ei80\"\ntactic = \"supercap\"\nmetrics = [\"nadir_hz\", \"ufls_time_s\"]\n\n\
         [[axis]]\nfield = \"storage[0].duration_s\"\nvalues = [2, 5.5, 10]\n",
    )
    .unwrap();
    let o = gridfreq(&["sweep", spec.to_str().unwrap(), "--out", out_dir(dir.path()), "--jobs", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], "storage[0].duration_s,nadir_hz,ufls_time_s,error");
    assert_eq!(lines.len(), 4);
    assert!(lines[2].starts_with("5.5,"));
    assert!(lines[1..].iter().all(|l| l.ends_with(',')), "{text}");
}

#[test]
fn sweep_with_a_failing_cell_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("d.cfg");
    std::fs::write(
        &spec,
        "scenario = \"ei20\"\nmetrics = [\"nadir_hz\"]\n\n[[axis]]\nfield = \"fleet[*].droop\"\nvalues = [0.05, -1.0]\n",
    )
    .unwrap();
    let o = gridfreq(&["sweep", spec.to_str().unwrap(), "--out", out_dir(dir.path())]);
    assert!(!o.status.success());
    let text = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(text.lines().count(), 3);
}
