//! Sweep cardinality, failure rows, determinism and resumption.

use std::path::{Path, PathBuf};

use sparsync_harness::config::ExperimentConfig;
use sparsync_harness::output::{meta_path, read_rows, SweepRow};
use sparsync_harness::sweep::sweep;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

const GRID: &str = r#"
channel = "reference.dmc"
alpha = 0.02
n = [200, 256, 300]
regime = ["min_delay", "small_delay"]
rho = "0.5"
delta1 = 0.05
c_fraction = 0.9
ln_m = 2.0
trials = 300
seed = 11
"#;

fn config(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml(text, fixtures()).unwrap()
}

#[test]
fn empty_grid_writes_only_the_header() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("channel = \"reference.dmc\"\nalpha = 0.02\nn = []");
    let path = sweep(&cfg, dir.path()).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(read_rows(&path).unwrap().is_empty());
    assert!(meta_path(&path).is_file());
}

#[test]
fn grid_rows_are_complete_and_ordered() {
    let dir = tempfile::tempdir().unwrap();
    let rows = read_rows(&sweep(&config(GRID), dir.path()).unwrap()).unwrap();
    assert_eq!(rows.len(), 6);
    let keys: Vec<(usize, &str)> = rows.iter().map(|r| (r.n, r.regime.as_str())).collect();
    assert_eq!(
        keys,
        [(200, "min_delay"), (200, "small_delay"), (256, "min_delay"), (256, "small_delay"), (300, "min_delay"), (300, "small_delay")]
    );
    for r in &rows {
        assert!(r.is_ok(), "{}", r.status);
        assert_eq!(r.trials, 300);
        assert_eq!(r.e1_not_e2, 0);
    }
}

#[test]
fn failing_rows_are_marked_not_dropped() {
    let dir = tempfile::tempdir().unwrap();
    // A = e^(0.02 n) exceeds the window cap for the largest n only.
    let text = GRID.replace("n = [200, 256, 300]", "n = [200, 900]") + "max_window = 1000000\n";
    let rows = read_rows(&sweep(&config(&text), dir.path()).unwrap()).unwrap();
    assert_eq!(rows.len(), 4);
    assert!(rows[0].is_ok() && rows[1].is_ok());
    for r in &rows[2..] {
        assert!(r.status.starts_with("error:") && r.status.contains("max_window"), "{}", r.status);
        assert!(r.event("e2").p.is_nan());
    }
}

#[test]
fn sweeps_are_reproducible_and_resume_identically() {
    let cfg = config(GRID);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let full = std::fs::read(sweep(&cfg, a.path()).unwrap()).unwrap();
    let again = std::fs::read(sweep(&cfg, b.path()).unwrap()).unwrap();
    assert_eq!(full, again);

    // Simulate a kill while the fourth row was being written.
    let path = b.path().join("rows.csv");
    let text = String::from_utf8(full.clone()).unwrap();
    let lines: Vec<&str> = text.split_inclusive('\n').collect();
    let mut cut: String = lines[..4].concat();
    cut.push_str(&lines[4][..lines[4].len() / 2]);
    std::fs::write(&path, &cut).unwrap();
    sweep(&cfg, b.path()).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), full);

    // A finished sweep is left untouched.
    sweep(&cfg, b.path()).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), full);
}

#[test]
fn resume_refuses_a_foreign_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("rows.csv"), "a,b,c\n1,2,3\n").unwrap();
    let e = sweep(&config(GRID), dir.path()).unwrap_err();
    assert_eq!(e.exit_code(), 2);
}

#[test]
fn rows_round_trip_through_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = sweep(&config(GRID), dir.path()).unwrap();
    let rows = read_rows(&path).unwrap();
    for r in &rows {
        let rec = csv::StringRecord::from(r.to_record());
        let back = SweepRow::from_record(&rec).unwrap();
        assert_eq!(back.to_record(), r.to_record());
    }
    assert_eq!(SweepRow::header().len(), rows[0].to_record().len());
}
