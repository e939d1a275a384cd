use assert_cmd::Command;
use predicates::prelude::*;
use std::fs;

fn cmd() -> Command {
    Command::cargo_bin("superpoint").unwrap()
}

fn write(dir: &tempfile::TempDir, name: &str, content: &str) -> std::path::PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, content).unwrap();
    path
}

const DESK_FLAGS: &[&str] = &[
    "--k", "30", "--kprime", "30", "--g", "256", "--c", "8", "--r", "4", "--u", "2", "--s", "8",
    "--theta", "64", "--cadence", "5",
];

#[test]
fn generate_then_detect_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(
        &dir,
        "spec.txt",
        "slices=120\nseed=7\nbackground_hosts=20\nbackground_degree=uniform:1:10\nplant=10.1.2.3,150,40,55\n",
    );
    let trace = dir.path().join("demo.trace");
    cmd()
        .arg("--generate")
        .arg(&spec)
        .arg("--out")
        .arg(&trace)
        .assert()
        .success();

    let report = dir.path().join("rep.csv");
    let metrics = dir.path().join("met.csv");
    cmd()
        .args(DESK_FLAGS)
        .arg("--trace")
        .arg(&trace)
        .arg("--oracle")
        .arg("--report")
        .arg(&report)
        .arg("--metrics")
        .arg(&metrics)
        .assert()
        .success();

    let report = fs::read_to_string(&report).unwrap();
    assert!(report.starts_with("window_end_slice,ip,estimate\n"));
    assert!(report.contains("10.1.2.3"), "planted host missing:\n{report}");
    let metrics = fs::read_to_string(&metrics).unwrap();
    assert!(metrics.starts_with("window_end_slice,fpr,fnr,tfr\n"));
    // windows fully covering the span score zero false rates
    assert!(metrics.contains("55,0.000000,0.000000,0.000000"), "{metrics}");
}

#[test]
fn empty_trace_exits_zero_with_empty_report() {
    let dir = tempfile::tempdir().unwrap();
    let trace = write(&dir, "empty.trace", "# slice_seconds=1\n");
    cmd()
        .args(DESK_FLAGS)
        .arg("--trace")
        .arg(&trace)
        .assert()
        .success()
        .stdout("window_end_slice,ip,estimate\n");
}

#[test]
fn identical_seeds_give_byte_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(
        &dir,
        "spec.txt",
        "slices=90\nseed=3\nbackground_hosts=15\nbackground_degree=uniform:1:8\nplant=10.0.0.9,120,20,50\n",
    );
    let trace = dir.path().join("t.trace");
    cmd()
        .arg("--generate")
        .arg(&spec)
        .arg("--out")
        .arg(&trace)
        .assert()
        .success();
    let mut outputs = Vec::new();
    for run in 0..2 {
        let report = dir.path().join(format!("rep{run}.csv"));
        let metrics = dir.path().join(format!("met{run}.csv"));
        cmd()
            .args(DESK_FLAGS)
            .arg("--seed")
            .arg("11")
            .arg("--trace")
            .arg(&trace)
            .arg("--oracle")
            .arg("--report")
            .arg(&report)
            .arg("--metrics")
            .arg(&metrics)
            .assert()
            .success();
        outputs.push((fs::read(&report).unwrap(), fs::read(&metrics).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let trace = write(&dir, "t.trace", "# slice_seconds=1\n0,1.1.1.1,2.2.2.2\n");
    let config = write(
        &dir,
        "run.conf",
        "k=30\nkprime=30\ng=256\nc=8\nr=4\nu=2\ns=8\ntheta=64\ncadence=5\nseed=1\n",
    );
    // config alone works
    cmd()
        .arg("--config")
        .arg(&config)
        .arg("--trace")
        .arg(&trace)
        .assert()
        .success();
    // flag overrides a config value with something invalid: s=1 leaves
    // coverage gaps and must be rejected
    cmd()
        .arg("--config")
        .arg(&config)
        .arg("--s")
        .arg("1")
        .arg("--trace")
        .arg(&trace)
        .assert()
        .failure()
        .stderr(predicate::str::contains("hash parameters"));
}

#[test]
fn config_violations_name_the_cause() {
    let dir = tempfile::tempdir().unwrap();
    let trace = write(&dir, "t.trace", "# slice_seconds=1\n0,1.1.1.1,2.2.2.2\n");
    // g below 2k
    cmd()
        .args(["--k", "300", "--g", "100"])
        .arg("--trace")
        .arg(&trace)
        .assert()
        .failure()
        .stderr(predicate::str::contains("parameter g"));
    // k' above k
    cmd()
        .args([
            "--k", "30", "--kprime", "31", "--g", "256", "--c", "8", "--r", "4", "--u", "2",
            "--s", "8", "--theta", "64",
        ])
        .arg("--trace")
        .arg(&trace)
        .assert()
        .failure()
        .stderr(predicate::str::contains("parameter k_prime"));
}

#[test]
fn malformed_trace_is_fatal_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let trace = write(&dir, "bad.trace", "0,1.1.1.1,2.2.2.2\n1,9.9.9.9\n");
    cmd()
        .args(DESK_FLAGS)
        .arg("--trace")
        .arg(&trace)
        .assert()
        .failure()
        .stderr(predicate::str::contains("line 2"));
}

#[test]
fn bench_mode_emits_cost_table() {
    let dir = tempfile::tempdir().unwrap();
    let trace = write(
        &dir,
        "t.trace",
        "# slice_seconds=1\n0,1.1.1.1,2.2.2.2\n1,1.1.1.1,3.3.3.3\n2,1.1.1.1,4.4.4.4\n",
    );
    let assert = cmd()
        .args(DESK_FLAGS)
        .arg("--bench")
        .arg("--trace")
        .arg(&trace)
        .assert()
        .success();
    let out = String::from_utf8(assert.get_output().stdout.clone()).unwrap();
    let mut lines = out.lines();
    assert_eq!(
        lines.next().unwrap(),
        "slice,events,scan_ns,events_per_sec,tick_examined,tick_expected,detect_ns"
    );
    assert_eq!(lines.count(), 3);
}

#[test]
fn boundary_preset_fails_discrete_and_passes_sliding() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("boundary.trace");
    cmd()
        .args(["--k", "30", "--theta", "16", "--seed", "5"])
        .arg("--boundary")
        .arg("--out")
        .arg(&trace)
        .assert()
        .success();

    // detect with a threshold safely between one half (8) and both (16),
    // so estimator noise cannot flip either verdict
    let sliding = cmd()
        .args([
            "--k", "30", "--kprime", "30", "--g", "256", "--c", "8", "--r", "4", "--u", "2",
            "--s", "8", "--theta", "12",
        ])
        .arg("--trace")
        .arg(&trace)
        .assert()
        .success();
    let sliding_out = String::from_utf8(sliding.get_output().stdout.clone()).unwrap();
    assert!(sliding_out.contains("10.99.0.1"), "{sliding_out}");

    // discrete windows of the same size never see both halves
    let discrete = cmd()
        .args([
            "--g", "256", "--c", "8", "--r", "4", "--u", "2", "--s", "8", "--theta", "12",
            "--discrete", "30",
        ])
        .arg("--trace")
        .arg(&trace)
        .assert()
        .success();
    let discrete_out = String::from_utf8(discrete.get_output().stdout.clone()).unwrap();
    assert!(!discrete_out.contains("10.99.0.1"), "{discrete_out}");
}
