use std::path::PathBuf;
use std::process::{Command, Output};

fn case_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("cases/case3.json")
}

fn run(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_passivity"));
    cmd.args(args);
    match threads {
        Some(t) => cmd.env("PASSIVITY_GRID_THREADS", t),
        None => cmd.env_remove("PASSIVITY_GRID_THREADS"),
    };
    cmd.output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(run(&[], None).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"], None).status.code(), Some(1));
    assert_eq!(
        run(&["verify", case_path().to_str().unwrap()], None).status.code(),
        Some(1)
    );
    assert_eq!(run(&["lambda", "/no/such/case.json"], None).status.code(), Some(1));
    assert_eq!(run(&["--help"], None).status.code(), Some(0));
}

#[test]
fn malformed_case_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ \"buses\": [").unwrap();
    let o = run(&["lambda", bad.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line"));
}

#[test]
fn numerical_failure_exits_with_two() {
    let o = run(&["lambda", case_path().to_str().unwrap(), "--s", "60"], None);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn lambda_and_verify_report_the_base_case() {
    let case = case_path();
    let o = run(&["lambda", case.to_str().unwrap()], None);
    assert!(o.status.success());
    let text = stdout(&o);
    let lambda: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("lambda = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((lambda + 0.1426).abs() < 1e-4);

    let o = run(&["verify", case.to_str().unwrap(), "--sigma", "0.5"], None);
    assert!(stdout(&o).contains("condition satisfied"));
    let o = run(&["verify", case.to_str().unwrap(), "--sigma", "0.1"], None);
    assert!(stdout(&o).contains("condition violated"));

    let o = run(&["smallsignal", case.to_str().unwrap(), "--sigma", "-0.5"], None);
    assert!(stdout(&o).contains("verdict = red"));
}

#[test]
fn sweeps_write_exact_headers() {
    let dir = tempfile::tempdir().unwrap();
    let case = case_path();
    let out = dir.path().to_str().unwrap();
    assert!(run(&["sweep-lambda", case.to_str().unwrap(), "--out", out], None)
        .status
        .success());
    assert!(
        run(&["sweep-grid", case.to_str().unwrap(), "--lossy", "--out", out], None)
            .status
            .success()
    );
    let first = |name: &str| {
        std::fs::read_to_string(dir.path().join(name))
            .unwrap()
            .lines()
            .next()
            .unwrap()
            .to_string()
    };
    assert_eq!(first("lambda.csv"), "s,lambda");
    assert_eq!(first("grid_lossy.csv"), "s,sigma,rho,max_real_part,verdict,neg_lambda");
    assert!(dir.path().join("grid_lossy.gp").exists());
    let rows = std::fs::read_to_string(dir.path().join("grid_lossy.csv"))
        .unwrap()
        .lines()
        .count();
    assert_eq!(rows, 1 + 21 * 41);
}

#[test]
fn grid_output_is_identical_across_thread_counts() {
    let case = case_path();
    let a = run(&["sweep-grid", case.to_str().unwrap()], Some("1"));
    let b = run(&["sweep-grid", case.to_str().unwrap()], Some("4"));
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(
        run(&["sweep-grid", case.to_str().unwrap()], Some("many")).status.code(),
        Some(1)
    );
}

#[test]
fn simulate_writes_a_trace() {
    let dir = tempfile::tempdir().unwrap();
    let case_text = std::fs::read_to_string(case_path())
        .unwrap()
        .replace("\"horizon\": 20.0", "\"horizon\": 1.0")
        .replace("\"window\": 2.0", "\"window\": 0.5");
    let case = dir.path().join("short.json");
    std::fs::write(&case, case_text).unwrap();
    let out = dir.path().join("out");
    let o = run(
        &[
            "simulate",
            case.to_str().unwrap(),
            "--fault-bus",
            "2",
            "--clear",
            "0.05",
            "--out",
            out.to_str().unwrap(),
        ],
        None,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let trace = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(trace.lines().next().unwrap().starts_with("t,bus1_delta"));
    assert!(trace.lines().count() > 10);
    assert_eq!(
        run(
            &[
                "simulate",
                case.to_str().unwrap(),
                "--fault-bus",
                "9",
                "--clear",
                "0.05"
            ],
            None
        )
        .status
        .code(),
        Some(1)
    );
}

#[test]
fn cct_reports_every_bus_and_offset() {
    let dir = tempfile::tempdir().unwrap();
    let case_text = std::fs::read_to_string(case_path())
        .unwrap()
        .replace("\"horizon\": 20.0", "\"horizon\": 1.0")
        .replace("\"window\": 2.0", "\"window\": 0.5");
    let case = dir.path().join("short.json");
    std::fs::write(&case, case_text).unwrap();
    let o = run(&["cct", case.to_str().unwrap()], Some("2"));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("fault_bus,sigma_offset,sigma,cct_seconds"));
    assert_eq!(lines.count(), 9);
}
