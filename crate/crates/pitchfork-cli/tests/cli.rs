//! Black-box tests of the `pitchfork` binary: exit codes, report text and
//! CSV determinism.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pitchfork"))
}

fn problem_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../problems")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn temp_file(name: &str) -> PathBuf {
    std::env::temp_dir().join(format!("pitchfork-test-{}-{name}", std::process::id()))
}

#[test]
fn analyze_reports_pitchfork_and_exits_zero() {
    let p = problem_path("ex21.txt");
    let out = run(&["analyze", p.to_str().unwrap(), "--delta-eps", "0.04"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("verdict:     pitchfork 1->3"), "{text}");
    assert!(text.contains("P2: directional derivative = -2.0"), "{text}");
    assert!(text.contains("counts:      1 -> 3"), "{text}");
}

#[test]
fn analyze_missing_file_exits_one() {
    let out = run(&["analyze", "/nonexistent/problem.txt"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn analyze_malformed_file_exits_one() {
    let path = temp_file("malformed.txt");
    std::fs::write(&path, "dim = 2\nthis is not a problem file\n").unwrap();
    let out = run(&["analyze", path.to_str().unwrap()]);
    std::fs::remove_file(&path).ok();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn analyze_inconsistent_exits_two() {
    // A clean pitchfork analyzed in a ball too small to contain the outer
    // branches: the criteria all pass but the counts stay 1 -> 1.
    let path = temp_file("narrow.txt");
    std::fs::write(
        &path,
        "dim = 1\nparam = e\nvars = x\npoint = 0\neps0 = 0\nradius = 0.1\n\
         eq 1 = e*x - x^3\n",
    )
    .unwrap();
    let out = run(&["analyze", path.to_str().unwrap()]);
    std::fs::remove_file(&path).ok();
    assert_eq!(out.status.code(), Some(2), "{}", stdout(&out));
    assert!(stdout(&out).contains("verdict:     inconsistent"), "{}", stdout(&out));
}

#[test]
fn sweep_csv_is_deterministic_and_crlf() {
    let p = problem_path("ex21.txt");
    let out1 = temp_file("sweep1.csv");
    let out2 = temp_file("sweep2.csv");
    let base = [
        "sweep",
        p.to_str().unwrap(),
        "--eps-lo",
        "-0.1",
        "--eps-hi",
        "0.1",
        "--steps",
        "9",
    ];
    let mut args1: Vec<&str> = base.to_vec();
    args1.extend(["-o", out1.to_str().unwrap()]);
    let mut args2: Vec<&str> = base.to_vec();
    args2.extend(["--jobs", "4", "-o", out2.to_str().unwrap()]);
    assert_eq!(run(&args1).status.code(), Some(0));
    assert_eq!(run(&args2).status.code(), Some(0));
    let a = std::fs::read(&out1).unwrap();
    let b = std::fs::read(&out2).unwrap();
    std::fs::remove_file(&out1).ok();
    std::fs::remove_file(&out2).ok();
    assert_eq!(a, b, "parallel run must produce identical bytes");
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("eps,zero_count,sum_of_indices,min_abs_det\r\n"));
    assert_eq!(text.lines().count(), 10); // header + 9 samples
    // The index sum stays constant through the bifurcation.
    let sums: Vec<&str> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap())
        .collect();
    assert!(sums.iter().all(|&s| s == sums[0]), "{sums:?}");
}

#[test]
fn diagram_traces_branches() {
    let p = problem_path("ex21.txt");
    let out = temp_file("diagram.csv");
    let status = run(&[
        "diagram",
        p.to_str().unwrap(),
        "--eps-lo",
        "-0.1",
        "--eps-hi",
        "0.1",
        "--steps",
        "11",
        "-o",
        out.to_str().unwrap(),
    ]);
    assert_eq!(status.status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    std::fs::remove_file(&out).ok();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("branch_id,eps,x,y,stable,index"));
    let mut branch_ids = std::collections::BTreeSet::new();
    for l in lines {
        let f: Vec<&str> = l.split(',').collect();
        assert_eq!(f.len(), 6, "row: {l}");
        branch_ids.insert(f[0].to_string());
        let eps: f64 = f[1].parse().unwrap();
        assert!((-0.1001..=0.1001).contains(&eps));
    }
    // The trunk plus the two fork arms.
    assert!(branch_ids.len() >= 3, "branches: {branch_ids:?}");
}
