use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], stdin: Option<&str>) -> Output {
    use std::io::Write;
    use std::process::Stdio;
    let mut child = Command::new(env!("CARGO_BIN_EXE_polyconsensus"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("binary runs");
    let input = stdin.unwrap_or("").to_owned();
    let mut pipe = child.stdin.take().unwrap();
    std::thread::spawn(move || pipe.write_all(input.as_bytes()));
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["--help"], None).status.code(), Some(0));
    assert_eq!(run(&["--version"], None).status.code(), Some(0));
    assert_eq!(run(&["frobnicate"], None).status.code(), Some(1));
    assert_eq!(run(&["design", "--a", "-2"], None).status.code(), Some(1));
    assert_eq!(run(&["analyze"], Some("not json")).status.code(), Some(1));
    let disconnected = r#"{"n": 4, "edges": [[0, 1, 0.5], [2, 3, 0.5]]}"#;
    assert_eq!(run(&["analyze"], Some(disconnected)).status.code(), Some(1));
    assert_eq!(run(&["sweep", "--n", "10", "--densities", "0.05"], None).status.code(), Some(1));
}

#[test]
fn analyze_reports_spectrum() {
    let o = run(&["analyze"], Some(r#"{"n": 3, "edges": [[0, 1, 0.5], [1, 2, 0.5]]}"#));
    assert!(o.status.success());
    let v = json(&o);
    // path on three nodes with weight 1/2: eigenvalues 1, 1/2, -1/2
    assert!((v["mu"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert!((v["sigma"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert_eq!(v["centered"], true);
    assert_eq!(v["lambdas"].as_array().unwrap().len(), 2);
}

#[test]
fn design_caps_and_gains() {
    let five = stdout(&run(&["gen", "five-node"], None));
    let plain = json(&run(&["design"], Some(&five)));
    assert_eq!(plain["capped"], false);
    assert_eq!(plain["a"], 1.0);
    let capped = json(&run(&["design", "--cap", "permanent", "--a", "balanced"], Some(&five)));
    assert_eq!(capped["capped"], true);
    let z = capped["z"].as_f64().unwrap();
    assert!((z - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    assert!((capped["a"].as_f64().unwrap() - ((1.0 - z) / (1.0 + z)).sqrt()).abs() < 1e-12);
}

#[test]
fn precondition_output_shapes() {
    let star = stdout(&run(&["gen", "star", "--n", "4"], None));
    let v = json(&run(&["precondition", "--restarts", "2", "--quiet"], Some(&star)));
    assert!(v["result"]["mu2"].as_f64().unwrap() <= 1e-8);
    assert!(v["result"]["iters"].as_u64().is_some());
    assert_eq!(v["graph"]["edges"].as_array().unwrap().len(), 4);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.json");
    let o = run(
        &["precondition", "--objective", "fssc", "--out", path.to_str().unwrap()],
        Some(&star),
    );
    assert!(o.status.success());
    let r = json(&o);
    assert!(r["lower_bound"].as_f64().unwrap() == 0.0);
    let w: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(w["n"], 5);
}

#[test]
fn simulate_csv_and_failures() {
    let five = stdout(&run(&["gen", "five-node"], None));
    let o = run(&["simulate", "--steps", "20", "--no-timestamp", "--quiet"], Some(&five));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("step,deviation,mean_drift"));
    assert_eq!(lines.count(), 21);

    let fail = run(
        &["simulate", "--steps", "2000", "--fail", "edges=0-1 mode=permanent", "--format", "json", "--quiet"],
        Some(&five),
    );
    assert_eq!(json(&fail)["verdict"], "diverged");
    let safe = run(
        &[
            "simulate", "--steps", "2000", "--cap", "permanent", "--fail", "edges=0-1", "--format", "json",
            "--quiet",
        ],
        Some(&five),
    );
    assert_ne!(json(&safe)["verdict"], "diverged");

    let standard = run(&["simulate", "--scheme", "standard", "--format", "json", "--steps", "5"], Some(&five));
    assert_eq!(json(&standard)["deviations"].as_array().unwrap().len(), 6);
}

#[test]
fn sweep_is_reproducible_and_ordered() {
    let args = [
        "sweep", "--n", "7", "--densities", "0.5,1.0", "--trials", "2", "--restarts", "2",
        "--max-iters", "300", "--seed", "4", "--quiet", "--no-timestamp",
    ];
    let a = stdout(&run(&args, None));
    let b = stdout(&run(&args, None));
    assert_eq!(a, b);
    let rows: Vec<Vec<&str>> = a.lines().map(|l| l.split(',').collect()).collect();
    assert_eq!(rows[0][..3], ["kind", "seed", "n"]);
    let seeds: Vec<&str> = rows[1..5].iter().map(|r| r[1]).collect();
    assert_eq!(seeds, ["4", "5", "1004", "1005"]);
    assert_eq!(rows[5][0], "median");
    assert_eq!(rows[6][0], "median");
    // the complete graph has nothing left to accelerate
    assert_eq!(rows[6][3], "21");

    let stamped = stdout(&run(&args[..args.len() - 1], None));
    assert!(stamped.starts_with("# generated_unix="));
    assert_eq!(stamped.split_once('\n').unwrap().1, a);
}

#[test]
fn diameter_partition_groups_rows() {
    let o = run(
        &[
            "diameter-partition", "--n", "10", "--density", "0.2", "--trials", "3", "--restarts", "2",
            "--max-iters", "300", "--no-timestamp", "--quiet",
        ],
        None,
    );
    assert!(o.status.success());
    let text = stdout(&o);
    let trials: Vec<usize> = text
        .lines()
        .filter(|l| l.starts_with("trial,"))
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(trials.len(), 3);
    assert!(trials.iter().any(|&d| d > 2));
    assert!(trials.windows(2).all(|w| w[0] <= w[1]));
    assert!(text.lines().any(|l| l.starts_with("diameter,")));
}

#[test]
fn figure_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    for which in ["fig1", "fig5"] {
        let o = run(&["figures", which, "--out", out, "--quiet"], None);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let read = |name: &str| std::fs::read_to_string(Path::new(out).join(name)).unwrap();
    assert_eq!(read("fig1_curves.csv").lines().count(), 1 + 1 + 401);
    let scan = read("fig5_failures.csv");
    assert!(scan.contains("diverged"));
    let summary: serde_json::Value = serde_json::from_str(&read("fig5_summary.json")).unwrap();
    assert!(summary["max_abs_p2"].as_f64().unwrap() > 1.0);
}

#[test]
fn enumeration_counts() {
    for (n, count) in [(4, 6), (5, 21)] {
        let v = json(&run(&["gen", "enumerate", "--n", &n.to_string(), "--quiet"], None));
        assert_eq!(v.as_array().unwrap().len(), count);
    }
}
