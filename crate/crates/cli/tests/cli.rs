use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_xtalk-pqc"));
    c.env_remove("XTALK_PQC_THREADS").env("RUST_LOG", "error");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn read(p: impl AsRef<Path>) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn build_ansatz_writes_circuit_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.txt");
    let o = out.to_str().unwrap();
    ok(&["build-ansatz", "--family", "xtalk", "--level", "high", "--n", "4", "--layers", "2", "--m", "0", "--out", o]);
    let c = xtalk_pqc::Circuit::from_text(&read(&out)).unwrap();
    assert_eq!(c.num_params(), 2 * 4 * 3);
    let manifest: serde_json::Value = serde_json::from_str(&read(dir.path().join("c.txt.manifest.json"))).unwrap();
    assert_eq!(manifest["command"], "build-ansatz");
    assert_eq!(manifest["seed"], 0);
    assert_eq!(manifest["family"], "xtalk");
}

#[test]
fn schedule_reports_sublayers() {
    let dir = tempfile::tempdir().unwrap();
    let c = dir.path().join("c.txt");
    let s = dir.path().join("s.json");
    ok(&["build-ansatz", "--family", "base1", "--n", "5", "--layers", "1", "--out", c.to_str().unwrap()]);
    ok(&["schedule", "--circuit", c.to_str().unwrap(), "--omega", "0", "--out", s.to_str().unwrap()]);
    let v: serde_json::Value = serde_json::from_str(&read(&s)).unwrap();
    assert_eq!(v["r"], 2);
    let gates: usize = v["sublayers"].as_array().unwrap().iter().map(|l| l.as_array().unwrap().len()).sum();
    assert_eq!(gates, 4);
}

#[test]
fn sweep_grid_is_complete_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &str| {
        vec![
            "--seed", "3", "sweep", "--n", "5", "--layers", "1,2,3,4", "--families", "all", "--metrics", "expressibility,stats",
            "--pairs", "100", "--out", out,
        ]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>()
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let run_to = |p: &Path| {
        let args = args(p.to_str().unwrap());
        let out = bin().args(&args).output().unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    };
    run_to(&a);
    run_to(&b);
    let (ca, cb) = (read(a.join("sweep.csv")), read(b.join("sweep.csv")));
    assert_eq!(ca, cb);
    assert_eq!(ca.lines().count(), 1 + 20);
    let header: Vec<&str> = ca.lines().next().unwrap().split(',').collect();
    assert!(header.contains(&"speedup"));
}

#[test]
fn vqe_trace_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    ok(&["--seed", "1", "vqe", "--max-iter", "20", "--out", first.to_str().unwrap()]);
    let trace = read(first.join("trace.csv"));
    assert_eq!(trace.lines().count(), 1 + 20);
    let result: serde_json::Value = serde_json::from_str(&read(first.join("result.json"))).unwrap();
    assert!(result["exact_ground"].as_f64().unwrap() < result["best_energy"].as_f64().unwrap() + 1e-12);

    let again = dir.path().join("again");
    let manifest = first.join("manifest.json");
    ok(&["replay", "--manifest", manifest.to_str().unwrap(), "--out", again.to_str().unwrap()]);
    assert_eq!(read(again.join("trace.csv")), trace);
    assert_eq!(read(again.join("result.json")), read(first.join("result.json")));
}

#[test]
fn thread_count_does_not_change_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let run_with = |threads: &str, name: &str| {
        let out = dir.path().join(name);
        let status = bin()
            .env("XTALK_PQC_THREADS", threads)
            .args(["vqe", "--max-iter", "10", "--mode", "xtalk", "--shots", "500", "--out", out.to_str().unwrap()])
            .status()
            .unwrap();
        assert!(status.success());
        read(out.join("trace.csv"))
    };
    assert_eq!(run_with("1", "one"), run_with("4", "four"));
}

#[test]
fn characterize_restricted_to_one_edge() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ch");
    ok(&["characterize", "--edges", "0,1", "--k", "3", "--shots", "2000", "--allow-partial", "--out", out.to_str().unwrap()]);
    let summary: serde_json::Value = serde_json::from_str(&read(out.join("summary.json"))).unwrap();
    let device = xtalk_pqc::DeviceModel::default_device();
    let e = xtalk_pqc::Edge::new(0, 1);
    let expected = device.coupling.one_hop_pairs().iter().filter(|(a, b)| a < b && (*a == e || *b == e)).count();
    assert_eq!(summary["pairs"], expected);
    let measured = xtalk_pqc::DeviceModel::load(out.join("crosstalk.json")).unwrap();
    for ((g1, g2), _) in measured.xtalk.entries() {
        assert!(g1 == e || g2 == e);
    }
    assert!(read(out.join("decays.csv")).starts_with("edge,paired_edge,sequence,m,mean_survival"));
}

#[test]
fn fit_failure_exits_one_unless_partial() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ch");
    // noiseless decays never leave 1, so alpha sits on its bound
    let args = ["characterize", "--mode", "ideal", "--edges", "0,1", "--k", "1", "--shots", "100", "--out", out.to_str().unwrap()];
    assert_eq!(run(&args).status.code(), Some(1));
    let mut partial = args.to_vec();
    partial.push("--allow-partial");
    ok(&partial);
    let summary: serde_json::Value = serde_json::from_str(&read(out.join("summary.json"))).unwrap();
    assert!(!summary["failures"].as_array().unwrap().is_empty());
}

#[test]
fn input_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"num_qubits\": 2}").unwrap();
    let out = run(&["--device", bad.to_str().unwrap(), "build-ansatz", "--family", "base1", "--n", "2", "--layers", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
    assert_eq!(run(&["build-ansatz", "--family", "nope", "--n", "2", "--layers", "1"]).status.code(), Some(2));
    assert_eq!(run(&["build-ansatz", "--family", "base1", "--n", "40", "--layers", "1"]).status.code(), Some(2));
    assert_eq!(run(&["vqe", "--hamiltonian", dir.path().join("missing.json").to_str().unwrap()]).status.code(), Some(2));
}
