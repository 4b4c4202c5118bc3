use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_threshconvex"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn example_csv(dir: &Path) -> PathBuf {
    let path = dir.join("ex.csv");
    std::fs::write(&path, "a,b,y\n-1,1,0\n0,1,1\n1,1,1\n").unwrap();
    path
}

#[test]
fn enumerate_train_reconstruct_verify() {
    let dir = tempfile::tempdir().unwrap();
    let csv = example_csv(dir.path());
    let pats = dir.path().join("p.txt");
    let out = run(&["enumerate", "--data", s(&csv), "--out", s(&pats)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&pats).unwrap();
    assert!(text.starts_with("3 6 1\n"), "{text}");
    assert!(dir.path().join("p.witness.csv").exists());

    let sol = dir.path().join("sol.json");
    let arr = dir.path().join("arr.txt");
    let out = run(&["train-convex", "--data", s(&csv), "--beta", "0.01", "--out", s(&sol), "--arrangement", s(&arr)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    for method in ["witness", "pinv", "svm"] {
        let net = dir.path().join(format!("net_{method}.json"));
        let out = run(&[
            "reconstruct",
            "--data",
            s(&csv),
            "--solution",
            s(&sol),
            "--arrangement",
            s(&arr),
            "--method",
            method,
            "--out",
            s(&net),
        ]);
        assert!(out.status.success(), "{method}: {}", String::from_utf8_lossy(&out.stderr));
        let out = run(&["verify", "--data", s(&csv), "--network", s(&net), "--beta", "0.01"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(report["kkt"]["passed"], true);
    }

    // the same network is not optimal for a much larger beta
    let net = dir.path().join("net_witness.json");
    let out = run(&["verify", "--data", s(&csv), "--network", s(&net), "--beta", "0.5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sampled_and_closed_form_methods() {
    let dir = tempfile::tempdir().unwrap();
    let csv = example_csv(dir.path());
    let sol = dir.path().join("s.json");
    let out = run(&["train-convex", "--data", s(&csv), "--beta", "0.1", "--method", "sampled", "--samples", "20", "--out", s(&sol)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let cf = dir.path().join("cf.json");
    let out = run(&["train-convex", "--data", s(&csv), "--beta", "0.1", "--method", "closed-form", "--out", s(&cf)]);
    assert!(out.status.success());
    let net = dir.path().join("cfnet.json");
    let out = run(&["reconstruct", "--data", s(&csv), "--solution", s(&cf), "--out", s(&net)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let out = run(&["train-convex", "--data", s(&csv), "--beta", "0.1", "--loss", "hinge", "--out", s(&sol)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn train_ste_writes_traces() {
    let dir = tempfile::tempdir().unwrap();
    let csv = example_csv(dir.path());
    let out_path = dir.path().join("ste.json");
    let out = run(&[
        "train-ste",
        "--data",
        s(&csv),
        "--surrogate",
        "clipped_relu",
        "--lr",
        "0.05",
        "--epochs",
        "15",
        "--trials",
        "3",
        "--widths",
        "4,3",
        "--out",
        s(&out_path),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let traces: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out_path).unwrap()).unwrap();
    let traces = traces.as_array().unwrap();
    assert_eq!(traces.len(), 3);
    assert_eq!(traces[0]["objectives"].as_array().unwrap().len(), 15);
}

#[test]
fn validation_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let csv = example_csv(dir.path());
    let missing = dir.path().join("missing.csv");
    let out = run(&["enumerate", "--data", s(&missing), "--out", s(&dir.path().join("x"))]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["train-convex", "--data", s(&csv), "--out", "x.json"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["train-ste", "--data", s(&csv), "--surrogate", "tanh", "--out", "x.json"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["enumerate", "--data", s(&csv), "--label", "nope", "--out", s(&dir.path().join("x"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope"));
    let out = run(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn experiment_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(
        &spec,
        r#"{"name":"cli","dataset":"one_d","methods":["convex-exact","ste:relu"],"beta":0.01,
            "widths":[8],"seeds":[3],"output_dir":"unused","ste":{"epochs":20}}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = bin()
        .args(["experiment", s(&spec), "--out", s(&out_dir)])
        .env("THRESHCONVEX_WORKERS", "2")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let metrics = std::fs::read_to_string(out_dir.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 3);

    std::fs::write(&spec, r#"{"name":"x","dataset":"one_d","methods":[],"beta":0.1,"widths":[2],"seeds":[1],"output_dir":"o"}"#)
        .unwrap();
    let out = run(&["experiment", s(&spec), "--out", s(&out_dir)]);
    assert_eq!(out.status.code(), Some(1));
}
