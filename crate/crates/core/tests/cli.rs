use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_barcode-grad"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write_json(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn segment_barcode_csv_and_template() {
    let tmp = tempfile::tempdir().unwrap();
    let input = write_json(tmp.path(), "segment.json", r#"{"simplices": [[0, 1]], "values": [0, 1, 2]}"#);
    let out = tmp.path().join("out");
    let o = run(&["persistence", input.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "degree,birth,death\n0,0,inf\n0,1,2\n");
    assert_eq!(fs::read_to_string(out.join("barcode.csv")).unwrap(), stdout(&o));
    let template: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("template.json")).unwrap()).unwrap();
    assert_eq!(template["degrees"][0]["pairs"], serde_json::json!([[1, 2]]));
    assert_eq!(template["degrees"][0]["unpaired"], serde_json::json!([0]));
}

#[test]
fn degree_selection() {
    let tmp = tempfile::tempdir().unwrap();
    let input = write_json(
        tmp.path(),
        "triangle.json",
        r#"{"simplices": [[0, 1], [0, 2], [1, 2]], "values": [0, 0, 0, 1, 1, 2]}"#,
    );
    let o = run(&["persistence", input.to_str().unwrap(), "--degrees", "1"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "degree,birth,death\n1,2,inf\n");
    let boundary = write_json(
        tmp.path(),
        "boundary.json",
        r#"{"simplices": [[0, 1], [0, 2], [1, 2]], "values": [0, 0, 0, 1, 1, 1]}"#,
    );
    let o = run(&["persistence", boundary.to_str().unwrap()]);
    assert_eq!(stdout(&o), "degree,birth,death\n0,0,inf\n0,0,1\n0,0,1\n1,1,inf\n");
    let o = run(&["persistence", input.to_str().unwrap(), "--degrees", "0,5"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn malformed_input_exits_with_2() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = write_json(tmp.path(), "bad.json", r#"{"simplices": [[0, 1]], "values": [0, 1, 0.5]}"#);
    let o = run(&["persistence", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("not a filtration"));

    let cfg = write_json(tmp.path(), "cfg.json", r#"{"parametrization": {"kind": "rips"}, "loss": {"terms": []}}"#);
    let o = run(&["optimize", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let o = run(&["verify", "nope", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn optimize_writes_identical_outputs_on_rerun() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config("continuation.json");
    let dirs = ["a", "b"].map(|d| tmp.path().join(d));
    for d in &dirs {
        let o = run(&["optimize", cfg.to_str().unwrap(), "--out", d.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(stdout(&o).contains("final loss"));
    }
    for name in ["trace.jsonl", "final_barcode.csv", "final_filter.json", "snapshots/iter_00000.csv"] {
        let a = fs::read(dirs[0].join(name)).unwrap();
        let b = fs::read(dirs[1].join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between runs");
    }
    let trace = fs::read_to_string(dirs[0].join("trace.jsonl")).unwrap();
    let losses: Vec<f64> = trace
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["loss"].as_f64().unwrap())
        .collect();
    assert!(losses.last().unwrap() < &losses[0]);
    assert!(losses.windows(2).all(|w| w[1] <= w[0]), "loss column increases");
    let snapshots = fs::read_dir(dirs[0].join("snapshots")).unwrap().count();
    assert_eq!(snapshots, losses.len());
}

#[test]
fn simplification_writes_repaired_filter() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["optimize", config("simplification.json").to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert!(o.status.success());
    let filter: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("final_filter.json")).unwrap()).unwrap();
    let v: Vec<f64> = filter["values"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert_eq!(v.len(), 3);
    assert!(v[0] <= v[2] && v[1] <= v[2]);
    assert!(v[2] - v[1] < 1e-3, "short bar should nearly vanish: {v:?}");
    let csv = fs::read_to_string(tmp.path().join("final_barcode.csv")).unwrap();
    assert!(csv.starts_with("degree,birth,death\n0,0,inf\n"));
}

#[test]
fn print_config_round_trips() {
    let o = run(&["optimize", "--print-config"]);
    assert!(o.status.success());
    let shipped = fs::read_to_string(config("continuation.json")).unwrap();
    assert_eq!(stdout(&o), shipped);

    let o = run(&["optimize", config("simplification.json").to_str().unwrap(), "--print-config"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("\"from_initial\""));
}

#[test]
fn verify_writes_report_and_respects_thread_cap() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["verify", "oracle", "--seed", "11", "--out", tmp.path().to_str().unwrap()])
        .env("BARCODE_GRAD_THREADS", "1")
        .output()
        .unwrap();
    assert!(o.status.success());
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("oracle.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
    assert_eq!(report["instances"], 200);
    assert_eq!(report["seed"], 11);
}

#[test]
fn stability_suite_passes_with_seed_7() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["verify", "stability", "--seed", "7", "--out", tmp.path().to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("stability: pass (1000 instances, 0 failures)"));
}
