use jsonschema::JSONSchema;
use serde_json::Value;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_skewdyn"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn skewdyn")
}

fn schema(name: &str) -> JSONSchema {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("schemas").join(format!("{name}.schema.json"));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    JSONSchema::compile(&v).expect("schema compiles")
}

fn assert_valid(name: &str, v: &Value) {
    let s = schema(name);
    let msgs: Vec<String> = match s.validate(v) {
        Ok(()) => return,
        Err(errs) => errs.map(|e| format!("{} at {}", e, e.instance_path)).collect(),
    };
    panic!("{name} output fails schema: {msgs:?}\n{v:#}");
}

fn stdout_json(o: &Output) -> Value {
    assert!(o.status.success(), "exit {:?}: {}", o.status.code(), String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).expect("stdout is json")
}

fn check_manifest(dir: &Path) -> Value {
    let m: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    assert_valid("manifest", &m);
    for a in m["artifacts"].as_array().unwrap() {
        let bytes = std::fs::read(dir.join(a["file"].as_str().unwrap())).unwrap();
        let h: String = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
        assert_eq!(a["sha256"].as_str().unwrap(), h);
    }
    m
}

#[test]
fn certify_output_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&["certify", "--family", "Fa", "--a", "-1", "--base-samples", "80", "--j2-per-fiber", "8", "--out", out]);
    let v = stdout_json(&o);
    assert_valid("certify", &v);
    let m = check_manifest(dir.path());
    assert_eq!(m["command"], "certify");
}

#[test]
fn strict_negative_verdict_exits_4() {
    let o = run(&["--strict", "certify", "--family", "Fa", "--a", "i", "--base-samples", "80", "--j2-per-fiber", "8"]);
    assert_eq!(o.status.code(), Some(4));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_valid("certify", &v);
    let o = run(&["certify", "--family", "Fa", "--a", "i", "--base-samples", "80", "--j2-per-fiber", "8"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn chain_clouds_and_hausdorff() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&["chain", "--family", "Fa", "--a", "-1", "--n-base", "150", "--n-targets", "2", "--clouds", "--out", out]);
    let v = stdout_json(&o);
    assert_valid("chain", &v);
    check_manifest(dir.path());
    let apt = dir.path().join("apt.csv");
    let acc = dir.path().join("acc.csv");
    let o = run(&["hausdorff", apt.to_str().unwrap(), apt.to_str().unwrap()]);
    let v = stdout_json(&o);
    assert_valid("hausdorff", &v);
    assert_eq!(v["distance"].as_f64().unwrap(), 0.0);
    let o = run(&["hausdorff", "--directed", apt.to_str().unwrap(), acc.to_str().unwrap()]);
    let v = stdout_json(&o);
    assert_valid("hausdorff", &v);
    assert!(v["distance"].as_f64().unwrap() >= 0.0);
}

#[test]
fn saddles_output() {
    let v = stdout_json(&run(&["saddles", "--family", "Fa", "--a", "-1", "--max-period", "2"]));
    assert_valid("saddles", &v);
    let list = v["saddles"].as_array().unwrap();
    assert!(!list.is_empty());
    for s in list {
        assert!(s["base_multiplier_abs"].as_f64().unwrap() > 1.0);
        assert!(s["vertical_multiplier_abs"].as_f64().unwrap() < 1.0);
    }
}

#[test]
fn check_output() {
    let v = stdout_json(&run(&["verify-lemma", "box-self-map", "--n", "4"]));
    assert_valid("check", &v);
    assert_eq!(v["check"], "box-self-map");
    let o = run(&["verify-lemma", "no-such-check"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn continue_writes_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let v = stdout_json(&run(&["continue", "--from", "-1", "--to", "-0.95", "--steps", "10", "--out", out]));
    assert_valid("continue", &v);
    assert_eq!(v["outcome"]["status"], "Completed");
    check_manifest(dir.path());
    let csv = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "lambda_re,lambda_im,z_re,z_im,w_re,w_im,mu_base_abs,mu_vert_abs,residual");
    assert_eq!(lines.count(), 11);
}

#[test]
fn separate_output() {
    let v = stdout_json(&run(&["separate", "--a", "-1"]));
    assert_valid("separate", &v);
}

#[test]
fn family_output() {
    for name in ["Fa", "airplane", "fig3", "product", "s1s2"] {
        let v = stdout_json(&run(&["family", name]));
        assert_valid("family", &v);
        assert!(v["degree"].as_u64().unwrap() >= 2);
    }
}

#[test]
fn render_is_deterministic() {
    let hashes = |seed: &str| {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        let v = stdout_json(&run(&["--seed", seed, "render", "--family", "Fa", "--a", "-1", "--fibers", "2", "--fiber-at", "beta", "--resolution", "48", "--out", out]));
        assert_valid("render", &v);
        let m = check_manifest(dir.path());
        assert_eq!(m["artifacts"].as_array().unwrap().len(), 4);
        m["artifacts"].as_array().unwrap().iter().map(|a| a["sha256"].as_str().unwrap().to_string()).collect::<Vec<_>>()
    };
    assert_eq!(hashes("3"), hashes("3"));
}

#[test]
fn config_file_supplies_options() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "# saddles at a = 0.1\nfamily = Fa\na = 0.1\nmax_period = 1\nresolution = 9\n").unwrap();
    let v = stdout_json(&run(&["--config", cfg.to_str().unwrap(), "saddles"]));
    assert_eq!(v["family"]["a"], serde_json::json!([0.1, 0.0]));
    // explicit flags win over the file
    let v = stdout_json(&run(&["--config", cfg.to_str().unwrap(), "saddles", "--a", "-1"]));
    assert_eq!(v["family"]["a"], serde_json::json!([-1.0, 0.0]));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&["certify", "--family", "nope"]).status.code(), Some(2));
    assert_eq!(run(&["render", "--window", "1,-1,0,1", "--resolution", "8"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["render", "--resolution", "0"]).status.code(), Some(2));
    assert_eq!(run(&["family", "Fa", "--a", "1+"]).status.code(), Some(2));
}

#[test]
fn io_error_exits_1() {
    assert_eq!(run(&["hausdorff", "/nonexistent/a.csv", "/nonexistent/b.csv"]).status.code(), Some(1));
}
