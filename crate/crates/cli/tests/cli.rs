use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use qecqm_cli::corpus::shipped;

fn qecqm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qecqm"))
        .args(args)
        .env_remove("QECQM_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn check_accepts_shipped_scenarios() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "p.toml", shipped("perp_noise_example").unwrap().text);
    let out = qecqm(&["check", &cfg]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok: perp_noise_example"));
}

#[test]
fn check_reports_syntax_position() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", "name = \"x\"\nkappa = 3\ndt = [0.1\n");
    let out = qecqm(&["check", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("line 3"), "{err}");
    assert!(err.contains("column"), "{err}");
}

#[test]
fn check_lists_every_violation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.toml",
        r#"
name = "bad name"
kappa = 2
dt = -0.1
outputs = ["scaling", "scaling"]
initial_state = "+"
[model]
generator = { matrix = [[0, 1], [0, 0]] }
jumps = ["W"]
"#,
    );
    let out = qecqm(&["check", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    for field in ["name:", "dt:", "outputs:", "model.generator:", "model.jumps[0]:", "sweeps.t:"] {
        assert!(err.contains(field), "missing {field} in {err}");
    }
}

#[test]
fn run_writes_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "t.toml", shipped("separable_long_run").unwrap().text);
    let out_dir = dir.path().join("out");
    let out = qecqm(&["run", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let root = out_dir.join("separable_long_run");
    for f in ["report.json", "summary.csv", "trace.csv", "qfi.csv", "scaling.csv", "separability.csv"] {
        assert!(root.join(f).is_file(), "missing {f}");
    }
    assert_eq!(header(&root.join("scaling.csv")), "t,fisher,exponent_running");
    assert_eq!(header(&root.join("separability.csv")), "theta,s,min_pt_eigenvalue,ppt");
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(root.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["scenario"], "separable_long_run");
    assert_eq!(json["provenance"]["tool_version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn format_flag_and_env_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "v.toml", shipped("vt_threshold_scan").unwrap().text);
    let env_dir = dir.path().join("from-env");
    let out = Command::new(env!("CARGO_BIN_EXE_qecqm"))
        .args(["run", &cfg, "--format", "json"])
        .env("QECQM_OUT_DIR", &env_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let files: Vec<String> = fs::read_dir(env_dir.join("vt_threshold_scan"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert_eq!(files, ["report.json"]);
}

#[test]
fn reruns_are_byte_identical_and_seed_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "l.toml", shipped("zero_diagonal_generator").unwrap().text);
    let run = |out: &str, extra: &[&str]| {
        let out_dir = dir.path().join(out);
        let mut args = vec!["run", &cfg, "--out", out_dir.to_str().unwrap()];
        args.extend_from_slice(extra);
        let o = qecqm(&args);
        assert!(o.status.success(), "{}", stderr(&o));
        out_dir.join("zero_diagonal_generator")
    };
    let (a, b, c) = (run("a", &[]), run("b", &["--workers", "1"]), run("c", &["--seed", "11"]));
    for f in ["report.json", "summary.csv", "trace.csv", "span_report.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let ja: serde_json::Value = serde_json::from_slice(&fs::read(a.join("report.json")).unwrap()).unwrap();
    let jc: serde_json::Value = serde_json::from_slice(&fs::read(c.join("report.json")).unwrap()).unwrap();
    assert_eq!(ja["provenance"]["seed"], 7);
    assert_eq!(jc["provenance"]["seed"], 11);
    assert_ne!(ja["provenance"]["config_hash"], jc["provenance"]["config_hash"]);
    // a different seed draws a different noise operator
    assert_ne!(ja["analyses"]["trace"], jc["analyses"]["trace"]);
}

#[test]
fn perp_noise_trace_follows_the_unitary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "p.toml", shipped("perp_noise_example").unwrap().text);
    let out_dir = dir.path().join("out");
    let o = qecqm(&["run", &cfg, "--out", out_dir.to_str().unwrap(), "--format", "csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(out_dir.join("perp_noise_example/trace.csv")).unwrap();
    let dt = 0.01;
    let mut rows = 0;
    for line in text.lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        let (k, t, dist, bx, by, bz) = (v[0], v[1], v[2], v[6], v[7], v[8]);
        // e^{-itZ}|+⟩ has Bloch vector (cos 2t, sin 2t, 0)
        let (ex, ey) = ((2.0 * t).cos(), (2.0 * t).sin());
        let oracle = 0.5 * ((bx - ex).powi(2) + (by - ey).powi(2) + bz * bz).sqrt();
        assert!((dist - oracle).abs() < 1e-12, "round {k}: {dist} vs {oracle}");
        assert!(dist <= k * dt * dt, "round {k}: {dist} exceeds k dt^2");
        rows += 1;
    }
    assert_eq!(rows, 10);
}

#[test]
fn corpus_matches_goldens() {
    let out = qecqm(&["corpus"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}\n{}", stderr(&out));
    assert_eq!(stdout.lines().filter(|l| l.ends_with(" match")).count(), 10, "{stdout}");
}

#[test]
fn corpus_detects_drift() {
    let dir = tempfile::tempdir().unwrap();
    let golden = dir.path().join("golden");
    let o = qecqm(&["corpus", "--golden", golden.to_str().unwrap(), "--bless"]);
    assert!(o.status.success());
    let path = golden.join("vt_threshold_scan.json");
    let text = fs::read_to_string(&path).unwrap().replacen("\"ppt_points\": 67", "\"ppt_points\": 66", 1);
    fs::write(&path, text).unwrap();
    fs::remove_file(golden.join("zero_diagonal_generator.json")).unwrap();
    let o = qecqm(&["corpus", "--golden", golden.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("vt_threshold_scan        DRIFT $.analyses.separability.summary.ppt_points"), "{stdout}");
    assert!(stdout.contains("zero_diagonal_generator  missing golden"), "{stdout}");
}

#[test]
fn noiseless_scenario_without_outputs_keeps_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let text = "name = \"quiet\"\nkappa = 3\ndt = 0.1\noutputs = []\ninitial_state = \"+\"\n[model]\ngenerator = \"Z\"\njumps = []\n";
    let cfg = write_config(dir.path(), "q.toml", text);
    let out_dir = dir.path().join("out");
    let o = qecqm(&["run", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let json: serde_json::Value =
        serde_json::from_slice(&fs::read(out_dir.join("quiet/report.json")).unwrap()).unwrap();
    assert_eq!(json["analyses"], serde_json::json!({}));
    assert_eq!(json["provenance"]["seed"], 0);
    assert_eq!(json["provenance"]["config_hash"].as_str().unwrap().len(), 64);
}
