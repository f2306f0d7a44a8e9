use std::path::Path;
use std::process::Command;

fn tpr() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tpr"))
}

fn write_config(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let p = dir.join(format!("{name}.json"));
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn classify_prints_class() {
    for (g, expect) in [("0.5", "collapse"), ("0.3", "discrete"), ("0.7", "continuous_unbounded")] {
        let out = tpr().args(["classify", "--g", g, "--omega", "1"]).output().unwrap();
        assert!(out.status.success());
        assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), expect);
    }
    let out = tpr().args(["classify", "--g", "-1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn spectrum_run_writes_plotting_csv_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!(
        r#"{{
        "experiment": {{
            "kind": "spectrum",
            "params": {{"omega": 1.0, "omega_q": [1.9], "g": [0.0]}},
            "g_grid": {{"start": 0.0, "stop": 0.49, "points": 8}},
            "levels": 4,
            "cutoff_policy": {{"schedule": [60, 120, 240], "energy_tol": 1e-8, "photon_tol": 1e-6}}
        }},
        "output": {{"dir": {:?}, "name": "collapse"}}
    }}"#,
        dir.path()
    );
    let cfg = write_config(dir.path(), "spec", &body);
    let out = tpr().arg("run").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("collapse.csv")).unwrap();
    assert!(csv.starts_with("# physics_hash="));
    assert!(csv.contains("g,level_index,energy,parity_label,mean_photon,converged"));
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 1 + 8 * 4);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("collapse_manifest.json")).unwrap()).unwrap();
    assert!(manifest["wall_time_s"].as_f64().is_some());
    assert_eq!(manifest["config"]["experiment"]["kind"], "spectrum");

    let again = dir.path().join("again");
    let out = tpr().arg("run").arg(&cfg).arg("--out").arg(&again).output().unwrap();
    assert!(out.status.success());
    assert_eq!(csv, std::fs::read_to_string(again.join("collapse.csv")).unwrap());

    let out = tpr()
        .arg("compare")
        .arg(dir.path().join("collapse.csv"))
        .arg(again.join("collapse.csv"))
        .args(["--tol", "0"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn dynamics_run_and_compare_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let body = |g: f64, name: &str| {
        format!(
            r#"{{
            "experiment": {{
                "kind": "dynamics",
                "params": {{"effective": {{"omega": 1.0, "omega_q": [2.0], "g": [{g}]}}}},
                "cutoff": 30,
                "initial": {{"qubits": ["g"], "n": 2}},
                "grid": {{"t_end": 20.0, "samples": 41}},
                "check_cutoff": true
            }},
            "output": {{"dir": {:?}, "name": "{name}"}}
        }}"#,
            dir.path()
        )
    };
    for (g, name) in [(0.2, "b"), (0.21, "c")] {
        let cfg = write_config(dir.path(), name, &body(g, name));
        let out = tpr().arg("run").arg(&cfg).output().unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let (b, c) = (dir.path().join("b.csv"), dir.path().join("c.csv"));
    let cmp = |extra: &[&str]| tpr().arg("compare").arg(&b).arg(&c).args(["--tol", "1e-12"]).args(extra).output().unwrap();
    // Different physics: refused unless forced, then fails on tolerance.
    assert_eq!(cmp(&[]).status.code(), Some(2));
    assert_eq!(cmp(&["--force"]).status.code(), Some(1));
    assert!(String::from_utf8_lossy(&cmp(&["--force", "--column", "P_g2"]).stdout).contains("P_g2"));

    // Too small a cutoff for g = 0.4 trips the convergence exit code.
    let weak = body(0.4, "d").replace("\"cutoff\": 30", "\"cutoff\": 4");
    let cfg = write_config(dir.path(), "d", &weak);
    assert_eq!(tpr().arg("run").arg(&cfg).output().unwrap().status.code(), Some(3));
}

#[test]
fn config_and_budget_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad", r#"{"experiment": {"kind": "classify", "g": 0.1, "omega": 1.0, "x": 1}}"#);
    assert_eq!(tpr().arg("run").arg(&cfg).output().unwrap().status.code(), Some(2));
    let big = format!(
        r#"{{
        "experiment": {{
            "kind": "dynamics",
            "params": {{"effective": {{"units": "rad_per_second", "omega": 1.0, "omega_q": [2.0], "g": [0.01]}}}},
            "cutoff": 200,
            "initial": {{"qubits": ["g"], "n": 2}},
            "grid": {{"t_end": 1.0, "samples": 3}},
            "dissipation": {{"t1_s": 1.0}}
        }},
        "output": {{"dir": {:?}, "name": "big"}},
        "budget": {{"max_dense_dim": 10000}}
    }}"#,
        dir.path()
    );
    let cfg = write_config(dir.path(), "big", &big);
    assert_eq!(tpr().arg("run").arg(&cfg).output().unwrap().status.code(), Some(4));
    let out = tpr().arg("run").arg(dir.path().join("missing.json")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn classify_config_and_measure_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "m",
        &format!(
            r#"{{
            "experiment": {{
                "kind": "measure", "protocol": "parity", "cutoff": 8,
                "state": [{{"re": 1.0, "qubits": ["e"], "n": 1}}]
            }},
            "output": {{"dir": {:?}, "name": "par"}}
        }}"#,
            dir.path()
        ),
    );
    let out = tpr().arg("run").arg(&cfg).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("par.json")).unwrap()).unwrap();
    assert!(v["report"]["abs_error"].as_f64().unwrap() < 1e-10);
}
