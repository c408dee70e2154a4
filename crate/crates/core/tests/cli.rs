use std::path::Path;
use std::process::{Command, Output};

use ricci_lab::conformal::{icosphere, WeightedMeasure};
use ricci_lab::lab::RunReport;
use serde_json::Value;

fn lab(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ricci-lab"))
        .arg("--out")
        .arg(out)
        .arg("--quiet")
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

fn round_config(n: usize, t_max: f64, stride: u64) -> String {
    format!("n_cells = {n}\nt_max = {t_max}\noutput_stride = {stride}\n\n[initial_profile]\nkind = \"round\"\nradius = 1.0\n")
}

#[test]
fn zero_time_run_records_only_the_initial_state() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", &round_config(64, 0.0, 10));
    let out = dir.path().join("run");
    let o = lab(&out, &["simulate", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report = RunReport::read(&out).unwrap();
    assert_eq!(report.trajectory.snapshots, 1);
    assert_eq!(report.trajectory.termination, "reached_t_max");
    let csv = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn invalid_config_fails_with_a_line_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let text = "n_cells = 64\nt_max = 0.1\n\n[initial_profile]\nkind = \"round\"\nradius = -1.0\n";
    let cfg = write(dir.path(), "c.toml", text);
    let out = dir.path().join("run");
    let o = lab(&out, &["simulate", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 6"), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!out.exists());

    let cfg = write(dir.path(), "u.toml", &format!("{}\nbogus = 1\n", round_config(64, 0.1, 10)));
    assert_eq!(lab(&out, &["simulate", &cfg]).status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn balance_writes_a_report_and_rejects_a_point_mass() {
    let dir = tempfile::tempdir().unwrap();
    let nodes = icosphere(2).vertices;
    let weights: Vec<f64> = nodes.iter().map(|p| 1.0 + 0.5 * p[2]).collect();
    let m = WeightedMeasure::new(nodes, weights).unwrap();
    let path = write(dir.path(), "m.csv", &m.csv_string());
    let out = dir.path().join("bal");
    let o = lab(&out, &["balance", &path, "--tol", "1e-10"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(out.join("balance.json")).unwrap()).unwrap();
    assert!(r["residual"].as_f64().unwrap() <= 1e-10);
    assert!(r["iterations"].as_u64().unwrap() >= 1);
    let center: Vec<f64> = r["center"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    // Points flow towards the centre, so mass heavy at +z is pulled from -z.
    assert!(center[2] < -0.99, "{center:?}");
    let t = r["t"].as_f64().unwrap();
    assert!(t > 0.0 && t < 1.0);

    let atom = write(dir.path(), "a.csv", "nx,ny,nz,weight\n0,0,1,5\n1,0,0,1\n-1,0,0,1\n");
    let o = lab(&dir.path().join("bal2"), &["balance", &atom]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unit_round_sphere_run_is_clean_and_sound() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", &round_config(64, 0.3, 200));
    let out = dir.path().join("run");
    let o = lab(&out, &["simulate", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let report = RunReport::read(&out).unwrap();
    assert_eq!(report.trajectory.termination, "extinct");
    assert!((report.trajectory.t_end - 0.25).abs() <= 0.0025, "{}", report.trajectory.t_end);
    assert_eq!(report.violations, 0);
    assert_eq!(report.certificate.sound, Some(true));

    let cert: Value = serde_json::from_str(&std::fs::read_to_string(out.join("certificate.json")).unwrap()).unwrap();
    for key in ["C", "W0", "T_star", "policy", "simulated_extinction", "sound", "margins_summary"] {
        assert!(cert.get(key).is_some(), "certificate lacks {key}");
    }
    let header = |f: &str| std::fs::read_to_string(out.join(f)).unwrap().lines().next().unwrap().to_string();
    assert_eq!(header("trajectory.csv"), "t,psi_max,psi_min_interior,min_R,total_arclength,termination_flag");
    assert_eq!(header("width.csv"), "t,W,x_argmax,dq,bound_rhs,margin,neck_area");

    // The report restates the config it ran.
    assert_eq!(report.config.n_cells, 64);
    assert_eq!(report.config.t_max, 0.3);
}

#[test]
fn identical_configs_give_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let text = "n_cells = 64\nt_max = 0.006\noutput_stride = 3\nseed = 5\n\n[initial_profile]\nkind = \"random\"\nindex = 2\n";
    let cfg = write(dir.path(), "c.toml", text);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(lab(&a, &["simulate", &cfg]).status.code(), Some(0));
    assert_eq!(lab(&b, &["simulate", &cfg]).status.code(), Some(0));
    for f in ["trajectory.csv", "width.csv", "snapshot_initial.csv", "snapshot_final.csv", "certificate.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    // The stride flag overrides the config.
    let c = dir.path().join("c");
    assert_eq!(lab(&c, &["--stride", "7", "simulate", &cfg]).status.code(), Some(0));
    assert_eq!(
        std::fs::read(a.join("snapshot_final.csv")).unwrap(),
        std::fs::read(c.join("snapshot_final.csv")).unwrap()
    );
    assert_ne!(std::fs::read(a.join("width.csv")).unwrap(), std::fs::read(c.join("width.csv")).unwrap());
}

#[test]
fn report_exit_status_follows_recorded_violations() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", &round_config(64, 0.01, 50));
    let out = dir.path().join("run");
    assert_eq!(lab(&out, &["simulate", &cfg]).status.code(), Some(0));
    assert_eq!(lab(&out, &["report", out.to_str().unwrap()]).status.code(), Some(0));

    let mut report = RunReport::read(&out).unwrap();
    report.violations = 3;
    std::fs::write(out.join("report.json"), report.to_json().unwrap()).unwrap();
    let o = lab(&out, &["report", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("violations = 3"));

    let missing = dir.path().join("nothing");
    assert_eq!(lab(&missing, &["report", missing.to_str().unwrap()]).status.code(), Some(2));
}
