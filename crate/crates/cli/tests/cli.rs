use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn insulab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_insulab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn oracle_disk_prints_two_pi() {
    let dir = tempfile::tempdir().unwrap();
    let o = insulab(&["oracle", "--n", "2"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("6.283185"), "{text}");
    let json: serde_json::Value = serde_json::from_str(&read(dir.path(), "oracle.json")).unwrap();
    assert_eq!(json["schema"], "insulab-v1");
}

#[test]
fn oracle_ball_product() {
    let dir = tempfile::tempdir().unwrap();
    let o = insulab(&["oracle", "--n", "3"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8(o.stdout).unwrap().contains("0.666667"));
}

#[test]
fn oracle_rejects_dimension_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = insulab(&["oracle", "--n", "1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn malformed_domain_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    for domain in ["disk", "disk:-1", "annulus:2,1", "triangle:1", "polygon:0,0,1"] {
        let o = insulab(&["threshold-m1", "--domain", domain], dir.path());
        assert_eq!(o.status.code(), Some(2), "{domain}");
    }
}

#[test]
fn empty_grid_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = insulab(&["sweep", "--domain", "disk:1", "--m-grid", "1:2:0"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = insulab(&["sweep", "--domain", "disk:1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn annulus_m1_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let o = insulab(&["threshold-m1", "--domain", "annulus:1,2", "--refine", "2"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let json: serde_json::Value = serde_json::from_str(&read(dir.path(), "m1.json")).unwrap();
    let exact = 12.0 * std::f64::consts::PI * (0.25 - 2f64.ln() / 3.0);
    assert!((json["oracle"]["m1"].as_f64().unwrap() / exact - 1.0).abs() < 1e-12);
    assert!(read(dir.path(), "m1_trace.svg").starts_with("<svg"));
}

#[test]
fn threshold_m0_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["threshold-m0", "--domain", "square:1", "--refine", "1", "--tol", "1e-3"];
    assert_eq!(insulab(&args, a.path()).status.code(), Some(0));
    assert_eq!(insulab(&args, b.path()).status.code(), Some(0));
    let text = read(a.path(), "m0.json");
    assert_eq!(text, read(b.path(), "m0.json"));
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(json["report"]["kappa1_equals_mu2"], true);
}

#[test]
fn decay_sweep_header_and_jobs_independence() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["sweep", "--domain", "disk:1", "--refine", "1", "--m-grid", "0.5:4:3"];
    let o = insulab(&[&args[..], &["--jobs", "1"]].concat(), a.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    assert_eq!(insulab(&[&args[..], &["--jobs", "3"]].concat(), b.path()).status.code(), Some(0));
    for f in ["sweep.csv", "sweep.svg", "sweep.json"] {
        assert_eq!(read(a.path(), f), read(b.path(), f), "{f}");
    }
    let csv = read(a.path(), "sweep.csv");
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("m,lambda_m,vanish_measure,min_trace"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0][2] > 0.0 && rows[2][2] == 0.0);
    assert!(rows.windows(2).all(|w| w[1][1] <= w[0][1]));
}

#[test]
fn heat_sweep_header() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["sweep", "--domain", "annulus:1,2", "--refine", "1", "--problem", "heat", "--m", "2"];
    assert_eq!(insulab(&args, dir.path()).status.code(), Some(0));
    assert!(read(dir.path(), "sweep.csv").starts_with("m,objective,vanish_measure,min_trace\n"));
}

#[test]
fn mesh_and_single_solves() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(insulab(&["mesh", "--domain", "ellipse:2,1", "--refine", "0"], dir.path()).status.code(), Some(0));
    assert!(read(dir.path(), "domain.mesh").lines().count() > 10);
    let o = insulab(&["heat", "--domain", "square:1", "--refine", "1", "--m", "5", "--trials", "20"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let o = insulab(&["decay", "--domain", "square:1", "--refine", "1", "--m", "2"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let json: serde_json::Value = serde_json::from_str(&read(dir.path(), "decay.json")).unwrap();
    assert_eq!(json["config"]["m"], 2.0);
}
