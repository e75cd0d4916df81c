use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn reference_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/reference.json")
}

fn out_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("hydroelastic-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(config: &Path, out: &Path, command: &str, sets: &[&str]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_hydroelastic"));
    cmd.arg("--config").arg(config).arg("--out").arg(out).arg("--command").arg(command);
    for s in sets {
        cmd.arg("--set").arg(s);
    }
    cmd.output().unwrap()
}

fn small(extra: &[&'static str]) -> Vec<&'static str> {
    let mut v = vec!["numerics.N=32", "numerics.M=64"];
    v.extend_from_slice(extra);
    v
}

fn result_json(out: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("result.json")).unwrap()).unwrap()
}

#[test]
fn check_exits_zero_and_reports_interval() {
    let out = out_dir("check");
    let o = run(&reference_config(), &out, "check", &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = result_json(&out);
    assert!(v.to_string().contains("admissible_c2"));
}

#[test]
fn geometry_writes_table() {
    let out = out_dir("geometry");
    let o = run(&reference_config(), &out, "geometry", &[]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(out.join("geometry.csv")).unwrap();
    assert_eq!(text.lines().next(), Some("ell,theta,A,A_prime"));
    assert!(text.lines().count() > 10);
}

#[test]
fn solve_below_threshold_is_trivial() {
    let out = out_dir("trivial");
    let o = run(&reference_config(), &out, "solve", &small(&["physics.c2=2.0"]));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = result_json(&out);
    assert_eq!(v["result"]["trivial"], serde_json::Value::Bool(true), "{v}");
}

#[test]
fn solve_profile_round_trips_through_csv() {
    let out = out_dir("profile");
    let o = run(&reference_config(), &out, "solve", &small(&["physics.c2=4.0"]));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out.join("profile.csv")).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let (omega, chi_p, sigma, nu, mu) = (col("Omega"), col("chi_prime"), col("sigma"), col("nu"), col("mu"));
    let mut rows = 0;
    for line in lines {
        let r: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert!((r[nu] - r[omega] / r[chi_p]).abs() <= 1e-15 * r[nu].abs().max(1.0));
        assert!((r[mu] - r[nu] * r[sigma]).abs() <= 1e-15 * r[mu].abs().max(1.0));
        rows += 1;
    }
    assert_eq!(rows, 64);
}

#[test]
fn violated_hypothesis_is_a_config_error() {
    let out = out_dir("hyp");
    let o = run(&reference_config(), &out, "check", &["energy.delta=1.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("ill_ex_1"));
}

#[test]
fn unknown_key_reports_its_pointer() {
    let out = out_dir("unknown");
    let o = run(&reference_config(), &out, "check", &["numerics.bogus=1"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("/numerics"), "{err}");
}

#[test]
fn unsupported_family_is_rejected() {
    let out = out_dir("family");
    let o = run(&reference_config(), &out, "check", &["energy.family=neo_hookean"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("illustrative"));
}

#[test]
fn speed_above_the_certified_interval_is_rejected() {
    let out = out_dir("high");
    let o = run(&reference_config(), &out, "solve", &small(&["physics.c2=50"]));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_config_file_is_an_io_error() {
    let out = out_dir("missing");
    let o = run(Path::new("/nonexistent/config.json"), &out, "check", &[]);
    assert_eq!(o.status.code(), Some(1));
}
