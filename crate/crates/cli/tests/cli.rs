use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_shapederiv")
}

fn assets() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("assets")
}

fn run(command: &str, config: &Path, out: &Path) -> Output {
    Command::new(bin())
        .args([command, "--config"])
        .arg(config)
        .arg("--output")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path
}

fn kv(out: &Path, key: &str) -> String {
    let text = fs::read_to_string(out.join("report.kv")).unwrap();
    let prefix = format!("result.{key} = ");
    text.lines()
        .find_map(|l| l.strip_prefix(&prefix))
        .unwrap_or_else(|| panic!("missing {key} in report.kv"))
        .to_string()
}

fn kv_f64(out: &Path, key: &str) -> f64 {
    kv(out, key).parse().unwrap()
}

#[test]
fn stokes_solve_reproduces_pressure_gradient_solution() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run("stokes-solve", &assets().join("stokes-solve.toml"), &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(kv_f64(&out, "u_max") <= 1e-9);
    assert!(kv_f64(&out, "pressure_reference_error") <= 1e-9);
    assert!(out.join("summary.txt").exists());
}

#[test]
fn zero_field_gives_exact_differences() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"
[mesh]
kind = "unit-square"
n = 2
neumann = ["right"]

[force]
name = "trig"

[field]
kind = "zero"
"#,
    );
    let out = dir.path().join("out");
    let o = run("fd-verify", &cfg, &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(kv(&out, "slope"), "exact (all errors 0)");
    let csv = fs::read_to_string(out.join("fd_table.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("s,fd,L1,abs_err"));
    assert_eq!(lines.count(), 3);
}

#[test]
fn bundled_qp_instance_has_second_order_differences() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run("qp-demo", &assets().join("qp-demo.toml"), &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(kv_f64(&out, "slope") >= 1.8);
    assert!(kv_f64(&out, "kkt_residual") <= 1e-10);
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let cfg = assets().join("fd-verify.toml");
    assert!(run("fd-verify", &cfg, &a).status.success());
    assert!(run("fd-verify", &cfg, &b).status.success());
    for file in ["report.kv", "summary.txt", "fd_table.csv"] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file}");
    }
}

#[test]
fn output_defaults_to_config_relative_directory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "output = \"res\"\n\n[convergence]\nexact = \"poiseuille\"\nn_list = [2]\nneumann = [\"left\", \"right\"]\n");
    let o = Command::new(bin()).args(["convergence", "--config"]).arg(&cfg).output().unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("res/convergence.csv").exists());
}

#[test]
fn unknown_field_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[mesh]\nkind = \"unit-square\"\nn = 2\nsize = 3\n");
    let o = run("stokes-solve", &cfg, &dir.path().join("out"));
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error[config]"));
}

#[test]
fn unknown_command_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let o = run("optimize", &cfg, &dir.path().join("out"));
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error[config]"));
}

#[test]
fn missing_config_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("qp-demo", &dir.path().join("absent.toml"), &dir.path().join("out"));
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error[io]"));
}

#[test]
fn increasing_step_list_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[fd]\ns_list = [1e-3, 1e-2]\n");
    let o = run("qp-demo", &cfg, &dir.path().join("out"));
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error[config]"));
}
