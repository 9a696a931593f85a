use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"
[environment]
kinds = ["iid", "periodic"]
j = 3
k = 3
seed = 1

[algorithm]
x_init = "lower"

[run]
horizon = 300
taus = [1, 4]
trials = 2
static_benchmark = true
bounds = true

[output]
formats = ["csv", "svg", "json"]
"#;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dtc-oco")).args(args).output().unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("exp.toml");
    fs::write(&p, body).unwrap();
    p.display().to_string()
}

#[test]
fn run_then_verify_and_plot() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), CONFIG);
    let out = tmp.path().join("out");
    let out_s = out.display().to_string();

    let run = cli(&["run", &cfg, "--out", &out_s]);
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    let stdout = String::from_utf8_lossy(&run.stdout);
    // header + 2 envs × 1 mode × 2 taus × 2 seeds
    assert_eq!(stdout.lines().filter(|l| l.contains('\t')).count(), 1 + 8);
    assert!(out.join("summary.csv").exists());
    assert!(out.join("iid_cost.svg").exists());

    let verify = cli(&["verify", &out_s]);
    assert_eq!(verify.status.code(), Some(0), "{}", String::from_utf8_lossy(&verify.stdout));
    assert_eq!(String::from_utf8_lossy(&verify.stdout).lines().filter(|l| l.starts_with("ok")).count(), 8);

    fs::remove_file(out.join("periodic_violation.svg")).unwrap();
    let plot = cli(&["plot", &out_s]);
    assert_eq!(plot.status.code(), Some(0));
    assert!(out.join("periodic_violation.svg").exists());
}

#[test]
fn constants_prints_each_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), CONFIG);
    let out = cli(&["constants", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().any(|l| l.starts_with("iid") && l.contains("beta=")));
    assert!(text.lines().any(|l| l.starts_with("periodic")));
}

#[test]
fn config_errors_exit_with_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &CONFIG.replace("horizon = 300", "horizon = 0"));
    let out = cli(&["run", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("horizon"));

    let cfg = write_config(tmp.path(), &CONFIG.replace("trials = 2", "trials = 2\nbogus = 1"));
    assert_eq!(cli(&["run", &cfg]).status.code(), Some(2));
    assert_eq!(cli(&["run"]).status.code(), Some(2));
}

#[test]
fn verify_rejects_a_directory_without_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = cli(&["verify", &tmp.path().display().to_string()]);
    assert_eq!(out.status.code(), Some(1));
}
