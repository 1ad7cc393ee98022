use std::path::Path;
use std::process::{Command, Output};

fn mfgs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfgs")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&mfgs(&["--help"])), 0);
    assert_eq!(code(&mfgs(&["--version"])), 0);
    assert_eq!(code(&mfgs(&["sweep", "--help"])), 0);
}

#[test]
fn bad_arguments_exit_one() {
    assert_eq!(code(&mfgs(&[])), 1);
    assert_eq!(code(&mfgs(&["sweep", "--points", "many"])), 1);
    assert_eq!(code(&mfgs(&["sweep", "--methods", "magic"])), 1);
    assert_eq!(code(&mfgs(&["sweep", "--spectral", "gaussian"])), 1);
    assert_eq!(code(&mfgs(&["sweep", "--convention", "odd"])), 1);
    // Semantic validation.
    let o = mfgs(&["sweep", "--from", "2", "--to", "1", "--methods", "high-t"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("from < to"));
    assert_eq!(code(&mfgs(&["sweep", "--config", "/nonexistent/mfgs.toml"])), 1);
    assert_eq!(code(&mfgs(&["sweep", "--spectral", "tabulated:/nonexistent/j.dat"])), 1);
}

#[test]
fn sweep_to_stdout() {
    let o = mfgs(&["sweep", "--from", "1", "--to", "3", "--points", "3", "--methods", "high-t,zeroth"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("lambda2q,high_t_c_ss_re,"));
    assert!(lines[0].contains("zeroth_status"));
    assert!(lines[3].starts_with("3.0000000000000000e0,"));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    let out = dir.path().join("out.csv");
    std::fs::write(
        &cfg,
        format!(
            "preset = \"fig3\"\n[sweep]\nfrom = 0.1\nto = 0.3\npoints = 3\n[run]\nmethods = [\"high-t\"]\n[output]\nout = \"{}\"\n",
            p(&out)
        ),
    )
    .unwrap();
    let o = mfgs(&["sweep", "--config", p(&cfg), "--points", "2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
    let csv = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3, "flag points=2 wins over file points=3");
    assert!(lines[0].starts_with("omega_c,"), "preset from the file selects the swept parameter");
    assert!(lines[1].starts_with("1.0000000000000001e-1,"));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[bath]\ntemperature = 3\n").unwrap();
    let o = mfgs(&["sweep", "--config", p(&cfg)]);
    assert_eq!(code(&o), 1);
}

#[test]
fn oracle_over_cap_gives_na_rows() {
    let o = mfgs(&[
        "sweep", "--from", "2", "--to", "3", "--points", "2", "--methods", "oracle,high-t", "--oracle-modes", "4",
        "--fock-cutoff", "12",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for line in stdout(&o).lines().skip(1) {
        assert!(line.contains(",NA,NA,NA,NA,NA,"));
        assert!(line.contains("NA: dimension"));
    }
}

#[test]
fn svg_written_with_preset_markers() {
    let dir = tempfile::tempdir().unwrap();
    let svg = dir.path().join("fig.svg");
    let o = mfgs(&[
        "sweep", "--preset", "fig1a", "--points", "4", "--methods", "high-t,series", "--svg", p(&svg), "--log",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s = std::fs::read_to_string(&svg).unwrap();
    assert!(s.starts_with("<?xml") && s.contains("version=\"1.1\""));
    assert!(s.contains("high-t") && s.contains("series"));
    assert!(s.contains("stroke-dasharray=\"6 4\""), "validity marker at λ²Q = 1");
}

#[test]
fn state_reports_json() {
    let o = mfgs(&["state", "--lambda2q", "4", "--methods", "high-t,exact,zeroth"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["lambda2q"], 4.0);
    let m = v["methods"].as_array().unwrap();
    assert_eq!(m.len(), 3);
    let re = |i: usize| m[i]["c_ss_re"].as_str().unwrap().parse::<f64>().unwrap();
    assert!((re(0) / re(1) - 1.0).abs() < 0.05);
    assert_eq!(re(2), 0.0);
}

#[test]
fn verify_empty_check_list() {
    let o = mfgs(&["verify", "--checks", ""]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["passed"], true);
    assert!(v["checks"].as_array().unwrap().is_empty());
}

#[test]
fn verify_passes_and_mutation_fails() {
    let o = mfgs(&["verify", "--checks", "trace-identity,dawson"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["checks"][0]["name"], "trace-identity");
    assert_eq!(v["checks"][0]["cases"], 25);
    assert!(v["checks"][0]["max_error"].as_f64().unwrap() < 1e-8);

    let bad = mfgs(&["verify", "--checks", "trace-identity", "--inject-kernel-sign-error"]);
    assert_eq!(code(&bad), 2);
    let v: serde_json::Value = serde_json::from_str(&stdout(&bad)).unwrap();
    assert_eq!(v["passed"], false);
    assert!(!v["checks"][0]["failures"].as_array().unwrap().is_empty());
}

#[test]
fn verify_config_section() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("verify.toml");
    std::fs::write(&cfg, "[verify]\nchecks = [\"dawson\"]\n[verify.dawson]\npoints = [0.3]\n").unwrap();
    let o = mfgs(&["verify", "--config", p(&cfg)]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["checks"].as_array().unwrap().len(), 1);
    assert_eq!(v["checks"][0]["cases"], 1 + 471);
    assert_eq!(code(&mfgs(&["verify", "--checks", "nonsense"])), 1);
}
