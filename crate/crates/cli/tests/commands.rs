use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn restartlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_restartlab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

const PANEL_A: &str = r#"{
  "model": {"spectrum": {"sigmas": [0.95]}},
  "optimizer": {"kind": "hb", "nu": 1.0, "beta_out": 0.9},
  "schedule": {"variant": "no_restart"},
  "horizon": 80
}"#;

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn simulate_writes_one_row_per_round() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "a.json", PANEL_A);
    let out = dir.path().join("a.csv");
    let o = restartlab(&["--output", out.to_str().unwrap(), "simulate", &cfg]);
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "round,mode_or_dim,x,m,loss,restarted");
    assert_eq!(lines.len(), 82);
    assert!(stdout(&o).contains("final loss: "));
    assert!(stdout(&o).contains("restart rounds: none"));
}

#[test]
fn zero_horizon_is_the_initial_state() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "z.json", &PANEL_A.replace("\"horizon\": 80", "\"horizon\": 0"));
    let o = restartlab(&["--quiet", "simulate", &cfg]);
    assert_eq!(o.status.code(), Some(0));
    let csv = stdout(&o);
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows, ["0,0,1.0000000000000000e0,0.0000000000000000e0,5.0000000000000000e-1,0"]);
}

#[test]
fn config_output_path_is_relative_to_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let text = PANEL_A.replace("\"horizon\": 80", "\"horizon\": 5, \"output\": \"traj.csv\"");
    let cfg = write(dir.path(), "a.json", &text);
    let o = restartlab(&["simulate", &cfg]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(fs::read_to_string(dir.path().join("traj.csv")).unwrap().lines().count(), 7);
}

#[test]
fn malformed_config_exits_2_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never.csv");
    for (name, text) in [
        ("syntax.json", "{\"model\": "),
        ("variant.json", &PANEL_A.replace("no_restart", "occasional")),
        ("sigma.json", &PANEL_A.replace("[0.95]", "[1.2]")),
    ] {
        let cfg = write(dir.path(), name, text);
        let o = restartlab(&["--output", out.to_str().unwrap(), "simulate", &cfg]);
        assert_eq!(o.status.code(), Some(2), "{name}");
        assert!(!out.exists(), "{name}");
        assert!(!o.stderr.is_empty());
    }
    let o = restartlab(&["simulate", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn divergence_exits_3_with_truncated_csv() {
    let dir = tempfile::tempdir().unwrap();
    let text = PANEL_A
        .replace("\"nu\": 1.0, \"beta_out\": 0.9", "\"nu\": 40.0, \"beta_out\": 0.0")
        .replace("\"horizon\": 80", "\"horizon\": 1000");
    let cfg = write(dir.path(), "d.json", &text);
    let out = dir.path().join("d.csv");
    let o = restartlab(&["--output", out.to_str().unwrap(), "simulate", &cfg]);
    assert_eq!(o.status.code(), Some(3));
    let rows = fs::read_to_string(&out).unwrap().lines().count() - 1;
    assert!(rows > 1 && rows < 1001);
}

#[test]
fn quadratic_model_reads_matrix_file() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "h.csv", "2.0,0.5\n0.5,1.0\n");
    let text = r#"{
      "model": {"quadratic": {"matrix_file": "h.csv", "eta": 0.3, "steps": 4, "workers": 2}},
      "optimizer": {"kind": "nag", "nu": 1.0, "beta_out": 0.9},
      "schedule": {"variant": "global", "period": 5},
      "horizon": 10
    }"#;
    let cfg = write(dir.path(), "q.json", text);
    let o = restartlab(&["--quiet", "simulate", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).lines().count(), 1 + 11 * 2);

    let per_mode = text.replace(
        "{\"variant\": \"global\", \"period\": 5}",
        "{\"variant\": \"per_mode\", \"periods\": [3, 4]}",
    );
    let cfg = write(dir.path(), "q2.json", &per_mode);
    assert_eq!(restartlab(&["simulate", &cfg]).status.code(), Some(2));
}

#[test]
fn regime_reports_rounded_interval() {
    let o = restartlab(&["regime", "--nu", "1", "--beta", "0.9"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("(0.026, 38)"));
    let o = restartlab(&["regime", "--nu", "1", "--beta", "0.99"]);
    assert!(stdout(&o).contains("(0.0025, 398)"));
    let o = restartlab(&["--csv", "regime", "--nu", "1", "--beta", "0.5"]);
    let text = stdout(&o);
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    let lo: f64 = row[2].parse().unwrap();
    assert!((lo - (1.0 - 0.5f64.sqrt()) / (1.0 + 0.5f64.sqrt())).abs() < 1e-15);
    assert_eq!(restartlab(&["regime", "--nu", "1", "--beta", "0"]).status.code(), Some(2));
}

#[test]
fn period_reports_brute_force_and_phase_estimates() {
    let o = restartlab(&["--csv", "period", "--sigma", "0.95", "--nu", "1", "--beta", "0.9"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "scope,kind,k_min,k_max,k_star,objective,k_phase,r_k_star,r_inf,crossover,regime"
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let k_star: u32 = row[4].parse().unwrap();
    let phases: Vec<u32> = row[6].split(' ').map(|k| k.parse().unwrap()).collect();
    // exhaustive scan of |chi_K| over 1..=64
    assert_eq!(k_star, 55);
    assert_eq!(phases.len(), 3);
    assert_eq!(row[10], "complex");

    let o = restartlab(&["period", "--sigma", "0", "--nu", "1", "--beta", "0.9"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn period_outside_complex_regime_exits_4_after_printing() {
    // the complex interval starts near sigma = 0.005 here
    let o = restartlab(&["period", "--sigma", "0.004", "--nu", "0.5", "--beta", "0.99"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stdout(&o).contains("k_star: "));
    let o = restartlab(&["period", "--no-phase", "--sigma", "0.004", "--nu", "0.5", "--beta", "0.99"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn period_from_spectrum_file() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(
        dir.path(),
        "six.csv",
        "sigma,weight\n0.95,1\n0.85,1\n0.75,1\n0.60,1\n0.45,1\n0.30,1\n",
    );
    let o = restartlab(&["--csv", "period", "--spectrum-file", &file, "--nu", "1", "--beta", "0.9"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "block");
    // exhaustive scan of the weighted squared factors
    assert_eq!(row[4], "64");
    let objective: f64 = row[5].parse().unwrap();
    assert!((objective - 3.363_359_672_566_463e-3).abs() < 1e-15);

    let bad = write(dir.path(), "bad.csv", "sigma,mass\n0.5,1\n");
    let o = restartlab(&["period", "--spectrum-file", &bad, "--nu", "1", "--beta", "0.9"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_row_count_and_bad_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "s.json",
        r#"{"beta_grid": [0.5, 0.9], "nu_grid": [0.5, 1.0, 1.5], "k_grid": [2, 5, 9], "horizon": 40}"#,
    );
    let o = restartlab(&["--quiet", "sweep", &cfg]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 1 + 2 * 3 * (3 + 1) * 2);

    let cfg = write(dir.path(), "bad.json", r#"{"schedules": ["none", "sometimes"]}"#);
    let out = dir.path().join("bad.csv");
    let o = restartlab(&["--output", out.to_str().unwrap(), "sweep", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn validate_passes_and_detects_injected_fault() {
    let o = restartlab(&["validate"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).lines().all(|l| l.starts_with("[PASS]")));
    let o = restartlab(&["--csv", "validate", "--inject-fault"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).lines().any(|l| l.contains(",false,")));
}
