use std::fs;
use std::process::{Command, Output};

fn twofield(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twofield"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn default_run_writes_101_rows() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("series.csv");
    let out = twofield(&["run", "--output-csv", csv.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "step,m_total,drift_velocity,momentum_expectation,position_mean,position_spread,shape_residual"
    );
    let steps: Vec<usize> = lines.map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(steps.len(), 101);
    assert_eq!(steps, (0..=1000).step_by(10).collect::<Vec<_>>());
}

#[test]
fn schemes_share_the_first_row() {
    let common = ["run", "--shape", "random", "--seed", "7", "--n-sites", "101", "--n-steps", "20"];
    let euler = twofield(&[&common[..], &["--scheme", "euler"]].concat());
    let exact = twofield(&[&common[..], &["--scheme", "exact"]].concat());
    let (e, x) = (stdout(&euler), stdout(&exact));
    assert_eq!(e.lines().nth(1), x.lines().nth(1));
    assert_ne!(e.lines().last(), x.lines().last());
}

#[test]
fn outputs_are_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let paths: Vec<_> = ["a", "b"].iter().map(|n| dir.path().join(n)).collect();
    for p in &paths {
        let out = twofield(&[
            "run",
            "--shape",
            "random",
            "--n-sites",
            "51",
            "--n-steps",
            "30",
            "--output-json",
            p.to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    assert_eq!(fs::read(&paths[0]).unwrap(), fs::read(&paths[1]).unwrap());
}

#[test]
fn even_size_needs_even_mode() {
    let out = twofield(&["run", "--n-sites", "800", "--n-steps", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("even_naive"));
    let out = twofield(&["run", "--n-sites", "800", "--n-steps", "1", "--parity-mode", "even_naive"]);
    assert!(out.status.success());
}

#[test]
fn bad_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "n_sitez = 5\n").unwrap();
    let out = twofield(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let out = twofield(&["run", "--tau", "-1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    let csv = dir.path().join("out.csv");
    fs::write(
        &cfg,
        format!(
            "n_sites = 41\nshape = \"uniform\"\nwidth = 5.0\nn_steps = 40\nrecord_every = 20\noutput_csv = {:?}\n",
            csv.to_str().unwrap()
        ),
    )
    .unwrap();
    let out = twofield(&["run", "--config", cfg.to_str().unwrap(), "--record-every", "4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 1 + 11);
}

#[test]
fn oversized_step_exits_3() {
    let out = twofield(&["run", "--tau", "0.02", "--n-steps", "1"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn final_state_reloads() {
    let dir = tempfile::tempdir().unwrap();
    let state = dir.path().join("state.csv");
    let s = state.to_str().unwrap();
    let first = twofield(&["run", "--n-sites", "31", "--width", "3", "--velocity-index", "2", "--n-steps", "10", "--final-state", s]);
    assert!(first.status.success());
    let resumed = twofield(&["run", "--n-sites", "31", "--initial-state", s, "--n-steps", "10"]);
    assert!(resumed.status.success());
    let direct = twofield(&["run", "--n-sites", "31", "--width", "3", "--velocity-index", "2", "--n-steps", "20"]);
    let last = |o: &Output| stdout(o).lines().last().unwrap().split(',').nth(1).unwrap().parse::<f64>().unwrap();
    assert!((last(&resumed) - last(&direct)).abs() < 1e-14);
}

#[test]
fn verify_passes_quickly() {
    let start = std::time::Instant::now();
    let out = twofield(&["verify", "--max-n", "21"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(start.elapsed().as_secs_f64() < 30.0);
    let text = stdout(&out);
    assert!(text.contains("M drift identity N=21"));
    assert!(!text.contains("FAIL"));
}

#[test]
fn verify_catches_kernel_perturbation() {
    let out = twofield(&["verify", "--max-n", "7", "--n-states", "2", "--kernel-perturbation", "1e-6"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("kernel equivalence"));
}

#[test]
fn zero_step_table_is_all_zero() {
    let out = twofield(&["paper-table", "--steps", "0", "--format", "json"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(text.matches("\"scenario\"").count(), 9);
    assert_eq!(text.matches("\"m_variation\": 0.0").count(), 9);
    assert_eq!(text.matches("\"v_variation\": 0.0").count(), 9);
}

#[test]
fn table_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        let out = twofield(&["paper-table", "--steps", "100", "--seed", "42", "--format", "json", "--output", p.to_str().unwrap()]);
        assert!(out.status.success());
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn default_table_passes() {
    let out = twofield(&["paper-table"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert_eq!(text.matches("reaction run").count(), 9);
    assert!(!text.contains("FAIL"));
}

#[test]
fn compare_reports_growing_distance() {
    let out = twofield(&["compare", "--n-sites", "101", "--width", "5", "--n-steps", "40", "--record-every", "20"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let dist: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(dist.len(), 3);
    assert_eq!(dist[0], 0.0);
    assert!(dist[2] > dist[1] && dist[1] > 0.0);
}

#[test]
fn even_odd_demo_passes() {
    let out = twofield(&["even-odd"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("wrapped even/odd ratio"));
}
