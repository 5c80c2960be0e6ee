use std::process::{Command, Output};

fn hbs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hbs")).args(args).output().expect("binary runs")
}

const HEADER: &str = "iter,dofs,elements,levels,energy_error,estimator,efficiency,marked,wall_ms";

#[test]
fn solve_writes_csv_to_stdout() {
    let out = hbs(&["solve", "--example", "gaussian-square", "--degree", "2", "--max-dofs", "300"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(HEADER));
    let rows: Vec<&str> = lines.collect();
    assert!(rows.len() >= 2);
    assert!(rows.iter().all(|r| r.split(',').count() == 9));
    assert!(String::from_utf8(out.stderr).unwrap().contains("gaussian-square adaptive p=2"));
}

#[test]
fn config_file_and_out_path() {
    let dir = std::env::temp_dir().join(format!("hbs-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, "example = ring\ndegree = 2\nmode = uniform\nmax_dofs = 500\n").unwrap();
    let csv = dir.join("ring.csv");
    let out = hbs(&["solve", "--config", cfg.to_str().unwrap(), "--out", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with(HEADER));
    assert!(text.lines().skip(1).all(|l| l.split(',').nth(3) == Some("1")));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn configuration_errors_exit_with_three() {
    assert_eq!(hbs(&["solve", "--example", "nowhere", "--degree", "2"]).status.code(), Some(3));
    assert_eq!(hbs(&["solve", "--example", "ring", "--degree", "2", "--mode", "sideways"]).status.code(), Some(3));
    assert_eq!(hbs(&["solve", "--example", "ring", "--degree", "1"]).status.code(), Some(3));
    assert_eq!(hbs(&["solve", "--bogus"]).status.code(), Some(3));
    assert_eq!(hbs(&["verify"]).status.code(), Some(3));
    assert_eq!(hbs(&["verify", "--check", "nonsense"]).status.code(), Some(3));
    assert_eq!(hbs(&["--help"]).status.code(), Some(0));
}

#[test]
fn solver_failure_exits_with_two_and_keeps_partial_rows() {
    let out = hbs(&["solve", "--example", "lshape", "--degree", "2", "--max-depth", "3"]);
    assert_eq!(out.status.code(), Some(2));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with(HEADER));
    assert!(text.lines().count() >= 2);
}

#[test]
fn verify_prints_one_line_per_check() {
    let out = hbs(&["verify", "--check", "cauchy-schwarz", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let fields: Vec<&str> = text.trim().split(' ').collect();
    assert_eq!(fields.len(), 4);
    assert_eq!(fields[0], "cauchy-schwarz");
    assert_eq!(fields[3], "true");
}
