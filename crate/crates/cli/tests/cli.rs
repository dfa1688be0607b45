use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn randmoll(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_randmoll"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn field(line: &str, key: &str) -> f64 {
    line.split_whitespace()
        .find_map(|w| w.strip_prefix(&format!("{key}=")))
        .and_then(|v| v.parse().ok())
        .unwrap_or_else(|| panic!("no {key} in {line:?}"))
}

// Unit-mass indicator in one dimension is 1/2 on (-1, 1); averaging over
// s ~ U(0, 1] gives K_1(x) = (1/2) ln(1/|x|) for |x| < 1.
#[test]
fn kernel_command_matches_closed_form() {
    let out = randmoll(&[
        "kernel",
        "--profile",
        "indicator",
        "--family",
        "uniform-variance:s_max=1",
        "--eval",
        "0.25",
        "-0.5",
        "2",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    for (line, x) in lines.iter().zip([0.25f64, -0.5, 2.0]) {
        let want = if x.abs() < 1.0 { -0.5 * x.abs().ln() } else { 0.0 };
        assert!((field(line, "value") - want).abs() < 1e-12, "{line}");
    }
    let mass = lines.iter().find(|l| l.starts_with("mass=")).unwrap();
    assert!((field(mass, "mass") - 1.0).abs() < 1e-6);
}

#[test]
fn missing_seed_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "name = \"x\"\nexperiment = \"convergence\"\n").unwrap();
    let out = randmoll(&["run", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
}

#[test]
fn unknown_family_is_a_config_error() {
    let out = randmoll(&["check", "no-such-family:s_max=1", "indicator"]);
    assert_eq!(out.status.code(), Some(2));
}

fn csvs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file() && p.file_name().unwrap() != "timing.txt")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn run_writes_reproducible_reports() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("suite");
    assert!(randmoll(&["init-suite", suite.to_str().unwrap()]).status.success());
    let cfg = suite.join("01-convergence-uniform.toml");
    assert!(cfg.exists());
    let runs: Vec<_> = ["a", "b"]
        .iter()
        .map(|name| {
            let out = dir.path().join(name);
            let o = randmoll(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
            assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
            csvs(&out)
        })
        .collect();
    assert!(runs[0].iter().any(|(n, _)| n.ends_with(".csv")));
    assert!(runs[0].iter().any(|(n, _)| n == "config.toml"));
    assert_eq!(runs[0], runs[1]);
}
