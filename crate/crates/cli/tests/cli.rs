use std::path::Path;
use std::process::{Command, Output};

fn vqephase(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vqephase"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .env_remove("VQEPHASE_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn read_without_timestamp(path: &Path) -> String {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with("# generated_at_unix="))
        .collect::<Vec<_>>()
        .join("\n")
}

const TINY_FIG1A: &[&str] = &[
    "run",
    "fig1a",
    "--lattice",
    "2x2",
    "--ns",
    "1,2,4,8",
    "--j2",
    "0.0",
    "--set",
    "optimizer.restarts=2",
    "--set",
    "optimizer.max_steps=300",
    "--set",
    "optimizer.window=40",
    "--set",
    "optimizer.tail=80",
];

#[test]
fn exact_diagonalization_on_a_plaquette() {
    let dir = tempfile::tempdir().unwrap();
    let o = vqephase(&["run", "ed", "--lattice", "2x2", "--j2", "0.0"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("ed.csv")).unwrap();
    let mut lines = csv.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&header[..3], &["scenario", "config_hash", "seed"]);
    let e_col = header.iter().position(|h| *h == "energy").unwrap();
    let ground: f64 = lines.next().unwrap().split(',').nth(e_col).unwrap().parse().unwrap();
    // four-site Heisenberg ring
    assert!((ground + 2.0).abs() < 1e-10, "{ground}");
    assert!(dir.path().join("ed_fit.csv").exists());
}

#[test]
fn output_is_reproducible_across_worker_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut one = TINY_FIG1A.to_vec();
    one.extend(["--workers", "1"]);
    let mut three = TINY_FIG1A.to_vec();
    three.extend(["--workers", "3"]);
    for (args, dir) in [(&one, &a), (&three, &b)] {
        let o = vqephase(args, dir.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["fig1a.csv", "fig1a_steps.jsonl", "fig1a_fit.csv"] {
        let (x, y) = (read_without_timestamp(&a.path().join(f)), read_without_timestamp(&b.path().join(f)));
        assert!(!x.is_empty(), "{f} empty");
        assert_eq!(x, y, "{f} differs");
    }
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = vqephase(&["run", "fig1a", "--set", "optimizer.learning_rate=-1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("optimizer.learning_rate"));
}

#[test]
fn large_cluster_without_opt_in_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let o = vqephase(&["run", "ed", "--lattice", "5x4"], dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn hard_qubit_limit_applies_even_with_opt_in() {
    let dir = tempfile::tempdir().unwrap();
    let o = vqephase(&["run", "ed", "--lattice", "6x5", "--allow-large"], dir.path());
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn validate_prints_the_normalized_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_vqephase")).args(["validate", "appD"]).output().unwrap();
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("scenario = \"appD\""));
    let path = dir.path().join("c.toml");
    std::fs::write(&path, &text).unwrap();
    let again = Command::new(env!("CARGO_BIN_EXE_vqephase"))
        .args(["validate", "--config", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(String::from_utf8(again.stdout).unwrap(), text);
}
