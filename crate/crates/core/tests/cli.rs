use std::path::Path;
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_axistream");

fn run(out: &Path, args: &[&str]) -> i32 {
    let status = Command::new(BIN)
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("AXISTREAM_CONFIG")
        .env_remove("AXISTREAM_THREADS")
        .env_remove("AXISTREAM_TOL")
        .output()
        .expect("binary runs")
        .status;
    status.code().expect("exit code")
}

const SMALL: [&str; 6] = ["--case", "polynomial", "--meshes", "32,64,128", "--estimate", "T1.3"];

#[test]
fn solve_writes_fields_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["solve", "--case", "separable", "--nr", "16", "--nz", "16"]), 0);
    for f in ["psi1.csv", "psi.csv", "v_r.csv", "v_z.csv", "solve.json"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("solve.json")).unwrap()).unwrap();
    assert!(summary["max_error"].as_f64().unwrap() < 1e-2);
}

#[test]
fn verify_passes_and_fault_injection_is_caught() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &[&["verify"], &SMALL[..]].concat()), 0);
    for f in ["reports.csv", "reports.json", "tables.json", "constants.json"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let broken = tempfile::tempdir().unwrap();
    assert_eq!(run(broken.path(), &[&["verify"], &SMALL[..], &["--fault-injection"]].concat()), 4);
}

#[test]
fn convergence_writes_tables_and_needs_three_meshes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &[&["convergence"], &SMALL[..]].concat()), 0);
    let table = std::fs::read_to_string(dir.path().join("table_polynomial_T1_3.csv")).unwrap();
    assert_eq!(table.lines().count(), 4);
    let few = ["convergence", "--case", "polynomial", "--meshes", "32,64", "--estimate", "T1.3"];
    assert_eq!(run(dir.path(), &few), 2);
}

#[test]
fn output_is_identical_on_one_and_many_threads() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["verify", "--case", "separable", "--case", "axis_bump", "--meshes", "16,32,64", "--mus", "0.5"];
    run(a.path(), &[&["--threads", "1"], &args[..]].concat());
    run(b.path(), &[&["--threads", "4"], &args[..]].concat());
    for f in ["reports.csv", "tables.json", "constants.json"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert!(x == y, "{f} differs between thread counts");
    }
}

#[test]
fn mellin_and_hardy_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["mellin"]), 0);
    assert!(dir.path().join("band.json").is_file());
    assert_eq!(run(dir.path(), &["mellin", "--h", "0.01"]), 5);
    assert_eq!(run(dir.path(), &["hardy"]), 0);
    assert!(dir.path().join("hardy.csv").is_file());
    assert_eq!(run(dir.path(), &["hardy", "--alphas="]), 2);
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.toml");
    assert_eq!(run(dir.path(), &["--config", missing.to_str().unwrap(), "verify"]), 2);
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[solver]\ntol = 0.5\n").unwrap();
    assert_eq!(run(dir.path(), &["--config", bad.to_str().unwrap(), "solve"]), 2);
    assert_eq!(run(dir.path(), &["verify", "--estimate", "T9.9"]), 2);
    assert_eq!(run(dir.path(), &["no-such-command"]), 2);
}

#[test]
fn config_file_drives_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "solve_case = \"oscillatory\"\n[grid]\nnr = 12\nnz = 20\n").unwrap();
    assert_eq!(run(dir.path(), &["--config", cfg.to_str().unwrap(), "solve"]), 0);
    let psi = std::fs::read_to_string(dir.path().join("psi1.csv")).unwrap();
    assert_eq!(psi.lines().count(), 1 + 12 * 20);
}
