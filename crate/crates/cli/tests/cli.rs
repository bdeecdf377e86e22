use std::fs;
use std::path::{Path, PathBuf};

use taxsim_cli::{main_with_args, EXIT_OK, EXIT_RUNTIME, EXIT_USAGE};

fn taxsim(args: &[&str]) -> i32 {
    main_with_args(std::iter::once("taxsim").chain(args.iter().copied()))
}

fn only_run_dir(out: &Path, experiment: &str) -> PathBuf {
    let mut dirs: Vec<_> = fs::read_dir(out.join(experiment)).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(dirs.len(), 1, "{dirs:?}");
    dirs.pop().unwrap()
}

#[test]
fn exit_codes() {
    assert_eq!(taxsim(&[]), EXIT_USAGE);
    assert_eq!(taxsim(&["--help"]), EXIT_OK);
    assert_eq!(taxsim(&["validate", "--config", "V"]), EXIT_USAGE);
    assert_eq!(taxsim(&["dose", "--k", "5:1"]), EXIT_USAGE);
    assert_eq!(taxsim(&["sweep", "--nu-grid", "0:1:0"]), EXIT_USAGE);
    assert_eq!(taxsim(&["report", "/nonexistent/results.csv"]), EXIT_RUNTIME);
    assert_eq!(taxsim(&["run", "--spec", "/nonexistent/spec.toml"]), EXIT_RUNTIME);
}

#[test]
fn report_rebuilds_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(taxsim(&["validate", "--config", "III", "--reps", "6", "--seed", "3", "--out", out]), EXIT_OK);
    let run = only_run_dir(dir.path(), "validation");
    for file in ["results.csv", "summary.json", "config_echo.toml"] {
        assert!(run.join(file).is_file(), "{file} missing");
    }
    let rebuilt = dir.path().join("rebuilt.json");
    let results = run.join("results.csv");
    assert_eq!(taxsim(&["report", results.to_str().unwrap(), "--to", rebuilt.to_str().unwrap()]), EXIT_OK);
    assert_eq!(fs::read(rebuilt).unwrap(), fs::read(run.join("summary.json")).unwrap());
}

#[test]
fn sweep_writes_full_heatmap() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let args = ["sweep", "--nu-grid", "0.5:1.5:0.5", "--p-grid", "0:1:0.5", "--reps", "1", "--population", "5", "--out", out];
    assert_eq!(taxsim(&args), EXIT_OK);
    let heatmap = fs::read_to_string(only_run_dir(dir.path(), "sweep").join("heatmap.csv")).unwrap();
    let mut lines = heatmap.lines();
    assert_eq!(lines.next().unwrap(), "nu_ratio,p_audit,mean_delta,mean_agent_delta,mean_informal_share");
    assert_eq!(lines.count(), 9);
}

#[test]
fn spec_file_drives_run() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.toml");
    fs::write(
        &spec,
        "[experiment]\nkind = \"dose_response\"\nk_values = [0, 20]\nrepetitions = 2\nseed = 5\npopulation = 2\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    assert_eq!(taxsim(&["run", "--spec", spec.to_str().unwrap(), "--out", out.to_str().unwrap()]), EXIT_OK);
    let curve = fs::read_to_string(only_run_dir(&out, "dose").join("curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 3);
}

#[test]
fn plain_run_keeps_series_and_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(taxsim(&["run", "--population", "3", "--seed", "1", "--out", out]), EXIT_OK);
    let run = only_run_dir(dir.path(), "run");
    let names: Vec<String> = fs::read_dir(&run).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    assert!(names.iter().any(|n| n.ends_with("_series.csv")), "{names:?}");
    assert!(names.iter().any(|n| n.ends_with("_snapshot.json")), "{names:?}");
}
