use messkit_core::io::{read_modeset, read_timeseries};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn messkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_messkit"))
        .args(args)
        .env_remove("MESSKIT_THREADS")
        .output()
        .unwrap()
}

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(name)
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const QUBIT: &str = r#"
schema_version = 1

[system]
d = 2
h = { re = [[0.5, 0.5], [0.5, -0.5]] }
s = { re = [[1.0, 0.0], [0.0, -1.0]] }
rho0 = { re = [[1.0, 0.0], [0.0, 0.0]] }
"#;

const LORENTZIAN: &str = r#"
[decomposition]
method = "modes"
modes = { d_re = [0.04], z_re = [0.2], z_im = [1.0] }
"#;

#[test]
fn minimal_spin_boson_config_writes_the_time_series() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = messkit(&[
        "propagate",
        "--config",
        config_path("spin_boson.toml").to_str().unwrap(),
        "--out-dir",
        out,
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let table = read_timeseries(&dir.path().join("spin_boson.csv")).unwrap();
    for col in ["t", "trace", "sz", "re_rho_0_1", "im_rho_0_1"] {
        assert!(table.header.iter().any(|h| h == col), "missing {col}");
    }
    assert_eq!(table.rows.len(), 51);
    assert!(table
        .column("trace")
        .unwrap()
        .iter()
        .all(|x| (x - 1.0).abs() < 1e-8));
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("spin_boson.json")).unwrap())
            .unwrap();
    assert_eq!(meta["schema_version"], 1);
    assert_eq!(meta["backend"], "heom-generalized");
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!(
        "{QUBIT}{LORENTZIAN}\n[solver]\nbackend = \"sln\"\ntrajectories = 1000\nseed = 5\nt_max = 5.0\nsteps = 25\n"
    );
    let path = write_config(dir.path(), "sln.toml", &cfg);
    let mut files = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let o = messkit(&[
            "propagate",
            "--config",
            &path,
            "--out-dir",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        files.push(fs::read(out.join("run.csv")).unwrap());
    }
    assert_eq!(files[0], files[1]);
    let header = String::from_utf8_lossy(&files[0])
        .lines()
        .next()
        .unwrap()
        .to_string();
    assert!(header.contains("sz_stderr") && header.contains("re_rho_0_1_stderr"));
    // a different seed changes the data
    let out = dir.path().join("c");
    let o = messkit(&[
        "propagate",
        "--config",
        &path,
        "--out-dir",
        out.to_str().unwrap(),
        "--seed-override",
        "6",
    ]);
    assert_eq!(code(&o), 0);
    assert_ne!(fs::read(out.join("run.csv")).unwrap(), files[0]);
}

#[test]
fn thread_count_does_not_change_the_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!("{QUBIT}{LORENTZIAN}\n[solver]\nbackend = \"hops\"\ndepth = 4\ntrajectories = 1000\nt_max = 4.0\nsteps = 20\n");
    let path = write_config(dir.path(), "hops.toml", &cfg);
    let mut files = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(threads);
        let o = messkit(&[
            "propagate",
            "--config",
            &path,
            "--out-dir",
            out.to_str().unwrap(),
            "--threads",
            threads,
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        files.push(fs::read(out.join("run.csv")).unwrap());
    }
    assert_eq!(files[0], files[1]);
}

#[test]
fn negative_beta_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(config_path("spin_boson.toml"))
        .unwrap()
        .replace("beta = 5.0", "beta = -1.0");
    let path = write_config(dir.path(), "bad.toml", &text);
    let o = messkit(&[
        "propagate",
        "--config",
        &path,
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("bath.beta"), "{}", stderr(&o));
    assert!(!dir.path().join("spin_boson.csv").exists());
}

#[test]
fn usage_and_schema_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&messkit(&["propagate"])), 2);
    assert_eq!(code(&messkit(&["no-such-command"])), 2);
    let typo = fs::read_to_string(config_path("spin_boson.toml"))
        .unwrap()
        .replace("depth = 4", "dept = 4");
    let o = messkit(&[
        "propagate",
        "--config",
        &write_config(dir.path(), "typo.toml", &typo),
    ]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line"), "{}", stderr(&o));
    let old = format!(
        "{}",
        QUBIT.replace("schema_version = 1", "schema_version = 7")
    );
    let o = messkit(&[
        "propagate",
        "--config",
        &write_config(dir.path(), "old.toml", &format!("{old}{LORENTZIAN}")),
    ]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("schema_version"));
}

#[test]
fn compare_exit_status_follows_the_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = messkit(&[
        "compare",
        "--config",
        config_path("compare.toml").to_str().unwrap(),
        "--out-dir",
        out,
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("PASS"));
    let report: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("lorentzian_comparison.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(report["pass"], true);
    // a depth-one hierarchy cannot meet 1e-6 against the converged one
    let cfg = format!(
        "{QUBIT}{LORENTZIAN}\n[compare]\na = {{ backend = \"heom-generalized\", depth = 1 }}\nb = {{ backend = \"heom-generalized\", depth = 8 }}\nabs = 1e-6\n"
    );
    let o = messkit(&[
        "compare",
        "--config",
        &write_config(dir.path(), "cmp.toml", &cfg),
        "--out-dir",
        out,
    ]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}

#[test]
fn flagged_runs_exit_with_one_unless_allowed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!(
        "{QUBIT}{LORENTZIAN}\n[solver]\nbackend = \"pseudomode\"\ncutoffs = [2]\nconverge = true\nconverge_tol = 1e-12\nt_max = 5.0\nsteps = 10\n"
    );
    let path = write_config(dir.path(), "flag.toml", &cfg);
    let out = dir.path().to_str().unwrap();
    let o = messkit(&["propagate", "--config", &path, "--out-dir", out]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    assert!(stderr(&o).contains("flagged"));
    assert!(dir.path().join("run.csv").exists());
    let o = messkit(&[
        "propagate",
        "--config",
        &path,
        "--out-dir",
        out,
        "--allow-flagged",
    ]);
    assert_eq!(code(&o), 0);
}

#[test]
fn fit_writes_a_readable_mode_set() {
    let dir = tempfile::tempdir().unwrap();
    let o = messkit(&[
        "fit",
        "--config",
        config_path("spin_boson.toml").to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (set, tol) = read_modeset(&dir.path().join("spin_boson_fit.modes")).unwrap();
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("spin_boson_fit.json")).unwrap())
            .unwrap();
    assert_eq!(summary["K"].as_u64().unwrap() as usize, set.len());
    assert!(set.len() <= 40);
    assert!(tol <= 1e-4);
}

#[test]
fn chainmap_writes_the_coefficients() {
    let dir = tempfile::tempdir().unwrap();
    let o = messkit(&[
        "chainmap",
        "--config",
        config_path("spin_boson.toml").to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let t = read_timeseries(&dir.path().join("spin_boson_chain.csv"));
    // the chain table is keyed by n, not t
    assert!(t.is_err());
    let text = fs::read_to_string(dir.path().join("spin_boson_chain.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "n,site,hop");
    assert_eq!(text.lines().count(), 9);
}

#[test]
fn dephasing_oracle_agrees_with_the_hierarchy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!(
        "{}{LORENTZIAN}\n[solver]\ndepth = 10\nt_max = 10.0\nsteps = 50\n\n[oracle]\nkind = \"dephasing\"\ntolerance = 1e-6\n",
        QUBIT
            .replace("[[0.5, 0.5], [0.5, -0.5]]", "[[0.5, 0.0], [0.0, -0.5]]")
            .replace("[[1.0, 0.0], [0.0, 0.0]]", "[[0.5, 0.5], [0.5, 0.5]]")
    );
    let o = messkit(&[
        "oracle",
        "--config",
        &write_config(dir.path(), "o.toml", &cfg),
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(
        code(&o),
        0,
        "{}{}",
        stderr(&o),
        String::from_utf8_lossy(&o.stdout)
    );
    assert!(dir.path().join("run_oracle.csv").exists());
}

#[test]
fn suite_runs_selected_criteria() {
    let o = messkit(&["suite", "--criteria", "1,10"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    let lines: Vec<&str> = stdout.lines().filter(|l| l.starts_with('C')).collect();
    assert_eq!(lines.len(), 2);
    assert!(lines.iter().all(|l| l.ends_with("PASS")));
}
