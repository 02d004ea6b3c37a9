use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pretest-lab"))
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin()
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("small.toml");
    std::fs::write(
        &path,
        "replicates = 600\nlambda_grid = [-4.0, -2.0, 0.0, 2.0, 4.0]\nseed = 77\n\
         tau_grid = [0.0, 0.5, 0.9]\npsi_grid = [0.2, 1.0]\nrho_grid = [0.0, 0.4]\n\
         sel_rho = [0.0, 0.4]\nrho_values = [0.0, 0.5]\npsi_values = [0.2, 1.0]\nrefine = false\n",
    )
    .unwrap();
    path.display().to_string()
}

#[test]
fn figure1_is_byte_identical_across_threads_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let a = run(
        &[
            "figure1",
            "--config",
            &cfg,
            "--out",
            "a.csv",
            "--threads",
            "1",
        ],
        dir.path(),
    );
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let b = run(
        &[
            "figure1",
            "--config",
            &cfg,
            "--out",
            "b.csv",
            "--threads",
            "2",
        ],
        dir.path(),
    );
    assert!(b.status.success());
    let c = run(
        &[
            "figure1",
            "--config",
            "a.csv.manifest.json",
            "--out",
            "c.csv",
        ],
        dir.path(),
    );
    assert!(c.status.success());
    let read = |f: &str| std::fs::read(dir.path().join(f)).unwrap();
    assert_eq!(read("a.csv"), read("b.csv"));
    assert_eq!(read("a.csv"), read("c.csv"));

    let text = String::from_utf8(read("a.csv")).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# pretest-lab "));
    assert_eq!(
        lines.next().unwrap(),
        "lambda,alpha_tilde,cp_tilde,std_error,M,seed"
    );
    assert_eq!(lines.count(), 10);

    let manifest: serde_json::Value = serde_json::from_slice(&read("a.csv.manifest.json")).unwrap();
    assert_eq!(manifest["seed"], 77);
    assert_eq!(manifest["config"]["replicates"], 600);
    let digest = manifest["outputs"][0]["sha256"].as_str().unwrap();
    assert_eq!(digest.len(), 64);
}

#[test]
fn cli_flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = run(
        &[
            "figure1",
            "--config",
            &cfg,
            "--out",
            "f.csv",
            "--seed",
            "5",
            "--replicates",
            "300",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let text = std::fs::read_to_string(dir.path().join("f.csv")).unwrap();
    let row = text.lines().nth(2).unwrap();
    assert!(row.ends_with(",300,5"), "{row}");
}

#[test]
fn other_commands_write_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    for (cmd, out) in [
        ("figure2", "f2.csv"),
        ("figure3", "f3.csv"),
        ("table1", "t1.csv"),
    ] {
        let o = run(&[cmd, "--config", &cfg, "--out", out], dir.path());
        assert!(
            o.status.success(),
            "{cmd}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        assert!(dir.path().join(out).exists());
    }
    assert!(dir.path().join("t1.json").exists());
    let t1: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("t1.json")).unwrap()).unwrap();
    assert_eq!(t1["rows"].as_array().unwrap().len(), 4);

    let o = run(
        &["sel", "--replicates", "300", "--estimator", "ml"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    let cs = dir.path().join("sel.toml");
    std::fs::write(&cs, "c_star = 0.8\ntau = 0.3\n").unwrap();
    let o = run(
        &[
            "sel",
            "--config",
            cs.to_str().unwrap(),
            "--replicates",
            "300",
            "--out",
            "sel.json",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["sel"]["value"].as_f64().unwrap() > 0.0);
    assert!(dir.path().join("sel.json.manifest.json").exists());

    let o = run(&["coverage", "--replicates", "300"], dir.path());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["estimated"]["cp_tilde"]["value"].as_f64().unwrap() > 0.5);
}

#[test]
fn config_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "rhoo = 0.2\n").unwrap();
    let o = run(&["coverage", "--config", bad.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("rhoo"));

    std::fs::write(&bad, "tau = 1.0\n").unwrap();
    let o = run(&["coverage", "--config", bad.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("tau"));

    let o = run(
        &[
            "figure1",
            "--out",
            "/nonexistent/dir/x.csv",
            "--replicates",
            "10",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
}
