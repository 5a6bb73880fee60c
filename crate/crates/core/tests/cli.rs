use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pas-slp"))
}

#[test]
fn run_writes_csv_and_flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"trials": 9, "schemes": ["fixed", "conventional"], "gamma_db": [10, 20]}"#,
    )
    .unwrap();
    let out = dir.path().join("r.csv");
    let status = bin()
        .args([
            "run",
            "--experiment",
            "power-vs-sinr",
            "--trials",
            "2",
            "--seed",
            "7",
            "--config",
        ])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(
        status.status.success(),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "experiment,trial,seed,scheme,gamma_db,num_pas,power_w,power_dbm,ao_iters,converged"
    );
    // 2 trials x 2 gammas x 2 schemes
    assert_eq!(lines.len(), 9);
    assert!(lines[1].starts_with("power-vs-sinr,0,"));
}

#[test]
fn same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let s = bin()
            .args([
                "run",
                "--experiment",
                "convergence",
                "--trials",
                "2",
                "--seed",
                "3",
                "--out",
            ])
            .arg(&out)
            .status()
            .unwrap();
        assert!(s.success());
        std::fs::read(out).unwrap()
    };
    assert_eq!(run("a.csv"), run("b.csv"));
}

#[test]
fn bad_config_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"trails": 3}"#).unwrap();
    let out = bin()
        .args(["run", "--experiment", "power-vs-numpas", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("trails"));

    let missing = bin()
        .args([
            "run",
            "--experiment",
            "convergence",
            "--config",
            "/nonexistent.json",
        ])
        .output()
        .unwrap();
    assert!(!missing.status.success());

    let unknown = bin()
        .args(["run", "--experiment", "fig7"])
        .output()
        .unwrap();
    assert!(!unknown.status.success());
}
