//! End-to-end checks of the `ppsl` binary.

use std::process::Command;

fn ppsl() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ppsl"))
}

#[test]
fn graph_gen_and_check_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("g.txt");
    let out = ppsl()
        .args([
            "graph", "gen", "--kind", "regular", "--n", "32", "--d", "4", "--seed", "9",
        ])
        .arg("--out")
        .arg(&file)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(&file).unwrap();
    assert!(text.starts_with("# nodes: 32\n"));

    let out = ppsl()
        .args(["graph", "check", "--file"])
        .arg(&file)
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("valid (32 nodes"), "{stdout}");
    assert!(stdout.contains("min degree 4"));
}

#[test]
fn graph_check_rejects_bipartite_files() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("square.txt");
    std::fs::write(&file, "0 1\n1 2\n2 3\n3 0\n").unwrap();
    let out = ppsl()
        .args(["graph", "check", "--file"])
        .arg(&file)
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("bipartite"), "{stderr}");
}

#[test]
fn run_and_validate_work_on_the_quick_config() {
    let config = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/quick.toml");
    let dir = tempfile::tempdir().unwrap();

    let out = ppsl()
        .args(["run", "--config", config, "--seeds", "4,5"])
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.path().join("trace_seed_4.csv").exists());
    assert!(dir.path().join("trace_seed_5.csv").exists());
    assert!(dir.path().join("aggregate.csv").exists());
    let manifest = std::fs::read_to_string(dir.path().join("manifest.toml")).unwrap();
    assert!(manifest.contains("complete = true"));

    let out = ppsl()
        .args(["validate", "--config", config])
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("6*mu <= delta^2"), "{stdout}");
}

#[test]
fn unknown_config_keys_fail_loudly() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    let base = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../configs/quick.toml"
    ))
    .unwrap();
    std::fs::write(&config, format!("{base}\n[extras]\nx = 1\n")).unwrap();
    let out = ppsl()
        .args(["validate", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("extras"), "{stderr}");
}
