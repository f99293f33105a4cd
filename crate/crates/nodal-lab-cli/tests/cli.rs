use std::path::PathBuf;
use std::process::Command;

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("nodal-lab-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn nodal_lab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nodal-lab"))
}

#[test]
fn passing_run_writes_both_files_and_exits_zero() {
    let dir = scratch("ok");
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, "# small run\nqmax = 2\ndmax = 3\n").unwrap();
    let stem = dir.join("ids");
    let status = nodal_lab()
        .args(["verify-identities", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&stem)
        .env("NODAL_LAB_THREADS", "2")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let json = std::fs::read_to_string(stem.with_extension("json")).unwrap();
    assert!(json.contains("\"qmax\": \"2\""));
    assert!(stem.with_extension("csv").exists());
}

#[test]
fn failing_check_exits_one() {
    let dir = scratch("fail");
    // a 0.1% tolerance is tighter than the gap between the two variance routes
    let status = nodal_lab()
        .args(["kacrice-crosscheck", "--ells", "10", "--tol", "0.001", "--out"])
        .arg(dir.join("kr"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn bad_config_exits_two() {
    let dir = scratch("bad");
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, "colour = red\n").unwrap();
    let status = nodal_lab()
        .args(["variance", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("v"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}
