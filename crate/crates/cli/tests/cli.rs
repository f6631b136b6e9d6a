use std::process::Command;

use tempfile::TempDir;

fn run(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_newtonop")).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

#[test]
fn unknown_config_key_exits_with_config_code() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "widht = 3\n").unwrap();
    let out = dir.path().join("o");
    let (code, err) = run(&["solve", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.starts_with("error[config]"), "{err}");
}

#[test]
fn missing_dataset_exits_with_io_code() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let (code, err) = run(&[
        "train",
        "--data",
        d.join("absent.nods").to_str().unwrap(),
        "--out",
        d.join("o").to_str().unwrap(),
    ]);
    assert_eq!(code, 3);
    assert!(err.starts_with("error[io]"), "{err}");
}

#[test]
fn corrupt_checkpoint_is_an_io_error() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let model = d.join("junk.nonn");
    std::fs::write(&model, b"not a checkpoint").unwrap();
    let (code, _) = run(&["bench", "--model", model.to_str().unwrap(), "--out", d.join("o").to_str().unwrap()]);
    assert_eq!(code, 3);
}

#[test]
fn solve_then_gen_data_round_trip() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let cfg = d.join("small.cfg");
    std::fs::write(&cfg, "n = 31\nguesses = sine:-40:40:40\ncount = 4\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    let (code, err) = run(&["solve", "--config", cfg, "--out", d.join("s").to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let manifest = std::fs::read_to_string(d.join("s/manifest.txt")).unwrap();
    assert!(manifest.contains("command = solve"));
    assert!(d.join("s/solution_0.csv").exists());
    let data = d.join("x.nods");
    let (code, err) = run(&["gen-data", "--config", cfg, "--out", data.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let meta = std::fs::read_to_string(d.join("x.nods.meta")).unwrap();
    assert!(!meta.is_empty());
}
