use std::path::Path;
use std::process::{Command, Output};

use graspset::fixture::write_fixture;

fn graspset(config: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_graspset"))
        .arg("--config")
        .arg(config)
        .args(args)
        .env_remove("GRASPSET_OUTPUT")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn full_run_over_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let info = write_fixture(dir.path()).unwrap();

    let o = graspset(&info.config, &["annotate", "--workers", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("20 grasps, 19 kept, 1 dropped, 0 failed"), "{}", stdout(&o));

    let o = graspset(&info.config, &["bounds"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 2);

    let o = graspset(&info.config, &["build", "--seed", "11"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("multi_grasp"));

    let kept = dir.path().join("out/annotate/kept.jsonl");
    let o = graspset(&info.config, &["eval", kept.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = stdout(&o);
    assert!(table.contains("Avg") && table.contains("allegro"), "{table}");

    let o = graspset(&info.config, &["stats"]);
    assert!(o.status.success());
    let lines: Vec<String> = stdout(&o).lines().map(str::to_string).collect();
    let counts: Vec<&str> = lines[1].split_whitespace().collect();
    assert_eq!(&counts[..3], ["2", "2", "19"]);
}

#[test]
fn missing_config_fails() {
    let o = graspset(Path::new("/nonexistent/graspset.toml"), &["stats"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("loading"));
}

#[test]
fn bounds_before_annotate_fails() {
    let dir = tempfile::tempdir().unwrap();
    let info = write_fixture(dir.path()).unwrap();
    let o = graspset(&info.config, &["bounds"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("run annotate first"));
}

#[test]
fn excessive_failures_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let info = write_fixture(dir.path()).unwrap();
    let grasps = dir.path().join("grasps.jsonl");
    let mut text = std::fs::read_to_string(&grasps).unwrap();
    for _ in 0..5 {
        text.push_str("garbage\n");
    }
    std::fs::write(&grasps, text).unwrap();
    let o = graspset(&info.config, &["annotate"]);
    assert_eq!(o.status.code(), Some(2));
}
