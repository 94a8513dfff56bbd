use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = r#"
name = "tiny"
seed = 4
duration_s = 1.0

[zeno]
loops = 3
arms = [
    { label = "slow", expectation = 1.0 },
    { label = "fast", expectation = -1.0 },
]
"#;

const PASSING: &str = r#"
scenario = "tiny"

[[check]]
key = "slow.expectation"
value = 1.0
tolerance = 0.2

[[check]]
key = "fast.photons"
min = 100
"#;

const FAILING: &str = r#"
scenario = "tiny"

[[check]]
key = "slow.expectation"
value = -1.0
tolerance = 0.01
"#;

fn zenopm(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zenopm")).args(args).current_dir(dir).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn run_verify_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("tiny.toml"), TINY).unwrap();
    std::fs::write(d.join("pass.toml"), PASSING).unwrap();
    std::fs::write(d.join("fail.toml"), FAILING).unwrap();

    let run = zenopm(&["run", "tiny.toml", "--out", "run", "--seed", "5"], d);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    assert!(d.join("run/manifest.json").exists());
    assert!(d.join("run/arrivals_slow.csv").exists());

    let ok = zenopm(&["verify", "run/manifest.json", "pass.toml"], d);
    assert_eq!(code(&ok), 0, "{}", String::from_utf8_lossy(&ok.stdout));
    let bad = zenopm(&["verify", "run/manifest.json", "fail.toml"], d);
    assert_eq!(code(&bad), 1);
    assert!(String::from_utf8_lossy(&bad.stdout).contains("FAIL"));

    let plots = zenopm(&["emit-plots", "run", "--out", "plots"], d);
    assert_eq!(code(&plots), 0, "{}", String::from_utf8_lossy(&plots.stderr));
    assert!(d.join("plots/fig6_probabilities.csv").exists());

    std::fs::write(d.join("run/arrivals_fast.csv"), "pulse_index,arrival_ns\n").unwrap();
    assert_eq!(code(&zenopm(&["verify", "run/manifest.json", "pass.toml"], d)), 1);
}

#[test]
fn same_seed_reproduces_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("tiny.toml"), TINY).unwrap();
    assert_eq!(code(&zenopm(&["run", "tiny.toml", "--out", "a"], d)), 0);
    assert_eq!(code(&zenopm(&["run", "tiny.toml", "--out", "b"], d)), 0);
    let read = |p: &str| std::fs::read(d.join(p)).unwrap();
    assert_eq!(read("a/manifest.json"), read("b/manifest.json"));
    assert_eq!(read("a/arrivals_slow.csv"), read("b/arrivals_slow.csv"));
}

#[test]
fn sweep_writes_points() {
    let dir = tempfile::tempdir().unwrap();
    let out = zenopm(&["sweep", "--over", "loops", "--loops", "5", "--out", "s.csv"], dir.path());
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    assert_eq!(text.lines().count(), 6);
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("broken.toml"), "name = \"x\"\nduration_s = -1.0\n").unwrap();
    std::fs::write(d.join("typo.toml"), "name = \"x\"\nduraton_s = 1.0\n").unwrap();
    assert_eq!(code(&zenopm(&["run", "broken.toml"], d)), 2);
    assert_eq!(code(&zenopm(&["run", "typo.toml"], d)), 2);
    assert_eq!(code(&zenopm(&["run", "no_such_scenario"], d)), 2);
    assert_eq!(code(&zenopm(&["verify", "m.json", "no_such_expectations.toml"], d)), 2);
}

#[test]
fn missing_manifest_is_a_verification_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = zenopm(&["verify", "absent/manifest.json", "table2_8loops"], dir.path());
    assert_eq!(code(&out), 1);
}
