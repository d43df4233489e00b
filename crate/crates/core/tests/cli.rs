use std::fs;
use std::path::PathBuf;

use canard::cli::run;

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("canard-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    dir
}

fn canard(args: &[&str]) -> i32 {
    run(std::iter::once("canard").chain(args.iter().copied()))
}

#[test]
fn reduced_succeeds_on_the_bundled_example() {
    let out = scratch("reduced");
    let code = canard(&["reduced", "--config", "example_a3.cfg", "--svg", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("reduced.json")).unwrap()).unwrap();
    assert!((doc["result"]["sigma"].as_f64().unwrap() - 2.0935654096937264).abs() < 1e-8);
    // The effective config is echoed.
    assert_eq!(doc["config"]["system"]["params"]["a"].as_f64(), Some(3.0));
    let csv = fs::read_to_string(out.join("gamma_a.csv")).unwrap();
    assert!(csv.starts_with("t,x,y\n"));
    assert!(out.join("gamma_a.config.json").exists());
    assert!(fs::read_to_string(out.join("reduced.svg")).unwrap().starts_with("<svg"));
}

#[test]
fn missing_intersection_is_a_domain_error() {
    let out = scratch("nointersection");
    let code = canard(&["reduced", "--config", "example.cfg", "--param", "a=1.5", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 1);
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(canard(&["canard", "--config", "missing.cfg"]), 2);
    assert_eq!(canard(&["bogus"]), 2);
    assert_eq!(canard(&["reduced", "--param", "a"]), 2);
    assert_eq!(canard(&["reduced", "--epsilon", "-1"]), 2);
}

#[test]
fn malformed_config_file_is_a_usage_error() {
    let dir = scratch("badcfg");
    fs::create_dir_all(&dir).unwrap();
    let path = dir.join("bad.cfg");
    fs::write(&path, r#"{"numerics": {"epsilon": "small"}}"#).unwrap();
    assert_eq!(canard(&["check", "--config", path.to_str().unwrap()]), 2);
}

#[test]
fn identical_runs_write_identical_files() {
    let (a, b) = (scratch("det-a"), scratch("det-b"));
    for dir in [&a, &b] {
        let d = dir.to_str().unwrap();
        assert_eq!(canard(&["reduced", "--out", d]), 0);
        assert_eq!(canard(&["sweep-a", "--values", "1.5,3", "--out", d]), 0);
        assert_eq!(canard(&["simulate", "--initial", "-1,0.5,0.2", "--t0", "0", "--t1", "2", "--out", d]), 0);
    }
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 10);
    for name in names {
        let (x, y) = (fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap());
        // Output paths differ only through the echoed config.
        let norm = |bytes: Vec<u8>, dir: &PathBuf| String::from_utf8(bytes).unwrap().replace(dir.to_str().unwrap(), "OUT");
        assert_eq!(norm(x, &a), norm(y, &b), "{name:?} differs");
    }
}

#[test]
fn map_writes_the_documented_columns() {
    let out = scratch("map");
    let code = canard(&["map", "--n-per-side", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    let csv = fs::read_to_string(out.join("map.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("u0,v0,s_eps,case,x_img,y_img,u_img,v_img"));
    assert_eq!(lines.count(), 4);
}

#[test]
fn wrong_vector_lengths_are_usage_errors() {
    assert_eq!(canard(&["simulate", "--initial", "-1,0.5"]), 2);
    assert_eq!(canard(&["sweep-a", "--bracket", "1.5"]), 2);
}
