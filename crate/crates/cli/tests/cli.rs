use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_csdf"))
        .args(args)
        .current_dir(dir)
        .env_remove("CSDF_THREADS")
        .output()
        .expect("csdf runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "csdf {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn help_exits_zero_everywhere() {
    let dir = tempfile::tempdir().unwrap();
    let commands: &[&[&str]] = &[
        &[],
        &["smooth"],
        &["sdf"],
        &["certify-mc"],
        &["render"],
        &["mesh"],
        &["eval"],
        &["eval", "psnr"],
        &["eval", "chamfer"],
        &["fit"],
        &["make-fixture"],
        &["make-fixture", "sphere"],
        &["make-fixture", "box"],
        &["make-fixture", "halfspace"],
        &["make-fixture", "scene"],
    ];
    for cmd in commands {
        let mut args = cmd.to_vec();
        args.push("--help");
        let out = run(dir.path(), &args);
        assert_eq!(out.status.code(), Some(0), "{args:?}");
        assert!(!out.stdout.is_empty(), "{args:?} printed no help");
    }
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["sdf", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).starts_with("error[usage]"));
    assert_eq!(run(dir.path(), &["--threads", "0", "make-fixture", "sphere", "-o", "a.grid"]).status.code(), Some(2));
}

#[test]
fn missing_input_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["sdf", "nowhere.grid", "--out", "x.grid"]);
    assert_eq!(out.status.code(), Some(3));
    let err = stderr(&out);
    assert!(err.starts_with("error[io]"), "{err}");
    assert!(err.contains("nowhere.grid"), "{err}");
    assert_eq!(err.lines().count(), 1);
}

#[test]
fn wrong_grid_kind_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["make-fixture", "sphere", "--dims", "16", "--out", "s.grid"]);
    let out = run(dir.path(), &["mesh", "s.grid", "--out", "m.obj"]);
    assert_eq!(out.status.code(), Some(6), "{}", stderr(&out));
}

#[test]
fn oversized_kernel_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["make-fixture", "sphere", "--dims", "8", "--out", "s.grid"]);
    let out = run(dir.path(), &["smooth", "s.grid", "--out", "f.grid", "--sigma", "20"]);
    assert_eq!(out.status.code(), Some(4), "{}", stderr(&out));
}

#[test]
fn sphere_to_mesh_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["make-fixture", "sphere", "--dims", "32", "--out", "s.grid"]);
    ok(d, &["sdf", "s.grid", "--out", "s.sdf.grid"]);
    ok(d, &["mesh", "s.sdf.grid", "--out", "s.obj"]);
    let obj = fs::read_to_string(d.join("s.obj")).unwrap();
    assert!(obj.lines().any(|l| l.starts_with("v ")));
    assert!(obj.lines().any(|l| l.starts_with("f ")));
    for artifact in ["s.grid", "s.sdf.grid", "s.obj"] {
        assert!(d.join(format!("{artifact}.manifest.txt")).is_file(), "{artifact}");
    }
    let manifest = fs::read_to_string(d.join("s.obj.manifest.txt")).unwrap();
    assert!(manifest.contains("command = mesh"));
    assert!(manifest.contains("sha256:"));
    assert!(manifest.contains("[config]"));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("run.toml"), "sigma = 2.0\ntruncation = 3.0\n").unwrap();
    ok(d, &["make-fixture", "sphere", "--dims", "16", "--out", "s.grid"]);
    ok(d, &["--config", "run.toml", "smooth", "s.grid", "--out", "a.grid"]);
    ok(d, &["--config", "run.toml", "smooth", "s.grid", "--out", "b.grid", "--sigma", "1.5"]);
    let a = fs::read_to_string(d.join("a.grid.manifest.txt")).unwrap();
    let b = fs::read_to_string(d.join("b.grid.manifest.txt")).unwrap();
    assert!(a.contains("sigma = 2\n"), "{a}");
    assert!(b.contains("sigma = 1.5\n"), "{b}");
    assert!(a.contains("truncation = 3\n") && b.contains("truncation = 3\n"));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("bad.toml"), "sigmaa = 2.0\n").unwrap();
    ok(d, &["make-fixture", "sphere", "--dims", "8", "--out", "s.grid"]);
    let out = run(d, &["--config", "bad.toml", "smooth", "s.grid", "--out", "a.grid"]);
    assert_eq!(out.status.code(), Some(4), "{}", stderr(&out));
    assert!(stderr(&out).contains("bad.toml"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["make-fixture", "box", "--dims", "24", "--out", "b.grid"]);
    ok(d, &["sdf", "b.grid", "--out", "one.grid"]);
    ok(d, &["sdf", "b.grid", "--out", "two.grid"]);
    assert_eq!(fs::read(d.join("one.grid")).unwrap(), fs::read(d.join("two.grid")).unwrap());
}
