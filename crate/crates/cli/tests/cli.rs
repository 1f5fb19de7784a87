use std::path::Path;
use std::process::{Command, Output};

fn bhtrace(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bhtrace"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .expect("failed to start bhtrace")
}

#[test]
fn gen_catalog_writes_requested_stars() {
    let dir = tempfile::tempdir().unwrap();
    let out = bhtrace(&["gen-catalog", "--count", "50", "--seed", "3", "--out", "stars.txt"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("stars.txt")).unwrap();
    let lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#')).count();
    assert_eq!(lines, 50);
}

#[test]
fn unknown_config_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("scene.cfg"), "width = 64\ncolour = red\n").unwrap();
    let out = bhtrace(&["render", "--config", "scene.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));
}

#[test]
fn flat_render_writes_png() {
    let dir = tempfile::tempdir().unwrap();
    let out = bhtrace(
        &[
            "render", "--flat", "--no-bloom", "--width", "32", "--height", "16", "--set", "stars=2000", "--set",
            "star_map_size=64", "--out", "sky.png",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let bytes = std::fs::read(dir.path().join("sky.png")).unwrap();
    assert_eq!(&bytes[..8], b"\x89PNG\r\n\x1a\n");
}

#[test]
fn strict_verify_fails_on_coarse_tables() {
    let dir = tempfile::tempdir().unwrap();
    let coarse = ["--epsilon", "1e-3", "--d-size", "32x32", "--u-size", "8x4", "--rays", "200"];
    let strict = bhtrace(&[&["verify", "--strict"][..], &coarse].concat(), dir.path());
    assert_eq!(strict.status.code(), Some(3), "{}", String::from_utf8_lossy(&strict.stdout));
    let lenient = bhtrace(&[&["verify"][..], &coarse].concat(), dir.path());
    assert!(lenient.status.success());
    assert!(String::from_utf8_lossy(&lenient.stdout).contains("max"));
}
