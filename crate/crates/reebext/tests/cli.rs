//! End-to-end runs of the command-line interface, exercising exit codes,
//! certificate files and rendering.

use std::fs;
use std::path::{Path, PathBuf};

use reebext::cli::run;

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn temp_path(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("reebext-cli-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn decide_exit_codes_follow_the_verdict() {
    assert_eq!(run(["reebext", "decide", &fixture("sphere_pm.txt")]), 0);
    assert_eq!(run(["reebext", "decide", &fixture("sphere_pp.txt")]), 1);
    assert_eq!(run(["reebext", "decide", &fixture("sphere_mm.txt")]), 1);
    assert_eq!(
        run([
            "reebext",
            "decide",
            &fixture("sphere_mp.txt"),
            "--max-states",
            "1"
        ]),
        2
    );
}

#[test]
fn oracle_agrees_on_the_fixtures() {
    assert_eq!(run(["reebext", "oracle", &fixture("sphere_mp.txt")]), 0);
    assert_eq!(run(["reebext", "oracle", &fixture("sphere_pp.txt")]), 1);
}

#[test]
fn validate_reports_diagnostics() {
    assert_eq!(run(["reebext", "validate", &fixture("torus.txt")]), 0);
    let bad = temp_path("degenerate.txt");
    fs::write(&bad, "slots 2\nvertex a slot=0 sign=+\nvertex b slot=1 sign=-\nedge e a -> b wraps=0\nedge f a -> b wraps=0\n").unwrap();
    assert_eq!(run(["reebext", "validate", bad.to_str().unwrap()]), 3);
    assert_eq!(run(["reebext", "validate", "/nonexistent/file"]), 4);
}

#[test]
fn certify_then_simulate_round_trips_through_files() {
    for name in [
        "sphere_pm.txt",
        "sphere_mp.txt",
        "nested_spheres.txt",
        "torus_sphere.txt",
        "torus.txt",
    ] {
        let cert = temp_path(&format!("{name}.cert"));
        let cert_str = cert.to_str().unwrap().to_string();
        assert_eq!(
            run([
                "reebext",
                "certify",
                &fixture(name),
                "--out",
                &cert_str,
                "--deterministic"
            ]),
            0,
            "certify {name}"
        );
        assert_eq!(
            run(["reebext", "simulate", &cert_str]),
            0,
            "simulate {name}"
        );

        // Byte-identical on a second run.
        let first = fs::read(&cert).unwrap();
        assert_eq!(
            run([
                "reebext",
                "certify",
                &fixture(name),
                "--out",
                &cert_str,
                "--deterministic"
            ]),
            0
        );
        assert_eq!(first, fs::read(&cert).unwrap(), "bytes differ for {name}");
    }
}

#[test]
fn certify_refuses_unextendable_instances() {
    let cert = temp_path("never.cert");
    assert_eq!(
        run([
            "reebext",
            "certify",
            &fixture("sphere_pp.txt"),
            "--out",
            cert.to_str().unwrap()
        ]),
        1
    );
    assert!(!cert.exists());
}

#[test]
fn render_emits_dot_for_all_views() {
    for what in ["wf", "v", "collapse"] {
        let out = temp_path(&format!("render-{what}.dot"));
        assert_eq!(
            run([
                "reebext",
                "render",
                &fixture("sphere_pm.txt"),
                "--what",
                what,
                "--out",
                out.to_str().unwrap()
            ]),
            0
        );
        let text = fs::read_to_string(&out).unwrap();
        assert!(text.starts_with("digraph"), "{what} output:\n{text}");
    }

    // Rendering the quotient of a certificate file works too.
    let cert = temp_path("render-input.cert");
    assert_eq!(
        run([
            "reebext",
            "certify",
            &fixture("torus_sphere.txt"),
            "--out",
            cert.to_str().unwrap()
        ]),
        0
    );
    assert_eq!(
        run([
            "reebext",
            "render",
            cert.to_str().unwrap(),
            "--what",
            "v",
            "--out",
            temp_path("render-cert.dot").to_str().unwrap()
        ]),
        0
    );
}

#[test]
fn render_v_fails_cleanly_without_a_witness() {
    assert_eq!(
        run([
            "reebext",
            "render",
            &fixture("sphere_pp.txt"),
            "--what",
            "v"
        ]),
        4
    );
}

#[test]
fn strict_circle_mode_changes_the_witness_not_the_verdict() {
    assert_eq!(
        run([
            "reebext",
            "decide",
            &fixture("torus_sphere.txt"),
            "--strict-circles"
        ]),
        0
    );
}

#[test]
fn census_subcommand_reports_clean() {
    assert_eq!(
        run([
            "reebext",
            "census",
            "--max-slots",
            "2",
            "--max-wraps",
            "1",
            "--max-per-gap",
            "3"
        ]),
        0
    );
}

#[test]
fn bad_flags_exit_above_two() {
    assert_eq!(run(["reebext", "decide"]), 4);
    assert_eq!(run(["reebext", "frobnicate"]), 4);
}
