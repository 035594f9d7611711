//! Acceptance gate: one test per criterion, each printing its pass/fail
//! line. The census-backed criteria share one enumeration over all valid
//! instances with up to four slots, at most three strand crossings per gap
//! and at most one extra wrap.

use std::sync::OnceLock;
use std::time::Instant;

use reebext::gate::{
    self, CriterionResult, NESTED_SPHERES, SPHERE_MP, SPHERE_PM, TORUS, TORUS_SPHERE,
};
use reebext::search::CensusReport;

fn check(result: CriterionResult) {
    println!("{}", result.line());
    assert!(result.passed, "{}", result.line());
}

fn census_report() -> &'static (CriterionResult, CensusReport) {
    static REPORT: OnceLock<(CriterionResult, CensusReport)> = OnceLock::new();
    REPORT.get_or_init(|| gate::criterion_oracle_census(4))
}

#[test]
fn criterion_1_sphere_fixtures() {
    check(gate::criterion_sphere_fixtures());
}

#[test]
fn criterion_2_nested_spheres() {
    check(gate::criterion_nested_spheres());
}

#[test]
fn criterion_3_torus_with_sphere() {
    check(gate::criterion_torus_sphere());
}

#[test]
fn criterion_4_oracle_equivalence_census() {
    let start = Instant::now();
    let (result, report) = census_report();
    println!(
        "census: {} instances ({} extendable) available after {:?}",
        report.instances,
        report.extendable,
        start.elapsed()
    );
    check(result.clone());
    assert!(report.instances > 2000, "census unexpectedly small");
}

#[test]
fn criterion_5_matching_equals_flow() {
    let (_, report) = census_report();
    check(gate::criterion_matching_flow(report));
}

#[test]
fn criterion_6_invariant_suite() {
    let (_, report) = census_report();
    check(gate::criterion_invariants(report));
}

#[test]
fn criterion_7_linear_reduction() {
    let (_, report) = census_report();
    check(gate::criterion_linear_reduction(report));
}

#[test]
fn criterion_8_determinism() {
    check(gate::criterion_determinism());
}

#[test]
fn fixture_files_match_the_gate_constants() {
    for (path, text) in [
        ("fixtures/sphere_pm.txt", SPHERE_PM),
        ("fixtures/sphere_mp.txt", SPHERE_MP),
        ("fixtures/nested_spheres.txt", NESTED_SPHERES),
        ("fixtures/torus_sphere.txt", TORUS_SPHERE),
        ("fixtures/torus.txt", TORUS),
    ] {
        let on_disk =
            std::fs::read_to_string(std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join(path))
                .unwrap();
        assert_eq!(on_disk, text, "{path} drifted from the embedded fixture");
    }
}
