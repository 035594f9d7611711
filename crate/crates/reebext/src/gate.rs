//! The release gate: every check the project must pass, as library
//! functions shared by the `selftest` subcommand and the acceptance test
//! suite. Each check returns a pass/fail result with a one-line detail.

use std::time::{Duration, Instant};

use crate::assembly::{audit_solution, build_trace, manifold_report};
use crate::cert::{make_certificate, parse_certificate, reverify, serialize_certificate};
use crate::collapse::{verify, CollapseConfig};
use crate::model::{parse_instance, LabeledReebGraph};
use crate::search::{census, decide, CensusReport, SearchLimits, Verdict};
use crate::symbol::SymbolTable;

pub const SPHERE_PM: &str = include_str!("../fixtures/sphere_pm.txt");
pub const SPHERE_MP: &str = include_str!("../fixtures/sphere_mp.txt");
pub const SPHERE_PP: &str = include_str!("../fixtures/sphere_pp.txt");
pub const SPHERE_MM: &str = include_str!("../fixtures/sphere_mm.txt");
pub const NESTED_SPHERES: &str = include_str!("../fixtures/nested_spheres.txt");
pub const TORUS_SPHERE: &str = include_str!("../fixtures/torus_sphere.txt");
pub const TORUS: &str = include_str!("../fixtures/torus.txt");

#[derive(Clone, Debug)]
pub struct CriterionResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CriterionResult {
    fn pass(name: &'static str, detail: impl Into<String>) -> CriterionResult {
        CriterionResult {
            name,
            passed: true,
            detail: detail.into(),
        }
    }

    fn fail(name: &'static str, detail: impl Into<String>) -> CriterionResult {
        CriterionResult {
            name,
            passed: false,
            detail: detail.into(),
        }
    }

    pub fn line(&self) -> String {
        format!(
            "criterion {}: {} ({})",
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.detail
        )
    }
}

fn fixture(text: &str) -> LabeledReebGraph {
    parse_instance(text).expect("fixtures parse")
}

fn timed_decide(
    graph: &LabeledReebGraph,
    table: &SymbolTable,
    limits: &SearchLimits,
) -> (Verdict, Duration) {
    let start = Instant::now();
    let (v, _) = decide(graph, table, limits).expect("fixtures are valid");
    (v, start.elapsed())
}

/// Sphere fixtures: verdicts, traces and Euler characteristics.
pub fn criterion_sphere_fixtures() -> CriterionResult {
    const NAME: &str = "1 sphere fixtures";
    let table = SymbolTable::shipped();
    let limits = SearchLimits::default();
    let budget = Duration::from_secs(1);

    let g = fixture(SPHERE_PM);
    let (v, t) = timed_decide(&g, &table, &limits);
    if t >= budget {
        return CriterionResult::fail(NAME, format!("sphere(+,-) took {t:?}"));
    }
    let Some(s) = v.solution() else {
        return CriterionResult::fail(NAME, "sphere(+,-) must extend");
    };
    let trace = build_trace(&g, &s.collapse);
    let parts: Vec<&str> = trace.steps.iter().map(|s| s.part).collect();
    if parts != ["MOD(M+)", "MOD(N-)"] {
        return CriterionResult::fail(NAME, format!("sphere(+,-) trace {parts:?}"));
    }
    match manifold_report(&g, &trace, &s.vgraph) {
        Ok(r) if r.chi == 1 => {}
        other => return CriterionResult::fail(NAME, format!("sphere(+,-) report {other:?}")),
    }

    let g = fixture(SPHERE_MP);
    let (v, t) = timed_decide(&g, &table, &limits);
    if t >= budget {
        return CriterionResult::fail(NAME, format!("sphere(-,+) took {t:?}"));
    }
    let Some(s) = v.solution() else {
        return CriterionResult::fail(NAME, "sphere(-,+) must extend");
    };
    let strand_free = s.vgraph.edges.iter().filter(|e| e.is_strand_free()).count();
    if strand_free != 1 {
        return CriterionResult::fail(
            NAME,
            format!("sphere(-,+) needs one strand-free arc, found {strand_free}"),
        );
    }
    let trace = build_trace(&g, &s.collapse);
    let parts: Vec<&str> = trace.steps.iter().map(|s| s.part).collect();
    if parts != ["MOD(M-)", "MOD(N+)"] || trace.close_pairs.len() != 1 {
        return CriterionResult::fail(NAME, format!("sphere(-,+) trace {parts:?}"));
    }
    match manifold_report(&g, &trace, &s.vgraph) {
        Ok(r) if r.chi == 1 => {}
        other => return CriterionResult::fail(NAME, format!("sphere(-,+) report {other:?}")),
    }

    for (text, label) in [(SPHERE_PP, "(+,+)"), (SPHERE_MM, "(-,-)")] {
        let g = fixture(text);
        let (v, t) = timed_decide(&g, &table, &limits);
        if t >= budget {
            return CriterionResult::fail(NAME, format!("sphere{label} took {t:?}"));
        }
        if !matches!(v, Verdict::NotExtendable { .. }) {
            return CriterionResult::fail(NAME, format!("sphere{label} must not extend"));
        }
    }
    CriterionResult::pass(NAME, "four labelings, traces and chi as expected")
}

/// Two nested spheres: a four-vertex path with all genus labels zero.
pub fn criterion_nested_spheres() -> CriterionResult {
    const NAME: &str = "2 nested spheres";
    let table = SymbolTable::shipped();
    let g = fixture(NESTED_SPHERES);
    let (v, t) = timed_decide(&g, &table, &SearchLimits::default());
    if t >= Duration::from_secs(1) {
        return CriterionResult::fail(NAME, format!("took {t:?}"));
    }
    let Some(s) = v.solution() else {
        return CriterionResult::fail(NAME, "must extend");
    };
    let symbols: Vec<String> = s
        .vgraph
        .vertices
        .iter()
        .map(|v| v.symbol.to_string())
        .collect();
    if symbols != ["M+", "M-", "N+", "N-"]
        || s.vgraph.edges.len() != 3
        || s.vgraph.component_count() != 1
    {
        return CriterionResult::fail(NAME, format!("quotient shape {symbols:?}"));
    }
    if !s.labeling.labels.values().all(|&g| g == 0) {
        return CriterionResult::fail(NAME, "genus labels must vanish");
    }
    let trace = build_trace(&g, &s.collapse);
    let mut parts: Vec<&str> = trace.steps.iter().map(|s| s.part).collect();
    parts.sort_unstable();
    if parts != ["MOD(M+)", "MOD(M-)", "MOD(N+)", "MOD(N-)"] {
        return CriterionResult::fail(NAME, format!("part census {parts:?}"));
    }
    CriterionResult::pass(NAME, "path quotient, zero genus, one part each")
}

/// Torus beside a sphere: extendable in permissive circle mode with half the
/// boundary characteristic.
pub fn criterion_torus_sphere() -> CriterionResult {
    const NAME: &str = "3 torus with sphere";
    let table = SymbolTable::shipped();
    let g = fixture(TORUS_SPHERE);
    let (v, t) = timed_decide(&g, &table, &SearchLimits::default());
    if t >= Duration::from_secs(1) {
        return CriterionResult::fail(NAME, format!("took {t:?}"));
    }
    let Some(s) = v.solution() else {
        return CriterionResult::fail(NAME, "must extend in permissive mode");
    };
    let trace = build_trace(&g, &s.collapse);
    match manifold_report(&g, &trace, &s.vgraph) {
        Ok(r) if r.chi == 1 => CriterionResult::pass(NAME, "extendable with chi(N) = 1"),
        other => CriterionResult::fail(NAME, format!("report {other:?}")),
    }
}

/// Census with the search against the oracle; returns the report for the
/// dependent criteria.
pub fn criterion_oracle_census(max_slots: usize) -> (CriterionResult, CensusReport) {
    const NAME: &str = "4 oracle equivalence";
    let table = SymbolTable::shipped();
    let limits = SearchLimits::default();
    let start = Instant::now();
    let report = census(max_slots, 1, 3, &table, &limits);
    let elapsed = start.elapsed();
    let result = if elapsed >= Duration::from_secs(600) {
        CriterionResult::fail(NAME, format!("census took {elapsed:?}"))
    } else if !report.oracle_disagreements.is_empty() {
        CriterionResult::fail(
            NAME,
            format!(
                "{} disagreements, first: {}",
                report.oracle_disagreements.len(),
                report.oracle_disagreements[0]
            ),
        )
    } else if report.inconclusive > 0 {
        CriterionResult::fail(NAME, format!("{} inconclusive", report.inconclusive))
    } else {
        CriterionResult::pass(
            NAME,
            format!(
                "{} instances, {} extendable, 0 disagreements in {elapsed:?}",
                report.instances, report.extendable
            ),
        )
    };
    (result, report)
}

/// Matching and flow must agree on every quotient graph the census visited.
pub fn criterion_matching_flow(report: &CensusReport) -> CriterionResult {
    const NAME: &str = "5 matching equals flow";
    if report.crosscheck_disagreements == 0 && report.crosscheck_candidates > 0 {
        CriterionResult::pass(
            NAME,
            format!(
                "agreement on {} closed collapses",
                report.crosscheck_candidates
            ),
        )
    } else {
        CriterionResult::fail(
            NAME,
            format!(
                "{} disagreements over {} candidates",
                report.crosscheck_disagreements, report.crosscheck_candidates
            ),
        )
    }
}

/// Certificate invariants on fixtures and the census: verification,
/// chi ledgers, manifold invariants and rotation invariance.
pub fn criterion_invariants(report: &CensusReport) -> CriterionResult {
    const NAME: &str = "6 invariant suite";
    if !report.certificate_failures.is_empty() {
        return CriterionResult::fail(
            NAME,
            format!(
                "{} certificate failures, first: {}",
                report.certificate_failures.len(),
                report.certificate_failures[0]
            ),
        );
    }
    if !report.rotation_disagreements.is_empty() {
        return CriterionResult::fail(
            NAME,
            format!(
                "{} rotation disagreements",
                report.rotation_disagreements.len()
            ),
        );
    }
    let table = SymbolTable::shipped();
    let limits = SearchLimits::default();
    for text in [SPHERE_PM, SPHERE_MP, NESTED_SPHERES, TORUS_SPHERE, TORUS] {
        let g = fixture(text);
        let (v, _) = decide(&g, &table, &limits).expect("fixtures are valid");
        let Some(s) = v.solution() else {
            return CriterionResult::fail(NAME, "fixture lost its witness");
        };
        let config = CollapseConfig::default();
        let issues = verify(&g, &table, &config, &s.collapse);
        if !issues.is_empty() {
            return CriterionResult::fail(NAME, issues.join("; "));
        }
        if let Err(e) = audit_solution(&g, &table, s) {
            return CriterionResult::fail(NAME, e);
        }
        let chi_m = g.surface_invariants().total_chi;
        let trace = build_trace(&g, &s.collapse);
        match manifold_report(&g, &trace, &s.vgraph) {
            Ok(r) if r.chi == chi_m / 2 => {}
            other => return CriterionResult::fail(NAME, format!("chi mismatch: {other:?}")),
        }
        for k in 1..g.slot_count.max(1) {
            let (vk, _) = decide(&g.rotated(k), &table, &limits).expect("rotations stay valid");
            if vk.name() != v.name() {
                return CriterionResult::fail(NAME, format!("rotation {k} changed the verdict"));
            }
        }
    }
    CriterionResult::pass(NAME, "all certificates audit clean, rotations stable")
}

/// Linear-sweep reduction on gaps no strand or token can cross.
pub fn criterion_linear_reduction(report: &CensusReport) -> CriterionResult {
    const NAME: &str = "7 linear reduction";
    if report.linear_disagreements.is_empty() && report.linear_checked > 0 {
        CriterionResult::pass(
            NAME,
            format!("{} linear sweeps agreed", report.linear_checked),
        )
    } else {
        CriterionResult::fail(
            NAME,
            format!(
                "{} disagreements over {} checks",
                report.linear_disagreements.len(),
                report.linear_checked
            ),
        )
    }
}

/// Certificates are byte-identical across repeated runs.
pub fn criterion_determinism() -> CriterionResult {
    const NAME: &str = "8 determinism";
    let table = SymbolTable::shipped();
    let limits = SearchLimits {
        deterministic: true,
        ..SearchLimits::default()
    };
    for text in [SPHERE_PM, SPHERE_MP, NESTED_SPHERES, TORUS_SPHERE, TORUS] {
        let g = fixture(text);
        let mut serialized = Vec::new();
        for _ in 0..2 {
            let (v, _) = decide(&g, &table, &limits).expect("fixtures are valid");
            let Some(s) = v.solution() else {
                return CriterionResult::fail(NAME, "fixture lost its witness");
            };
            let cert = make_certificate(&g, s);
            serialized.push(serialize_certificate(&cert));
        }
        if serialized[0] != serialized[1] {
            return CriterionResult::fail(NAME, "certificate bytes differ between runs");
        }
        let parsed = parse_certificate(&serialized[0], &table).expect("own certificates parse");
        if serialize_certificate(&parsed) != serialized[0] {
            return CriterionResult::fail(NAME, "round trip changed the bytes");
        }
        let issues = reverify(&parsed, &table, &CollapseConfig::default());
        if !issues.is_empty() {
            return CriterionResult::fail(NAME, issues.join("; "));
        }
    }
    CriterionResult::pass(NAME, "byte-identical certificates that re-verify")
}

/// Run the whole gate; `max_slots` bounds the census size.
pub fn run_all(max_slots: usize) -> Vec<CriterionResult> {
    let mut results = vec![
        criterion_sphere_fixtures(),
        criterion_nested_spheres(),
        criterion_torus_sphere(),
    ];
    let (census_result, report) = criterion_oracle_census(max_slots);
    results.push(census_result);
    results.push(criterion_matching_flow(&report));
    results.push(criterion_invariants(&report));
    results.push(criterion_linear_reduction(&report));
    results.push(criterion_determinism());
    results
}
