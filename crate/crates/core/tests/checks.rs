use ricci_lab::checks::{run_checks, CheckOptions, Fault};

const RANDOM_SUITES: [&str; 7] = [
    "curvature_oracle",
    "rhs_consistency",
    "variation",
    "flow_fleet",
    "scalar_bound",
    "width_rate",
    "certificate_soundness",
];

#[test]
fn flipped_mixed_curvature_sign_is_caught_by_the_oracle_only() {
    let clean = run_checks(&CheckOptions {
        flows: false,
        ..CheckOptions::default()
    });
    assert!(clean.all_passed(), "{}", clean.table());

    let faulty = run_checks(&CheckOptions {
        flows: false,
        fault: Fault::FlipKmixSign,
        ..CheckOptions::default()
    });
    let oracle = faulty.suite("curvature_oracle").unwrap();
    assert!(oracle.failures > 0, "{}", faulty.table());
    for s in faulty.suites.iter().filter(|s| s.name != "curvature_oracle") {
        assert!(s.passed(), "{} failed under the injected fault:\n{}", s.name, faulty.table());
    }
}

#[test]
fn another_seed_passes_every_suite() {
    let summary = run_checks(&CheckOptions {
        seed: 2,
        ..CheckOptions::default()
    });
    for name in RANDOM_SUITES {
        let s = summary.suite(name).unwrap_or_else(|| panic!("suite {name} missing"));
        assert!(s.cases > 0, "{name} checked nothing");
    }
    assert!(summary.all_passed(), "{}", summary.table());
}
